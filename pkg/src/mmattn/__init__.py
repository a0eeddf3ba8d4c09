"""Multimodal continuous attention with Gaussian mixtures.

Fits mixture attention densities to weighted grid observations with weighted
EM, chooses the number of components with a linear penalty, and computes
closed-form context vectors (and their gradients) over a Gaussian RBF feature
function.
"""
from .attention import (
    AttentionGradients,
    ContextVector,
    discrete_context,
    moment_match,
    multimodal_backward,
    multimodal_context,
    softmax_weights,
    unimodal_context,
)
from .basis import (
    FeatureFunction,
    FeatureGrid,
    RBFBasis,
    cell_centers,
    eval_feature,
    eval_psi,
    fit_ridge,
    make_grid_basis,
)
from .em import (
    ComponentCollapse,
    EMReport,
    MixtureParams,
    WeightedDataset,
    e_step,
    init_params,
    m_step,
    run_em,
    run_em_restarts,
    weighted_loglik,
)
from .evaluate import DensityGrid, compare_models, discretize, js_divergence
from .gauss2d import Gaussian2, Spd2, log_pdf, pdf, product_integral, product_integral_grad
from .selection import SelectionConfig, SelectionReport, criterion, select_k

__version__ = "0.1.0"
