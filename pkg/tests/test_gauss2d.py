import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mmattn.gauss2d import (
    Gaussian2,
    NotPositiveDefinite,
    Spd2,
    log_pdf,
    log_pdf_batch,
    pdf,
    product_integral,
    product_integral_batch,
    product_integral_grad,
)

from conftest import central_difference, column_close, scalar_gauss_pdf, trapezoid_weights

STD = Gaussian2((0.0, 0.0), Spd2.isotropic(1.0))


def random_gaussian(rng, var_lo=0.002, var_hi=0.05):
    eig = np.exp(rng.uniform(np.log(var_lo), np.log(var_hi), 2))
    t = rng.uniform(0, np.pi)
    rot = np.array([[np.cos(t), -np.sin(t)], [np.sin(t), np.cos(t)]])
    cov = rot @ np.diag(eig) @ rot.T
    return Gaussian2(rng.uniform(0, 1, 2), Spd2(cov[0, 0], cov[0, 1], cov[1, 1]))


class TestSpd2:
    def test_accepts_spd(self):
        s = Spd2(2.0, 0.5, 1.0)
        assert s.det == pytest.approx(1.75)
        np.testing.assert_allclose(s.inv().matrix @ s.matrix, np.eye(2), atol=1e-15)

    @pytest.mark.parametrize("abc", [(1, 1, 1), (1, 2, 1), (0, 0, 1), (-1, 0, -1), (1, 0, 0), (float("nan"), 0, 1)])
    def test_rejects_non_spd(self, abc):
        with pytest.raises(NotPositiveDefinite):
            Spd2(*abc)

    @given(
        st.floats(-1e3, 1e3, allow_nan=False),
        st.floats(-1e3, 1e3, allow_nan=False),
        st.floats(-1e3, 1e3, allow_nan=False),
    )
    def test_rejects_every_nonpositive_determinant(self, a, b, c):
        if a * c - b * b <= 0:
            with pytest.raises(NotPositiveDefinite):
                Spd2(a, b, c)

    def test_asymmetric_matrix_rejected(self):
        with pytest.raises(NotPositiveDefinite):
            Spd2.from_matrix([[1.0, 0.1], [0.2, 1.0]])


class TestPdf:
    def test_standard_normal_at_mean(self):
        assert pdf(STD, (0, 0)) == pytest.approx(1 / (2 * math.pi), rel=1e-15)
        assert pdf(STD, (0, 0)) == pytest.approx(0.1591549, abs=1e-7)

    def test_unit_mahalanobis(self):
        assert pdf(STD, (1, 0)) == pytest.approx(math.exp(-0.5) / (2 * math.pi), rel=1e-15)
        assert pdf(STD, (1, 0)) == pytest.approx(0.0965324, abs=1e-7)

    def test_correlated_matches_scalar_formula(self):
        cov = [[0.02, 0.005], [0.005, 0.01]]
        g = Gaussian2((0.3, 0.7), Spd2.from_matrix(cov))
        assert pdf(g, (0.35, 0.65)) == pytest.approx(scalar_gauss_pdf((0.3, 0.7), cov, (0.35, 0.65)), rel=1e-14)

    def test_vectorized_points(self, rng):
        g = random_gaussian(rng)
        x = rng.uniform(0, 1, (50, 2))
        expected = [scalar_gauss_pdf(g.mean, g.cov.matrix, xi) for xi in x]
        np.testing.assert_allclose(pdf(g, x), expected, rtol=1e-13)

    def test_integrates_to_one(self, rng):
        for _ in range(5):
            g = random_gaussian(rng)
            sd = math.sqrt(max(g.cov.a, g.cov.c))
            gu, wu = trapezoid_weights(g.mean[0] - 8 * sd, g.mean[0] + 8 * sd, 801)
            gv, wv = trapezoid_weights(g.mean[1] - 8 * sd, g.mean[1] + 8 * sd, 801)
            uu, vv = np.meshgrid(gu, gv, indexing="ij")
            vals = pdf(g, np.stack([uu, vv], -1))
            assert np.all(vals > 0)
            assert abs(wu @ vals @ wv - 1) < 1e-6


class TestLogPdf:
    def test_standard_normal_at_mean(self):
        assert log_pdf(STD, (0, 0)) == pytest.approx(-math.log(2 * math.pi), rel=1e-15)
        assert log_pdf(STD, (0, 0)) == pytest.approx(-1.837877, abs=1e-6)

    def test_far_tail_has_no_underflow(self):
        assert log_pdf(STD, (100, 0)) == pytest.approx(-math.log(2 * math.pi) - 5000, rel=1e-15)
        assert pdf(STD, (100, 0)) == 0.0

    def test_agrees_with_log_of_pdf(self, rng):
        for _ in range(200):
            g = random_gaussian(rng)
            x = rng.uniform(-0.2, 1.2, 2)
            p = pdf(g, x)
            if p > 1e-300:
                assert abs(log_pdf(g, x) - math.log(p)) < 1e-12

    def test_batch_matches_scalar(self, rng):
        gs = [random_gaussian(rng) for _ in range(4)]
        x = rng.uniform(0, 1, (30, 2))
        batch = log_pdf_batch(np.array([g.mean for g in gs]), np.array([g.cov.matrix for g in gs]), x)
        for k, g in enumerate(gs):
            np.testing.assert_allclose(batch[:, k], log_pdf(g, x), rtol=1e-14)


class TestProductIntegral:
    def test_symmetric_half_identity(self):
        g = Gaussian2((0, 0), Spd2.isotropic(0.5))
        assert product_integral(g, g) == pytest.approx(1 / (2 * math.pi), rel=1e-15)

    def test_shifted_unit(self):
        g2 = Gaussian2((3, 0), Spd2.isotropic(1.0))
        assert product_integral(STD, g2) == pytest.approx(math.exp(-9 / 4) / (4 * math.pi), rel=1e-14)

    def test_matches_quadrature(self, rng):
        g, w = trapezoid_weights(-1.0, 2.0, 600)
        uu, vv = np.meshgrid(g, g, indexing="ij")
        pts = np.stack([uu, vv], -1)
        for _ in range(5):
            g1, g2 = random_gaussian(rng), random_gaussian(rng)
            quad = w @ (pdf(g1, pts) * pdf(g2, pts)) @ w
            assert product_integral(g1, g2) == pytest.approx(quad, rel=1e-4)

    def test_symmetry_is_exact(self, rng):
        for _ in range(500):
            g1, g2 = random_gaussian(rng), random_gaussian(rng)
            assert product_integral(g1, g2) == product_integral(g2, g1)

    def test_batch_table(self, rng):
        a = [random_gaussian(rng) for _ in range(3)]
        b = [random_gaussian(rng) for _ in range(5)]
        table = product_integral_batch(
            np.array([g.mean for g in a]), np.array([g.cov.matrix for g in a]),
            np.array([g.mean for g in b]), np.array([g.cov.matrix for g in b]),
        )
        for i, gi in enumerate(a):
            for j, gj in enumerate(b):
                assert table[i, j] == pytest.approx(product_integral(gi, gj), rel=1e-14)


def _pi_from_params(theta, g2):
    """product_integral as a function of g1's (mu_u, mu_v, a, b, c)."""
    return product_integral(Gaussian2(theta[:2], Spd2(*theta[2:])), g2)


class TestProductIntegralGrad:
    def test_equal_means_zero_mean_gradient(self, rng):
        g1 = random_gaussian(rng)
        g2 = Gaussian2(g1.mean, random_gaussian(rng).cov)
        dmean, _ = product_integral_grad(g1, g2)
        np.testing.assert_array_equal(dmean, [0.0, 0.0])

    def test_equal_means_identity_sum(self):
        g1 = Gaussian2((0.2, 0.4), Spd2(0.6, 0.1, 0.5))
        g2 = Gaussian2((0.2, 0.4), Spd2(0.4, -0.1, 0.5))
        r = product_integral(g1, g2)
        _, dcov = product_integral_grad(g1, g2)
        np.testing.assert_allclose(dcov, -0.5 * r * np.eye(2), atol=1e-16)

    def test_symmetric_output(self, rng):
        _, dcov = product_integral_grad(random_gaussian(rng), random_gaussian(rng))
        assert dcov[0, 1] == dcov[1, 0]

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(99)
        # a fixed 1e-5 step truncates badly once Sigma1+Sigma2 drops toward 0.01
        # with the means several sigma apart, so instances stay in that regime
        for _ in range(1000):
            g1 = random_gaussian(rng, 0.01, 0.1)
            g2 = random_gaussian(rng, 0.01, 0.1)
            dmean, dcov = product_integral_grad(g1, g2)
            analytic = np.array([dmean[0], dmean[1], dcov[0, 0], 2 * dcov[0, 1], dcov[1, 1]])
            theta = np.array([*g1.mean, g1.cov.a, g1.cov.b, g1.cov.c])
            fd = central_difference(lambda t: _pi_from_params(t, g2), theta, h=1e-5)[0]
            # each block (mean, cov) is judged against its own scale
            ok_mean = column_close(analytic[:2, None], fd[:2, None])
            ok_cov = column_close(analytic[2:, None], fd[2:, None])
            assert ok_mean.all() and ok_cov.all(), (analytic, fd)
