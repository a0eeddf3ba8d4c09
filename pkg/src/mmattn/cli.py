"""Command-line entry point: ``mmattn {fit,select,forward,render,compare,demo}``.

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import __version__
from .attention import moment_match, multimodal_backward, multimodal_context
from .basis import FeatureGrid, SingularSystem, fit_ridge, make_grid_basis
from .em import ComponentCollapse, MixtureParams, WeightedDataset, run_em_restarts
from .evaluate import DensityGrid, GridMismatch, compare_models, discretize
from .io import (
    InputError,
    density_csv,
    dumps,
    pgm_bytes,
    read_density_csv,
    read_features,
    read_mixture,
    read_weights,
    write_features_csv,
)
from .selection import SelectionConfig, SelectionFailed, sample_train_k, select_k
from .synthetic import feature_grid, separated_blobs

EXIT_INPUT = 2
EXIT_NUMERIC = 3


@dataclass(frozen=True)
class RunConfig:
    basis_side: int = 10
    basis_var: float = 0.001
    ridge: float = 0.01
    lam: float = 5.0
    k_max: int = 4
    iters: int = 10
    restarts: int = 3
    seed: int = 0
    height: int = 32
    width: int = 32
    k: int | None = None

    def selection(self) -> SelectionConfig:
        return SelectionConfig(k_max=self.k_max, lam=self.lam, restarts=self.restarts, max_iters=self.iters, base_seed=self.seed)


# config-file keys accepted in addition to field names
_ALIASES = {"lambda": "lam", "k-max": "k_max", "basis-side": "basis_side", "basis-var": "basis_var"}


def load_config(path, overrides: dict) -> RunConfig:
    """Merge a JSON config file with flag overrides (flags win)."""
    values = {}
    if path is not None:
        try:
            obj = json.loads(Path(path).read_text())
        except (OSError, UnicodeDecodeError, json.JSONDecodeError, RecursionError) as exc:
            raise InputError(f"config {path}: {exc}") from None
        if not isinstance(obj, dict):
            raise InputError(f"config {path}: expected a JSON object")
        known = {f.name for f in fields(RunConfig)}
        for key, val in obj.items():
            name = _ALIASES.get(key, key)
            if name not in known:
                raise InputError(f"config {path}: unknown key {key!r}")
            values[name] = val
    values.update({k: v for k, v in overrides.items() if v is not None})
    cfg = RunConfig(**values)
    for f in fields(RunConfig):
        val = getattr(cfg, f.name)
        if val is None:
            continue
        if f.name in ("basis_var", "ridge", "lam"):
            if isinstance(val, bool) or not isinstance(val, (int, float)) or not val > 0:
                raise InputError(f"{f.name} must be a positive number")
        elif isinstance(val, bool) or not isinstance(val, int) or (f.name != "seed" and val < 1):
            raise InputError(f"{f.name} must be a positive integer")
    return cfg


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _emit(text: str | bytes, out) -> None:
    if out is None:
        sys.stdout.write(text if isinstance(text, str) else text.decode("latin-1"))
        return
    try:
        Path(out).write_bytes(text.encode() if isinstance(text, str) else text)
    except OSError as exc:
        raise InputError(f"cannot write {out}: {exc}") from None


# ---------------------------------------------------------------------------
# subcommand bodies (also used by the demo)


def fit_bundle(data: WeightedDataset, cfg: RunConfig, inputs: dict) -> dict:
    bundle = {
        "tool": "mmattn",
        "version": __version__,
        "provenance": {"inputs": inputs, "config": asdict(cfg), "seed": cfg.seed},
    }
    if cfg.k is not None:
        rep = run_em_restarts(data, cfg.k, cfg.restarts, cfg.iters, seed=cfg.seed, tol=None)
        bundle.update(chosen_k=cfg.k, mixture=rep.params.to_dict(), selection=None, loglik=rep.loglik)
    else:
        report = select_k(data, cfg.selection())
        bundle.update(chosen_k=report.chosen_k, mixture=report.chosen_params.to_dict(), selection=report.to_dict())
    return bundle


def forward_result(grid: FeatureGrid, mixture: MixtureParams, cfg: RunConfig, upstream=None) -> dict:
    f = fit_ridge(grid, make_grid_basis(cfg.basis_side, cfg.basis_var), cfg.ridge)
    ctx = multimodal_context(f, mixture)
    up = np.zeros(f.dim) if upstream is None else np.asarray(upstream, dtype=float)
    if up.shape != (f.dim,):
        raise InputError(f"upstream gradient has length {up.size}, feature dimension is {f.dim}")
    grads = multimodal_backward(f, mixture, up)
    out = {"dim": f.dim, "n_components": mixture.n_components, **ctx.to_dict()}
    out["jacobians"] = {"d_mean": grads.d_mean, "d_cov_abc": grads.d_cov, "d_pi": grads.d_pi}
    if upstream is not None:
        out["vjp"] = {"mean": grads.grad_mean, "cov_abc": grads.grad_cov, "pi": grads.grad_pi}
    return out


def compare_table(reference: DensityGrid, candidates) -> list[dict]:
    ranked = compare_models(reference, candidates)
    return [{"rank": i + 1, "name": name, "js": js} for i, (name, js) in enumerate(ranked)]


# ---------------------------------------------------------------------------
# commands


def cmd_fit(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    data = read_weights(args.weights)
    inputs = {"weights": {"name": Path(args.weights).name, "sha256": _sha256(args.weights)}}
    _emit(dumps(fit_bundle(data, cfg, inputs)), args.out)
    return 0


def cmd_select(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    report = select_k(read_weights(args.weights), cfg.selection())
    _emit(dumps(report.to_dict()), args.out)
    return 0


def cmd_forward(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    grid = read_features(args.features)
    mixture = read_mixture(args.mixture)
    upstream = None
    if args.upstream is not None:
        try:
            upstream = [float(v) for v in json.loads(Path(args.upstream).read_text())]
        except (OSError, UnicodeDecodeError, ValueError, TypeError, RecursionError) as exc:
            raise InputError(f"{args.upstream}: upstream must be a JSON array of numbers ({exc})") from None
    _emit(dumps(forward_result(grid, mixture, cfg, upstream)), args.out)
    return 0


def cmd_render(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    grid = discretize(read_mixture(args.mixture), cfg.height, cfg.width)
    fmt = args.format or ("csv" if str(args.out).endswith(".csv") else "pgm")
    _emit(density_csv(grid) if fmt == "csv" else pgm_bytes(grid), args.out)
    return 0


def cmd_compare(args) -> int:
    if not args.candidates:
        raise InputError("compare needs at least one candidate grid\nusage: mmattn compare REFERENCE CANDIDATE [CANDIDATE ...]")
    reference = read_density_csv(args.reference)
    candidates = [(path, read_density_csv(path)) for path in args.candidates]
    table = compare_table(reference, candidates)
    if args.format == "tsv":
        text = "rank\tname\tjs\n" + "".join(f"{r['rank']}\t{r['name']}\t{r['js']:.17g}\n" for r in table)
    else:
        text = dumps({"reference": args.reference, "ranking": table})
    _emit(text, args.out)
    return 0


def run_demo(out_dir, cfg: RunConfig, trials: int = 5, train_time_k: bool = False) -> dict:
    """Synthetic end-to-end run: fixtures, fits, contexts, renders, comparisons, K recovery."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(cfg.seed)
    h, w = cfg.height, cfg.width

    features = feature_grid(rng, h, w, dim=8)
    write_features_csv(out / "features.csv", features)
    ridge_fn = fit_ridge(features, make_grid_basis(cfg.basis_side, cfg.basis_var), cfg.ridge)

    cases = []
    for n_blobs in range(1, cfg.k_max + 1):
        tag = f"blobs{n_blobs}"
        clean, truth = separated_blobs(rng, n_blobs, side=h, width=w)
        noisy = clean.weights * np.exp(0.3 * rng.standard_normal(len(clean)))
        data = WeightedDataset(clean.locations, noisy)
        weights_map = data.weights.reshape(h, w)
        (out / f"{tag}_weights.json").write_text(
            dumps({"height": h, "width": w, "weights": weights_map.ravel()})
        )
        if train_time_k:
            k = sample_train_k(rng, cfg.k_max)
            run_cfg = RunConfig(**{**asdict(cfg), "k": k})
        else:
            run_cfg = cfg
        bundle = fit_bundle(
            data, run_cfg, {"weights": {"name": f"{tag}_weights.json", "sha256": _sha256(out / f"{tag}_weights.json")}}
        )
        (out / f"{tag}_fit.json").write_text(dumps(bundle))
        mixture = MixtureParams.from_dict(bundle["mixture"])
        (out / f"{tag}_mixture.json").write_text(dumps(bundle["mixture"]))
        (out / f"{tag}_context.json").write_text(dumps(forward_result(features, mixture, cfg)))

        multimodal = discretize(mixture, h, w)
        unimodal = discretize(MixtureParams.from_components([(1.0, moment_match(data))]), h, w)
        discrete = DensityGrid(weights_map)
        (out / f"{tag}_multimodal.pgm").write_bytes(pgm_bytes(multimodal))
        (out / f"{tag}_multimodal.csv").write_text(density_csv(multimodal))
        reference = discretize(truth, h, w)
        (out / f"{tag}_reference.csv").write_text(density_csv(reference))
        table = compare_table(reference, [("multimodal", multimodal), ("unimodal", unimodal), ("discrete", discrete)])
        (out / f"{tag}_compare.json").write_text(dumps(table))
        cases.append({"case": tag, "chosen_k": bundle["chosen_k"], "ranking": table})

    recovery = k_recovery(trials, cfg, seed=cfg.seed)
    lines = ["true_k\ttrials\trecovered\trate"]
    lines += [f"{r['true_k']}\t{r['trials']}\t{r['recovered']}\t{r['rate']:.17g}" for r in recovery]
    (out / "recovery.tsv").write_text("\n".join(lines) + "\n")
    summary = {
        "tool": "mmattn",
        "version": __version__,
        "config": asdict(cfg),
        "trials_per_k": trials,
        "train_time_k": train_time_k,
        "feature_dim": ridge_fn.dim,
        "cases": cases,
        "recovery": recovery,
    }
    (out / "summary.json").write_text(dumps(summary))
    return summary


def k_recovery(trials: int, cfg: RunConfig, seed: int = 0) -> list[dict]:
    """How often model selection recovers the generating K of well-separated blob maps."""
    rows = []
    for true_k in range(1, cfg.k_max + 1):
        chosen = []
        for t in range(trials):
            data, _ = separated_blobs(np.random.default_rng([seed, true_k, t]), true_k)
            sel = SelectionConfig(k_max=cfg.k_max, lam=cfg.lam, restarts=cfg.restarts, max_iters=cfg.iters, base_seed=t)
            chosen.append(select_k(data, sel).chosen_k)
        hits = sum(c == true_k for c in chosen)
        counts = {str(k): chosen.count(k) for k in range(1, cfg.k_max + 1)}
        rows.append({"true_k": true_k, "trials": trials, "recovered": hits, "rate": hits / max(trials, 1), "chosen_counts": counts})
    return rows


def cmd_demo(args) -> int:
    cfg = load_config(args.config, _overrides(args))
    run_demo(args.out, cfg, trials=args.trials, train_time_k=args.train_time_k)
    return 0


# ---------------------------------------------------------------------------


def _overrides(args) -> dict:
    keys = ("basis_side", "basis_var", "ridge", "lam", "k_max", "iters", "restarts", "seed", "height", "width", "k")
    return {k: getattr(args, k, None) for k in keys}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmattn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mmattn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *groups):
        p.add_argument("--config", help="JSON file with default settings; flags take precedence")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--seed", type=int)
        if "em" in groups:
            p.add_argument("--lambda", dest="lam", type=float, help="penalty per component (default 5)")
            p.add_argument("--k", type=int, help="fit exactly this many components, skipping selection")
            p.add_argument("--k-max", dest="k_max", type=int, help="largest number of components (default 4)")
            p.add_argument("--restarts", type=int, help="random initializations per k (default 3)")
            p.add_argument("--iters", type=int, help="EM iterations (default 10)")
        if "basis" in groups:
            p.add_argument("--ridge", type=float, help="ridge penalty (default 0.01)")
            p.add_argument("--basis-side", dest="basis_side", type=int, help="RBF lattice side (default 10)")
            p.add_argument("--basis-var", dest="basis_var", type=float, help="RBF variance (default 0.001)")
        if "grid" in groups:
            p.add_argument("--height", type=int, help="grid rows (default 32)")
            p.add_argument("--width", type=int, help="grid columns (default 32)")

    p = sub.add_parser("fit", help="fit a mixture attention density to a weight map")
    p.add_argument("weights", help="weights CSV (u,v,w) or JSON grid")
    common(p, "em")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("select", help="per-k fits and the penalized criterion for a weight map")
    p.add_argument("weights", help="weights CSV (u,v,w) or JSON grid")
    common(p, "em")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("forward", help="context vector and Jacobians for a mixture over a feature grid")
    p.add_argument("features", help="features CSV (u,v,f1..fD) or JSON descriptor")
    p.add_argument("mixture", help="mixture JSON")
    p.add_argument("--upstream", help="JSON array: upstream gradient to contract the Jacobians with")
    common(p, "basis")
    p.set_defaults(func=cmd_forward)

    p = sub.add_parser("render", help="discretize a mixture to a PGM image or CSV grid")
    p.add_argument("mixture", help="mixture JSON")
    p.add_argument("--format", choices=("pgm", "csv"))
    common(p, "grid")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("compare", help="rank density grids by JS divergence from a reference")
    p.add_argument("reference", help="reference density CSV")
    p.add_argument("candidates", nargs="*", help="candidate density CSVs")
    p.add_argument("--format", choices=("json", "tsv"), default="json")
    common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("demo", help="synthetic end-to-end run")
    p.add_argument("--trials", type=int, default=5, help="K-recovery trials per true K (default 5)")
    p.add_argument("--train-time-k", action="store_true", help="draw K uniformly instead of selecting it")
    common(p, "em", "basis", "grid")
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else 0
    if args.command == "demo" and args.out is None:
        args.out = "demo_out"
    try:
        return args.func(args)
    except (InputError, GridMismatch) as exc:
        print(f"mmattn {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ComponentCollapse, SelectionFailed, SingularSystem) as exc:
        print(f"mmattn {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, OSError) as exc:
        print(f"mmattn {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
