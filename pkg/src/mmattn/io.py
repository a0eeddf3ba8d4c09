"""File formats: weight maps, feature grids, mixtures, density grids and PGM output.

Every reader raises :class:`InputError` for any malformed input.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .basis import FeatureGrid, cell_centers
from .em import MixtureParams, WeightedDataset
from .evaluate import DensityGrid

_PARSE_ERRORS = (ValueError, TypeError, KeyError, IndexError, OverflowError, RecursionError, AttributeError)


class InputError(ValueError):
    pass


def _read_text(path) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def _numeric_rows(text: str, min_cols: int) -> np.ndarray:
    """Rows of a comma-separated table; a non-numeric first row is a header."""
    try:
        rows = [r for r in csv.reader(text.splitlines()) if r and any(c.strip() for c in r)]
    except csv.Error as exc:
        raise InputError(f"unreadable table: {exc}") from None
    if rows:
        try:
            [float(c) for c in rows[0]]
        except ValueError:
            rows = rows[1:]
    if not rows:
        raise InputError("no data rows")
    width = len(rows[0])
    if width < min_cols:
        raise InputError(f"expected at least {min_cols} columns, got {width}")
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise InputError(f"row {i + 1} has {len(row)} columns, expected {width}")
        try:
            out[i] = [float(c) for c in row]
        except ValueError as exc:
            raise InputError(f"row {i + 1}: {exc}") from None
    if not np.all(np.isfinite(out)):
        raise InputError("non-finite value in table")
    return out


def _load_json(text: str):
    try:
        return json.loads(text)
    except (json.JSONDecodeError, RecursionError) as exc:
        raise InputError(f"invalid JSON: {exc}") from None


def _dims(obj, *keys) -> list[int]:
    out = []
    for key in keys:
        val = obj[key]
        if isinstance(val, bool) or not isinstance(val, int) or val < 1:
            raise InputError(f"{key!r} must be a positive integer")
        out.append(val)
    return out


# ---------------------------------------------------------------------------
# weights


def parse_weights(text: str) -> WeightedDataset:
    """Weights as CSV rows ``u,v,w`` or JSON ``{"height", "width", "weights"}`` (row-major)."""
    try:
        if text.lstrip().startswith("{"):
            obj = _load_json(text)
            if not isinstance(obj, dict):
                raise InputError("weights JSON must be an object")
            h, w = _dims(obj, "height", "width")
            vals = np.asarray(obj["weights"], dtype=float)
            if vals.size != h * w:
                raise InputError(f"expected {h * w} weights, got {vals.size}")
            return WeightedDataset.from_grid(vals.reshape(h, w))
        table = _numeric_rows(text, 3)
        if table.shape[1] != 3:
            raise InputError(f"weights CSV needs exactly 3 columns (u, v, w), got {table.shape[1]}")
        return WeightedDataset(table[:, :2], table[:, 2])
    except InputError:
        raise
    except _PARSE_ERRORS as exc:
        raise InputError(f"invalid weights: {exc}") from None


def read_weights(path) -> WeightedDataset:
    try:
        return parse_weights(_read_text(path))
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# features


def parse_features_csv(text: str) -> FeatureGrid:
    """Rows ``u,v,f1,...,fD``."""
    try:
        table = _numeric_rows(text, 3)
        return FeatureGrid(table[:, :2], table[:, 2:].T)
    except InputError:
        raise
    except _PARSE_ERRORS as exc:
        raise InputError(f"invalid features: {exc}") from None


def parse_features_descriptor(text: str, base_dir=".") -> FeatureGrid:
    """JSON ``{"height": H, "width": W, "dim": D, "payload": path}``.

    The payload is ``.npy`` (array of shape ``(D, H, W)``), raw little-endian
    float64 in ``(D, H, W)`` order (``.bin``/``.f64``), or CSV with ``H*W``
    row-major cell rows of ``D`` values.
    """
    try:
        obj = _load_json(text)
        if not isinstance(obj, dict):
            raise InputError("feature descriptor must be a JSON object")
        h, w, d = _dims(obj, "height", "width", "dim")
        payload = obj["payload"]
        if not isinstance(payload, str) or not payload:
            raise InputError("'payload' must be a path")
        path = Path(base_dir) / payload
        suffix = path.suffix.lower()
        if suffix == ".npy":
            try:
                arr = np.load(path, allow_pickle=False)
            except OSError as exc:
                raise InputError(f"{path}: {exc}") from None
            arr = np.asarray(arr, dtype=float)
            if arr.shape != (d, h, w):
                raise InputError(f"payload shape {arr.shape} does not match ({d}, {h}, {w})")
        elif suffix in (".bin", ".f64"):
            try:
                raw = path.read_bytes()
            except OSError as exc:
                raise InputError(f"{path}: {exc}") from None
            if len(raw) != 8 * d * h * w:
                raise InputError(f"payload has {len(raw)} bytes, expected {8 * d * h * w}")
            arr = np.frombuffer(raw, dtype="<f8").reshape(d, h, w)
        else:
            table = _numeric_rows(_read_text(path), 1)
            if table.shape != (h * w, d):
                raise InputError(f"payload table shape {table.shape} does not match ({h * w}, {d})")
            arr = table.T.reshape(d, h, w)
        if not np.all(np.isfinite(arr)):
            raise InputError("non-finite feature value")
        return FeatureGrid(cell_centers(h, w), arr.reshape(d, h * w))
    except InputError:
        raise
    except _PARSE_ERRORS as exc:
        raise InputError(f"invalid feature descriptor: {exc}") from None


def read_features(path) -> FeatureGrid:
    text = _read_text(path)
    try:
        if text.lstrip().startswith("{"):
            return parse_features_descriptor(text, Path(path).parent)
        return parse_features_csv(text)
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def write_features_csv(path, grid: FeatureGrid) -> None:
    header = ["u", "v"] + [f"f{i + 1}" for i in range(grid.dim)]
    lines = [",".join(header)]
    for loc, col in zip(grid.locations, grid.features.T):
        lines.append(",".join(format_float(v) for v in (*loc, *col)))
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# mixtures


def parse_mixture(text: str) -> MixtureParams:
    try:
        obj = _load_json(text)
        if not isinstance(obj, dict) or not isinstance(obj.get("components"), list):
            raise InputError("mixture JSON must be an object with a 'components' list")
        for comp in obj["components"]:
            if not isinstance(comp, dict):
                raise InputError("each component must be an object")
            for key in ("pi", "mean", "cov"):
                if key not in comp:
                    raise InputError(f"component missing {key!r}")
            if not isinstance(comp["mean"], list) or not isinstance(comp["cov"], list):
                raise InputError("mean and cov must be arrays")
            if not all(isinstance(row, list) for row in comp["cov"]):
                raise InputError("cov must be a 2x2 array")
        return MixtureParams.from_dict(obj)
    except InputError:
        raise
    except _PARSE_ERRORS as exc:
        raise InputError(f"invalid mixture: {exc}") from None


def read_mixture(path) -> MixtureParams:
    try:
        return parse_mixture(_read_text(path))
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


# ---------------------------------------------------------------------------
# density grids


def parse_density_csv(text: str) -> DensityGrid:
    """``H`` rows of ``W`` nonnegative values; renormalized to unit mass."""
    try:
        return DensityGrid.normalized(_numeric_rows(text, 1))
    except InputError:
        raise
    except _PARSE_ERRORS as exc:
        raise InputError(f"invalid density grid: {exc}") from None


def read_density_csv(path) -> DensityGrid:
    try:
        return parse_density_csv(_read_text(path))
    except InputError as exc:
        raise InputError(f"{path}: {exc}") from None


def density_csv(grid: DensityGrid) -> str:
    return "".join(",".join(format_float(v) for v in row) + "\n" for row in grid.mass)


def pgm_bytes(grid: DensityGrid) -> bytes:
    """8-bit binary PGM (P5), intensities scaled so the largest cell is 255."""
    peak = grid.mass.max()
    pix = np.rint(grid.mass / peak * 255.0).astype(np.uint8)
    return f"P5\n{grid.width} {grid.height}\n255\n".encode("ascii") + pix.tobytes()


def read_pgm(path) -> np.ndarray:
    data = Path(path).read_bytes()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P5":
        raise InputError(f"{path}: not a binary PGM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)


# ---------------------------------------------------------------------------
# JSON with fixed float formatting


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def dumps(obj, indent: int = 2) -> str:
    """JSON text with every float printed at 17 significant digits.

    Non-finite floats become ``null``.
    """

    def enc(o, level):
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if o is None or o is True or o is False:
            return json.dumps(o)
        if isinstance(o, (int, np.integer)) and not isinstance(o, bool):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return format_float(o) if math.isfinite(o) else "null"
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, np.ndarray):
            return enc(o.tolist(), level)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {enc(v, level + 1)}" for k, v in o.items()]
            return "{\n" + ",\n".join(items) + "\n" + end + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            if all(isinstance(v, (int, float, np.integer, np.floating)) for v in o):
                return "[" + ", ".join(enc(v, level + 1) for v in o) + "]"
            return "[\n" + ",\n".join(pad + enc(v, level + 1) for v in o) + "\n" + end + "]"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(obj, 0) + "\n"
