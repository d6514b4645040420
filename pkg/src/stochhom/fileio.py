"""Plain-text formats: field dumps, key=value configs, CSV tables, JSON summaries."""

from __future__ import annotations

import csv
import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import InputError, ParameterError
from .field import CoefficientField, EnsembleParams, vertex_fraction

__all__ = [
    "write_field",
    "read_field",
    "write_centers",
    "read_centers",
    "read_config",
    "write_config",
    "params_from_config",
    "write_csv",
    "read_csv",
    "write_json",
    "format_value",
]


def format_value(v) -> str:
    """Text form that parses back to the identical value (``repr`` for floats)."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return ",".join(format_value(x) for x in v)
    if v is None:
        return "-"
    return str(v)


# --- field dump -----------------------------------------------------------------


def write_field(path, field: CoefficientField) -> None:
    """Header ``n L m0 alpha lambda seed index`` then ``n`` rows of '0'/'1' (row = x1 index)."""
    p = field.params
    seed = "-" if field.seed is None else str(field.seed)
    header = f"{p.n} {p.L} {p.m0} {p.alpha} {p.lam!r} {seed} {field.realization_index}"
    rows = ["".join("1" if c else "0" for c in row) for row in field.cell_indicator]
    Path(path).write_text(header + "\n" + "\n".join(rows) + "\n")


def read_field(path, centers_path=None, tol: float = 1e-8) -> CoefficientField:
    lines = Path(path).read_text().splitlines()
    if not lines:
        raise InputError(f"{path}: empty field dump")
    parts = lines[0].split()
    if len(parts) != 7:
        raise InputError(f"{path}: header needs 7 fields, got {len(parts)}")
    try:
        n, L, m0 = (int(x) for x in parts[:3])
        alpha = Fraction(parts[3])
        lam = float(parts[4])
        seed = None if parts[5] == "-" else int(parts[5])
        index = int(parts[6])
    except ValueError as exc:
        raise InputError(f"{path}: malformed header: {exc}") from exc
    params = EnsembleParams(L, m0, alpha, lam, tol)
    if params.n != n:
        raise InputError(f"{path}: n={n} disagrees with m0*L={params.n}")
    body = lines[1:1 + n]
    if len(body) != n or any(len(r) != n or set(r) - {"0", "1"} for r in body):
        raise InputError(f"{path}: expected {n} rows of {n} characters '0'/'1'")
    cells = np.array([[c == "1" for c in r] for r in body], dtype=bool)
    centers = read_centers(centers_path) if centers_path is not None else np.empty((0, 2), dtype=np.int64)
    return CoefficientField(params, centers, cells, vertex_fraction(cells), index, seed)


def write_centers(path, centers) -> None:
    c = np.asarray(centers, dtype=np.int64).reshape(-1, 2)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "i1", "i2"])
        for k, (a, b) in enumerate(c):
            w.writerow([k, int(a), int(b)])


def read_centers(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return np.array([[int(r["i1"]), int(r["i2"])] for r in rows], dtype=np.int64).reshape(-1, 2)


# --- key=value config -----------------------------------------------------------


def read_config(path) -> dict[str, str]:
    """``key = value`` lines; '#' starts a comment.  Values stay strings."""
    cfg = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ParameterError(f"{path}:{lineno}: empty key")
        cfg[key] = value
    return cfg


def write_config(path, cfg: dict) -> None:
    lines = [f"{k} = {format_value(v)}" for k, v in cfg.items()]
    Path(path).write_text("\n".join(lines) + "\n")


_PARAM_KEYS = {"L": "L", "m0": "m0", "alpha": "alpha", "lambda": "lam", "lam": "lam", "tol": "tol"}


def params_from_config(cfg: dict, **overrides) -> EnsembleParams:
    values = {"L": 4, "m0": 8, "alpha": Fraction(1, 4), "lam": 0.4, "tol": 1e-8}
    conv = {"L": int, "m0": int, "alpha": Fraction, "lam": float, "tol": float}
    for key, name in _PARAM_KEYS.items():
        if key in cfg:
            try:
                values[name] = conv[name](cfg[key])
            except (ValueError, ZeroDivisionError) as exc:
                raise ParameterError(f"bad value for {key}: {cfg[key]!r}") from exc
    values.update({k: v for k, v in overrides.items() if v is not None})
    return EnsembleParams(**values)


# --- tables ---------------------------------------------------------------------


def write_csv(path, rows, columns) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([format_value(r[c]) for c in columns])


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def write_json(path, data: dict) -> None:
    Path(path).write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
