"""File formats shared by the command line: point CSVs and JSON configs.

Point CSVs have a mandatory header ``f1,...,fm`` and one objective vector
per row. Numbers are written as shortest round-trip decimals so a written
file re-parses to the identical array.
"""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .pareto_geometry import DimensionError, Orientation
from .r2_indicator import (
    PiecewisePolynomialDensity,
    SimplexQuadratureRule,
    conical_product_rule,
    dirichlet_qmc_rule,
    gauss_legendre_rule,
    simplex_lattice,
    subdivision_rule,
    uniform_weights,
)


class FormatError(ValueError):
    """Unparseable input; the message carries the line number when known."""


CONFIG_KEYS = {
    "orientation", "reference", "utopian", "weights", "rho", "seed", "budget", "mode",
    "n_initial", "search_budget", "mean", "std", "roi",
}
_VECTOR_KEYS = ("reference", "utopian", "mean", "std")


def format_number(v) -> str:
    return repr(float(v))


def parse_points_csv(text: str, m: int | None = None) -> np.ndarray:
    """Parse a point CSV. An empty document is an empty set (needs ``m``)."""
    rows = list(csv.reader(io.StringIO(text)))
    # drop blank lines but keep 1-based line numbers
    numbered = [(i, row) for i, row in enumerate(rows, 1) if any(c.strip() for c in row)]
    if not numbered:
        return np.zeros((0, m or 0))
    line, header = numbered[0]
    header = [h.strip() for h in header]
    if header != [f"f{j}" for j in range(1, len(header) + 1)]:
        raise FormatError(f"line {line}: expected header f1,...,fm, got {','.join(header)!r}")
    width = len(header)
    out = []
    for line, row in numbered[1:]:
        if len(row) != width:
            raise FormatError(f"line {line}: expected {width} fields, got {len(row)}")
        try:
            vals = [float(c) for c in row]
        except ValueError:
            raise FormatError(f"line {line}: non-numeric field in {','.join(row)!r}") from None
        if not all(np.isfinite(vals)):
            raise FormatError(f"line {line}: non-finite value")
        out.append(vals)
    A = np.array(out, dtype=float).reshape(len(out), width)
    if m is not None and width != m:
        raise DimensionError(f"points have {width} objectives, configuration has {m}")
    return A


def read_points(path, m: int | None = None) -> np.ndarray:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from None
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text) if text.strip() else []
        except json.JSONDecodeError as exc:
            raise FormatError(f"line {exc.lineno}: {exc.msg}") from None
        A = np.array(data, dtype=float)
        if A.size == 0:
            return np.zeros((0, m or 0))
        if A.ndim != 2:
            raise FormatError("JSON points must be an array of arrays")
        if m is not None and A.shape[1] != m:
            raise DimensionError(f"points have {A.shape[1]} objectives, configuration has {m}")
        return A
    return parse_points_csv(text, m)


def points_to_csv(A) -> str:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    lines = [",".join(f"f{j}" for j in range(1, A.shape[1] + 1))]
    lines += [",".join(format_number(v) for v in row) for row in A]
    return "\n".join(lines) + "\n"


def table_to_csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(format_number(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


# --- configs -----------------------------------------------------------------


def _vector(cfg, key):
    v = cfg[key]
    if not isinstance(v, list) or not v or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        raise FormatError(f"config key {key!r} must be a nonempty array of numbers")
    return np.array(v, dtype=float)


def _int(cfg, key, minimum=0):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < minimum:
        raise FormatError(f"config key {key!r} must be an integer >= {minimum}")
    return v


def parse_rule(spec: dict, m: int) -> SimplexQuadratureRule:
    kind = spec.get("kind", "gauss_legendre")
    n = spec.get("n", spec.get("L"))
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise FormatError("rule needs a positive integer size 'n'")
    if kind == "gauss_legendre":
        if m != 2:
            raise DimensionError("gauss_legendre rule needs two objectives")
        return gauss_legendre_rule(n)
    if kind == "conical_product":
        return conical_product_rule(m, n)
    if kind == "subdivision":
        if m != 3:
            raise DimensionError("subdivision rule needs three objectives")
        return subdivision_rule(n)
    if kind == "dirichlet_qmc":
        return dirichlet_qmc_rule(m, n, int(spec.get("seed", 0)))
    raise FormatError(f"unknown rule kind {kind!r}")


def parse_weights(spec, m: int):
    """Returns ``(weights, rule)``; exactly one is not ``None``."""
    if isinstance(spec, list):
        W = np.array(spec, dtype=float)
        if W.ndim != 2:
            raise FormatError("weights must be an array of arrays")
        if W.shape[1] != m:
            raise DimensionError(f"weights have {W.shape[1]} components, expected {m}")
        if np.any(W < 0) or np.any(np.abs(W.sum(axis=1) - 1.0) > 1e-9):
            raise FormatError("weights must be nonnegative and sum to one")
        return W, None
    if isinstance(spec, dict) and set(spec) == {"uniform"}:
        K = spec["uniform"]
        if isinstance(K, bool) or not isinstance(K, int) or K < 1:
            raise FormatError("'uniform' needs a positive integer")
        return (uniform_weights(K) if m == 2 else simplex_lattice(m, K)), None
    if isinstance(spec, dict) and set(spec) == {"rule"} and isinstance(spec["rule"], dict):
        return None, parse_rule(spec["rule"], m)
    raise FormatError("weights must be an array, {'uniform': K} or {'rule': {...}}")


def parse_rho(spec):
    if spec == "uniform":
        return None
    if isinstance(spec, dict) and set(spec) == {"breaks", "coeffs"}:
        try:
            return PiecewisePolynomialDensity(spec["breaks"], spec["coeffs"])
        except (TypeError, ValueError) as exc:
            raise FormatError(f"bad rho: {exc}") from None
    raise FormatError("rho must be 'uniform' or {'breaks': [...], 'coeffs': [[...], ...]}")


def parse_config(data) -> dict:
    """Validate a config object and convert values; unknown keys are rejected.

    Vector keys must agree in length (``DimensionError`` otherwise). The
    result always has ``orientation`` and ``m`` (``None`` if no vector key).
    """
    if not isinstance(data, dict):
        raise FormatError("config must be a JSON object")
    unknown = sorted(set(data) - CONFIG_KEYS)
    if unknown:
        raise FormatError(f"unknown config keys: {', '.join(unknown)}")
    cfg = {"orientation": Orientation.MINIMIZE}
    if "orientation" in data:
        try:
            cfg["orientation"] = Orientation.parse(data["orientation"])
        except ValueError as exc:
            raise FormatError(str(exc)) from None
    dims = {}
    for key in _VECTOR_KEYS:
        if key in data:
            cfg[key] = _vector(data, key)
            dims[key] = len(cfg[key])
    if "roi" in data:
        roi = data["roi"]
        if not isinstance(roi, dict) or set(roi) != {"lower", "upper"}:
            raise FormatError("roi must be {'lower': [...], 'upper': [...]}")
        cfg["roi"] = (_vector(roi, "lower"), _vector(roi, "upper"))
        dims["roi"] = len(cfg["roi"][0])
        if len(cfg["roi"][1]) != dims["roi"]:
            raise DimensionError("roi bounds differ in length")
    if len(set(dims.values())) > 1:
        raise DimensionError("config vectors differ in dimension: " + ", ".join(f"{k}={v}" for k, v in dims.items()))
    m = next(iter(dims.values()), None)
    cfg["m"] = m
    if "weights" in data:
        if m is None:
            raise FormatError("weights need a reference or utopian point to fix the dimension")
        cfg["weights"], cfg["rule"] = parse_weights(data["weights"], m)
    if "rho" in data:
        cfg["rho"] = parse_rho(data["rho"])
    for key, minimum in (("seed", 0), ("budget", 1), ("n_initial", 1), ("search_budget", 1)):
        if key in data:
            cfg[key] = _int(data, key, minimum)
    if "mode" in data:
        if data["mode"] not in ("discrete_er2i", "quadrature_er2i", "ehvi"):
            raise FormatError(f"unknown mode {data['mode']!r}")
        cfg["mode"] = data["mode"]
    return cfg


def read_config(path) -> dict:
    if path is None:
        return parse_config({})
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"line {exc.lineno}: {exc.msg}") from None
    return parse_config(data)
