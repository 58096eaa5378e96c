"""R2 geometry: Tchebycheff scalarization envelopes, discrete and integral R2,
simplex quadrature, and Tchebycheff shadows.

Two-objective weights are parameterized as ``lambda -> (lambda, 1 - lambda)``
with Lebesgue measure on ``[0, 1]``. For three or more objectives the simplex
carries its normalized (probability) surface measure, so every quadrature
rule here has weights summing to one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .pareto_geometry import Orientation, as_point_set, hypervolume, reduced_magnitude_box

BREAKPOINT_TOL = 1e-12


@dataclass(frozen=True)
class TchebycheffParams:
    utopian: np.ndarray
    reference: np.ndarray | None = None
    orientation: Orientation = Orientation.MINIMIZE

    def __post_init__(self):
        object.__setattr__(self, "utopian", np.asarray(self.utopian, dtype=float))
        if self.reference is not None:
            ref = np.asarray(self.reference, dtype=float)
            if ref.shape != self.utopian.shape:
                raise ValueError("utopian and reference points differ in dimension")
            object.__setattr__(self, "reference", ref)
        object.__setattr__(self, "orientation", Orientation.parse(self.orientation))

    @property
    def m(self) -> int:
        return self.utopian.shape[0]

    def canon(self, points) -> np.ndarray:
        """Map points into minimization orientation."""
        arr = np.asarray(points, dtype=float)
        return -arr if self.orientation is Orientation.MAXIMIZE else arr

    @property
    def z(self) -> np.ndarray:
        return self.canon(self.utopian)

    @property
    def r(self) -> np.ndarray:
        if self.reference is None:
            raise ValueError("no reference point configured")
        return self.canon(self.reference)


def _params(p, m=None) -> TchebycheffParams:
    if isinstance(p, TchebycheffParams):
        return p
    if p is None:
        return TchebycheffParams(np.zeros(m))
    return TchebycheffParams(p)


def as_weights(w, m: int | None = None) -> np.ndarray:
    """Coerce weights to a ``(K, m)`` array; a scalar ``t`` means ``(t, 1 - t)``."""
    w = np.asarray(w, dtype=float)
    if w.ndim == 0 or (w.ndim == 1 and m == 2 and w.shape[0] != 2):
        t = np.atleast_1d(w)
        w = np.column_stack([t, 1.0 - t])
    w = np.atleast_2d(w)
    if np.any(w < -1e-15) or np.any(np.abs(w.sum(axis=1) - 1.0) > 1e-12):
        raise ValueError("weights must be nonnegative and sum to one")
    return np.clip(w, 0.0, None)


def uniform_weights(K: int) -> np.ndarray:
    """``K`` equally spaced two-objective weights including both simplex vertices."""
    if K < 1:
        raise ValueError("need at least one weight")
    t = np.linspace(0.0, 1.0, K) if K > 1 else np.array([0.5])
    return np.column_stack([t, 1.0 - t])


def simplex_lattice(m: int, H: int) -> np.ndarray:
    """Das-Dennis lattice ``{k/H : sum k = H}`` on the ``(m-1)``-simplex."""
    out = []

    def rec(prefix, left, depth):
        if depth == m - 1:
            out.append(prefix + [left])
            return
        for i in range(left + 1):
            rec(prefix + [i], left - i, depth + 1)

    rec([], H, 0)
    return np.array(out, dtype=float) / H


def tcheby_value(y, w, p=None):
    """Weighted Tchebycheff achievement ``max_i w_i (y_i - z_i)``; broadcasts over rows."""
    y = np.asarray(y, dtype=float)
    p = _params(p, y.shape[-1])
    diff = p.canon(y) - p.z
    return np.max(np.asarray(w, dtype=float) * diff, axis=-1)


def envelope_value(A, w, p=None, return_witness: bool = False, chunk: int = 4096):
    """Scalarization envelope ``min_a g_w(a)`` at one or many weights.

    Ties go to the lowest point index.
    """
    p = _params(p, np.shape(A)[-1])
    A = as_point_set(A, p.m)
    if len(A) == 0:
        raise ValueError("envelope of an empty set is undefined")
    W = np.asarray(w, dtype=float)
    single = W.ndim == 1
    W = np.atleast_2d(W)
    D = p.canon(A) - p.z
    vals = np.empty(len(W))
    idx = np.empty(len(W), dtype=int)
    for s in range(0, len(W), chunk):
        G = np.max(W[s : s + chunk, None, :] * D[None, :, :], axis=2)
        idx[s : s + chunk] = np.argmin(G, axis=1)
        vals[s : s + chunk] = G[np.arange(len(G)), idx[s : s + chunk]]
    if single:
        return (float(vals[0]), int(idx[0])) if return_witness else float(vals[0])
    return (vals, idx) if return_witness else vals


@dataclass(frozen=True)
class PiecewiseLinearEnvelope:
    """Envelope ``t -> h_A((t, 1 - t))`` on ``[0, 1]`` as linear segments."""

    breakpoints: np.ndarray
    slopes: np.ndarray
    intercepts: np.ndarray
    witness: np.ndarray

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        seg = np.clip(np.searchsorted(self.breakpoints, t, side="right") - 1, 0, len(self.slopes) - 1)
        return self.slopes[seg] * t + self.intercepts[seg]

    @property
    def n_segments(self) -> int:
        return len(self.slopes)


def _prefix_min(values, index):
    """Running ``(value, index)`` minima: entry k covers the first k items."""
    n = len(values)
    best_v = np.full(n + 1, np.inf)
    best_i = np.full(n + 1, -1)
    cur_v, cur_i = np.inf, -1
    for k in range(n):
        v, i = values[k], index[k]
        if v < cur_v or (v == cur_v and i < cur_i):
            cur_v, cur_i = v, i
        best_v[k + 1], best_i[k + 1] = cur_v, cur_i
    return best_v, best_i


def _suffix_min(values, index):
    """Entry k covers items ``k..n-1``."""
    v, i = _prefix_min(values[::-1], index[::-1])
    return v[::-1], i[::-1]


def envelope_piecewise_2d(A, p=None) -> PiecewiseLinearEnvelope:
    """Exact lower envelope of ``max(t a1', (1 - t) a2')`` over ``a`` in ``A``.

    Each point switches which line is active at one kink. Between consecutive
    kinks the active sets are fixed, so the envelope there is the minimum of
    ``t * c1`` and ``(1 - t) * c2`` for the running minima ``c1, c2``.
    """
    p = _params(p, 2)
    A = as_point_set(A, 2)
    if p.m != 2:
        raise ValueError("piecewise envelopes are two-objective only")
    if len(A) == 0:
        raise ValueError("envelope of an empty set is undefined")
    D = p.canon(A) - p.z
    a1, a2 = D[:, 0], D[:, 1]
    s = a1 + a2
    idx = np.arange(len(D))
    with np.errstate(divide="ignore", invalid="ignore"):
        kink = np.where(s != 0, a2 / np.where(s != 0, s, 1.0), np.nan)
    grow = s >= 0  # a1-line active for t >= kink
    kink_grow = np.where(s > 0, kink, np.where(a2 <= 0, -np.inf, np.inf))
    P = np.flatnonzero(grow)
    N = np.flatnonzero(~grow)  # a1-line active for t <= kink
    P = P[np.argsort(kink_grow[P], kind="stable")]
    N = N[np.argsort(kink[N], kind="stable")]
    kP, kN = kink_grow[P], kink[N]

    c1P, w1P = _prefix_min(a1[P], idx[P])
    c2P, w2P = _suffix_min(a2[P], idx[P])
    c2N, w2N = _prefix_min(a2[N], idx[N])
    c1N, w1N = _suffix_min(a1[N], idx[N])

    inner = np.concatenate([kP, kN])
    inner = inner[np.isfinite(inner) & (inner > 0) & (inner < 1)]
    bps = np.unique(np.concatenate([[0.0, 1.0], inner]))
    bps = bps[np.concatenate([[True], np.diff(bps) > BREAKPOINT_TOL])]
    bps[-1] = 1.0

    mid = 0.5 * (bps[:-1] + bps[1:])
    jP = np.searchsorted(kP, mid, side="right")
    jN = np.searchsorted(kN, mid, side="left")

    def pick(v_a, i_a, v_b, i_b):
        take_b = (v_b < v_a) | ((v_b == v_a) & (i_b >= 0) & ((i_a < 0) | (i_b < i_a)))
        return np.where(take_b, v_b, v_a), np.where(take_b, i_b, i_a)

    c1, w1 = pick(c1P[jP], w1P[jP], c1N[jN], w1N[jN])
    c2, w2 = pick(c2P[jP], w2P[jP], c2N[jN], w2N[jN])

    lefts, slopes, inters, wits = [], [], [], []
    for lo, hi, v1, v2, i1, i2 in zip(bps[:-1], bps[1:], c1, c2, w1, w2):
        # lines: t * v1 and (1 - t) * v2 = v2 - t * v2
        cuts = [lo]
        if np.isfinite(v1) and np.isfinite(v2) and v1 + v2 != 0:
            tx = v2 / (v1 + v2)
            if lo + BREAKPOINT_TOL < tx < hi - BREAKPOINT_TOL:
                cuts.append(tx)
        cuts.append(hi)
        for a, b in zip(cuts[:-1], cuts[1:]):
            tm = 0.5 * (a + b)
            g1 = tm * v1 if np.isfinite(v1) else np.inf
            g2 = (1 - tm) * v2 if np.isfinite(v2) else np.inf
            if g1 < g2 or (g1 == g2 and i1 <= i2):
                lefts.append(a); slopes.append(v1); inters.append(0.0); wits.append(i1)
            else:
                lefts.append(a); slopes.append(-v2); inters.append(v2); wits.append(i2)
    return PiecewiseLinearEnvelope(
        np.array(lefts + [1.0]), np.array(slopes), np.array(inters), np.array(wits, dtype=int)
    )


def reference_envelope_2d(p: TchebycheffParams) -> PiecewiseLinearEnvelope:
    return envelope_piecewise_2d(p.reference[None, :], p)


def discrete_r2(A, weights, p=None) -> float:
    """Mean envelope value over a finite weight set."""
    W = np.atleast_2d(np.asarray(weights, dtype=float))
    if W.size == 0:
        raise ValueError("empty weight set")
    return float(np.mean(envelope_value(A, W, p)))


def discrete_r2_improvement(A, weights, p) -> float:
    """Mean clipped gap between the reference envelope and the envelope of ``A``."""
    W = np.atleast_2d(np.asarray(weights, dtype=float))
    if W.size == 0:
        raise ValueError("empty weight set")
    h_r = tcheby_value(p.reference, W, p)
    h_A = envelope_value(A, W, p)
    return float(np.mean(np.maximum(h_r - h_A, 0.0)))


# --- weight densities ------------------------------------------------------


class UniformDensity:
    """``rho = 1`` with respect to the simplex measure convention above."""

    is_uniform = True
    breaks = np.array([0.0, 1.0])

    def __call__(self, weights) -> np.ndarray:
        return np.ones(np.atleast_2d(weights).shape[0])

    def of_t(self, t):
        return np.ones_like(np.asarray(t, dtype=float))


@dataclass
class PiecewisePolynomialDensity:
    """Two-objective density in ``t = lambda_1``: polynomial ``coeffs[k]`` on ``[breaks[k], breaks[k+1]]``."""

    breaks: np.ndarray
    coeffs: list
    is_uniform: bool = field(default=False, init=False)

    def __post_init__(self):
        self.breaks = np.asarray(self.breaks, dtype=float)
        if self.breaks[0] != 0.0 or self.breaks[-1] != 1.0 or np.any(np.diff(self.breaks) <= 0):
            raise ValueError("density breaks must increase from 0 to 1")
        if len(self.coeffs) != len(self.breaks) - 1:
            raise ValueError("need one coefficient list per piece")
        self.coeffs = [np.asarray(c, dtype=float) for c in self.coeffs]

    def of_t(self, t):
        t = np.asarray(t, dtype=float)
        seg = np.clip(np.searchsorted(self.breaks, t, side="right") - 1, 0, len(self.coeffs) - 1)
        out = np.zeros(t.shape)
        for k, c in enumerate(self.coeffs):
            sel = seg == k
            out[sel] = np.polynomial.polynomial.polyval(t[sel], c)
        if np.any(out < -1e-14):
            raise ValueError("weight density evaluated negative")
        return out

    def __call__(self, weights) -> np.ndarray:
        return self.of_t(np.atleast_2d(weights)[:, 0])


def _density(rho):
    return UniformDensity() if rho is None or rho == "uniform" else rho


def _density_of_t(rho, t):
    if hasattr(rho, "of_t"):
        return rho.of_t(t)
    t = np.asarray(t, dtype=float)
    return np.asarray(rho(np.column_stack([t, 1.0 - t])), dtype=float)


# --- exact two-objective integration ----------------------------------------

_GL_T, _GL_W = np.polynomial.legendre.leggauss(3)


def _merged_grid(*envelopes, rho=None):
    parts = [e.breakpoints for e in envelopes]
    if rho is not None and hasattr(rho, "breaks"):
        parts.append(np.asarray(rho.breaks, dtype=float))
    g = np.unique(np.concatenate(parts))
    return g[np.concatenate([[True], np.diff(g) > BREAKPOINT_TOL])]


def _integrate_segments(lo, hi, f, rho):
    """3-point Gauss-Legendre on each ``[lo, hi]``; exact for polynomial degree <= 5."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    t = mid[:, None] + half[:, None] * _GL_T[None, :]
    vals = f(t) * _density_of_t(rho, t.ravel()).reshape(t.shape)
    return np.sum(half * (vals @ _GL_W))


def _positive_pieces(grid, gap):
    """Positive parts of a continuous ``gap`` that is linear on each grid interval."""
    lo, hi = grid[:-1], grid[1:]
    fa, fb = gap(lo), gap(hi)
    keep_lo, keep_hi = lo.copy(), hi.copy()
    up = (fa < 0) & (fb > 0)
    down = (fa > 0) & (fb < 0)
    cross = up | down
    root = lo[cross] + fa[cross] / (fa[cross] - fb[cross]) * (hi[cross] - lo[cross])
    keep_lo[up] = root[up[cross]]
    keep_hi[down] = root[down[cross]]
    live = ((fa >= 0) & (fb >= 0)) | cross
    live &= (fa > 0) | (fb > 0)
    return keep_lo[live], keep_hi[live]


def r2_value_exact_2d(A, p=None, rho=None) -> float:
    """Integral of the envelope of ``A`` against ``rho`` over the 1-simplex."""
    rho = _density(rho)
    env = envelope_piecewise_2d(A, p)
    grid = _merged_grid(env, rho=rho)
    return float(_integrate_segments(grid[:-1], grid[1:], env, rho))


def r2_improvement_exact_2d(A, p: TchebycheffParams, rho=None) -> float:
    """Exact integral R2 improvement ``int (h_r - h_A)_+ rho`` for two objectives."""
    rho = _density(rho)
    env = envelope_piecewise_2d(A, p)
    ref = reference_envelope_2d(p)
    grid = _merged_grid(env, ref, rho=rho)

    def gap(t):
        return ref(t) - env(t)

    lo, hi = _positive_pieces(grid, gap)
    if len(lo) == 0:
        return 0.0
    return max(float(_integrate_segments(lo, hi, gap, rho)), 0.0)


# --- quadrature on the simplex ----------------------------------------------


@dataclass(frozen=True)
class SimplexQuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    kind: str

    @property
    def m(self) -> int:
        return self.nodes.shape[1]

    def __len__(self) -> int:
        return len(self.weights)


def gauss_legendre_rule(L: int) -> SimplexQuadratureRule:
    """``L``-node Gauss-Legendre rule on the 1-simplex (``t`` in ``[0, 1]``)."""
    x, w = np.polynomial.legendre.leggauss(L)
    t = 0.5 * (x + 1.0)
    return SimplexQuadratureRule(np.column_stack([t, 1.0 - t]), 0.5 * w, f"gauss-legendre-{L}")


def conical_product_rule(m: int, n: int) -> SimplexQuadratureRule:
    """Collapsed tensor Gauss-Legendre rule (``n**(m-1)`` nodes) on the simplex.

    Weights are normalized to sum to one.
    """
    if m < 2:
        raise ValueError("need m >= 2")
    if m == 2:
        return gauss_legendre_rule(n)
    d = m - 1
    x, w = np.polynomial.legendre.leggauss(n)
    u1 = 0.5 * (x + 1.0)
    w1 = 0.5 * w
    grids = np.meshgrid(*([u1] * d), indexing="ij")
    U = np.column_stack([g.ravel() for g in grids])
    Wg = np.prod(np.column_stack([g.ravel() for g in np.meshgrid(*([w1] * d), indexing="ij")]), axis=1)
    lam = np.empty((len(U), m))
    rest = np.ones(len(U))
    for k in range(d):
        lam[:, k] = rest * U[:, k]
        rest = rest * (1.0 - U[:, k])
    lam[:, d] = rest
    # Jacobian of the collapse: prod_k (1 - u_k)^(d - 1 - k)
    jac = np.ones(len(U))
    for k in range(d - 1):
        jac *= (1.0 - U[:, k]) ** (d - 1 - k)
    wts = Wg * jac
    return SimplexQuadratureRule(lam, wts / wts.sum(), f"conical-product-{n}^{d}")


def subdivision_rule(n: int) -> SimplexQuadratureRule:
    """Composite centroid rule on the 2-simplex split into ``n**2`` congruent triangles."""
    pts = []
    for i in range(n):
        for j in range(n - i):
            # upward triangle with barycentric corner (i, j) on the n-grid
            pts.append(((3 * i + 1) / (3 * n), (3 * j + 1) / (3 * n)))
            if i + j < n - 1:
                pts.append(((3 * i + 2) / (3 * n), (3 * j + 2) / (3 * n)))
    pts = np.array(pts)
    nodes = np.column_stack([pts, 1.0 - pts.sum(axis=1)])
    return SimplexQuadratureRule(nodes, np.full(len(nodes), 1.0 / len(nodes)), f"subdivision-{n}")


def dirichlet_qmc_rule(m: int, L: int, seed: int = 0) -> SimplexQuadratureRule:
    """Equal-weight rule from scrambled Sobol points mapped uniformly onto the simplex."""
    if m == 1:
        return SimplexQuadratureRule(np.ones((1, 1)), np.ones(1), "trivial")
    sampler = qmc.Sobol(d=m - 1, scramble=True, seed=seed)
    n_pow = int(math.ceil(math.log2(max(L, 2))))
    U = sampler.random_base2(n_pow)[:L]
    U = np.sort(U, axis=1)
    edges = np.column_stack([np.zeros(len(U)), U, np.ones(len(U))])
    nodes = np.diff(edges, axis=1)
    return SimplexQuadratureRule(nodes, np.full(L, 1.0 / L), f"dirichlet-qmc-{L}")


def r2_improvement_quadrature(A, p: TchebycheffParams, rho=None, rule: SimplexQuadratureRule | None = None) -> float:
    """``sum_l w_l (h_r - h_A)_+ rho`` at the rule's nodes."""
    rho = _density(rho)
    if rule is None:
        rule = gauss_legendre_rule(64) if p.m == 2 else conical_product_rule(p.m, 32)
    h_r = tcheby_value(p.reference, rule.nodes, p)
    h_A = envelope_value(A, rule.nodes, p)
    return float(np.sum(rule.weights * np.maximum(h_r - h_A, 0.0) * rho(rule.nodes)))


def r2_value_quadrature(A, p=None, rho=None, rule: SimplexQuadratureRule | None = None) -> float:
    p = _params(p, np.shape(A)[-1])
    rho = _density(rho)
    if rule is None:
        rule = gauss_legendre_rule(64) if p.m == 2 else conical_product_rule(p.m, 32)
    return float(np.sum(rule.weights * envelope_value(A, rule.nodes, p) * rho(rule.nodes)))


# --- Tchebycheff shadows -----------------------------------------------------


def shadow_interval(A, w, p: TchebycheffParams):
    """``(h_A(w), h_r(w))`` when nonempty, else ``None``."""
    lo = envelope_value(A, w, p)
    hi = float(tcheby_value(p.reference, w, p))
    return (lo, hi) if lo <= hi else None


def _shoelace(xs, ys) -> float:
    return 0.5 * abs(np.dot(xs, np.roll(ys, -1)) - np.dot(ys, np.roll(xs, -1)))


def tsm(A, p: TchebycheffParams, rho=None, method="exact_2d") -> float:
    """Tchebycheff shadow magnitude: weighted measure of the region between envelopes.

    ``method="exact_2d"`` measures the shadow polygons directly (uniform
    density) or integrates shadow lengths segment-wise; passing a
    :class:`SimplexQuadratureRule` sums shadow lengths at its nodes.
    """
    rho = _density(rho)
    if isinstance(method, SimplexQuadratureRule):
        lengths = np.array([
            0.0 if (s := shadow_interval(A, w, p)) is None else s[1] - s[0] for w in method.nodes
        ])
        return float(np.sum(method.weights * lengths * rho(method.nodes)))
    if method != "exact_2d":
        raise ValueError(f"unknown method {method!r}")
    env = envelope_piecewise_2d(A, p)
    ref = reference_envelope_2d(p)
    grid = _merged_grid(env, ref, rho=rho)
    lo, hi = _positive_pieces(grid, lambda t: ref(t) - env(t))
    if len(lo) == 0:
        return 0.0
    if not getattr(rho, "is_uniform", False):
        return max(float(_integrate_segments(lo, hi, lambda t: ref(t) - env(t), rho)), 0.0)
    # uniform density: area of the polygons bounded by the two envelopes
    total = 0.0
    start = 0
    for k in range(1, len(lo) + 1):
        if k == len(lo) or lo[k] > hi[k - 1] + BREAKPOINT_TOL:
            xs = np.concatenate([lo[start:k], [hi[k - 1]]])
            upper = ref(xs)
            lower = env(xs)
            total += _shoelace(np.concatenate([xs, xs[::-1]]), np.concatenate([upper, lower[::-1]]))
            start = k
    return total


# --- worked verifications ----------------------------------------------------


def verify_no_whv_example(c: float) -> dict:
    """Segment ``{(1, c)}``: zero hypervolume but positive exact R2 improvement."""
    if not 0.0 < c < 1.0:
        raise ValueError("c must lie in (0, 1)")
    p = TchebycheffParams([0.0, 0.0], [1.0, 1.0])
    A = np.array([[1.0, c]])
    hv = hypervolume(A, p.reference)
    i_r2 = r2_improvement_exact_2d(A, p)
    return {"c": c, "hv_contribution": hv, "r2_improvement": i_r2, "pass": hv == 0.0 and i_r2 > 0.0}


def verify_magnitude_example() -> dict:
    """Two sets with equal reduced magnitude but different exact R2 improvement."""
    p = TchebycheffParams([0.0, 0.0], [1.0, 1.0])
    s = 3.0 - math.sqrt(6.0)
    q = 1.0 - s
    mag_A = reduced_magnitude_box(0.0, 1.0)
    mag_B = reduced_magnitude_box(q, q)
    i_A = r2_improvement_exact_2d([[0.0, 1.0]], p)
    i_B = r2_improvement_exact_2d([[s, s]], p)
    ok = abs(mag_A - mag_B) <= 1e-12 and abs(i_A - i_B) > 1e-6
    return {"mag_A": mag_A, "mag_B": mag_B, "i_A": i_A, "i_B": i_B, "pass": bool(ok)}


def envelope_table(A, p: TchebycheffParams, n_grid: int = 1001) -> np.ndarray:
    """Rows ``(lambda, h_A, h_r, gap)`` on a uniform grid of ``lambda_1``."""
    t = np.linspace(0.0, 1.0, n_grid)
    W = np.column_stack([t, 1.0 - t])
    h_A = envelope_value(A, W, p)
    h_r = tcheby_value(p.reference, W, p) if p.reference is not None else np.full(n_grid, np.nan)
    return np.column_stack([t, h_A, h_r, np.maximum(h_r - h_A, 0.0)])
