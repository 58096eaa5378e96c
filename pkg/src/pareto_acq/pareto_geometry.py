"""Objective-space primitives: dominance, Pareto filtering, dominated-region
decomposition, hypervolume and its cone / desirability-weighted variants.

Everything is computed in minimization orientation. Maximization inputs are
negated at the boundary by :func:`to_minimization`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

#: Maximum set size for signed inclusion-exclusion (m >= 3).
INCLUSION_EXCLUSION_CAP = 20
VOLUME_ATOL = 1e-10


class Orientation(str, enum.Enum):
    MINIMIZE = "min"
    MAXIMIZE = "max"

    @classmethod
    def parse(cls, value) -> "Orientation":
        if isinstance(value, Orientation):
            return value
        value = str(value).lower()
        if value in ("min", "minimize", "minimization"):
            return cls.MINIMIZE
        if value in ("max", "maximize", "maximization"):
            return cls.MAXIMIZE
        raise ValueError(f"unknown orientation {value!r}")


class DimensionError(ValueError):
    """Objective vectors of inconsistent length."""


class DecompositionCapError(ValueError):
    """Inclusion-exclusion requested for more points than the cap allows."""


def to_minimization(points, orientation="min") -> np.ndarray:
    """Return ``points`` as a float array in minimization orientation (involution)."""
    arr = np.asarray(points, dtype=float)
    if Orientation.parse(orientation) is Orientation.MAXIMIZE:
        return -arr
    return arr.copy()


def as_point_set(points, m: int | None = None) -> np.ndarray:
    """Coerce to an ``(n, m)`` float array; an empty input gives shape ``(0, m)``."""
    arr = np.asarray(points, dtype=float)
    if arr.size == 0:
        return np.zeros((0, m if m is not None else 0))
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise DimensionError("point set must be two-dimensional")
    if m is not None and arr.shape[1] != m:
        raise DimensionError(f"expected {m} objectives, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("objective vectors must be finite")
    return arr


def dominates(a, b, orientation="min") -> bool:
    """Pareto dominance of ``a`` over ``b``: no worse everywhere, better somewhere."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"dimension mismatch: {a.shape} vs {b.shape}")
    if Orientation.parse(orientation) is Orientation.MAXIMIZE:
        a, b = -a, -b
    return bool(np.all(a <= b) and np.any(a < b))


def nondominated_mask(points) -> np.ndarray:
    """Boolean mask of the nondominated rows (minimization); first duplicate kept."""
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    if n == 0:
        return np.zeros(0, dtype=bool)
    if pts.shape[1] == 2:
        order = np.lexsort((np.arange(n), pts[:, 1], pts[:, 0]))
        s = pts[order]
        best = np.minimum.accumulate(s[:, 1])
        keep_sorted = np.ones(n, dtype=bool)
        keep_sorted[1:] = s[1:, 1] < best[:-1]
        keep = np.zeros(n, dtype=bool)
        keep[order] = keep_sorted
        return keep
    keep = np.ones(n, dtype=bool)
    for i in range(n):
        p = pts[i]
        if np.any(np.all(pts <= p, axis=1) & np.any(pts < p, axis=1)):
            keep[i] = False
        elif i and np.any(np.all(pts[:i] == p, axis=1)):
            keep[i] = False
    return keep


def pareto_filter(points, orientation="min") -> np.ndarray:
    """Nondominated subset in original order, first occurrence of duplicates kept."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        return pts.reshape(0, pts.shape[-1] if pts.ndim == 2 else 0)
    pts = as_point_set(pts)
    mask = nondominated_mask(to_minimization(pts, orientation))
    return pts[mask]


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    @property
    def volume(self) -> float:
        return float(np.prod(np.maximum(self.upper - self.lower, 0.0)))


@dataclass
class Decomposition:
    """Signed box list whose signed volume sum is the dominated volume.

    For ``m <= 2`` every sign is ``+1`` and the boxes are interior-disjoint
    strips. For ``m >= 3`` the rows are inclusion-exclusion terms.
    ``clipped`` flags input points that had to be moved onto the reference box.
    """

    lower: np.ndarray
    upper: np.ndarray
    signs: np.ndarray
    clipped: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def disjoint(self) -> bool:
        return bool(np.all(self.signs > 0))

    @property
    def volumes(self) -> np.ndarray:
        return np.prod(np.maximum(self.upper - self.lower, 0.0), axis=1)

    @property
    def volume(self) -> float:
        if len(self.signs) == 0:
            return 0.0
        return float(np.sum(self.signs * self.volumes))

    def boxes(self) -> list[Box]:
        return [Box(lo, hi) for lo, hi in zip(self.lower, self.upper)]


def _clip_to_reference(A: np.ndarray, r: np.ndarray):
    clipped = np.any(A > r, axis=1)
    return np.minimum(A, r), clipped


def _sorted_front_2d(A: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Nondominated, clipped points with positive extent, sorted by f1 ascending."""
    A = np.minimum(A, r)
    A = A[np.all(A < r, axis=1)]
    if len(A) == 0:
        return A
    order = np.lexsort((A[:, 1], A[:, 0]))
    A = A[order]
    best = np.minimum.accumulate(A[:, 1])
    keep = np.ones(len(A), dtype=bool)
    keep[1:] = A[1:, 1] < best[:-1]
    return A[keep]


def _inclusion_exclusion_terms(A: np.ndarray, r: np.ndarray):
    corners = np.zeros((0, A.shape[1]))
    signs = np.zeros(0)
    for p in A:
        joined = np.maximum(corners, p)
        live = np.all(joined < r, axis=1)
        corners = np.vstack([corners, p[None, :], joined[live]])
        signs = np.concatenate([signs, [1.0], -signs[live]])
    return corners, signs


def decompose_dominated_region(A, r) -> Decomposition:
    """Decompose the reference-bounded dominated region of ``A`` (minimization).

    Points beyond ``r`` in some coordinate are clipped onto the reference box
    and flagged in the result.
    """
    r = np.asarray(r, dtype=float)
    m = r.shape[0]
    A = as_point_set(A, m)
    clipped_A, clipped = _clip_to_reference(A, r)
    empty = Decomposition(np.zeros((0, m)), np.zeros((0, m)), np.zeros(0), clipped)
    if len(A) == 0:
        return empty
    if m == 1:
        lo = clipped_A.min(axis=0)
        return Decomposition(lo[None, :], r[None, :].copy(), np.ones(1), clipped)
    if m == 2:
        front = _sorted_front_2d(clipped_A, r)
        if len(front) == 0:
            return empty
        tops = np.concatenate([[r[1]], front[:-1, 1]])
        lower = front.copy()
        upper = np.column_stack([np.full(len(front), r[0]), tops])
        return Decomposition(lower, upper, np.ones(len(front)), clipped)
    live = clipped_A[np.all(clipped_A < r, axis=1)]
    live = live[nondominated_mask(live)] if len(live) else live
    if len(live) > INCLUSION_EXCLUSION_CAP:
        raise DecompositionCapError(
            f"{len(live)} nondominated points exceed the inclusion-exclusion cap "
            f"of {INCLUSION_EXCLUSION_CAP} for m={m}"
        )
    if len(live) == 0:
        return empty
    corners, signs = _inclusion_exclusion_terms(live, r)
    upper = np.broadcast_to(r, corners.shape).copy()
    return Decomposition(corners, upper, signs, clipped)


def hypervolume(A, r, orientation="min") -> float:
    """Reference-bounded dominated volume. Empty sets give 0."""
    A = to_minimization(as_point_set(A, np.size(r)), orientation)
    r = to_minimization(r, orientation)
    if len(A) == 0:
        return 0.0
    if r.shape[0] == 2:
        front = _sorted_front_2d(A, r)
        if len(front) == 0:
            return 0.0
        widths = r[0] - front[:, 0]
        heights = np.concatenate([[r[1]], front[:-1, 1]]) - front[:, 1]
        return float(np.sum(widths * heights))
    return max(decompose_dominated_region(A, r).volume, 0.0)


def hvi(y, A, r, orientation="min") -> float:
    """Hypervolume improvement ``HV(A + {y}) - HV(A)``, never negative."""
    y = np.asarray(y, dtype=float)
    A = as_point_set(A, y.shape[0])
    joined = np.vstack([A, y[None, :]])
    return max(hypervolume(joined, r, orientation) - hypervolume(A, r, orientation), 0.0)


def hvi_batch(Y, A, r) -> np.ndarray:
    """Hypervolume improvement of every row of ``Y`` against the same ``A`` (minimization).

    Two objectives use the cell decomposition of the nondominated region
    below the sorted front, which is fully vectorized over ``Y``.
    """
    Y = np.asarray(Y, dtype=float)
    r = np.asarray(r, dtype=float)
    A = as_point_set(A, r.shape[0])
    if r.shape[0] != 2:
        return _hvi_batch_inclusion_exclusion(Y, A, r)
    front = _sorted_front_2d(A, r)[None, :, :]
    return hvi_2d_sorted_batch(Y, np.broadcast_to(front, (len(Y),) + front.shape[1:]), r)


def _hvi_batch_inclusion_exclusion(Y, A, r, chunk: int = 8192) -> np.ndarray:
    # HVI(y) = vol([y, r]) - vol([y, r] & Dom(A)); the overlap reuses the signed
    # terms of A with every corner lifted to max(corner, y)
    Yc = np.minimum(Y, r)
    own = np.prod(np.maximum(r - Yc, 0.0), axis=1)
    live = np.minimum(A, r)
    live = live[np.all(live < r, axis=1)]
    if len(live) == 0:
        return own
    live = live[nondominated_mask(live)]
    if len(live) > INCLUSION_EXCLUSION_CAP:
        raise DecompositionCapError(
            f"{len(live)} nondominated points exceed the inclusion-exclusion cap of {INCLUSION_EXCLUSION_CAP}"
        )
    corners, signs = _inclusion_exclusion_terms(live, r)
    out = np.empty(len(Y))
    for s in range(0, len(Y), chunk):
        lifted = np.maximum(corners[None, :, :], Yc[s : s + chunk, None, :])
        out[s : s + chunk] = np.prod(np.maximum(r - lifted, 0.0), axis=2) @ signs
    return np.maximum(own - out, 0.0)


def hvi_2d_sorted_batch(Y, fronts, r) -> np.ndarray:
    """Row-wise 2-D hypervolume improvement with a per-row front.

    ``fronts`` has shape ``(N, n, 2)``; each row must be sorted by f1 ascending
    with f2 nonincreasing and lie inside the reference box (minimization).
    ``r`` is shared ``(2,)`` or per-row ``(N, 2)``.
    """
    Y = np.asarray(Y, dtype=float)
    fronts = np.asarray(fronts, dtype=float)
    r = np.broadcast_to(np.asarray(r, dtype=float), Y.shape)
    N, n = fronts.shape[0], fronts.shape[1]
    # cell i spans x in [x_i, x_{i+1}], y below u_i
    x_lo = np.concatenate([np.full((N, 1), -np.inf), fronts[:, :, 0]], axis=1)
    x_hi = np.concatenate([fronts[:, :, 0], r[:, :1]], axis=1)
    u = np.concatenate([r[:, 1:2], fronts[:, :, 1]], axis=1)
    y1 = np.minimum(Y[:, :1], r[:, :1])
    y2 = np.minimum(Y[:, 1:2], r[:, 1:2])
    width = np.maximum(x_hi - np.maximum(y1, x_lo), 0.0)
    height = np.maximum(u - y2, 0.0)
    return np.sum(width * height, axis=1)


@dataclass(frozen=True)
class SimplicialCone:
    """Cone generated by the columns of an invertible matrix."""

    generator: np.ndarray
    inverse: np.ndarray
    abs_determinant: float

    @classmethod
    def from_generators(cls, C) -> "SimplicialCone":
        C = np.asarray(C, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValueError("cone generator matrix must be square")
        det = float(np.linalg.det(C))
        if abs(det) < 1e-14:
            raise np.linalg.LinAlgError("singular cone generator matrix")
        L = np.linalg.inv(C)
        if not np.allclose(L @ C, np.eye(len(C)), atol=1e-10):
            raise np.linalg.LinAlgError("cone generator matrix is ill-conditioned")
        return cls(C, L, abs(det))

    @classmethod
    def from_angles(cls, angles) -> "SimplicialCone":
        """2-D cone spanned by the unit directions at the given angles (radians)."""
        a, b = angles
        return cls.from_generators([[np.cos(a), np.cos(b)], [np.sin(a), np.sin(b)]])

    def to_cone_coordinates(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.inverse.T


def cone_hypervolume(A, r, cone: SimplicialCone) -> float:
    """Measure of the cone-dominated region, via ordinary HV in cone coordinates."""
    A = as_point_set(A, np.size(r))
    if len(A) == 0:
        return 0.0
    LA = cone.to_cone_coordinates(A)
    Lr = cone.to_cone_coordinates(r)
    return cone.abs_determinant * hypervolume(LA, Lr)


@dataclass(frozen=True)
class DesirabilityMap:
    """Per-coordinate piecewise-linear nondecreasing maps ``T_j``.

    ``knots[j]`` and ``values[j]`` are the breakpoints of ``T_j``; the
    derivative kernel ``k_j`` is the piecewise-constant slope sequence.
    Repeated knots (zero-length pieces) are allowed and ignored.
    """

    knots: tuple
    values: tuple

    def __post_init__(self):
        knots = tuple(np.asarray(k, dtype=float) for k in self.knots)
        values = tuple(np.asarray(v, dtype=float) for v in self.values)
        if len(knots) != len(values):
            raise ValueError("knots and values must have one entry per objective")
        for k, v in zip(knots, values):
            if k.shape != v.shape or k.ndim != 1 or len(k) < 2:
                raise ValueError("each map needs matching 1-D knot/value arrays of length >= 2")
            if np.any(np.diff(k) < 0):
                raise ValueError("knots must be sorted")
            if np.any(np.diff(v) < 0):
                raise ValueError("desirability maps must be nondecreasing")
            if np.any((np.diff(k) == 0) & (np.diff(v) != 0)):
                raise ValueError("jump at a repeated knot")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "values", values)

    @classmethod
    def identity(cls, lower, upper) -> "DesirabilityMap":
        return cls(tuple([lo, hi] for lo, hi in zip(lower, upper)), tuple([lo, hi] for lo, hi in zip(lower, upper)))

    @classmethod
    def ramp(cls, aspiration, reservation, lower, upper, outer_slope=0.0) -> "DesirabilityMap":
        """Aspiration/reservation ramps: ``T_j`` rises from 0 at the aspiration
        level to 1 at the reservation level, with ``outer_slope`` outside.
        """
        knots, values = [], []
        for a, res, lo, hi in zip(aspiration, reservation, lower, upper):
            if not lo <= a < res <= hi:
                raise ValueError("need lower <= aspiration < reservation <= upper")
            knots.append([lo, a, res, hi])
            values.append([-outer_slope * (a - lo), 0.0, 1.0, 1.0 + outer_slope * (hi - res)])
        return cls(tuple(knots), tuple(values))

    @property
    def m(self) -> int:
        return len(self.knots)

    def slopes(self, j: int) -> np.ndarray:
        dk = np.diff(self.knots[j])
        dv = np.diff(self.values[j])
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(dk > 0, dv / np.where(dk > 0, dk, 1.0), np.nan)

    def kernel(self, y) -> np.ndarray:
        """Product density ``K(y) = prod_j k_j(y_j)`` (right-continuous slopes)."""
        y = np.atleast_2d(np.asarray(y, dtype=float))
        out = np.ones(len(y))
        for j in range(self.m):
            pieces = np.diff(self.knots[j]) > 0
            starts = self.knots[j][:-1][pieces]
            s = self.slopes(j)[pieces]
            idx = np.clip(np.searchsorted(starts, y[:, j], side="right") - 1, 0, len(s) - 1)
            out *= s[idx]
        return out

    def transform(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        if pts.shape[1] != self.m:
            raise DimensionError(f"map has {self.m} coordinates, points have {pts.shape[1]}")
        out = np.empty_like(pts)
        for j in range(self.m):
            k = self.knots[j]
            if np.any(pts[:, j] < k[0] - 1e-12) or np.any(pts[:, j] > k[-1] + 1e-12):
                raise ValueError(f"desirability map {j} undefined outside [{k[0]}, {k[-1]}]")
            out[:, j] = np.interp(pts[:, j], k, self.values[j])
        return out[0] if single else out


def kernel_admissible(d: DesirabilityMap, r) -> bool:
    """True iff every marginal kernel is finite and positive a.e. on its reference interval."""
    r = np.asarray(r, dtype=float)
    for j in range(d.m):
        k = d.knots[j]
        s = d.slopes(j)
        if not np.all(np.isfinite(d.values[j])):
            return False
        lo, hi = k[:-1], k[1:]
        overlaps = (hi > lo) & (lo < r[j])
        if np.any(s[overlaps] <= 0):
            return False
    return True


def whv_product_density(A, r, d: DesirabilityMap) -> float:
    """Weighted hypervolume with product density ``prod_j T_j'`` as HV of ``T(A)`` w.r.t. ``T(r)``."""
    r = np.asarray(r, dtype=float)
    A = as_point_set(A, r.shape[0])
    if len(A) == 0:
        return 0.0
    A = np.minimum(A, r)
    return hypervolume(d.transform(A), d.transform(r))


def reduced_magnitude_box(a: float, b: float) -> float:
    """Reduced magnitude ``(a + b)/2 + a*b/4`` of a 2-D box with side lengths ``a, b``."""
    if a < 0 or b < 0:
        raise ValueError("side lengths must be nonnegative")
    return (a + b) / 2.0 + a * b / 4.0
