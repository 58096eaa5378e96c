"""Scalar Gaussian machinery shared by every expectation in the package.

All functions broadcast over numpy arrays. A standard deviation of exactly
zero is a point mass and the formulas take their analytic limit.
"""
from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy import special

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)

#: Truncation masses at or below this are treated as numerically empty.
MIN_TRUNCATION_MASS = 1e-300


class TruncationMassError(ValueError):
    """The truncation box carries (numerically) no probability mass."""


class Gaussian1D(NamedTuple):
    """Mean and standard deviation of a scalar Gaussian (arrays allowed)."""

    mean: np.ndarray | float
    std: np.ndarray | float


def std_normal_cdf(u):
    # erfc keeps full relative accuracy in the lower tail
    return 0.5 * special.erfc(-np.asarray(u, dtype=float) / _SQRT2)


def std_normal_sf(u):
    return 0.5 * special.erfc(np.asarray(u, dtype=float) / _SQRT2)


def std_normal_pdf(u):
    u = np.asarray(u, dtype=float)
    with np.errstate(over="ignore"):
        return _INV_SQRT_2PI * np.exp(-0.5 * u * u)


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def ei_shortfall(c, mean, std):
    """Expected shortfall below a threshold, ``E[(c - Y)_+]`` for ``Y ~ N(mean, std^2)``.

    This is the minimization expected improvement with incumbent ``c``.
    """
    c, mean, std = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (c, mean, std)))
    diff = np.array(c - mean, ndmin=1)
    std = np.array(std, ndmin=1)
    out = np.maximum(diff, 0.0)
    pos = std > 0
    if np.any(pos):
        s = std[pos]
        with np.errstate(over="ignore"):
            u = diff[pos] / s
        out[pos] = np.maximum(diff[pos] * std_normal_cdf(u) + s * std_normal_pdf(u), 0.0)
    return _scalar_or_array(out.reshape(c.shape))


def ei_exceed(t, mean, std):
    """Expected exceedance ``E[(Y - t)_+]`` (maximization EI with threshold ``t``)."""
    return ei_shortfall(-np.asarray(t, dtype=float), -np.asarray(mean, dtype=float), std)


def _mass_between(lo, hi):
    """``Phi(hi) - Phi(lo)`` for standardized ``lo <= hi``, accurate in both tails."""
    lo, hi = np.broadcast_arrays(lo, hi)
    upper_tail = lo > 0
    return np.where(
        upper_tail,
        std_normal_sf(lo) - std_normal_sf(hi),
        std_normal_cdf(hi) - std_normal_cdf(lo),
    )


def truncation_mass(mean, std, lower, upper):
    mean, std, lower, upper = (
        np.array(v, ndmin=1) for v in np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (mean, std, lower, upper)))
    )
    mass = np.zeros(mean.shape)
    pos = std > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        mass[pos] = _mass_between((lower[pos] - mean[pos]) / std[pos], (upper[pos] - mean[pos]) / std[pos])
    point = ~pos
    mass[point] = ((lower[point] <= mean[point]) & (mean[point] <= upper[point])).astype(float)
    return mass


def truncated_ei_exceed(t, mean, std, lower, upper):
    """``E[(Y - t)_+ | lower <= Y <= upper]`` for ``Y ~ N(mean, std^2)``.

    Closed form from the first partial moment of the normal distribution.
    Infinite bounds are allowed.

    :raises TruncationMassError: if the box carries no mass under the base law.
    """
    arrays = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, mean, std, lower, upper)))
    shape = arrays[0].shape
    t, mean, std, lower, upper = (np.array(v, ndmin=1) for v in arrays)
    if np.any(lower >= upper):
        raise ValueError("truncation bounds must satisfy lower < upper")
    mass = truncation_mass(mean, std, lower, upper)
    if np.any(mass <= MIN_TRUNCATION_MASS):
        raise TruncationMassError("truncation mass underflow")

    out = np.zeros(t.shape)
    pos = std > 0
    if np.any(pos):
        m, s, lo, hi, tt = mean[pos], std[pos], lower[pos], upper[pos], t[pos]
        start = np.maximum(tt, lo)
        active = start < hi
        val = np.zeros(m.shape)
        if np.any(active):
            m, s, hi, tt, start = m[active], s[active], hi[active], tt[active], start[active]
            tau = (start - m) / s
            beta = (hi - m) / s
            pdf_hi = np.where(np.isfinite(beta), std_normal_pdf(np.where(np.isfinite(beta), beta, 0.0)), 0.0)
            num = (m - tt) * _mass_between(tau, beta) + s * (std_normal_pdf(tau) - pdf_hi)
            val[active] = num / mass[pos][active]
        out[pos] = np.maximum(val, 0.0)
    point = ~pos
    out[point] = np.maximum(mean[point] - t[point], 0.0)
    return _scalar_or_array(out.reshape(shape))


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-9, max_depth: int = 50) -> float:
    """Adaptive Simpson quadrature of a scalar function on ``[a, b]``.

    Uses the usual Richardson-corrected local error test with an explicit
    stack instead of recursion.
    """
    if b <= a:
        return 0.0
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    total = 0.0
    stack = [(a, b, fa, fm, fb, whole, tol, 0)]
    while stack:
        lo, hi, flo, fmid, fhi, est, eps, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        fl, fr = f(0.5 * (lo + mid)), f(0.5 * (mid + hi))
        left = (mid - lo) / 6.0 * (flo + 4.0 * fl + fmid)
        right = (hi - mid) / 6.0 * (fmid + 4.0 * fr + fhi)
        delta = left + right - est
        if depth >= max_depth or abs(delta) <= 15.0 * eps:
            total += left + right + delta / 15.0
        else:
            stack.append((lo, mid, flo, fl, fmid, left, 0.5 * eps, depth + 1))
            stack.append((mid, hi, fmid, fr, fhi, right, 0.5 * eps, depth + 1))
    return total


def shortfall_layer_cake(c: float, mean: float, std: float, tol: float = 1e-10) -> float:
    """``E[(c - Y)_+]`` as the integral of ``P(Y <= t)`` over ``t < c``.

    Independent numerical route to :func:`ei_shortfall`. The infinite lower
    limit is cut where the CDF drops below ``1e-16`` relative to the scale.
    """
    if std <= 0:
        return max(c - mean, 0.0)
    lower = mean - 9.0 * std  # Phi(-9) ~ 1e-19
    if c <= lower:
        return 0.0

    def cdf(t):
        return float(std_normal_cdf((t - mean) / std))

    return adaptive_simpson(cdf, lower, c, tol=tol)
