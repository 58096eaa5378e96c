"""Expected hypervolume improvement under independent Gaussian predictions.

The exact route rewrites EHVI as an ordinary hypervolume improvement after
coordinate-wise expected-improvement transforms (the PHVI representation).
Inputs are in minimization orientation and are normalized internally to
maximization with reference zero through ``v -> r - v``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import qmc

from .gaussian_kernels import ei_exceed, truncated_ei_exceed, truncation_mass, MIN_TRUNCATION_MASS, TruncationMassError
from .pareto_geometry import (
    DesirabilityMap,
    SimplicialCone,
    as_point_set,
    hvi,
    hvi_2d_sorted_batch,
    hvi_batch,
    kernel_admissible,
)


@dataclass
class PhviInstance:
    """Transformed reference ``r~`` and set ``A~`` in maximization-from-zero form."""

    transformed_reference: np.ndarray
    transformed_set: np.ndarray

    def value(self) -> float:
        """``HVI({r~}, A~)`` with reference at the origin (maximization)."""
        r_t = self.transformed_reference
        return hvi(-r_t, -self.transformed_set, np.zeros_like(r_t))


def _normalize(mean, A, r):
    r = np.asarray(r, dtype=float)
    A = as_point_set(A, r.shape[0])
    A = np.minimum(A, r)  # clip: points outside the reference box contribute nothing
    return r - np.asarray(mean, dtype=float), r - A


def phvi_transform(mean, std, A, r) -> PhviInstance:
    """Coordinate-wise EI transforms that turn EHVI into a deterministic HVI."""
    mu_n, A_n = _normalize(mean, A, r)
    std = np.broadcast_to(np.asarray(std, dtype=float), mu_n.shape)
    r_t = np.asarray(ei_exceed(0.0, mu_n, std), dtype=float)
    if len(A_n):
        A_t = r_t - np.asarray(ei_exceed(A_n, mu_n, std), dtype=float)
        A_t = np.clip(A_t, 0.0, r_t)
    else:
        A_t = np.zeros((0, len(r_t)))
    return PhviInstance(r_t, A_t)


def _transformed_2d_batch(mu_n, std, A_n, exceed):
    """Batched PHVI in 2-D; ``mu_n, std`` are ``(N, 2)`` normalized predictions."""
    N = len(mu_n)
    r_t = exceed(np.zeros_like(mu_n), mu_n, std)
    if len(A_n) == 0:
        return np.prod(r_t, axis=1)
    # sort the normalized set once: descending first coordinate in maximization
    # is ascending in the negated minimization frame used by the cell formula
    front = A_n[np.lexsort((-A_n[:, 1], -A_n[:, 0]))]
    A_t = r_t[:, None, :] - exceed(front[None, :, :], mu_n[:, None, :], std[:, None, :])
    A_t = np.clip(A_t, 0.0, r_t[:, None, :])
    neg = -A_t
    # Pareto-filter each row in the minimization frame: transforms are monotone,
    # so dominated rows of the original front stay dominated; keep them as
    # harmless duplicates by replacing with the running-min staircase.
    neg[:, :, 1] = np.minimum.accumulate(neg[:, :, 1], axis=1)
    return hvi_2d_sorted_batch(-r_t, neg, np.zeros((N, 2)))


def ehvi_exact(mean, std, A, r):
    """Exact EHVI (minimization) for independent Gaussian coordinates.

    ``mean`` and ``std`` may be ``(m,)`` for one prediction or ``(N, m)`` for a
    batch; two objectives are fully vectorized, higher dimensions loop and are
    limited by the inclusion-exclusion cap.
    """
    mean = np.asarray(mean, dtype=float)
    std = np.broadcast_to(np.asarray(std, dtype=float), mean.shape)
    single = mean.ndim == 1
    mu2 = np.atleast_2d(mean)
    sd2 = np.atleast_2d(std)
    r = np.asarray(r, dtype=float)
    if r.shape[0] == 2:
        mu_n, A_n = _normalize(mu2, A, r)
        vals = _transformed_2d_batch(mu_n, sd2, A_n, lambda t, m, s: np.asarray(ei_exceed(t, m, s)))
    else:
        vals = np.array([phvi_transform(mu, sd, A, r).value() for mu, sd in zip(mu2, sd2)])
    vals = np.maximum(vals, 0.0)
    return float(vals[0]) if single else vals


def ehvi_mc_oracle(mean, std, A, r, n_samples: int = 10**6, seed: int = 0, chunk: int = 250_000):
    """Monte-Carlo EHVI: average HVI of Gaussian samples. Returns ``(estimate, standard_error)``."""
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    mean = np.asarray(mean, dtype=float)
    std = np.broadcast_to(np.asarray(std, dtype=float), mean.shape)
    if np.all(std == 0):
        return float(hvi_batch(mean[None, :], A, r)[0]), 0.0
    rng = np.random.default_rng(seed)
    shift = None
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        Y = mean + std * rng.standard_normal((n, mean.shape[0]))
        v = hvi_batch(Y, A, r)
        if shift is None:
            shift = float(v.mean())  # shifted sums keep the variance accurate
        v = v - shift
        total += v.sum()
        total_sq += np.dot(v, v)
        done += n
    mean_shifted = total / n_samples
    var = max((total_sq - n_samples * mean_shifted**2) / (n_samples - 1), 0.0)
    return float(shift + mean_shifted), float(np.sqrt(var / n_samples))


def ehvi_weighted(mean_t, std_t, A, r, d: DesirabilityMap):
    """EHVI of the product-density weighted hypervolume.

    The Gaussian prediction ``(mean_t, std_t)`` is posed in desirability
    coordinates; ``A`` and ``r`` are in original objective units.
    """
    r = np.asarray(r, dtype=float)
    if not kernel_admissible(d, r):
        warnings.warn("desirability kernel is not positive a.e.; strict compliance is lost", stacklevel=2)
    A = as_point_set(A, r.shape[0])
    A_t = d.transform(np.minimum(A, r)) if len(A) else A
    return ehvi_exact(mean_t, std_t, A_t, d.transform(r))


@dataclass
class ConeEHVI:
    value: float
    path: str  # "exact" or "monte_carlo"
    standard_error: float = 0.0


def ehvi_cone(mean, std, A, r, cone: SimplicialCone, n_samples: int = 200_000, seed: int = 0,
              independence_rtol: float = 1e-12) -> ConeEHVI:
    """Cone-order EHVI as ``|det C|`` times EHVI in cone coordinates ``L y``.

    The transformed prediction stays independent only when ``L diag(s^2) L^T``
    is diagonal; otherwise Monte Carlo in cone coordinates is used.
    """
    mean = np.asarray(mean, dtype=float)
    std = np.broadcast_to(np.asarray(std, dtype=float), mean.shape)
    L = cone.inverse
    cov = L @ np.diag(std**2) @ L.T
    diag = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    off = cov - np.diag(np.diag(cov))
    scale = np.outer(diag, diag)
    independent = np.all(np.abs(off) <= independence_rtol * scale + 1e-300)
    LA = cone.to_cone_coordinates(as_point_set(A, mean.shape[0]))
    Lr = cone.to_cone_coordinates(r)
    Lmu = L @ mean
    if independent:
        return ConeEHVI(cone.abs_determinant * ehvi_exact(Lmu, diag, LA, Lr), "exact")
    rng = np.random.default_rng(seed)
    Y = mean + std * rng.standard_normal((n_samples, mean.shape[0]))
    v = hvi_batch(cone.to_cone_coordinates(Y), LA, Lr) * cone.abs_determinant
    return ConeEHVI(float(v.mean()), "monte_carlo", float(v.std(ddof=1) / np.sqrt(n_samples)))


def _normalized_roi(roi_lower, roi_upper, r):
    # maximization frame v = r - y flips the box
    return r - np.asarray(roi_upper, dtype=float), r - np.asarray(roi_lower, dtype=float)


def tehvi(mean, std, A, r, roi_lower, roi_upper):
    """EHVI under the prediction conditioned on the region-of-interest box.

    :raises TruncationMassError: if some coordinate has no mass in the box.
    """
    mean = np.asarray(mean, dtype=float)
    std = np.broadcast_to(np.asarray(std, dtype=float), mean.shape)
    single = mean.ndim == 1
    mu2, sd2 = np.atleast_2d(mean), np.atleast_2d(std)
    r = np.asarray(r, dtype=float)
    lo_n, hi_n = _normalized_roi(roi_lower, roi_upper, r)
    mu_n, A_n = _normalize(mu2, A, r)

    def exceed(t, m, s):
        return np.asarray(truncated_ei_exceed(t, m, s, lo_n, hi_n))

    if r.shape[0] == 2:
        vals = _transformed_2d_batch(mu_n, sd2, A_n, exceed)
    else:
        vals = []
        for m_row, s_row in zip(mu_n, sd2):
            r_t = exceed(0.0, m_row, s_row)
            A_t = np.clip(r_t - exceed(A_n, m_row, s_row), 0.0, r_t) if len(A_n) else np.zeros((0, len(r)))
            vals.append(PhviInstance(r_t, A_t).value())
        vals = np.array(vals)
    vals = np.maximum(vals, 0.0)
    return float(vals[0]) if single else vals


def sample_truncated_normal(mean, std, lower, upper, size, rng) -> np.ndarray:
    """Independent truncated-normal draws of shape ``(size, m)`` by inverse CDF."""
    from scipy.stats import truncnorm

    mean = np.asarray(mean, dtype=float)
    std = np.asarray(std, dtype=float)
    a = (np.asarray(lower, dtype=float) - mean) / std
    b = (np.asarray(upper, dtype=float) - mean) / std
    return truncnorm.rvs(a, b, loc=mean, scale=std, size=(size, mean.shape[0]), random_state=rng)


def tehvi_mc_oracle(mean, std, A, r, roi_lower, roi_upper, n_samples: int = 10**6, seed: int = 0):
    """Monte-Carlo TEHVI from truncated samples. Returns ``(estimate, standard_error)``."""
    rng = np.random.default_rng(seed)
    mass = truncation_mass(mean, std, roi_lower, roi_upper)
    if np.any(mass <= MIN_TRUNCATION_MASS):
        raise TruncationMassError("truncation mass underflow")
    Y = sample_truncated_normal(mean, std, roi_lower, roi_upper, n_samples, rng)
    v = hvi_batch(Y, A, r)
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(n_samples))


@dataclass
class CounterexampleSearch:
    """Settings for the seeded variance-monotonicity search.

    ``kind`` selects the acquisition under test (``"tehvi"`` or ``"ehvi"``);
    ``embedded_slice`` restricts the search to instances whose second
    coordinate is a deterministic slice, so HVI factorizes into a 1-D problem.
    """

    kind: str = "tehvi"
    n_trials: int = 10**5
    seed: int = 0
    embedded_slice: bool = False
    tol: float = 1e-10
    n_points: int = 3


@dataclass
class VarianceCounterexample:
    mu: list
    sigma: list
    sigma_prime: list
    A: list
    r: list
    roi: list
    tehvi_lo: float  # value at the smaller standard deviation sigma
    tehvi_hi: float  # value at the larger standard deviation sigma_prime
    seed: int
    kind: str = "tehvi"
    trials: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "VarianceCounterexample":
        return cls(**json.loads(text))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "VarianceCounterexample":
        return cls.from_json(Path(path).read_text())


class SearchBudgetExhausted(RuntimeError):
    pass


def _candidate_instances(cfg: CounterexampleSearch):
    """Latin-hypercube candidates over a fixed parameter box (2 objectives)."""
    n_pts = cfg.n_points
    dim = 2 + 2 + 1 + 1 + 2 * n_pts + 4
    sampler = qmc.LatinHypercube(d=dim, seed=cfg.seed)
    U = sampler.random(cfg.n_trials)
    r = np.array([1.0, 1.0])
    for u in U:
        mu = -0.5 + 2.0 * u[0:2]
        sigma = 0.02 + 1.5 * u[2:4]
        coord = int(u[4] * 2) % 2
        factor = 1.05 + 3.0 * u[5]
        A = u[6 : 6 + 2 * n_pts].reshape(n_pts, 2)
        box = u[6 + 2 * n_pts :]
        roi_lo = -0.5 + box[0:2]
        roi_hi = roi_lo + 0.1 + 1.4 * box[2:4]
        if cfg.embedded_slice:
            # second coordinate frozen far inside the improvement range
            coord = 0
            mu[1], sigma[1] = -0.4, 0.0
            roi_lo[1], roi_hi[1] = -0.5, 0.5
            A = np.column_stack([A[:1, 0], [0.8]])
        sigma_prime = sigma.copy()
        sigma_prime[coord] = sigma[coord] * factor if sigma[coord] > 0 else factor
        yield mu, sigma, sigma_prime, A, r, (roi_lo, roi_hi)


def find_tehvi_variance_counterexample(cfg: CounterexampleSearch | None = None) -> VarianceCounterexample:
    """Seeded search for an instance where a larger std strictly lowers the acquisition.

    :raises SearchBudgetExhausted: if no counterexample appears within the budget.
    """
    cfg = cfg or CounterexampleSearch()
    for trial, (mu, sigma, sigma_prime, A, r, (lo, hi)) in enumerate(_candidate_instances(cfg), 1):
        try:
            if cfg.kind == "tehvi":
                v_lo = tehvi(mu, sigma, A, r, lo, hi)
                v_hi = tehvi(mu, sigma_prime, A, r, lo, hi)
            elif cfg.kind == "ehvi":
                v_lo = ehvi_exact(mu, sigma, A, r)
                v_hi = ehvi_exact(mu, sigma_prime, A, r)
            else:
                raise ValueError(f"unknown kind {cfg.kind!r}")
        except TruncationMassError:
            continue
        if v_hi < v_lo - 10 * cfg.tol:
            return VarianceCounterexample(
                mu=mu.tolist(), sigma=sigma.tolist(), sigma_prime=sigma_prime.tolist(),
                A=A.tolist(), r=r.tolist(), roi=[lo.tolist(), hi.tolist()],
                tehvi_lo=float(v_lo), tehvi_hi=float(v_hi), seed=cfg.seed, kind=cfg.kind, trials=trial,
            )
    raise SearchBudgetExhausted(f"no {cfg.kind} variance counterexample in {cfg.n_trials} trials")
