"""Expected R2-indicator improvement (ER2I).

Two surrogate views are supported. With Gaussian *achievement* marginals the
integrand at each weight is a scalar expected improvement, giving a finite
sum (discrete weights) or a quadrature sum (integral R2). With independent
Gaussian *objectives* the per-weight expectation is a one-dimensional
integral of a product of normal CDFs.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .gaussian_kernels import adaptive_simpson, ei_shortfall, std_normal_cdf
from .r2_indicator import (
    PiecewiseLinearEnvelope,
    SimplexQuadratureRule,
    TchebycheffParams,
    _density,
    envelope_value,
    tcheby_value,
)


class BoundaryWeightError(ValueError):
    """A weight on the simplex boundary was passed where an interior weight is required."""


@dataclass
class AchievementSurrogateView:
    """Gaussian marginals of the achievement process at a fixed design.

    Both callables take an ``(L, m)`` weight array and return ``(L,)``.
    """

    mean_at: Callable[[np.ndarray], np.ndarray]
    std_at: Callable[[np.ndarray], np.ndarray]


@dataclass
class EnvelopeState:
    """Incumbent envelope values ``h_{n,k}`` at a finite weight set."""

    weights: np.ndarray
    values: np.ndarray

    @classmethod
    def from_points(cls, Y, weights, p: TchebycheffParams) -> "EnvelopeState":
        W = np.atleast_2d(np.asarray(weights, dtype=float))
        return cls(W, envelope_value(Y, W, p))

    def copy(self) -> "EnvelopeState":
        return EnvelopeState(self.weights.copy(), self.values.copy())


def delta_improvement(y, A, w, p: TchebycheffParams):
    """Clipped envelope gain ``(h_A(w) - g_w(y))_+`` of adding ``y``."""
    return np.maximum(envelope_value(A, w, p) - tcheby_value(y, w, p), 0.0)


def er2i_discrete(means, stds, thresholds, quad_weights=None):
    """Average (or weighted sum) of scalar EIs ``EI(h_k; m_k, s_k)``.

    ``means``/``stds`` may carry a leading batch axis of candidates, i.e.
    shape ``(N, K)``; ``thresholds`` has shape ``(K,)``.
    """
    means = np.asarray(means, dtype=float)
    stds = np.asarray(stds, dtype=float)
    h = np.asarray(thresholds, dtype=float)
    if means.shape[-1] != h.shape[-1] or stds.shape[-1] != h.shape[-1]:
        raise ValueError("surrogate and envelope lengths differ")
    ei = np.asarray(ei_shortfall(h, means, stds))
    if quad_weights is None:
        out = ei.mean(axis=-1)
    else:
        out = ei @ np.asarray(quad_weights, dtype=float)
    return float(out) if np.ndim(out) == 0 else out


def er2i_quadrature(surr: AchievementSurrogateView, env, rule: SimplexQuadratureRule, rho=None) -> float:
    """``sum_l w_l EI(h_A(l); m(l), s(l)) rho(l)`` over the rule's nodes.

    ``env`` is a :class:`PiecewiseLinearEnvelope` (two objectives), an
    :class:`EnvelopeState` defined at the rule's nodes, or an array of
    envelope values at the nodes.
    """
    rho = _density(rho)
    nodes = rule.nodes
    if isinstance(env, PiecewiseLinearEnvelope):
        h = env(nodes[:, 0])
    elif isinstance(env, EnvelopeState):
        h = env.values
    else:
        h = np.asarray(env, dtype=float)
    if h.shape != (len(nodes),):
        raise ValueError("envelope values do not match the rule's nodes")
    ei = np.asarray(ei_shortfall(h, surr.mean_at(nodes), surr.std_at(nodes)))
    return float(np.sum(rule.weights * ei * rho(nodes)))


def _integrand_bounds(mean, std, w, z, h):
    # below t_low some factor is Phi(-10) or smaller
    t_low = float(np.max(w * (mean - z - 10.0 * std)))
    return t_low, h


def objective_gaussian_integrand(mean, std, A, w, p: TchebycheffParams, tol: float = 1e-9) -> float:
    """``E[(h_A(w) - g_w(Y))_+]`` for independent Gaussian objectives ``Y``.

    Layer-cake form: the integral over ``t < h_A(w)`` of
    ``prod_i Phi((z_i + t / w_i - mean_i) / std_i)``.

    :raises BoundaryWeightError: for weights with a zero component.
    """
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise BoundaryWeightError("objective-Gaussian integrand needs an interior weight")
    mean = p.canon(np.asarray(mean, dtype=float))
    std = np.asarray(std, dtype=float)
    if np.any(std <= 0):
        raise ValueError("objective standard deviations must be positive")
    z = p.z
    h = envelope_value(A, w, p)
    t_low, t_high = _integrand_bounds(mean, std, w, z, h)
    if t_high <= t_low:
        return 0.0

    def f(t):
        return float(np.prod(std_normal_cdf((z + t / w - mean) / std)))

    return max(adaptive_simpson(f, t_low, t_high, tol=tol), 0.0)


def _weights_and_nodes(rule_or_weights):
    if isinstance(rule_or_weights, SimplexQuadratureRule):
        return rule_or_weights.nodes, rule_or_weights.weights
    W = np.atleast_2d(np.asarray(rule_or_weights, dtype=float))
    return W, np.full(len(W), 1.0 / len(W))


def er2i_mc_oracle(mean, std, A, p: TchebycheffParams, rule_or_weights, rho=None,
                   n_samples: int = 10**5, seed: int = 0, chunk: int = 4096):
    """Monte-Carlo ER2I under independent Gaussian objectives.

    Each sample's envelope gain is integrated over weights with the given rule
    (or averaged over a discrete weight set). Returns ``(estimate, standard_error)``.
    """
    rho = _density(rho)
    nodes, qw = _weights_and_nodes(rule_or_weights)
    coef = qw * rho(nodes)
    h = envelope_value(A, nodes, p)
    mean = np.asarray(mean, dtype=float)
    std = np.broadcast_to(np.asarray(std, dtype=float), mean.shape)
    rng = np.random.default_rng(seed)
    vals = np.empty(n_samples)
    for s in range(0, n_samples, chunk):
        n = min(chunk, n_samples - s)
        Y = mean + std * rng.standard_normal((n, mean.shape[0]))
        G = tcheby_value(Y[:, None, :], nodes[None, :, :], p)
        vals[s : s + n] = np.maximum(h[None, :] - G, 0.0) @ coef
    if np.all(std == 0):
        return float(vals[0]), 0.0
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n_samples))


def objective_gaussian_er2i(mean, std, A, p: TchebycheffParams, rule: SimplexQuadratureRule, rho=None) -> float:
    """Weight quadrature of :func:`objective_gaussian_integrand` (interior nodes only)."""
    rho = _density(rho)
    vals = np.array([objective_gaussian_integrand(mean, std, A, w, p) for w in rule.nodes])
    return float(np.sum(rule.weights * vals * rho(rule.nodes)))


@dataclass
class ObjectiveVarianceInstance:
    """An instance of the objective-Gaussian integrand under a std perturbation."""

    mean: list
    std: list
    std_prime: list
    A: list
    weight: list
    utopian: list
    value_lo: float  # at ``std``
    value_hi: float  # at ``std_prime`` (one coordinate larger)
    monotone: bool
    seed: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n")

    @classmethod
    def load(cls, path) -> "ObjectiveVarianceInstance":
        return cls(**json.loads(Path(path).read_text()))


def find_objective_variance_instance(violation: bool = True, seed: int = 0, n_trials: int = 2000,
                                     tol: float = 1e-7) -> ObjectiveVarianceInstance:
    """Seeded search over two-objective instances of the integrand.

    With ``violation=True`` the envelope threshold is placed above the scaled
    means, where a larger objective std can lower the expectation; otherwise
    it is placed below them, where the expectation should grow with the std.

    :raises RuntimeError: if nothing qualifying is found.
    """
    rng = np.random.default_rng(seed)
    p = TchebycheffParams([0.0, 0.0])
    for _ in range(n_trials):
        w1 = rng.uniform(0.15, 0.85)
        w = np.array([w1, 1.0 - w1])
        mean = rng.uniform(0.1, 1.0, size=2)
        std = rng.uniform(0.05, 0.5, size=2)
        if violation:
            level = float(np.max(w * mean)) + rng.uniform(0.5, 2.0)
        else:
            # below every scaled mean: each CDF factor grows with its std
            level = float(np.min(w * mean)) * rng.uniform(0.6, 0.95)
        A = np.array([[level / w[0], level / w[1]]])
        i = int(rng.integers(2))
        std_prime = std.copy()
        std_prime[i] *= rng.uniform(1.2, 3.0)
        lo = objective_gaussian_integrand(mean, std, A, w, p)
        hi = objective_gaussian_integrand(mean, std_prime, A, w, p)
        monotone = hi >= lo - tol
        qualifies = (hi < lo - tol) if violation else (monotone and lo > 1e-6)
        if qualifies:
            return ObjectiveVarianceInstance(
                mean.tolist(), std.tolist(), std_prime.tolist(), A.tolist(), w.tolist(), [0.0, 0.0],
                float(lo), float(hi), bool(monotone), seed,
            )
    raise RuntimeError("no qualifying objective-Gaussian instance found")
