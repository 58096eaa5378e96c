"""Small exact Gaussian-process regression with a squared-exponential kernel.

Targets may have several columns that share one kernel and therefore one
Cholesky factorization; this is how the per-weight achievement surrogates
are fitted in a single solve.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .gaussian_kernels import Gaussian1D

MAX_JITTER = 1e-6
VARIANCE_CLAMP_TOL = 1e-12


class GPFitError(RuntimeError):
    """The regularized kernel matrix could not be factorized."""


@dataclass(frozen=True)
class Kernel:
    signal_variance: float
    length_scales: tuple
    noise_variance: float = 0.0
    jitter: float = 1e-10

    def __post_init__(self):
        ls = tuple(float(v) for v in np.atleast_1d(self.length_scales))
        object.__setattr__(self, "length_scales", ls)
        if self.signal_variance <= 0 or min(ls) <= 0:
            raise ValueError("signal variance and length scales must be positive")
        if self.noise_variance < 0 or self.jitter < 0:
            raise ValueError("noise variance and jitter must be nonnegative")

    def __call__(self, X1, X2) -> np.ndarray:
        ls = np.asarray(self.length_scales)
        a = np.atleast_2d(X1) / ls
        b = np.atleast_2d(X2) / ls
        d2 = np.sum(a * a, 1)[:, None] + np.sum(b * b, 1)[None, :] - 2.0 * a @ b.T
        return self.signal_variance * np.exp(-0.5 * np.maximum(d2, 0.0))


def _as_inputs(x, dim=None) -> np.ndarray:
    X = np.asarray(x, dtype=float)
    if X.ndim <= 1:
        X = X.reshape(-1, 1) if dim in (None, 1) else X.reshape(1, -1)
    return X


@dataclass(frozen=True)
class GPModel:
    inputs: np.ndarray
    targets: np.ndarray  # (n, c), raw scale
    kernel: Kernel
    chol: np.ndarray  # lower factor of K + (noise + jitter) I
    alpha: np.ndarray  # (n, c), standardized scale
    offset: np.ndarray  # (c,)
    scale: np.ndarray  # (c,)
    jitter_used: float

    @property
    def n_outputs(self) -> int:
        return self.targets.shape[1]

    def predict(self, x) -> Gaussian1D:
        """Posterior mean and std at the rows of ``x``.

        Shapes are ``(q, c)`` for ``c`` target columns, squeezed to ``(q,)``
        when the model was fitted with a single column.
        """
        Xq = _as_inputs(x, self.inputs.shape[1])
        Ks = self.kernel(Xq, self.inputs)
        mean = Ks @ self.alpha
        v = linalg.solve_triangular(self.chol, Ks.T, lower=True)
        var = self.kernel.signal_variance - np.sum(v * v, axis=0)
        var = np.where(var < VARIANCE_CLAMP_TOL, np.maximum(var, 0.0), var)
        std = np.sqrt(var)[:, None] * self.scale
        mean = mean * self.scale + self.offset
        if self.n_outputs == 1:
            return Gaussian1D(mean[:, 0], std[:, 0])
        return Gaussian1D(mean, std)

    def log_marginal_likelihood(self) -> float:
        """Sum over target columns, on the standardized scale."""
        y = (self.targets - self.offset) / self.scale
        n = len(y)
        logdet = 2.0 * np.sum(np.log(np.diag(self.chol)))
        per_col = -0.5 * np.sum(y * self.alpha, axis=0) - 0.5 * logdet - 0.5 * n * np.log(2 * np.pi)
        return float(np.sum(per_col))


def fit(inputs, targets, kernel: Kernel, standardize: bool = True) -> GPModel:
    """Factorize the kernel matrix, escalating jitter by 10x up to ``MAX_JITTER``.

    :raises GPFitError: if the matrix is still not positive definite.
    """
    X = _as_inputs(inputs)
    Y = np.asarray(targets, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if len(X) < 1 or len(X) != len(Y):
        raise ValueError("need at least one training point and matching targets")
    if len(kernel.length_scales) not in (1, X.shape[1]):
        raise ValueError("length-scale count does not match the design dimension")
    if standardize:
        offset = Y.mean(axis=0)
        scale = Y.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
    else:
        offset, scale = np.zeros(Y.shape[1]), np.ones(Y.shape[1])
    Ys = (Y - offset) / scale

    K = kernel(X, X)
    jitter = kernel.jitter
    while True:
        try:
            L = linalg.cholesky(K + (kernel.noise_variance + jitter) * np.eye(len(X)), lower=True)
            break
        except linalg.LinAlgError:
            if jitter >= MAX_JITTER:
                raise GPFitError("kernel matrix not positive definite after jitter escalation") from None
            jitter = min(max(jitter, 1e-12) * 10.0, MAX_JITTER)
    alpha = linalg.cho_solve((L, True), Ys)
    model = GPModel(X, Y, kernel, L, alpha, offset, scale, jitter)
    if not np.isfinite(model.log_marginal_likelihood()):
        raise GPFitError("log marginal likelihood is not finite")
    return model


def predict(model: GPModel, x) -> Gaussian1D:
    return model.predict(x)


def default_grid(dim: int = 1):
    sv = (0.5, 1.0, 2.0)
    ls = (0.05, 0.1, 0.2, 0.4, 0.8)
    noise = (1e-8, 1e-4)
    return [(s, (l,) * dim, n) for s in sv for l in ls for n in noise]


def select_hyperparameters(inputs, targets, grid, standardize: bool = True) -> Kernel:
    """Grid member with the largest log marginal likelihood (first wins on ties).

    Grid entries are ``(signal_variance, length_scale(s), noise_variance)``.

    :raises GPFitError: if no grid entry can be fitted.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty hyperparameter grid")
    best, best_lml = None, -np.inf
    for sv, ls, noise in grid:
        k = Kernel(float(sv), ls, float(noise))
        try:
            lml = fit(inputs, targets, k, standardize).log_marginal_likelihood()
        except GPFitError:
            continue
        if lml > best_lml:
            best, best_lml = k, lml
    if best is None:
        raise GPFitError("no grid entry could be fitted")
    return best

