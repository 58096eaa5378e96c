"""Sequential optimization loops: discrete/quadrature ER2I and EHVI.

The ER2I loop keeps one scalar surrogate per weight on the Tchebycheff
achievements ``z_ik = g_{w_k}(f(x_i))`` and an envelope ``h_k = min_i z_ik``.
The acquisition at ``x`` is ``sum_k q_k EI(h_k; m_k(x), s_k(x))``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.stats import qmc

from .ehvi import ehvi_exact
from .er2i_acquisition import er2i_discrete
from .pareto_geometry import hypervolume, pareto_filter
from .r2_indicator import (
    SimplexQuadratureRule,
    TchebycheffParams,
    discrete_r2,
    r2_value_exact_2d,
    tcheby_value,
    uniform_weights,
)
from .surrogate_gp import GPFitError, default_grid, fit, select_hyperparameters

MODES = ("discrete_er2i", "quadrature_er2i", "ehvi")
TRACE_COLUMNS = ("n_evals", "acquisition", "n_changed", "r2_discrete", "r2_exact_2d", "hv")


@dataclass
class Problem:
    evaluate: Callable[[np.ndarray], np.ndarray]
    lower: np.ndarray
    upper: np.ndarray
    m: int
    # dense sample of the true front, n points -> (n, m)
    known_front: Callable[[int], np.ndarray] | None = None

    def __post_init__(self):
        self.lower = np.atleast_1d(np.asarray(self.lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape or np.any(self.upper <= self.lower):
            raise ValueError("design box is degenerate")

    @property
    def dim(self) -> int:
        return self.lower.shape[0]


def benchmark_problem() -> Problem:
    """``f(x) = (x^2, (1 - x)^2)`` on ``[0, 1]``; the front is the whole image."""

    def f(x):
        x = float(np.asarray(x, dtype=float).reshape(-1)[0])
        return np.array([x * x, (1.0 - x) ** 2])

    def front(n):
        x = np.linspace(0.0, 1.0, n)
        return np.column_stack([x * x, (1.0 - x) ** 2])

    return Problem(f, [0.0], [1.0], 2, front)


@dataclass
class RunConfig:
    mode: str = "discrete_er2i"
    weights: np.ndarray | None = None
    rule: SimplexQuadratureRule | None = None
    utopian: np.ndarray = field(default_factory=lambda: np.zeros(2))
    reference: np.ndarray = field(default_factory=lambda: np.ones(2))
    budget: int = 30
    n_initial: int = 5
    seed: int = 0
    search_budget: int = 1000
    grid: list | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if not (self.budget >= self.n_initial >= 1):
            raise ValueError("need budget >= n_initial >= 1")
        self.utopian = np.asarray(self.utopian, dtype=float)
        self.reference = np.asarray(self.reference, dtype=float)
        if self.mode == "quadrature_er2i" and self.rule is None:
            raise ValueError("quadrature_er2i needs a quadrature rule")
        if self.weights is None and self.rule is None:
            self.weights = uniform_weights(11) if len(self.utopian) == 2 else None
        if self.weights is not None:
            self.weights = np.atleast_2d(np.asarray(self.weights, dtype=float))

    @property
    def params(self) -> TchebycheffParams:
        return TchebycheffParams(self.utopian, self.reference)

    def weight_set(self):
        """Weights and their sum coefficients used in the acquisition and R2 trace."""
        if self.mode == "quadrature_er2i":
            return self.rule.nodes, self.rule.weights
        W = self.weights
        return W, np.full(len(W), 1.0 / len(W))


@dataclass
class RunHistory:
    """One record per evaluation; acquisition is ``None`` for the initial design."""

    records: list = field(default_factory=list)
    n_initial: int = 0

    @property
    def designs(self) -> np.ndarray:
        return np.array([r["x"] for r in self.records])

    @property
    def objectives(self) -> np.ndarray:
        return np.array([r["y"] for r in self.records])

    @property
    def envelopes(self) -> np.ndarray:
        return np.array([r["envelope"] for r in self.records])

    def trace_rows(self) -> list:
        # the state after the initial design, then after every proposal
        return [r for r in self.records if r["n_evals"] >= self.n_initial]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records)

    def summary(self) -> dict:
        last = self.records[-1]
        return {
            "n_evals": last["n_evals"],
            "n_initial": self.n_initial,
            "r2_discrete": last["r2_discrete"],
            "r2_exact_2d": last["r2_exact_2d"],
            "hv": last["hv"],
            "envelope": last["envelope"],
        }

    def traces_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in self.trace_rows():
            w.writerow(["" if r[c] is None else (r[c] if isinstance(r[c], int) else repr(float(r[c])))
                        for c in TRACE_COLUMNS])
        return buf.getvalue()

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "history.jsonl").write_text(self.to_jsonl())
        (out / "summary.json").write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        (out / "traces.csv").write_text(self.traces_csv())


class RunAborted(RuntimeError):
    """Raised when a surrogate fit fails; ``history`` holds the records so far."""

    def __init__(self, msg, history: RunHistory):
        super().__init__(msg)
        self.history = history


def update_envelopes(values, new):
    """Entry-wise ``min(old, new)``; returns the new values and how many changed."""
    values = np.asarray(values, dtype=float)
    new = np.asarray(new, dtype=float)
    if values.shape != new.shape:
        raise ValueError("envelope and achievement lengths differ")
    changed = new < values
    return np.where(changed, new, values), int(np.sum(changed))


def propose_next(acquisition, lower, upper, search_budget: int = 1000, seed: int = 0):
    """Seeded multistart search: uniform candidates, then coordinate refinement.

    ``acquisition`` maps an ``(N, d)`` array to ``(N,)`` values. About 80% of
    the budget goes to the uniform stage. Ties keep the earliest candidate.
    Returns ``(x, value)``.
    """
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    d = lower.shape[0]
    rng = np.random.default_rng(seed)
    n_uniform = max(1, int(0.8 * search_budget))
    cand = lower + (upper - lower) * rng.random((n_uniform, d))
    vals = np.asarray(acquisition(cand), dtype=float)
    i = int(np.argmax(vals))
    x, best = cand[i].copy(), float(vals[i])

    left = search_budget - n_uniform
    step = 0.1 * (upper - lower)
    while left >= 2 * d and np.max(step) > 1e-9 * np.max(upper - lower):
        probes = np.repeat(x[None, :], 2 * d, axis=0)
        for k in range(d):
            probes[2 * k, k] += step[k]
            probes[2 * k + 1, k] -= step[k]
        probes = np.clip(probes, lower, upper)
        pv = np.asarray(acquisition(probes), dtype=float)
        left -= 2 * d
        j = int(np.argmax(pv))
        if pv[j] > best:
            x, best = probes[j].copy(), float(pv[j])
        else:
            step = 0.5 * step
    return x, best


def _initial_design(problem: Problem, n: int, seed: int) -> np.ndarray:
    sampler = qmc.LatinHypercube(d=problem.dim, seed=seed)
    return qmc.scale(sampler.random(n), problem.lower, problem.upper)


def _indicator_record(Y, W, q, p: TchebycheffParams, m: int):
    h = np.min(tcheby_value(Y[:, None, :], W[None, :, :], p), axis=0)
    r2 = float(h @ q)
    exact = r2_value_exact_2d(Y, p) if m == 2 else None
    hv = hypervolume(pareto_filter(Y), p.r)
    return r2, exact, hv


class _Loop:
    """Shared bookkeeping of both loops."""

    def __init__(self, problem: Problem, cfg: RunConfig):
        self.problem, self.cfg = problem, cfg
        self.p = cfg.params
        if cfg.weights is None and cfg.rule is None:
            raise ValueError("no weight set configured")
        self.W, self.q = cfg.weight_set()
        self.hist = RunHistory(n_initial=cfg.n_initial)
        self.X, self.Y = [], []
        self.env = None

    def add(self, x, acq=None):
        y = np.asarray(self.problem.evaluate(x), dtype=float)
        z = tcheby_value(y, self.W, self.p)
        if self.env is None:
            self.env, n_changed = z.copy(), len(z)
        else:
            self.env, n_changed = update_envelopes(self.env, z)
        self.X.append(np.asarray(x, dtype=float))
        self.Y.append(y)
        r2, exact, hv = _indicator_record(np.array(self.Y), self.W, self.q, self.p, self.problem.m)
        self.hist.records.append({
            "n_evals": len(self.Y),
            "x": self.X[-1].tolist(),
            "y": y.tolist(),
            "z": z.tolist(),
            "envelope": self.env.tolist(),
            "acquisition": None if acq is None else float(acq),
            "n_changed": n_changed,
            "r2_discrete": r2,
            "r2_exact_2d": exact,
            "hv": hv,
        })

    def initial(self):
        for x in _initial_design(self.problem, self.cfg.n_initial, self.cfg.seed):
            self.add(x)

    def grid(self):
        return self.cfg.grid if self.cfg.grid is not None else default_grid(self.problem.dim)

    def step_seed(self) -> int:
        return int(np.random.SeedSequence([self.cfg.seed, len(self.Y)]).generate_state(1)[0])


def _er2i_acquisition(model, env, q):
    def acq(X):
        mean, std = model.predict(X)
        return er2i_discrete(mean, std, env, q)

    return acq


def run_discrete_er2i_loop(problem: Problem, cfg: RunConfig) -> RunHistory:
    """Initial design, then refit the achievement surrogates, maximize ER2I, evaluate.

    All ``K`` surrogates share one kernel picked by marginal likelihood.

    :raises RunAborted: on surrogate fit failure, carrying the partial history.
    """
    if cfg.mode not in ("discrete_er2i", "quadrature_er2i"):
        raise ValueError("run_discrete_er2i_loop needs an ER2I mode")
    loop = _Loop(problem, cfg)
    loop.initial()
    while len(loop.Y) < cfg.budget:
        X = np.array(loop.X)
        Z = np.array([r["z"] for r in loop.hist.records])
        try:
            kernel = select_hyperparameters(X, Z, loop.grid())
            model = fit(X, Z, kernel)
        except GPFitError as exc:
            raise RunAborted(str(exc), loop.hist) from exc
        x, val = propose_next(_er2i_acquisition(model, loop.env, loop.q), problem.lower, problem.upper,
                              cfg.search_budget, loop.step_seed())
        loop.add(x, val)
    return loop.hist


def run_ehvi_loop(problem: Problem, cfg: RunConfig) -> RunHistory:
    """EHVI loop with one independently tuned GP per objective."""
    if cfg.mode != "ehvi" or problem.m != 2:
        raise ValueError("run_ehvi_loop needs mode 'ehvi' and two objectives")
    loop = _Loop(problem, cfg)
    loop.initial()
    r = loop.p.r
    while len(loop.Y) < cfg.budget:
        X, Y = np.array(loop.X), np.array(loop.Y)
        try:
            models = [fit(X, Y[:, j], select_hyperparameters(X, Y[:, j], loop.grid())) for j in range(problem.m)]
        except GPFitError as exc:
            raise RunAborted(str(exc), loop.hist) from exc
        front = pareto_filter(Y)

        def acq(Xc):
            preds = [mdl.predict(Xc) for mdl in models]
            mean = np.column_stack([pr.mean for pr in preds])
            std = np.column_stack([pr.std for pr in preds])
            return ehvi_exact(mean, std, front, r)

        x, val = propose_next(acq, problem.lower, problem.upper, cfg.search_budget, loop.step_seed())
        loop.add(x, val)
    return loop.hist


def run(problem: Problem, cfg: RunConfig) -> RunHistory:
    if cfg.mode == "ehvi":
        return run_ehvi_loop(problem, cfg)
    return run_discrete_er2i_loop(problem, cfg)


def dense_front_targets(problem: Problem, cfg: RunConfig, n: int = 10**4) -> dict:
    """Indicator values of a dense sample of the known front."""
    if problem.known_front is None:
        raise ValueError("problem has no known front")
    F = problem.known_front(n)
    W, q = cfg.weight_set()
    r2, exact, hv = _indicator_record(F, W, q, cfg.params, problem.m)
    return {"r2_discrete": r2, "r2_exact_2d": exact, "hv": hv}
