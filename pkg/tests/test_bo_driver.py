import json

import numpy as np
import pytest

from pareto_acq.bo_driver import (
    TRACE_COLUMNS,
    Problem,
    RunAborted,
    RunConfig,
    benchmark_problem,
    dense_front_targets,
    propose_next,
    run,
    update_envelopes,
)
from pareto_acq.r2_indicator import TchebycheffParams, discrete_r2_improvement, tcheby_value, uniform_weights
from pareto_acq.surrogate_gp import GPFitError


def test_update_envelopes():
    vals, n = update_envelopes([0.5, 0.3, 0.2], [0.4, 0.3, 0.9])
    assert vals.tolist() == [0.4, 0.3, 0.2] and n == 1
    with pytest.raises(ValueError):
        update_envelopes([0.1], [0.1, 0.2])


def test_propose_constant_acquisition_keeps_first_candidate():
    x, v = propose_next(lambda X: np.zeros(len(X)), [0.0], [1.0], 100, seed=4)
    first = np.random.default_rng(4).random((80, 1))[0]
    assert np.array_equal(x, first) and v == 0.0


def test_propose_quadratic_argmax():
    for seed in range(5):
        x, _ = propose_next(lambda X: -(X[:, 0] - 0.37) ** 2, [0.0], [1.0], 1000, seed)
        assert abs(x[0] - 0.37) < 1e-2


def test_propose_stays_in_box():
    x, _ = propose_next(lambda X: X.sum(axis=1), [-1.0, 2.0], [0.5, 3.0], 200, 0)
    assert np.all(x >= [-1.0, 2.0]) and np.all(x <= [0.5, 3.0])
    assert x == pytest.approx([0.5, 3.0], abs=1e-6)


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig(budget=3, n_initial=5)
    with pytest.raises(ValueError):
        RunConfig(mode="nope")
    with pytest.raises(ValueError):
        RunConfig(mode="quadrature_er2i")


def test_budget_equal_to_initial_design():
    prob = benchmark_problem()
    hist = run(prob, RunConfig(budget=4, n_initial=4, seed=1))
    assert len(hist.records) == 4
    assert all(r["acquisition"] is None for r in hist.records)
    W = uniform_weights(11)
    Z = tcheby_value(hist.objectives[:, None, :], W[None], TchebycheffParams([0, 0], [1, 1]))
    assert np.array_equal(hist.envelopes[-1], Z.min(axis=0))
    assert len(hist.trace_rows()) == 1


def test_proposals_usually_improve_an_envelope_entry():
    prob = benchmark_problem()
    hits = 0
    for seed in range(20):
        hist = run(prob, RunConfig(budget=6, n_initial=5, seed=seed))
        hits += hist.records[-1]["n_changed"] > 0
    assert hits >= 16


@pytest.fixture(scope="module")
def er2i_history():
    return run(benchmark_problem(), RunConfig(budget=14, n_initial=5, seed=2))


def test_envelopes_nonincreasing(er2i_history):
    E = er2i_history.envelopes
    assert np.all(np.diff(E, axis=0) <= 0)
    assert all(r["acquisition"] >= 0 for r in er2i_history.records[5:])


def test_indicator_consistency(er2i_history):
    p = TchebycheffParams([0, 0], [1, 1])
    W = uniform_weights(11)
    h_r = tcheby_value(np.array([1.0, 1.0]), W, p)
    for n, rec in enumerate(er2i_history.records, 1):
        direct = np.mean(np.maximum(h_r - np.array(rec["envelope"]), 0.0))
        assert discrete_r2_improvement(er2i_history.objectives[:n], W, p) == pytest.approx(direct, abs=1e-14)
        assert rec["r2_discrete"] == pytest.approx(np.mean(rec["envelope"]), abs=1e-14)


def test_history_artifacts(er2i_history, tmp_path):
    er2i_history.write(tmp_path)
    lines = (tmp_path / "history.jsonl").read_text().splitlines()
    assert len(lines) == 14
    assert json.loads(lines[-1])["n_evals"] == 14
    rows = (tmp_path / "traces.csv").read_text().splitlines()
    assert rows[0] == ",".join(TRACE_COLUMNS) and len(rows) == 1 + 10
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["r2_discrete"] == er2i_history.records[-1]["r2_discrete"]


def test_runs_are_deterministic(er2i_history):
    again = run(benchmark_problem(), RunConfig(budget=14, n_initial=5, seed=2))
    assert again.to_jsonl() == er2i_history.to_jsonl()


def test_quadrature_mode_runs():
    from pareto_acq.r2_indicator import gauss_legendre_rule

    hist = run(benchmark_problem(), RunConfig(mode="quadrature_er2i", rule=gauss_legendre_rule(16), budget=8, seed=0))
    assert np.all(np.diff(hist.envelopes, axis=0) <= 0)
    assert len(hist.records[0]["envelope"]) == 16


def test_ehvi_loop_hv_nondecreasing():
    hist = run(benchmark_problem(), RunConfig(mode="ehvi", budget=12, seed=0))
    hv = [r["hv"] for r in hist.records]
    assert np.all(np.diff(hv) >= 0)
    assert all(r["acquisition"] >= 0 for r in hist.records[5:])


def test_dense_front_targets():
    t = dense_front_targets(benchmark_problem(), RunConfig())
    # (x^2, (1-x)^2) dominates 1 - 1/6 of the unit box
    assert t["hv"] == pytest.approx(5 / 6, abs=1e-3)
    assert t["r2_discrete"] > 0


def test_fit_failure_aborts_with_partial_history(monkeypatch):
    import pareto_acq.bo_driver as bo

    def broken(*args, **kwargs):
        raise GPFitError("singular")

    monkeypatch.setattr(bo, "fit", broken)
    prob = benchmark_problem()
    cfg = RunConfig(budget=8, n_initial=3, seed=0)
    with pytest.raises(RunAborted) as info:
        run(prob, cfg)
    assert len(info.value.history.records) == 3
    assert isinstance(info.value.__cause__, GPFitError)


def test_custom_problem_two_dimensional_design():
    prob = Problem(lambda x: np.array([x[0] ** 2 + x[1] ** 2, (1 - x[0]) ** 2 + x[1] ** 2]), [0, 0], [1, 1], 2)
    hist = run(prob, RunConfig(budget=8, n_initial=4, seed=0, search_budget=200))
    assert hist.designs.shape == (8, 2)
