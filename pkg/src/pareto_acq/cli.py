"""Command line: ``pareto-acq {hv,ehvi,r2,er2i,verify,run}``.

Scalar results are printed as ``f"{v:.12f}"`` (``name value`` pairs when a
command reports more than one number); CSV and JSON artifacts use shortest
round-trip decimals.

Exit codes: 0 ok, 2 parse/config error, 3 dimension mismatch, 4 command
needs two objectives, 5 verification failed, 6 surrogate fit failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import bo_driver
from .ehvi import VarianceCounterexample, CounterexampleSearch, ehvi_exact, ehvi_mc_oracle, find_tehvi_variance_counterexample, tehvi
from .er2i_acquisition import (
    ObjectiveVarianceInstance,
    er2i_mc_oracle,
    find_objective_variance_instance,
    objective_gaussian_er2i,
    objective_gaussian_integrand,
)
from .fileio import FormatError, read_config, read_points, table_to_csv
from .pareto_geometry import DimensionError, Orientation, decompose_dominated_region, hypervolume, to_minimization
from .r2_indicator import (
    TchebycheffParams,
    conical_product_rule,
    discrete_r2,
    discrete_r2_improvement,
    envelope_table,
    gauss_legendre_rule,
    r2_improvement_exact_2d,
    r2_improvement_quadrature,
    r2_value_exact_2d,
    r2_value_quadrature,
    simplex_lattice,
    uniform_weights,
    verify_magnitude_example,
    verify_no_whv_example,
)
from .surrogate_gp import GPFitError

EXIT_OK, EXIT_PARSE, EXIT_DIM, EXIT_NEEDS_2D, EXIT_VERIFY, EXIT_GP = 0, 2, 3, 4, 5, 6
THREADS_ENV = "PARETO_ACQ_THREADS"


class NeedsTwoObjectives(ValueError):
    pass


class VerificationFailed(RuntimeError):
    pass


def _fmt(v) -> str:
    return f"{float(v):.12f}"


def _require(cfg, key, cmd):
    if key not in cfg:
        raise FormatError(f"{cmd} needs config key {key!r}")
    return cfg[key]


def _seed(args, cfg) -> int:
    if args.seed is not None:
        return args.seed
    return cfg.get("seed", 0)


def _points(args, cfg):
    return read_points(args.points, cfg["m"])


# --- commands -----------------------------------------------------------------


def cmd_hv(args, cfg):
    r = _require(cfg, "reference", "hv")
    A = _points(args, cfg)
    print(_fmt(hypervolume(A, r, cfg["orientation"])))
    if args.decompose:
        dec = decompose_dominated_region(to_minimization(A, cfg["orientation"]), to_minimization(r, cfg["orientation"]))
        m = len(r)
        header = [f"lower_f{j}" for j in range(1, m + 1)] + [f"upper_f{j}" for j in range(1, m + 1)] + ["sign"]
        rows = np.column_stack([dec.lower, dec.upper, dec.signs]) if len(dec.signs) else []
        Path(args.decompose).write_text(table_to_csv(header, rows))


def cmd_ehvi(args, cfg):
    r = _require(cfg, "reference", "ehvi")
    mean = _require(cfg, "mean", "ehvi")
    std = _require(cfg, "std", "ehvi")
    A = _points(args, cfg)
    # negation maps maximization onto the minimization routines
    sign = -1.0 if cfg["orientation"] is Orientation.MAXIMIZE else 1.0
    mean_n, A_n, r_n = sign * mean, sign * A, sign * r
    if "roi" in cfg:
        lo, hi = cfg["roi"]
        lo_n, hi_n = (lo, hi) if sign > 0 else (-hi, -lo)
        print("tehvi", _fmt(tehvi(mean_n, std, A_n, r_n, lo_n, hi_n)))
    else:
        print("ehvi", _fmt(ehvi_exact(mean_n, std, A_n, r_n)))
    if args.mc:
        est, se = ehvi_mc_oracle(mean_n, std, A_n, r_n, n_samples=args.mc, seed=_seed(args, cfg))
        print("mc_estimate", _fmt(est))
        print("mc_standard_error", _fmt(se))


def _tcheby(cfg, cmd, need_reference=False) -> TchebycheffParams:
    z = _require(cfg, "utopian", cmd)
    ref = _require(cfg, "reference", cmd) if need_reference else cfg.get("reference")
    return TchebycheffParams(z, ref, cfg["orientation"])


def _discrete_weights(args, cfg, m):
    if args.discrete:
        return uniform_weights(args.discrete) if m == 2 else simplex_lattice(m, args.discrete)
    return cfg["weights"]


def cmd_r2(args, cfg):
    p = _tcheby(cfg, "r2")
    A = _points(args, cfg)
    m = p.m
    rho = cfg.get("rho")
    has_ref = p.reference is not None
    if len(A) == 0:
        raise FormatError("r2 needs a nonempty point set")
    if args.exact2d or not (args.quadrature or args.discrete or cfg.get("weights") is not None or cfg.get("rule")):
        if m != 2:
            raise NeedsTwoObjectives("exact integration needs two objectives")
        value = r2_value_exact_2d(A, p, rho)
        improvement = r2_improvement_exact_2d(A, p, rho) if has_ref else None
    elif args.quadrature or cfg.get("rule") is not None:
        if args.quadrature:
            rule = gauss_legendre_rule(args.quadrature) if m == 2 else conical_product_rule(m, args.quadrature)
        else:
            rule = cfg["rule"]
        value = r2_value_quadrature(A, p, rho, rule)
        improvement = r2_improvement_quadrature(A, p, rho, rule) if has_ref else None
    else:
        W = _discrete_weights(args, cfg, m)
        value = discrete_r2(A, W, p)
        improvement = discrete_r2_improvement(A, W, p) if has_ref else None
    print("value", _fmt(value))
    if improvement is not None:
        print("improvement", _fmt(improvement))
    if args.envelope:
        if m != 2:
            raise NeedsTwoObjectives("envelope tables need two objectives")
        Path(args.envelope).write_text(table_to_csv(["lambda", "h_A", "h_r", "gap"], envelope_table(A, p, args.grid)))


def cmd_er2i(args, cfg):
    p = _tcheby(cfg, "er2i")
    mean = _require(cfg, "mean", "er2i")
    std = _require(cfg, "std", "er2i")
    A = _points(args, cfg)
    if len(A) == 0:
        raise FormatError("er2i needs a nonempty point set")
    m = p.m
    rho = cfg.get("rho")
    if args.quadrature or cfg.get("rule") is not None:
        if args.quadrature:
            rule = gauss_legendre_rule(args.quadrature) if m == 2 else conical_product_rule(m, args.quadrature)
        else:
            rule = cfg["rule"]
        print("er2i", _fmt(objective_gaussian_er2i(mean, std, A, p, rule, rho)))
        if args.mc:
            est, se = er2i_mc_oracle(mean, std, A, p, rule, rho, n_samples=args.mc, seed=_seed(args, cfg))
            print("mc_estimate", _fmt(est))
            print("mc_standard_error", _fmt(se))
        return
    W = _discrete_weights(args, cfg, m)
    if W is None:
        W = uniform_weights(11) if m == 2 else simplex_lattice(m, 4)
    est, se = er2i_mc_oracle(mean, std, A, p, W, None, n_samples=args.mc or 10**5, seed=_seed(args, cfg))
    print("mc_estimate", _fmt(est))
    print("mc_standard_error", _fmt(se))


def _fixture(name):
    return resources.files("pareto_acq").joinpath("data", name)


def _verify_tehvi(args):
    fixture = _fixture("tehvi_variance_counterexample.json")
    if args.search or not fixture.is_file():
        cx = find_tehvi_variance_counterexample(CounterexampleSearch(seed=_seed(args, {})))
        source = "search"
    else:
        cx = VarianceCounterexample.from_json(fixture.read_text())
        source = "stored"
    lo = tehvi(cx.mu, cx.sigma, cx.A, cx.r, *cx.roi)
    hi = tehvi(cx.mu, cx.sigma_prime, cx.A, cx.r, *cx.roi)
    report = json.loads(cx.to_json())
    report.update(source=source, recomputed_lo=lo, recomputed_hi=hi, **{"pass": bool(hi < lo)})
    return report


def _verify_er2i(args):
    fixture = _fixture("er2i_objective_variance_instance.json")
    if args.search or not fixture.is_file():
        inst = find_objective_variance_instance(violation=True, seed=_seed(args, {}))
        source = "search"
    else:
        inst = ObjectiveVarianceInstance(**json.loads(fixture.read_text()))
        source = "stored"
    p = TchebycheffParams(inst.utopian)
    lo = objective_gaussian_integrand(inst.mean, inst.std, inst.A, inst.weight, p)
    hi = objective_gaussian_integrand(inst.mean, inst.std_prime, inst.A, inst.weight, p)
    report = json.loads(inst.to_json())
    report.update(source=source, recomputed_lo=lo, recomputed_hi=hi, **{"pass": bool(hi < lo)})
    return report


def cmd_verify(args, cfg):
    if args.which == "no-whv":
        res = verify_no_whv_example(args.c)
        report = {"c": res["c"], "hv": res["hv_contribution"], "i_r2": res["r2_improvement"], "pass": res["pass"]}
    elif args.which == "magnitude":
        report = verify_magnitude_example()
    elif args.which == "tehvi-variance":
        report = _verify_tehvi(args)
    else:
        report = _verify_er2i(args)
    print(json.dumps(report, indent=2, sort_keys=True))
    if not report["pass"]:
        raise VerificationFailed(args.which)


def run_config_from(cfg, seed) -> bo_driver.RunConfig:
    if cfg["orientation"] is not Orientation.MINIMIZE:
        raise FormatError("run supports minimization only")
    if cfg["m"] not in (None, 2):
        raise DimensionError("the benchmark problem has two objectives")
    kw = {k: cfg[k] for k in ("utopian", "reference", "budget", "n_initial", "search_budget", "mode") if k in cfg}
    kw["seed"] = seed
    if cfg.get("rule") is not None:
        kw["rule"] = cfg["rule"]
        kw.setdefault("mode", "quadrature_er2i")
    elif cfg.get("weights") is not None:
        kw["weights"] = cfg["weights"]
    try:
        return bo_driver.RunConfig(**kw)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def cmd_run(args, cfg):
    rc = run_config_from(cfg, _seed(args, cfg))
    out = Path(args.out or "run")
    problem = bo_driver.benchmark_problem()
    try:
        hist = bo_driver.run(problem, rc)
    except bo_driver.RunAborted as exc:
        if exc.history.records:
            exc.history.write(out)
        raise GPFitError(str(exc)) from exc
    hist.write(out)
    print(json.dumps(hist.summary(), sort_keys=True))


# --- parser -------------------------------------------------------------------


def _global_flags(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="JSON config file")
    parser.add_argument("--seed", type=int, default=default, help="random seed (overrides config)")
    parser.add_argument("--out", default=default, help="output directory for run artifacts")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pareto-acq", description="Hypervolume and R2 indicators and acquisitions.")
    _global_flags(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("hv", parents=[common], help="dominated hypervolume")
    p.add_argument("points")
    p.add_argument("--decompose", metavar="CSV", help="write the box decomposition")
    p.set_defaults(func=cmd_hv)

    p = sub.add_parser("ehvi", parents=[common], help="expected hypervolume improvement (config: mean, std)")
    p.add_argument("points")
    p.add_argument("--mc", type=int, default=0, metavar="N", help="also print an N-sample Monte-Carlo estimate")
    p.set_defaults(func=cmd_ehvi)

    for name, func, helptext in (("r2", cmd_r2, "R2 indicator and improvement"),
                                 ("er2i", cmd_er2i, "expected R2 improvement under Gaussian objectives")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("points")
        mode = p.add_mutually_exclusive_group()
        if name == "r2":
            mode.add_argument("--exact2d", action="store_true")
        mode.add_argument("--quadrature", type=int, metavar="L")
        mode.add_argument("--discrete", type=int, metavar="K")
        if name == "r2":
            p.add_argument("--envelope", metavar="CSV", help="write lambda,h_A,h_r,gap rows")
            p.add_argument("--grid", type=int, default=1001, help="envelope grid size")
        else:
            p.add_argument("--mc", type=int, default=0, metavar="N")
        p.set_defaults(func=func)

    p = sub.add_parser("verify", parents=[common], help="run a stored verification")
    p.add_argument("which", choices=["no-whv", "magnitude", "tehvi-variance", "er2i-variance"])
    p.add_argument("--c", type=float, default=0.5)
    p.add_argument("--search", action="store_true", help="search instead of using the stored instance")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("run", parents=[common], help="optimization loop on the benchmark problem")
    p.set_defaults(func=cmd_run)
    return parser


def _check_threads():
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 0
    try:
        n = int(raw)
    except ValueError:
        raise FormatError(f"{THREADS_ENV} must be a nonnegative integer") from None
    if n < 0:
        raise FormatError(f"{THREADS_ENV} must be a nonnegative integer")
    return n


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        _check_threads()
        cfg = read_config(args.config)
        args.func(args, cfg)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DimensionError as exc:
        print(f"dimension error: {exc}", file=sys.stderr)
        return EXIT_DIM
    except NeedsTwoObjectives as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NEEDS_2D
    except VerificationFailed as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except GPFitError as exc:
        print(f"surrogate fit failed: {exc}", file=sys.stderr)
        return EXIT_GP
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_PARSE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
