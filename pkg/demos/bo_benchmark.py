"""Discrete-weight ER2I against EHVI on f(x) = (x^2, (1 - x)^2).

Run: python demos/bo_benchmark.py [n_seeds]
"""
import sys

from pareto_acq.bo_driver import RunConfig, benchmark_problem, dense_front_targets, run

n_seeds = int(sys.argv[1]) if len(sys.argv) > 1 else 3
prob = benchmark_problem()
target = dense_front_targets(prob, RunConfig())
print(f"dense-front targets: R2 {target['r2_discrete']:.6f}, HV {target['hv']:.6f}")
print("seed  R2/target(ER2I)  HV/target(EHVI)")
for seed in range(n_seeds):
    er2i = run(prob, RunConfig(budget=30, seed=seed)).records[-1]
    ehvi = run(prob, RunConfig(mode="ehvi", budget=30, seed=seed)).records[-1]
    print(f"{seed:4d}  {er2i['r2_discrete'] / target['r2_discrete']:15.4f}  {ehvi['hv'] / target['hv']:15.4f}")
