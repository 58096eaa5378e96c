"""Where the two indicator families disagree.

A point can add R2 without adding hypervolume; two boxes of equal reduced
magnitude can carry different R2 gains; and a larger predictive std can
lower truncated EHVI or objective-space ER2I.

Run: python demos/counterexamples.py
"""
import json

from pareto_acq.ehvi import CounterexampleSearch, find_tehvi_variance_counterexample
from pareto_acq.er2i_acquisition import find_objective_variance_instance
from pareto_acq.r2_indicator import verify_magnitude_example, verify_no_whv_example

print("no hypervolume gain, positive R2 gain:")
print(json.dumps(verify_no_whv_example(0.5), indent=2))
print("equal reduced magnitude, different R2 gain:")
print(json.dumps(verify_magnitude_example(), indent=2))

cx = find_tehvi_variance_counterexample(CounterexampleSearch(seed=0))
print(f"truncated EHVI falls from {cx.tehvi_lo:.5f} to {cx.tehvi_hi:.5f} when sigma {cx.sigma} -> {cx.sigma_prime}")

inst = find_objective_variance_instance(violation=True, seed=0)
print(f"objective-space ER2I integrand falls from {inst.value_lo:.5f} to {inst.value_hi:.5f}")
