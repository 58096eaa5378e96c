"""Hypervolume and R2 side by side on a small two-objective set.

Run: python demos/indicators_tour.py
"""
import numpy as np

from pareto_acq import (
    TchebycheffParams,
    ehvi_exact,
    ehvi_mc_oracle,
    hypervolume,
    r2_improvement_exact_2d,
    r2_value_exact_2d,
)
from pareto_acq.r2_indicator import envelope_table

A = np.array([[1.0, 3.5], [2.0, 2.5], [3.0, 1.5]])
r = np.array([5.0, 4.0])
print(f"HV of A w.r.t. {r.tolist()}: {hypervolume(A, r):.6f}")

mean, std = np.array([2.0, 1.5]), np.array([0.7, 0.6])
est, se = ehvi_mc_oracle(mean, std, A, r, n_samples=10**6)
print(f"EHVI closed form {ehvi_exact(mean, std, A, r):.6f}, Monte Carlo {est:.6f} +- {se:.1e}")

# same set rescaled into the unit box for the Tchebycheff view
B = A / r
p = TchebycheffParams([0.0, 0.0], [1.0, 1.0])
print(f"R2 value {r2_value_exact_2d(B, p):.6f}, improvement over the reference {r2_improvement_exact_2d(B, p):.6f}")

table = envelope_table(B, p, n_grid=11)
print("lambda   h_A     h_r     gap")
for lam, hA, hr, gap in table:
    print(f"{lam:5.2f}  {hA:.4f}  {hr:.4f}  {gap:.4f}")
