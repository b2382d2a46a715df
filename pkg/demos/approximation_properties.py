#!/usr/bin/env python3
"""Spline basis mechanics: partition of unity, local support, integrals,
approximation order, and the probability-simplex construction for densities."""

import numpy as np
from scipy.stats import beta

from series_prior import (
    eval_basis,
    eval_normalized,
    fit_coefficients,
    make_basis,
    simplex_coefficients,
)

print("=== basis mechanics ===")
basis = make_basis(3, 8)
print(f"order q=3 on K=8 subintervals: dimension J = {basis.dimension}")
x = np.random.default_rng(0).random(5)
vals = eval_basis(basis, x)
print(f"values at 5 random points sum to: {vals.sum(axis=1)}")
print(f"nonzero entries per point (<= q): {(vals > 0).sum(axis=1)}")
print(f"per-function integrals sum to: {basis.integrals.sum():.15f}")

print("\n=== normalized functions are density kernels ===")
normalized = eval_normalized(basis, 0.37)
print(f"B*_j(0.37) (each integrates to one): max {normalized.max():.3f}")

print("\n=== approximation order: sup error ~ J^(-q) ===")
dims = [8, 16, 32, 64, 128]
for q in (2, 3):
    errors = [
        fit_coefficients(lambda t: np.sin(2 * np.pi * t), make_basis(q, J - q + 1)).error
        for J in dims
    ]
    slope = np.polyfit(np.log(dims), np.log(errors), 1)[0]
    print(f"q={q}: errors {['%.2e' % e for e in errors]}  slope {slope:.2f}")

print("\n=== density fitting on the simplex ===")
target = lambda t: beta.pdf(t, 2, 2)
for J in (10, 25):
    b = make_basis(3, J - 2)
    theta, err = simplex_coefficients(target, b)
    print(
        f"J={J}: coefficients sum {theta.sum():.1f}, min {theta.min():.2e}, "
        f"sup error {err:.2e}"
    )
