"""Fractional Crank-Nicolson weights and the Riemann-Liouville integral.

The time stepper never forms the fractional integral explicitly.  Instead each
step uses weights beta_{j,i}, the double integral of the kernel
omega_alpha(t - s) over two time intervals.  This script prints a few weights,
checks that they add up to the closed-form total, and compares the discrete
fractional integral of t^2 against its exact value.
"""
from __future__ import annotations

import math

import numpy as np

from hdgfrac import cn_weights, coercivity_check, coercivity_constant, riemann_liouville_integral

alpha, delta = 0.5, 0.1

# %% Weights for step j = 5: the diagonal entry dominates, the tail decays
w = cn_weights(alpha, delta, 5)
print("beta_{5,i}, i = 1..5:", np.array2string(w.beta, precision=3))

# each row adds up to W2(t_j) - W2(t_{j-1}), with W2(t) = t^(alpha+1) / Gamma(alpha+2)
W2 = lambda t: t ** (alpha + 1) / math.gamma(alpha + 2)  # noqa: E731
print("row sum  ", w.beta.sum())
print("closed   ", W2(5 * delta) - W2(4 * delta))

# %% Fractional integral of v(t) = t^2, sampled on a graded grid
times = np.linspace(0, 1, 401) ** 2
approx = riemann_liouville_integral(alpha, times ** 2, 1.0, times=times)
exact = 2 / math.gamma(3 + alpha)
print(f"I^alpha t^2 at t=1: {approx:.8f} (exact {exact:.8f})")

# %% The kernel is positive: int_0^T (I^alpha v) v dt >= c_alpha ||I^(alpha/2) v||^2
rng = np.random.default_rng(0)
lhs, rhs = coercivity_check(alpha, rng.normal(size=20), 1.0)
print(f"coercivity: {lhs:.4f} >= {coercivity_constant(alpha) * rhs:.4f}")
