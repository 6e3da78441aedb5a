"""One transient solve of the subdiffusion problem.

We march u = t^(3-alpha) sin(pi x) from t = 0 to t = 1 on a mesh of 16
quadratic elements and compare the cell averages of the numerical solution
with the exact values.
"""
from __future__ import annotations

import numpy as np

from hdgfrac import build_uniform_mesh, manufactured_source, run_transient

alpha, k, N = 0.5, 2, 16
problem = manufactured_source(alpha)
mesh = build_uniform_mesh(0.0, 1.0, N)

# time step tied to the mesh so that time errors stay below spatial ones
delta = 1.0 / int(np.ceil(1.0 / np.sqrt(0.5 * mesh.h ** (k + 2))))
state = run_transient(problem, mesh, k, tau=1.0, delta=delta, T=1.0)
print(f"{int(round(1 / delta))} steps, final time {state.t:.3f}")

# %% The first Legendre coefficient of u on each element is its mean
mids = 0.5 * (mesh.nodes[:-1] + mesh.nodes[1:])
exact_mean = (np.cos(np.pi * mesh.nodes[:-1]) - np.cos(np.pi * mesh.nodes[1:])) / (np.pi * mesh.sizes)
for x, got, ref in list(zip(mids, state.u[:, 0], exact_mean))[::4]:
    print(f"x={x:.3f}  mean u_h={got:.6f}  exact={ref:.6f}")

# %% The numerical traces at interior nodes approximate u(x, 1) directly
print("max trace error:", np.abs(state.uhat - np.sin(np.pi * mesh.nodes)).max())
