"""Element-by-element postprocessing.

The HDG flux q_h converges at order k+1, so a local solve can build a
degree k+1 potential u* that converges one order faster than u_h.  This
script measures both errors on two meshes.
"""
from __future__ import annotations

import numpy as np

from hdgfrac import build_uniform_mesh, gauss_rule, manufactured_source, postprocess, run_transient
from hdgfrac.mesh import ElementBasis

alpha, k = 0.5, 1
problem = manufactured_source(alpha)
rule = gauss_rule(10)


def l2_error(coeffs, mesh):
    x = mesh.to_physical(rule.nodes)
    vals = coeffs @ ElementBasis(coeffs.shape[1] - 1).eval(rule.nodes).T
    w = 0.5 * mesh.sizes[:, None] * rule.weights
    return np.sqrt(np.sum(w * (vals - problem.exact_u(x, 1.0)) ** 2))


prev = None
for N in (8, 16):
    mesh = build_uniform_mesh(0.0, 1.0, N)
    delta = 1.0 / int(np.ceil(1.0 / np.sqrt(0.5 * mesh.h ** (k + 2))))
    state = run_transient(problem, mesh, k, 1.0, delta, 1.0)
    post = postprocess(state, mesh)
    errs = (l2_error(state.u, mesh), l2_error(post.coeffs, mesh))
    print(f"N={N:3d}  |u - u_h| = {errs[0]:.3e}   |u - u*| = {errs[1]:.3e}")
    if prev is not None:
        print(f"        rates {np.log2(prev[0] / errs[0]):.2f} and {np.log2(prev[1] / errs[1]):.2f}")
    prev = errs
