"""Element-local reconstruction of a degree ``k + 1`` approximation.

On each element ``u*`` keeps the mean of ``u_h`` and its gradient is the
best fit of ``-q_h`` in the derivatives of ``P_{k+1}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hdg import DegenerateElementError, HDGState
from .mesh import ElementBasis, Mesh1D, assembly_points, gauss_rule


@dataclass(frozen=True)
class PostprocessedField:
    coeffs: np.ndarray  # (N, k + 2) Legendre coefficients

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1


def _reference_blocks(k: int):
    basis = ElementBasis(k + 1)
    rule = gauss_rule(assembly_points(k + 1))
    dV = basis.deriv(rule.nodes)[:, 1:]
    stiff = (dV.T * rule.weights) @ dV
    # coupling of q (degree k) with the test derivatives, reference units
    Vq = ElementBasis(k).eval(rule.nodes)
    rhs = (dV.T * rule.weights) @ Vq
    return stiff, rhs


def _solve(u_coeffs: np.ndarray, q_coeffs: np.ndarray, sizes: np.ndarray, k: int) -> np.ndarray:
    stiff, couple = _reference_blocks(k)
    try:
        L = np.linalg.cholesky(stiff)
    except np.linalg.LinAlgError:
        raise DegenerateElementError(0, "postprocessing stiffness") from None
    # (u*', w')_K = (2/h) stiff ; -(q, w')_K = -couple q
    rhs = -(q_coeffs @ couple.T) * (0.5 * sizes[:, None])
    y = np.linalg.solve(L, rhs.T)
    upper = np.linalg.solve(L.T, y).T
    out = np.empty((u_coeffs.shape[0], k + 2))
    out[:, 0] = u_coeffs[:, 0]
    out[:, 1:] = upper
    return out


def postprocess_element(u_coeffs, q_coeffs, element: tuple[float, float], k: int) -> np.ndarray:
    """``P_{k+1}`` Legendre coefficients of ``u*`` on one element."""
    xl, xr = element
    if not xr > xl:
        raise DegenerateElementError(0, "element")
    u_coeffs = np.asarray(u_coeffs, dtype=float)[None, :]
    q_coeffs = np.asarray(q_coeffs, dtype=float)[None, :]
    return _solve(u_coeffs, q_coeffs, np.array([xr - xl]), k)[0]


def postprocess(state: HDGState, mesh: Mesh1D) -> PostprocessedField:
    return PostprocessedField(_solve(state.u, state.q, mesh.sizes, state.degree))
