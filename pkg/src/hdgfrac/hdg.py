"""HDG discretization in one space dimension with fractional CN time stepping.

Per element ``K = [x_L, x_R]`` the unknowns are the Legendre coefficients of
the flux ``q`` and of ``u`` (``k + 1`` each), ordered ``z = [q, u]``; the
traces ``uhat`` live on mesh nodes.  Interior-node traces are the only
globally coupled unknowns.

Step ``j`` integrates the equation over ``[t_{j-1}, t_j]`` and divides by
``delta``::

    (1/delta) (J_alpha ubar(t_j), w) + E^{j-1/2}(w) = (f^{j-1/2}, w)

where ``E(w) = -(q, w') + <qhat.n, w>`` and
``qhat.n = q.n + tau (u - uhat)``.  The flux equation
``(q, r) - (u, r') + <uhat, r n> = 0`` is imposed at every time level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np
from scipy.linalg import cholesky_banded, cho_solve_banded, LinAlgError

from .fractional import KernelWeights, lag_weights, memory_term
from .mesh import ElementBasis, Mesh1D, assembly_points, gauss_rule, project_mesh


class DegenerateElementError(np.linalg.LinAlgError):
    """A local solve failed on a specific element."""

    def __init__(self, element: int, what: str = "local block"):
        super().__init__(f"singular {what} on element {element}")
        self.element = element


class Problem(Protocol):
    alpha: float

    def source(self, x: np.ndarray, t: float) -> np.ndarray: ...

    def initial(self, x: np.ndarray) -> np.ndarray: ...

    def boundary(self, x: float) -> float: ...


def stabilization(tau, n_elements: int) -> np.ndarray:
    """Normalize ``tau`` to an ``(N, 2)`` array of (left, right) face values."""
    tau = np.asarray(tau, dtype=float)
    if tau.ndim == 0:
        tau = np.full((n_elements, 2), float(tau))
    elif tau.shape == (2,):
        tau = np.tile(tau, (n_elements, 1))
    if tau.shape != (n_elements, 2):
        raise ValueError(f"tau must be a scalar, a (2,) pair or an ({n_elements}, 2) array")
    if np.any(tau < 0):
        raise ValueError("stabilization must be nonnegative")
    return tau


@dataclass(frozen=True)
class LocalMatrices:
    """Element operators for ``z = [q, u]`` and the two traces ``[uhat_L, uhat_R]``.

    ``A z + B uhat = [0, load]`` is the local system with reaction ``kappa``
    and half the elliptic form; ``C z + F uhat`` gives ``qhat.n`` on the
    (left, right) faces; ``E_z z + E_hat uhat`` is the elliptic form itself.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    F: np.ndarray
    E_z: np.ndarray
    E_hat: np.ndarray
    mass: np.ndarray
    deriv: np.ndarray


def assemble_local(element: tuple[float, float], k: int, tau, kappa: float) -> LocalMatrices:
    tau_l, tau_r = np.broadcast_to(np.asarray(tau, dtype=float), (2,))
    if tau_l < 0 or tau_r < 0:
        raise ValueError("stabilization must be nonnegative")
    if kappa < 0:
        raise ValueError("reaction coefficient must be nonnegative")
    xl, xr = element
    hK = xr - xl
    basis = ElementBasis(k)
    rule = gauss_rule(assembly_points(k))
    V = basis.eval(rule.nodes)
    dV = basis.deriv(rule.nodes)
    mass = 0.5 * hK * (V.T * rule.weights) @ V
    # deriv[n, m] = (phi_m, phi_n')_K
    deriv = (dV.T * rule.weights) @ V
    eL, eR = basis.eval([-1.0])[0], basis.eval([1.0])[0]
    n = k + 1

    # elliptic form: (q', w) + tau_R u_R w_R + tau_L u_L w_L - tau uhat w
    Eq = -deriv + np.outer(eR, eR) - np.outer(eL, eL)
    Eu = tau_r * np.outer(eR, eR) + tau_l * np.outer(eL, eL)
    E_z = np.hstack([Eq, Eu])
    E_hat = np.column_stack([-tau_l * eL, -tau_r * eR])

    A = np.zeros((2 * n, 2 * n))
    A[:n, :n] = mass
    A[:n, n:] = -deriv
    A[n:, :] = 0.5 * E_z
    A[n:, n:] += kappa * mass
    B = np.zeros((2 * n, 2))
    B[:n, 0] = -eL
    B[:n, 1] = eR
    B[n:, :] = 0.5 * E_hat

    C = np.zeros((2, 2 * n))
    C[0, :n], C[0, n:] = -eL, tau_l * eL
    C[1, :n], C[1, n:] = eR, tau_r * eR
    F = np.diag([-tau_l, -tau_r])
    return LocalMatrices(A, B, C, F, E_z, E_hat, mass, deriv)


@dataclass(frozen=True)
class HDGState:
    t: float
    u: np.ndarray
    q: np.ndarray
    uhat: np.ndarray

    @property
    def degree(self) -> int:
        return self.u.shape[1] - 1

    def norm(self) -> float:
        return float(max(np.abs(self.u).max(), np.abs(self.q).max(), np.abs(self.uhat).max()))


@dataclass
class CondensedStep:
    """Factorized trace system for a fixed ``(mesh, k, tau, alpha, delta)``.

    ``kappa`` is ``beta_{j,j} / delta``; the local operators carry the
    per-unit-time reaction ``kappa / delta``.
    """

    mesh: Mesh1D
    k: int
    tau: np.ndarray
    kappa: float
    delta: float
    Ainv: np.ndarray
    AinvB: np.ndarray
    CAinv: np.ndarray
    E_z: np.ndarray
    E_hat: np.ndarray
    mass: np.ndarray
    deriv: np.ndarray
    trace_band: np.ndarray
    cho: np.ndarray | None
    boundary_coupling: np.ndarray

    def local_solve(self, load: np.ndarray, uhat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Recover ``(q, u)`` on every element from loads ``(N, k+1)`` and traces."""
        n = self.k + 1
        b = np.zeros((load.shape[0], 2 * n))
        b[:, n:] = load
        loc = np.stack([uhat[:-1], uhat[1:]], axis=1)
        z = np.einsum("kij,kj->ki", self.Ainv, b) - np.einsum("kij,kj->ki", self.AinvB, loc)
        return z[:, :n], z[:, n:]

    def solve(self, load: np.ndarray, g_left: float, g_right: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Solve one level given element loads; returns ``(u, q, uhat)``."""
        n = self.k + 1
        N = self.mesh.n_elements
        b = np.zeros((N, 2 * n))
        b[:, n:] = load
        c = np.einsum("kij,kj->ki", self.CAinv, b)
        uhat = np.empty(N + 1)
        uhat[0], uhat[-1] = g_left, g_right
        if N > 1:
            rhs = c[:-1, 1] + c[1:, 0]
            rhs[0] -= self.boundary_coupling[0] * g_left
            rhs[-1] -= self.boundary_coupling[1] * g_right
            uhat[1:-1] = cho_solve_banded((self.cho, False), rhs)
        q, u = self.local_solve(load, uhat)
        return u, q, uhat


def _local_blocks(mesh: Mesh1D, k: int, tau: np.ndarray, reaction: float):
    blocks = [assemble_local(mesh.element(K), k, tau[K], reaction) for K in range(mesh.n_elements)]
    return blocks


def condense(blocks: Sequence[LocalMatrices], mesh: Mesh1D) -> tuple:
    """Eliminate ``(q, u)`` element by element.

    Returns the local inverse data and the symmetric tridiagonal interior
    trace matrix in upper banded storage, plus the couplings of the first
    and last interior trace to the two Dirichlet values.
    """
    N = mesh.n_elements
    Ainv, AinvB, CAinv, S = [], [], [], []
    for K, blk in enumerate(blocks):
        try:
            inv = np.linalg.inv(blk.A)
        except np.linalg.LinAlgError:
            raise DegenerateElementError(K) from None
        if not np.all(np.isfinite(inv)) or np.linalg.cond(blk.A) > 1e14:
            raise DegenerateElementError(K)
        Ainv.append(inv)
        AinvB.append(inv @ blk.B)
        CAinv.append(blk.C @ inv)
        # trace stiffness: transmission residual is sum_K (F - C A^-1 B) uhat + C A^-1 b
        S.append(-(blk.F - blk.C @ inv @ blk.B))
    S = np.array(S)
    n_int = N - 1
    band = np.zeros((2, max(n_int, 0)))
    if n_int > 0:
        diag = S[:-1, 1, 1] + S[1:, 0, 0]
        off = S[1:-1, 0, 1]  # coupling of node i (left face of elem i) with node i+1
        band[1] = diag
        band[0, 1:] = off
    coupling = np.array([S[0, 1, 0], S[-1, 0, 1]]) if n_int > 0 else np.zeros(2)
    return np.array(Ainv), np.array(AinvB), np.array(CAinv), band, coupling, S


def build_step(mesh: Mesh1D, k: int, tau, alpha: float, delta: float) -> CondensedStep:
    """Assemble, condense and factor the per-step trace system."""
    tau = stabilization(tau, mesh.n_elements)
    kappa = float(lag_weights(alpha, delta, 0)[0]) / delta
    return _build(mesh, k, tau, kappa, delta)


def _build(mesh: Mesh1D, k: int, tau: np.ndarray, kappa: float, delta: float) -> CondensedStep:
    if np.any(tau.max(axis=1) <= 0):
        bad = int(np.argmax(tau.max(axis=1) <= 0))
        raise ValueError(f"stabilization vanishes on both faces of element {bad}")
    blocks = _local_blocks(mesh, k, tau, kappa / delta)
    Ainv, AinvB, CAinv, band, coupling, _ = condense(blocks, mesh)
    cho = None
    if band.shape[1] > 0:
        try:
            cho = cholesky_banded(band, lower=False)
        except LinAlgError as exc:
            raise np.linalg.LinAlgError("trace matrix is not positive definite") from exc
    return CondensedStep(
        mesh=mesh, k=k, tau=tau, kappa=kappa, delta=delta,
        Ainv=Ainv, AinvB=AinvB, CAinv=CAinv,
        E_z=np.array([b.E_z for b in blocks]), E_hat=np.array([b.E_hat for b in blocks]),
        mass=np.array([b.mass for b in blocks]), deriv=np.array([b.deriv for b in blocks]),
        trace_band=band, cho=cho, boundary_coupling=coupling,
    )


def load_vector(f: Callable[[np.ndarray, float], np.ndarray], t: float, mesh: Mesh1D, k: int) -> np.ndarray:
    """``(f(., t), phi_m)_K`` for every element, shape ``(N, k+1)``."""
    rule = gauss_rule(min(20, k + 6))
    x = mesh.to_physical(rule.nodes)
    V = ElementBasis(k).eval(rule.nodes)
    return 0.5 * mesh.sizes[:, None] * ((f(x, t) * rule.weights) @ V)


def elliptic(step: CondensedStep, state: HDGState) -> np.ndarray:
    """Elliptic form ``-(q, w') + <qhat.n, w>`` tested against each basis function."""
    z = np.concatenate([state.q, state.u], axis=1)
    loc = np.stack([state.uhat[:-1], state.uhat[1:]], axis=1)
    return np.einsum("kij,kj->ki", step.E_z, z) + np.einsum("kij,kj->ki", step.E_hat, loc)


def flux_residual(state: HDGState, mesh: Mesh1D) -> float:
    """Max residual of ``(q, r) - (u, r') + <uhat, r n> = 0`` over all elements."""
    k = state.degree
    basis = ElementBasis(k)
    rule = gauss_rule(assembly_points(k))
    V, dV = basis.eval(rule.nodes), basis.deriv(rule.nodes)
    deriv = (dV.T * rule.weights) @ V
    eL, eR = basis.left(), basis.right()
    res = (state.q * basis.mass_diagonal(1.0)[None, :] * mesh.sizes[:, None]
           - state.u @ deriv.T
           + state.uhat[1:, None] * eR - state.uhat[:-1, None] * eL)
    return float(np.abs(res).max())


@dataclass(frozen=True)
class ProjectionPair:
    q: np.ndarray
    u: np.ndarray


def hdg_projection(u: Callable, q: Callable, element: tuple[float, float], k: int, tau) -> ProjectionPair:
    """HDG projection of ``(u, q)`` onto ``P_k x P_k`` on one element.

    Moments against ``P_{k-1}`` match and ``Pq.n + tau Pu = q.n + tau u`` on both faces.
    """
    tau_l, tau_r = np.broadcast_to(np.asarray(tau, dtype=float), (2,))
    if max(tau_l, tau_r) <= 0:
        raise np.linalg.LinAlgError("HDG projection needs tau > 0 on some face")
    xl, xr = element
    hK = xr - xl
    n = k + 1
    basis = ElementBasis(k)
    rule = gauss_rule(min(20, k + 8))
    x = xl + 0.5 * hK * (rule.nodes + 1.0)
    V = basis.eval(rule.nodes)
    wts = 0.5 * hK * rule.weights
    mass = (V.T * wts) @ V
    eL, eR = basis.left(), basis.right()

    M = np.zeros((2 * n, 2 * n))
    rhs = np.zeros(2 * n)
    M[:k, :n] = mass[:k]
    rhs[:k] = V[:, :k].T @ (wts * q(x))
    M[k:2 * k, n:] = mass[:k]
    rhs[k:2 * k] = V[:, :k].T @ (wts * u(x))
    M[2 * k, :n], M[2 * k, n:] = -eL, tau_l * eL
    rhs[2 * k] = -q(np.array([xl]))[0] + tau_l * u(np.array([xl]))[0]
    M[2 * k + 1, :n], M[2 * k + 1, n:] = eR, tau_r * eR
    rhs[2 * k + 1] = q(np.array([xr]))[0] + tau_r * u(np.array([xr]))[0]
    z = np.linalg.solve(M, rhs)
    return ProjectionPair(q=z[:n], u=z[n:])


def project_hdg_mesh(u: Callable, q: Callable, mesh: Mesh1D, k: int, tau=1.0) -> ProjectionPair:
    tau = stabilization(tau, mesh.n_elements)
    pairs = [hdg_projection(u, q, mesh.element(K), k, tau[K]) for K in range(mesh.n_elements)]
    return ProjectionPair(q=np.array([p.q for p in pairs]), u=np.array([p.u for p in pairs]))


def _boundary_values(g, mesh: Mesh1D) -> tuple[float, float]:
    if callable(g):
        return float(g(mesh.a)), float(g(mesh.b))
    gl, gr = g
    return float(gl), float(gr)


def _flux_from_traces(u: np.ndarray, uhat: np.ndarray, mesh: Mesh1D, k: int) -> np.ndarray:
    # solve (q, r) = (u, r') - <uhat, r n> element by element
    basis = ElementBasis(k)
    rule = gauss_rule(assembly_points(k))
    V, dV = basis.eval(rule.nodes), basis.deriv(rule.nodes)
    deriv = (dV.T * rule.weights) @ V
    rhs = u @ deriv.T - uhat[1:, None] * basis.right() + uhat[:-1, None] * basis.left()
    return rhs / (basis.mass_diagonal(1.0)[None, :] * mesh.sizes[:, None])


def initialize(u0: Callable, g, mesh: Mesh1D, k: int, tau=1.0, q0: Callable | None = None) -> HDGState:
    """Discrete state at ``t = 0``.

    ``u`` is the HDG projection of ``u0`` when the exact initial flux ``q0`` is
    given and the L2 projection otherwise.  Interior traces average the two
    one-sided values of ``u``, boundary traces take ``g``, and ``q`` follows
    from the flux equation so that it holds exactly at ``t = 0``.
    """
    if q0 is not None:
        u = project_hdg_mesh(u0, q0, mesh, k, tau).u
    else:
        u = project_mesh(u0, k, mesh)
    basis = ElementBasis(k)
    right_vals = u @ basis.right()
    left_vals = u @ basis.left()
    uhat = np.empty(mesh.n_faces)
    uhat[1:-1] = 0.5 * (right_vals[:-1] + left_vals[1:])
    uhat[0], uhat[-1] = _boundary_values(g, mesh)
    q = _flux_from_traces(u, uhat, mesh, k)
    return HDGState(0.0, u, q, uhat)


def _advance(step: CondensedStep, prev: HDGState, memory: np.ndarray, f_half: np.ndarray,
             t: float, g: tuple[float, float]) -> HDGState:
    mass_u = np.einsum("kij,kj->ki", step.mass, prev.u)
    mem = np.einsum("kij,kj->ki", step.mass, memory)
    load = f_half + (step.kappa / step.delta) * mass_u - mem / step.delta - 0.5 * elliptic(step, prev)
    u, q, uhat = step.solve(load, *g)
    return HDGState(t, u, q, uhat)


def solve_step(history: Sequence[HDGState], step: CondensedStep, weights: KernelWeights,
               f: Callable[[np.ndarray, float], np.ndarray], g=(0.0, 0.0)) -> HDGState:
    """Advance from ``history[-1]`` (level ``j - 1``) to level ``j = len(history)``."""
    if weights.j != len(history):
        raise ValueError(f"weights are for step {weights.j} but history has {len(history)} levels")
    if not np.isclose(weights.delta, step.delta, rtol=1e-12, atol=0.0) or \
            not np.isclose(weights.reaction, step.kappa, rtol=1e-12, atol=0.0):
        raise ValueError("factorization does not match the kernel weights (kappa or delta differ)")
    prev = history[-1]
    t_prev, t_new = prev.t, prev.t + step.delta
    memory = memory_term(np.array([s.u for s in history]), weights)
    k, mesh = step.k, step.mesh
    f_half = 0.5 * (load_vector(f, t_prev, mesh, k) + load_vector(f, t_new, mesh, k))
    return _advance(step, prev, memory, f_half, t_new, _boundary_values(g, mesh))


def n_steps(T: float, delta: float) -> int:
    Nt = int(round(T / delta))
    if Nt < 1 or abs(Nt * delta - T) > 1e-9 * max(T, 1.0):
        raise ValueError(f"time step {delta} does not divide the horizon {T}")
    return Nt


def run_transient(problem: Problem, mesh: Mesh1D, k: int, tau, delta: float, T: float,
                  return_history: bool = False):
    """March from ``t = 0`` to ``T`` with ``N_t = T / delta`` uniform steps.

    Returns the final ``HDGState``, or the list of all levels when
    ``return_history`` is set.
    """
    Nt = n_steps(T, delta)
    step = build_step(mesh, k, tau, problem.alpha, delta)
    q0 = getattr(problem, "initial_flux", None)
    state = initialize(problem.initial, problem.boundary, mesh, k, step.tau, q0=q0)
    g = _boundary_values(problem.boundary, mesh)
    # uniform steps: beta_{j,i} depends on j - i only
    by_lag = lag_weights(problem.alpha, delta, Nt) / delta
    diffs = np.zeros((Nt + 1,) + state.u.shape)
    states = [state] if return_history else None
    f_prev = load_vector(problem.source, 0.0, mesh, k)
    for j in range(1, Nt + 1):
        t = j * delta
        f_now = load_vector(problem.source, t, mesh, k)
        memory = np.tensordot(by_lag[j - 1:0:-1], diffs[1:j], axes=1) if j > 1 else np.zeros_like(state.u)
        new = _advance(step, state, memory, 0.5 * (f_prev + f_now), t, g)
        diffs[j] = new.u - state.u
        state, f_prev = new, f_now
        if states is not None:
            states.append(state)
    return states if return_history else state
