import math

import numpy as np
import pytest

from hdgfrac.bench import manufactured_source
from hdgfrac.fractional import cn_weights
from hdgfrac.hdg import (
    HDGState, ProjectionPair, assemble_local, build_step, condense, flux_residual, hdg_projection,
    initialize, project_hdg_mesh, run_transient, solve_step,
)
from hdgfrac.mesh import ElementBasis, build_uniform_mesh, evaluate, gauss_rule
from oracles import Monolithic, monolithic_step


class ZeroProblem:
    alpha = 0.5

    def source(self, x, t):
        return np.zeros_like(x)

    def initial(self, x):
        return np.zeros_like(x)

    def boundary(self, x):
        return 0.0


def random_source(rng):
    a, b, w = rng.normal(size=3)
    return lambda x, t: (a + b * t) * np.sin(np.pi * w * x) + t ** 2 * x


def test_local_mass_entry_k0():
    loc = assemble_local((0.0, 1.0), 0, 1.0, 0.0)
    assert loc.A[0, 0] == pytest.approx(1.0)


def test_local_rejects_negative_tau():
    with pytest.raises(ValueError):
        assemble_local((0.0, 1.0), 1, (-1.0, 1.0), 1.0)


@pytest.mark.parametrize("k", [0, 1, 2, 4])
def test_local_solve_residual(k):
    rng = np.random.default_rng(k)
    loc = assemble_local((0.2, 0.45), k, (0.7, 2.0), 3.0)
    b = rng.normal(size=2 * k + 2)
    z = np.linalg.solve(loc.A, b)
    assert np.abs(loc.A @ z - b).max() <= 1e-11 * (1 + np.abs(b).max())


@pytest.mark.parametrize("k", [0, 1, 2, 3])
@pytest.mark.parametrize("tau", [0.1, 1.0, 10.0])
def test_condensed_element_block_symmetric(k, tau):
    mesh = build_uniform_mesh(0, 1, 3)
    blocks = [assemble_local(mesh.element(K), k, tau, 2.5) for K in range(3)]
    *_, S = condense(blocks, mesh)
    for SK in S:
        assert np.abs(SK - SK.T).max() <= 1e-13 * np.abs(SK).max()


def test_local_matrices_match_closed_form_legendre():
    from oracles import legendre_deriv_matrix
    loc = assemble_local((0.0, 0.5), 3, 1.0, 0.0)
    np.testing.assert_allclose(loc.deriv, legendre_deriv_matrix(3), atol=1e-14)


def _trace_matrix(step):
    band = step.trace_band
    n = band.shape[1]
    A = np.diag(band[1]) + np.diag(band[0, 1:], 1) + np.diag(band[0, 1:], -1)
    return A[:n, :n]


@pytest.mark.parametrize("tau", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("k", [0, 1, 2])
def test_trace_matrix_spd(tau, k):
    step = build_step(build_uniform_mesh(0, 1, 9), k, tau, 0.5, 0.01)
    A = _trace_matrix(step)
    assert np.linalg.eigvalsh(A).min() > 0
    assert step.cho is not None


def test_two_element_trace_system_matches_monolithic_schur():
    mesh = build_uniform_mesh(0, 1, 2)
    blocks = [assemble_local(mesh.element(K), 0, 1.0, 1.0) for K in range(2)]
    _, _, _, band, _, _ = condense(blocks, mesh)
    assert band.shape == (2, 1)
    # Schur complement of the dense system onto the single interior trace
    mono = Monolithic(mesh.nodes, 0, 1.0, 1.0)
    A = mono.A
    interior = 2 * 2 * 1 + 1
    others = [i for i in range(A.shape[0]) if i != interior]
    schur = A[interior, interior] - A[interior, others] @ np.linalg.solve(
        A[np.ix_(others, others)], A[others, interior])
    # the dense trace row is the (negated) transmission residual
    assert band[1, 0] == pytest.approx(-schur, rel=1e-13)


def test_zero_load_gives_zero_traces():
    step = build_step(build_uniform_mesh(0, 1, 6), 2, 1.0, 0.5, 0.1)
    u, q, uhat = step.solve(np.zeros((6, 3)), 0.0, 0.0)
    assert np.abs(uhat).max() == 0.0 and np.abs(u).max() == 0.0


def test_condensed_equals_monolithic_n32_k2():
    rng = np.random.default_rng(7)
    mesh = build_uniform_mesh(0, 1, 32)
    alpha, delta = 0.5, 0.01
    step = build_step(mesh, 2, 1.0, alpha, delta)
    load = rng.normal(size=(32, 3))
    u, q, uhat = step.solve(load, 0.3, -0.2)
    mono = Monolithic(mesh.nodes, 2, 1.0, step.kappa / delta)
    um, qm, uhm = mono.solve(load, 0.3, -0.2)
    scale = max(np.abs(um).max(), np.abs(qm).max())
    for a, b in ((u, um), (q, qm), (uhat, uhm)):
        assert np.abs(a - b).max() <= 1e-10 * scale


def test_projection_k0_by_hand():
    pair = hdg_projection(lambda x: x, lambda x: np.zeros_like(x), (0.0, 1.0), 0, 1.0)
    assert pair.u[0] == pytest.approx(0.5)
    assert pair.q[0] == pytest.approx(0.5)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_projection_reproduces_polynomials(k):
    rng = np.random.default_rng(k)
    cu, cq = rng.normal(size=k + 1), rng.normal(size=k + 1)
    u = np.polynomial.Polynomial(cu)
    q = np.polynomial.Polynomial(cq)
    el = (0.3, 0.8)
    pair = hdg_projection(u, q, el, k, (0.5, 2.0))
    xs = np.linspace(*el, 9)
    xi = 2 * (xs - el[0]) / (el[1] - el[0]) - 1
    np.testing.assert_allclose(evaluate(pair.u, xi)[0], u(xs), atol=1e-12)
    np.testing.assert_allclose(evaluate(pair.q, xi)[0], q(xs), atol=1e-12)


def test_projection_satisfies_defining_equations():
    k, el, tau = 2, (0.1, 0.4), (1.0, 3.0)
    u = lambda x: np.exp(x) * np.sin(3 * x)  # noqa: E731
    q = lambda x: np.cos(5 * x)  # noqa: E731
    pair = hdg_projection(u, q, el, k, tau)
    rule = gauss_rule(12)
    h = el[1] - el[0]
    x = el[0] + 0.5 * h * (rule.nodes + 1)
    V = ElementBasis(k).eval(rule.nodes)
    w = 0.5 * h * rule.weights
    for m in range(k):
        assert np.dot(w, (V @ pair.q - q(x)) * V[:, m]) == pytest.approx(0, abs=1e-12)
        assert np.dot(w, (V @ pair.u - u(x)) * V[:, m]) == pytest.approx(0, abs=1e-12)
    PqL, PuL = evaluate(pair.q, [-1.0])[0, 0], evaluate(pair.u, [-1.0])[0, 0]
    PqR, PuR = evaluate(pair.q, [1.0])[0, 0], evaluate(pair.u, [1.0])[0, 0]
    assert -PqL + tau[0] * PuL == pytest.approx(-q(el[0]) + tau[0] * u(el[0]), abs=1e-12)
    assert PqR + tau[1] * PuR == pytest.approx(q(el[1]) + tau[1] * u(el[1]), abs=1e-12)


def test_projection_requires_positive_tau():
    with pytest.raises(np.linalg.LinAlgError):
        hdg_projection(np.sin, np.cos, (0.0, 1.0), 1, 0.0)


def _projection_errors(k, N):
    mesh = build_uniform_mesh(0, 1, N)
    u = lambda x: np.sin(np.pi * x)  # noqa: E731
    q = lambda x: -np.pi * np.cos(np.pi * x)  # noqa: E731
    pair = project_hdg_mesh(u, q, mesh, k, 1.0)
    rule = gauss_rule(10)
    x = mesh.to_physical(rule.nodes)
    V = ElementBasis(k).eval(rule.nodes)
    w = 0.5 * mesh.sizes[:, None] * rule.weights
    eu = math.sqrt(np.sum(w * (pair.u @ V.T - u(x)) ** 2))
    eq = math.sqrt(np.sum(w * (pair.q @ V.T - q(x)) ** 2))
    return eu, eq


def test_projection_rate_k1():
    errs = [_projection_errors(1, N)[0] for N in (8, 16, 32, 64)]
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert rates[-1] == pytest.approx(2.0, abs=0.15)


def test_initialize_zero():
    mesh = build_uniform_mesh(0, 1, 5)
    st = initialize(lambda x: np.zeros_like(x), lambda x: 0.0, mesh, 2)
    assert st.norm() == 0.0


@pytest.mark.parametrize("with_flux", [True, False])
def test_initialize_satisfies_flux_equation(with_flux):
    mesh = build_uniform_mesh(0, 1, 8)
    q0 = (lambda x: -np.pi * np.cos(np.pi * x)) if with_flux else None
    st = initialize(lambda x: np.sin(np.pi * x), lambda x: 0.0, mesh, 2, 1.0, q0=q0)
    assert flux_residual(st, mesh) <= 1e-11
    assert st.uhat[0] == 0.0 and st.uhat[-1] == 0.0


def test_initialize_manufactured_is_zero():
    p = manufactured_source(0.5)
    mesh = build_uniform_mesh(0, 1, 8)
    st = initialize(p.initial, p.boundary, mesh, 1, q0=p.initial_flux)
    assert st.norm() == 0.0


def test_solve_step_zero_data():
    mesh = build_uniform_mesh(0, 1, 6)
    step = build_step(mesh, 1, 1.0, 0.5, 0.1)
    hist = [initialize(lambda x: 0 * x, lambda x: 0.0, mesh, 1)]
    for j in range(1, 5):
        hist.append(solve_step(hist, step, cn_weights(0.5, 0.1, j), lambda x, t: 0 * x))
    assert max(s.norm() for s in hist) == 0.0


def test_solve_step_rejects_mismatched_weights():
    mesh = build_uniform_mesh(0, 1, 4)
    step = build_step(mesh, 1, 1.0, 0.5, 0.1)
    hist = [initialize(lambda x: 0 * x, lambda x: 0.0, mesh, 1)]
    with pytest.raises(ValueError):
        solve_step(hist, step, cn_weights(0.3, 0.1, 1), lambda x, t: 0 * x)
    with pytest.raises(ValueError):
        solve_step(hist, step, cn_weights(0.5, 0.05, 1), lambda x, t: 0 * x)
    with pytest.raises(ValueError):
        solve_step(hist, step, cn_weights(0.5, 0.1, 2), lambda x, t: 0 * x)


def _march_and_compare(rng, alpha, k, N, steps, tau=1.0):
    mesh = build_uniform_mesh(0, 1, N)
    delta = rng.uniform(0.01, 0.2)
    f = random_source(rng)
    g = tuple(rng.normal(size=2))
    u0c = rng.normal(size=3)
    u0 = lambda x: u0c[0] + u0c[1] * x + u0c[2] * np.sin(3 * x)  # noqa: E731
    step = build_step(mesh, k, tau, alpha, delta)
    hist = [initialize(u0, lambda x: g[0] if x == 0 else g[1], mesh, k, tau)]
    for j in range(1, steps + 1):
        hist.append(solve_step(hist, step, cn_weights(alpha, delta, j), f, g))
    prev = hist[-2]
    um, qm, uhm = monolithic_step([s.u for s in hist[:-1]], (prev.u, prev.q, prev.uhat),
                                  mesh.nodes, k, tau, alpha, delta, f, g)
    new = hist[-1]
    scale = max(np.abs(um).max(), np.abs(qm).max(), np.abs(uhm).max())
    return max(np.abs(new.u - um).max(), np.abs(new.q - qm).max(),
               np.abs(new.uhat - uhm).max()) / scale


def test_one_step_equals_monolithic():
    rng = np.random.default_rng(11)
    assert _march_and_compare(rng, 0.5, 2, 8, 1) <= 1e-10


@pytest.mark.parametrize("seed", range(6))
def test_condensation_equivalence_random(seed):
    rng = np.random.default_rng(100 + seed)
    alpha = rng.uniform(0.05, 0.95)
    k = int(rng.integers(0, 3))
    N = int(rng.integers(1, 17))
    tau = rng.uniform(0.1, 10.0)
    assert _march_and_compare(rng, alpha, k, N, int(rng.integers(1, 5)), tau) <= 1e-10


def test_run_single_step_matches_solve_step():
    p = manufactured_source(0.6)
    mesh = build_uniform_mesh(0, 1, 6)
    final = run_transient(p, mesh, 1, 1.0, 0.25, 0.25)
    step = build_step(mesh, 1, 1.0, 0.6, 0.25)
    hist = [initialize(p.initial, p.boundary, mesh, 1, q0=p.initial_flux)]
    one = solve_step(hist, step, cn_weights(0.6, 0.25, 1), p.source)
    np.testing.assert_allclose(final.u, one.u, rtol=1e-14, atol=1e-16)
    np.testing.assert_allclose(final.uhat, one.uhat, rtol=1e-14, atol=1e-16)


def test_run_matches_stepwise_history():
    p = manufactured_source(0.4)
    mesh = build_uniform_mesh(0, 1, 5)
    states = run_transient(p, mesh, 2, 1.0, 0.1, 1.0, return_history=True)
    step = build_step(mesh, 2, 1.0, 0.4, 0.1)
    hist = [states[0]]
    for j in range(1, 11):
        hist.append(solve_step(hist, step, cn_weights(0.4, 0.1, j), p.source))
    np.testing.assert_allclose(hist[-1].u, states[-1].u, rtol=1e-12, atol=1e-14)


def test_zero_data_hundred_steps():
    states = run_transient(ZeroProblem(), build_uniform_mesh(0, 1, 8), 2, 1.0, 0.01, 1.0,
                           return_history=True)
    assert len(states) == 101
    assert max(s.norm() for s in states) <= 1e-13


def test_flux_equation_holds_every_level():
    p = manufactured_source(0.5)
    mesh = build_uniform_mesh(0, 1, 8)
    states = run_transient(p, mesh, 2, 1.0, 0.05, 1.0, return_history=True)
    assert max(flux_residual(s, mesh) for s in states) <= 1e-10


def test_run_rejects_non_dividing_step():
    with pytest.raises(ValueError):
        run_transient(ZeroProblem(), build_uniform_mesh(0, 1, 2), 0, 1.0, 0.3, 1.0)


def test_state_is_plain_data():
    st = HDGState(0.0, np.zeros((2, 2)), np.zeros((2, 2)), np.zeros(3))
    assert st.degree == 1
    assert isinstance(ProjectionPair(np.zeros(1), np.zeros(1)), ProjectionPair)
