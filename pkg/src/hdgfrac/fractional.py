"""Fractional kernels, the Riemann-Liouville integral and CN memory weights.

The kernel is ``omega_a(t) = t**(a-1) / Gamma(a)``.  The time stepper integrates
``int_{t_{j-1}}^{t_j} int_0^t omega_alpha(t - s) ubar(s) ds dt`` exactly for a
piecewise-constant ``ubar``; the resulting coefficients ``beta_{j,i}`` depend
only on the lag ``j - i`` on a uniform grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# lags above this use the asymptotic expansion of the second difference
TAYLOR_LAG = 1000


def _check_order(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"fractional order must lie in (0, 1), got {alpha}")


def omega(alpha: float, t: float) -> float:
    """``t**(alpha-1) / Gamma(alpha)`` for ``t > 0``."""
    if alpha <= 0:
        raise ValueError(f"kernel order must be positive, got {alpha}")
    if not t > 0:
        raise ValueError(f"kernel is defined for t > 0 only, got t={t}")
    return t ** (alpha - 1.0) / math.gamma(alpha)


def _omega0(alpha: float, t: np.ndarray) -> np.ndarray:
    # vectorized kernel extended by zero at t = 0 (valid for alpha > 1)
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = t[pos] ** (alpha - 1.0) / math.gamma(alpha)
    return out


def coercivity_constant(alpha: float) -> float:
    return math.cos(alpha * math.pi / 2.0)


def _binom(p: float, n: int) -> float:
    out = 1.0
    for m in range(n):
        out *= (p - m) / (m + 1)
    return out


def lag_coefficients(alpha: float, m_max: int) -> np.ndarray:
    """Dimensionless second differences ``a_m`` of ``s**(alpha+1)``.

    ``a_0 = 1`` and ``a_m = (m+1)^p - 2 m^p + (m-1)^p`` with ``p = alpha + 1``.
    """
    p = alpha + 1.0
    m = np.arange(m_max + 1, dtype=float)
    a = np.empty_like(m)
    a[0] = 1.0
    direct = (m >= 1) & (m <= TAYLOR_LAG)
    md = m[direct]
    a[direct] = (md + 1.0) ** p - 2.0 * md ** p + (md - 1.0) ** p
    far = m > TAYLOR_LAG
    if np.any(far):
        mf = m[far]
        # 2 * sum_n C(p, 2n) m^(p - 2n); next term is O(m^(p - 10))
        a[far] = 2.0 * sum(_binom(p, 2 * n) * mf ** (p - 2 * n) for n in range(1, 5))
    return a


def lag_weights(alpha: float, delta: float, m_max: int) -> np.ndarray:
    """``beta`` as a function of lag ``m = j - i`` for ``m = 0 .. m_max``."""
    _check_order(alpha)
    if not delta > 0:
        raise ValueError(f"time step must be positive, got {delta}")
    return delta ** (alpha + 1.0) / math.gamma(alpha + 2.0) * lag_coefficients(alpha, m_max)


@dataclass(frozen=True)
class KernelWeights:
    """Memory weights ``beta_{j,i}`` for one step; ``beta[i - 1]`` is ``beta_{j,i}``."""

    alpha: float
    delta: float
    j: int
    beta: np.ndarray

    @property
    def diagonal(self) -> float:
        """``beta_{j,j} = omega_{alpha+2}(delta)``."""
        return float(self.beta[-1])

    @property
    def reaction(self) -> float:
        """Implicit coefficient ``beta_{j,j} / delta``."""
        return self.diagonal / self.delta


def cn_weights(alpha: float, delta: float, j: int) -> KernelWeights:
    if j < 1:
        raise ValueError(f"step index must be >= 1, got {j}")
    by_lag = lag_weights(alpha, delta, j - 1)
    return KernelWeights(alpha, delta, j, by_lag[::-1].copy())


def memory_term(history, weights: KernelWeights) -> np.ndarray:
    """Explicit part ``sum_{i<j} (beta_{j,i} / delta) (u^i - u^{i-1})``.

    ``history`` holds ``u^0 .. u^{j-1}`` (any array shape per level).
    """
    history = np.asarray(history, dtype=float)
    if history.shape[0] != weights.j:
        raise ValueError(f"history has {history.shape[0]} levels, step {weights.j} needs {weights.j}")
    if weights.j == 1:
        return np.zeros_like(history[0])
    diffs = np.diff(history, axis=0)
    return np.tensordot(weights.beta[:-1] / weights.delta, diffs, axes=1)


def rl_matrix(alpha: float, times: np.ndarray, t_eval: np.ndarray) -> np.ndarray:
    """Matrix ``W`` with ``W @ v = I^alpha[v](t_eval)`` for ``v`` piecewise linear on ``times``.

    The kernel is integrated exactly against each linear piece; pieces beyond
    the evaluation time are truncated.
    """
    s = np.asarray(times, dtype=float)
    t = np.atleast_1d(np.asarray(t_eval, dtype=float))[:, None]
    W = np.zeros((t.shape[0], s.size))
    if s.size == 1:
        W[:, 0] = _omega0(alpha + 1.0, t[:, 0] - s[0])
        return W
    ds = np.diff(s)
    ra = np.maximum(t - s[:-1], 0.0)
    rb = np.maximum(t - s[1:], 0.0)
    I0 = _omega0(alpha + 1.0, ra) - _omega0(alpha + 1.0, rb)
    I1 = alpha * (_omega0(alpha + 2.0, ra) - _omega0(alpha + 2.0, rb))
    G = (ra * I0 - I1) / ds
    W[:, :-1] += I0 - G
    W[:, 1:] += G
    return W


def riemann_liouville_integral(alpha: float, v, t: float, times=None) -> float | np.ndarray:
    """``int_0^t omega_alpha(t - s) v(s) ds`` for samples ``v`` of a function on ``[0, t]``.

    Samples are taken on a uniform grid unless ``times`` is given; the
    piecewise-linear interpolant of the samples is integrated exactly.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"order must lie in (0, 1], got {alpha}")
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise ValueError("no samples given")
    if times is None:
        times = np.linspace(0.0, t, v.shape[0])
    out = np.tensordot(rl_matrix(alpha, times, [t])[0], v, axes=1)
    return float(out) if np.ndim(out) == 0 else out


def _graded_rule(s: np.ndarray, levels: int = 40, ratio: float = 0.5, n: int = 10):
    # composite Gauss rule on each knot interval, geometrically graded towards its left end
    x, w = np.polynomial.legendre.leggauss(n)
    pts, wts = [], []
    for lo, hi in zip(s[:-1], s[1:]):
        edges = lo + (hi - lo) * np.concatenate(([0.0], ratio ** np.arange(levels, -1, -1)))
        for a, b in zip(edges[:-1], edges[1:]):
            pts.append(a + 0.5 * (b - a) * (x + 1.0))
            wts.append(0.5 * (b - a) * w)
    return np.concatenate(pts), np.concatenate(wts)


def coercivity_check(alpha: float, v, T: float, times=None) -> tuple[float, float]:
    """Both sides of ``int (I^a v, v) dt >= c_a int ||I^{a/2} v||^2 dt``.

    ``v`` has one row per time knot and is treated as piecewise linear in time;
    rows may be vectors (spatial samples, Euclidean inner product).
    Returns ``(lhs, rhs)`` without the constant ``c_a``.
    """
    v = np.asarray(v, dtype=float)
    if times is None:
        times = np.linspace(0.0, T, v.shape[0])
    times = np.asarray(times, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    tq, wq = _graded_rule(times)
    # piecewise-linear interpolant at the quadrature points
    vq = np.stack([np.interp(tq, times, v[:, c]) for c in range(v.shape[1])], axis=1)
    Ia = rl_matrix(alpha, times, tq) @ v
    Ih = rl_matrix(alpha / 2.0, times, tq) @ v
    lhs = float(np.dot(wq, np.sum(Ia * vq, axis=1)))
    rhs = float(np.dot(wq, np.sum(Ih * Ih, axis=1)))
    return lhs, rhs
