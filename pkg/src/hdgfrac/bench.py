"""Manufactured problems, error norms and convergence tables."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field, fields
from typing import Callable

import numpy as np

from .fractional import _check_order
from .hdg import HDGState, run_transient
from .mesh import Mesh1D, build_uniform_mesh, gauss_rule
from .postprocess import PostprocessedField, postprocess

# errors below this are reported without a rate
ERROR_FLOOR = 1e-12

CSV_HEADER = "N,err_u,rate_u,err_q,rate_q,err_ustar,rate_ustar"


@dataclass
class ManufacturedProblem:
    """Exact solution with matching source, boundary and initial data.

    ``exact_q`` is the flux ``-du/dx``.  ``boundary`` is time independent.
    """

    alpha: float
    exact_u: Callable[[np.ndarray, float], np.ndarray]
    exact_q: Callable[[np.ndarray, float], np.ndarray]
    f: Callable[[np.ndarray, float], np.ndarray]
    T: float = 1.0
    name: str = "custom"

    def source(self, x, t):
        return self.f(x, t)

    def initial(self, x):
        return self.exact_u(x, 0.0)

    def initial_flux(self, x):
        return self.exact_q(x, 0.0)

    def boundary(self, x):
        return float(np.asarray(self.exact_u(np.asarray(x, dtype=float), 0.0)))


def manufactured_source(alpha: float, T: float = 1.0) -> ManufacturedProblem:
    """``u = t^(3-alpha) sin(pi x)`` on ``(0, 1)`` with homogeneous Dirichlet data."""
    _check_order(alpha)
    caputo = math.gamma(4.0 - alpha) / 2.0

    def u(x, t):
        return t ** (3.0 - alpha) * np.sin(np.pi * x)

    def q(x, t):
        return -np.pi * t ** (3.0 - alpha) * np.cos(np.pi * x)

    def f(x, t):
        return (caputo * t ** 2 + np.pi ** 2 * t ** (3.0 - alpha)) * np.sin(np.pi * x)

    return ManufacturedProblem(alpha, u, q, f, T=T, name="manufactured")


def error_norms(state: HDGState, post: PostprocessedField, mesh: Mesh1D,
                exact_u: Callable, exact_q: Callable, T: float, finest: Mesh1D,
                n_points: int = 4) -> tuple[float, float, float]:
    """L2 errors of ``u_h``, ``q_h`` and ``u*`` at time ``T``.

    Uses a composite Gauss rule on every interval of ``finest``, which must
    refine ``mesh``.
    """
    if not mesh.is_refined_by(finest):
        raise ValueError("the quadrature mesh does not refine the solution mesh")
    rule = gauss_rule(n_points)
    x = finest.to_physical(rule.nodes).ravel()
    w = (0.5 * finest.sizes[:, None] * rule.weights[None, :]).ravel()
    K, xi = mesh.locate(x)
    # evaluate each point against its own element's coefficients
    def field_at(coeffs):
        V = np.polynomial.legendre.legvander(xi, coeffs.shape[1] - 1)
        return np.einsum("pm,pm->p", V, coeffs[K])

    u, q = exact_u(x, T), exact_q(x, T)
    e_u = math.sqrt(np.dot(w, (field_at(state.u) - u) ** 2))
    e_q = math.sqrt(np.dot(w, (field_at(state.q) - q) ** 2))
    e_s = math.sqrt(np.dot(w, (field_at(post.coeffs) - u) ** 2))
    return e_u, e_q, e_s


@dataclass
class RunConfig:
    alpha: float = 0.5
    degree: int = 1
    tau: float = 1.0
    levels: list[int] = field(default_factory=lambda: [4, 8, 16, 32])
    ratio_c: float = 0.5
    final_time: float = 1.0
    format: str = "csv"
    norm_points: int = 4
    full_precision: bool = False

    def __post_init__(self) -> None:
        _check_order(self.alpha)
        if self.degree < 0:
            raise ValueError("degree must be nonnegative")
        if not 0 < self.ratio_c < 1:
            raise ValueError("the time-step ratio constant must lie in (0, 1)")
        if self.final_time <= 0:
            raise ValueError("final time must be positive")
        self.levels = sorted(int(n) for n in self.levels)
        if len(self.levels) < 2:
            raise ValueError("a convergence study needs at least two levels")

    def time_steps(self, h: float) -> int:
        """Number of steps for mesh size ``h``: ``delta^2 <= c h^(k+2)`` with exact landing on T."""
        delta = math.sqrt(self.ratio_c * h ** (self.degree + 2))
        return math.ceil(self.final_time / delta - 1e-9)

    @classmethod
    def from_file(cls, path) -> RunConfig:
        """Read ``key = value`` lines; ``#`` starts a comment."""
        kinds = {f.name: f.type for f in fields(cls)}
        values = {}
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key=value")
                key, val = (s.strip() for s in line.split("=", 1))
                key = key.replace("-", "_")
                if key not in kinds:
                    raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = _parse_value(key, val)
        return cls(**values)


def _parse_value(key: str, val: str):
    if key == "levels":
        return [int(v) for v in val.replace(",", " ").split()]
    if key in ("degree", "norm_points"):
        return int(val)
    if key == "format":
        return val
    if key == "full_precision":
        return val.lower() in ("1", "true", "yes", "on")
    return float(val)


@dataclass
class Row:
    N: int
    err_u: float
    err_q: float
    err_ustar: float
    rate_u: float | None = None
    rate_q: float | None = None
    rate_ustar: float | None = None
    steps: int = 0


@dataclass
class ConvergenceTable:
    rows: list[Row]
    config: RunConfig | None = None
    flagged: bool = False

    def rates(self, which: str) -> list[float | None]:
        return [getattr(r, f"rate_{which}") for r in self.rows]

    def errors(self, which: str) -> list[float]:
        return [getattr(r, f"err_{which}") for r in self.rows]


def _rate(e_prev: float, e: float, h_prev: float, h: float) -> float:
    if e_prev < ERROR_FLOOR or e < ERROR_FLOOR:
        return math.nan
    return math.log(e_prev / e) / math.log(h_prev / h)


def fill_rates(rows: list[Row], a: float = 0.0, b: float = 1.0) -> bool:
    """Compute rates in place; returns True if any rate is meaningless."""
    flagged = False
    for prev, row in zip(rows[:-1], rows[1:]):
        hp, h = (b - a) / prev.N, (b - a) / row.N
        for which in ("u", "q", "ustar"):
            r = _rate(getattr(prev, f"err_{which}"), getattr(row, f"err_{which}"), hp, h)
            flagged |= math.isnan(r)
            setattr(row, f"rate_{which}", r)
    return flagged


def convergence_study(config: RunConfig, problem: ManufacturedProblem | None = None,
                      time_refinement: int = 1) -> ConvergenceTable:
    """Run every level, postprocess, measure errors at ``T`` and fit rates.

    ``time_refinement`` multiplies the number of steps on every level (used
    to check that spatial errors dominate).
    """
    if problem is None:
        problem = manufactured_source(config.alpha, config.final_time)
    a, b = 0.0, 1.0
    finest = build_uniform_mesh(a, b, config.levels[-1])
    rows = []
    for N in config.levels:
        mesh = build_uniform_mesh(a, b, N)
        Nt = config.time_steps(mesh.h) * time_refinement
        state = run_transient(problem, mesh, config.degree, config.tau, config.final_time / Nt,
                              config.final_time)
        post = postprocess(state, mesh)
        e = error_norms(state, post, mesh, problem.exact_u, problem.exact_q, config.final_time,
                        finest, config.norm_points)
        rows.append(Row(N, *e, steps=Nt))
    flagged = fill_rates(rows, a, b)
    return ConvergenceTable(rows, config, flagged)


def _fmt_err(x: float, full: bool) -> str:
    return f"{x:.17g}" if full else f"{x:.3e}"


def _fmt_rate(r: float | None, full: bool) -> str:
    if r is None:
        return ""
    if math.isnan(r):
        return "nan"
    return f"{r:.17g}" if full else f"{r:.3f}"


def _header_comment(table: ConvergenceTable) -> str:
    c = table.config
    if c is None:
        return ""
    text = (f"alpha={c.alpha} degree={c.degree} tau={c.tau} ratio_c={c.ratio_c} "
            f"final_time={c.final_time} norm_points={c.norm_points}")
    if table.flagged:
        text += " flagged=errors-at-floor"
    return text


def emit_table(table: ConvergenceTable, fmt: str = "csv", full_precision: bool = False) -> str:
    """Render a table as ``csv`` or ``md``."""
    if fmt not in ("csv", "md"):
        raise ValueError(f"unknown table format {fmt!r}")
    if not table.rows:
        raise ValueError("empty convergence table")
    full = full_precision
    out = io.StringIO()
    comment = _header_comment(table)
    if fmt == "csv":
        if comment:
            out.write(f"# {comment}\n")
        out.write(CSV_HEADER + "\n")
        for r in table.rows:
            out.write(",".join([
                str(r.N),
                _fmt_err(r.err_u, full), _fmt_rate(r.rate_u, full),
                _fmt_err(r.err_q, full), _fmt_rate(r.rate_q, full),
                _fmt_err(r.err_ustar, full), _fmt_rate(r.rate_ustar, full),
            ]) + "\n")
    else:
        if comment:
            out.write(f"<!-- {comment} -->\n\n")
        k = table.config.degree if table.config else "?"
        out.write(f"| N | ‖u−u_h‖ (k={k}) | rate | ‖q−q_h‖ | rate | ‖u−u*_h‖ | rate |\n")
        out.write("|--:|--:|--:|--:|--:|--:|--:|\n")
        for r in table.rows:
            out.write(f"| {r.N} | {_fmt_err(r.err_u, full)} | {_fmt_rate(r.rate_u, full)} "
                      f"| {_fmt_err(r.err_q, full)} | {_fmt_rate(r.rate_q, full)} "
                      f"| {_fmt_err(r.err_ustar, full)} | {_fmt_rate(r.rate_ustar, full)} |\n")
    return out.getvalue()


def parse_csv(text: str) -> ConvergenceTable:
    """Read a table written by :func:`emit_table` (config is not restored)."""
    rows = []
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0].strip() != CSV_HEADER:
        raise ValueError("not a convergence-table CSV")
    def num(s):
        return None if s == "" else float(s)
    for ln in lines[1:]:
        p = ln.split(",")
        rows.append(Row(int(p[0]), float(p[1]), float(p[3]), float(p[5]),
                        num(p[2]), num(p[4]), num(p[6])))
    return ConvergenceTable(rows)

