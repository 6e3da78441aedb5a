"""One-dimensional meshes, Legendre element bases and Gauss quadrature.

Everything downstream works on the reference interval [-1, 1] and maps to a
physical element ``[x_L, x_R]`` through ``x = x_L + h (xi + 1) / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.polynomial import legendre


@dataclass(frozen=True)
class Mesh1D:
    """Ordered partition ``x_0 < x_1 < ... < x_N`` of ``[a, b]``."""

    nodes: np.ndarray

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise ValueError("a mesh needs at least two nodes")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("mesh nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @property
    def a(self) -> float:
        return float(self.nodes[0])

    @property
    def b(self) -> float:
        return float(self.nodes[-1])

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1

    @property
    def n_faces(self) -> int:
        return self.nodes.size

    @property
    def sizes(self) -> np.ndarray:
        """Element lengths ``h_K``."""
        return np.diff(self.nodes)

    @property
    def h(self) -> float:
        return float(self.sizes.max())

    def element(self, K: int) -> tuple[float, float]:
        return float(self.nodes[K]), float(self.nodes[K + 1])

    def to_physical(self, xi: np.ndarray) -> np.ndarray:
        """Map reference points to every element, shape ``(N, len(xi))``."""
        xl = self.nodes[:-1, None]
        return xl + 0.5 * self.sizes[:, None] * (np.asarray(xi)[None, :] + 1.0)

    def locate(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Return element index and reference coordinate for each point."""
        x = np.asarray(x, dtype=float)
        K = np.clip(np.searchsorted(self.nodes, x, side="right") - 1, 0, self.n_elements - 1)
        xl = self.nodes[K]
        xi = 2.0 * (x - xl) / self.sizes[K] - 1.0
        return K, xi

    def is_refined_by(self, other: Mesh1D, rtol: float = 1e-12) -> bool:
        """True if every node of ``self`` is also a node of ``other``."""
        tol = rtol * (self.b - self.a)
        idx = np.clip(np.searchsorted(other.nodes, self.nodes), 0, other.n_faces - 1)
        lo = np.clip(idx - 1, 0, other.n_faces - 1)
        dist = np.minimum(np.abs(other.nodes[idx] - self.nodes), np.abs(other.nodes[lo] - self.nodes))
        return bool(np.all(dist <= tol))


def build_uniform_mesh(a: float, b: float, N: int) -> Mesh1D:
    if N < 1:
        raise ValueError(f"need at least one element, got N={N}")
    if not b > a:
        raise ValueError(f"empty interval [{a}, {b}]")
    return Mesh1D(np.linspace(a, b, N + 1))


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    def __len__(self) -> int:
        return self.nodes.size

    def integrate(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        """Integrate ``f`` over [-1, 1]."""
        return float(np.dot(self.weights, f(self.nodes)))


def gauss_rule(n: int) -> QuadratureRule:
    """n-point Gauss-Legendre rule on [-1, 1], exact up to degree ``2n - 1``."""
    if not 1 <= n <= 20:
        raise ValueError(f"number of Gauss points must be in [1, 20], got {n}")
    x, w = legendre.leggauss(n)
    return QuadratureRule(x, w)


def assembly_points(k: int) -> int:
    """Points needed to integrate products of degree-``k`` data exactly."""
    return -(-(2 * k + 3) // 2) + 1


@dataclass(frozen=True)
class ElementBasis:
    """Legendre polynomials ``P_0 .. P_k`` on the reference element.

    With this basis the element mass matrix is ``diag(h / (2m + 1))``.
    """

    degree: int
    _eye: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.degree < 0:
            raise ValueError("degree must be nonnegative")
        object.__setattr__(self, "_eye", np.eye(self.degree + 1))

    @property
    def size(self) -> int:
        return self.degree + 1

    def eval(self, xi: np.ndarray) -> np.ndarray:
        """Basis values, shape ``(len(xi), k + 1)``."""
        return legendre.legvander(np.asarray(xi, dtype=float), self.degree)

    def deriv(self, xi: np.ndarray) -> np.ndarray:
        """Reference derivatives ``dP_m/dxi``, shape ``(len(xi), k + 1)``."""
        xi = np.asarray(xi, dtype=float)
        cols = [legendre.legval(xi, legendre.legder(self._eye[m])) if m else np.zeros_like(xi)
                for m in range(self.size)]
        return np.stack(cols, axis=-1)

    def mass_diagonal(self, hK: float = 2.0) -> np.ndarray:
        """Diagonal of the mass matrix on an element of length ``hK``."""
        return hK / (2.0 * np.arange(self.size) + 1.0)

    def left(self) -> np.ndarray:
        return (-1.0) ** np.arange(self.size)

    def right(self) -> np.ndarray:
        return np.ones(self.size)


def evaluate(coeffs: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """Evaluate Legendre expansions ``coeffs`` (``(N, k+1)``) at reference points."""
    coeffs = np.atleast_2d(coeffs)
    return coeffs @ legendre.legvander(np.asarray(xi, dtype=float), coeffs.shape[1] - 1).T


def project_L2(f: Callable[[np.ndarray], np.ndarray], degree: int, element: tuple[float, float],
               n_points: int | None = None) -> np.ndarray:
    """Legendre coefficients of the L2 projection of ``f`` onto P_degree(element)."""
    xl, xr = element
    rule = gauss_rule(n_points or min(20, degree + 6))
    x = xl + 0.5 * (xr - xl) * (rule.nodes + 1.0)
    V = legendre.legvander(rule.nodes, degree)
    # (f, P_m) / (P_m, P_m) on the reference element
    return (V.T @ (rule.weights * f(x))) * (2.0 * np.arange(degree + 1) + 1.0) / 2.0


def project_mesh(f: Callable[[np.ndarray], np.ndarray], degree: int, mesh: Mesh1D,
                 n_points: int | None = None) -> np.ndarray:
    """Elementwise L2 projection on every element, shape ``(N, degree + 1)``."""
    rule = gauss_rule(n_points or min(20, degree + 6))
    x = mesh.to_physical(rule.nodes)
    V = legendre.legvander(rule.nodes, degree)
    scale = (2.0 * np.arange(degree + 1) + 1.0) / 2.0
    return (f(x) * rule.weights) @ V * scale
