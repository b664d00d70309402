"""Quadrature rules on triangles (barycentric) and edges (unit parameter).

Weights are relative: they sum to 1 and are multiplied by |T| or |e| when a
rule is applied to a concrete cell.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss


@dataclass(frozen=True)
class TriangleRule:
    name: str
    degree: int
    barycentric: np.ndarray  # (Q, 3)
    weights: np.ndarray  # (Q,), sum 1

    @property
    def size(self) -> int:
        return len(self.weights)

    def points(self, corners: np.ndarray) -> np.ndarray:
        """Physical points for every triangle: corners (F, 3, 2) -> (F, Q, 2)."""
        return np.einsum("qk,fkd->fqd", self.barycentric, corners)


@dataclass(frozen=True)
class EdgeRule:
    name: str
    degree: int
    params: np.ndarray  # (Q,) in [0, 1]
    weights: np.ndarray  # (Q,), sum 1

    @property
    def size(self) -> int:
        return len(self.weights)

    def points(self, start: np.ndarray, end: np.ndarray) -> np.ndarray:
        """Physical points for every edge: endpoints (E, 2) -> (E, Q, 2)."""
        t = self.params[None, :, None]
        return (1.0 - t) * start[:, None, :] + t * end[:, None, :]


def _frozen(*arrays: np.ndarray):
    for array in arrays:
        array.flags.writeable = False
    return arrays


def centroid_rule() -> TriangleRule:
    bary, weights = _frozen(np.full((1, 3), 1.0 / 3.0), np.ones(1))
    return TriangleRule("centroid", 1, bary, weights)


def vertex_rule() -> TriangleRule:
    """Trapezoidal rule on the three vertices; exact for affine integrands."""
    bary, weights = _frozen(np.eye(3), np.full(3, 1.0 / 3.0))
    return TriangleRule("vertex", 1, bary, weights)


def dunavant7_rule() -> TriangleRule:
    """Seven-point rule, exact for polynomials of degree 5."""
    s15 = np.sqrt(15.0)
    a = (6.0 - s15) / 21.0
    b = (6.0 + s15) / 21.0
    wa = (155.0 - s15) / 1200.0
    wb = (155.0 + s15) / 1200.0
    bary = np.array(
        [
            [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            [1.0 - 2.0 * a, a, a],
            [a, 1.0 - 2.0 * a, a],
            [a, a, 1.0 - 2.0 * a],
            [1.0 - 2.0 * b, b, b],
            [b, 1.0 - 2.0 * b, b],
            [b, b, 1.0 - 2.0 * b],
        ]
    )
    weights = np.array([9.0 / 40.0, wa, wa, wa, wb, wb, wb])
    bary, weights = _frozen(bary, weights)
    return TriangleRule("dunavant7", 5, bary, weights)


def collapsed_gauss_rule(degree: int) -> TriangleRule:
    """Conical product Gauss rule (Duffy collapse of the square), exact to ``degree``."""
    n = max(1, (degree + 2) // 2 + 1)
    nodes, gw = leggauss(n)
    u = 0.5 * (nodes + 1.0)
    wu = 0.5 * gw
    uu, vv = np.meshgrid(u, u, indexing="ij")
    wuu, wvv = np.meshgrid(wu, wu, indexing="ij")
    xi = uu.ravel()
    eta = (vv * (1.0 - uu)).ravel()
    weights = (2.0 * wuu * wvv * (1.0 - uu)).ravel()
    bary = np.column_stack((1.0 - xi - eta, xi, eta))
    bary, weights = _frozen(bary, weights)
    return TriangleRule(f"collapsed_gauss{n}x{n}", degree, bary, weights)


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> TriangleRule:
    """Cheapest built-in rule exact for polynomials of the given degree."""
    if degree <= 1:
        return centroid_rule()
    if degree <= 5:
        return dunavant7_rule()
    return collapsed_gauss_rule(degree)


@lru_cache(maxsize=None)
def gauss_edge_rule(n_points: int) -> EdgeRule:
    nodes, weights = leggauss(n_points)
    params, weights = _frozen(0.5 * (nodes + 1.0), 0.5 * weights)
    return EdgeRule(f"gauss{n_points}", 2 * n_points - 1, params, weights)


def trapezoid_edge_rule() -> EdgeRule:
    params, weights = _frozen(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
    return EdgeRule("trapezoid", 1, params, weights)


def simpson_edge_rule() -> EdgeRule:
    params, weights = _frozen(np.array([0.0, 0.5, 1.0]), np.array([1.0, 4.0, 1.0]) / 6.0)
    return EdgeRule("simpson", 3, params, weights)
