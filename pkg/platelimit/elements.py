"""Triangular element families: P2 Lagrange and P3 Hermite.

Shape functions are stored as polynomials in the barycentric coordinates
(lambda0, lambda1, lambda2). Derivatives are taken with respect to the
barycentric coordinates and mapped to physical space through the constant
barycentric gradients of each triangle.
"""

import itertools
from abc import ABC, abstractmethod
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from platelimit.constants import HERMITE_P3, LAGRANGE_P2
from platelimit.exceptions import InvalidArgumentError

Terms = Dict[Tuple[int, int, int], float]
PointFunction = Callable[[np.ndarray], np.ndarray]

# Every barycentric monomial of total degree <= 3.
_EXPONENTS = np.array(
    [e for e in itertools.product(range(4), repeat=3) if sum(e) <= 3], dtype=np.int64
)
_EXPONENT_INDEX = {tuple(int(v) for v in e): k for k, e in enumerate(_EXPONENTS)}


class DofKind(Enum):
    VERTEX_VALUE = "vertex_value"
    VERTEX_GRADIENT_X = "vertex_gradient_x"
    VERTEX_GRADIENT_Y = "vertex_gradient_y"
    EDGE_MIDPOINT_VALUE = "edge_midpoint_value"
    BUBBLE_VALUE = "bubble_value"


def _unit(i: int) -> Tuple[int, int, int]:
    e = [0, 0, 0]
    e[i] = 1
    return (e[0], e[1], e[2])


def _add(*parts: Tuple[float, Terms]) -> Terms:
    total: Terms = {}
    for scale, terms in parts:
        for exps, coef in terms.items():
            total[exps] = total.get(exps, 0.0) + scale * coef
    return total


def _mono(*powers: int) -> Terms:
    return {(powers[0], powers[1], powers[2]): 1.0}


def _coefficients(basis: Sequence[Terms]) -> np.ndarray:
    coeffs = np.zeros((len(basis), len(_EXPONENTS)))
    for b, terms in enumerate(basis):
        for exps, coef in terms.items():
            coeffs[b, _EXPONENT_INDEX[exps]] += coef
    return coeffs


def _monomial_derivative(lam: np.ndarray, beta: Sequence[int]) -> np.ndarray:
    """d^beta of every monomial at the barycentric points lam (Q, 3) -> (Q, K)."""
    beta = np.asarray(beta)
    reduced = _EXPONENTS - beta
    factor = np.ones(len(_EXPONENTS))
    for i in range(3):
        for k in range(beta[i]):
            factor *= _EXPONENTS[:, i] - k
    valid = (reduced >= 0).all(axis=1)
    powers = np.prod(lam[:, None, :] ** np.clip(reduced, 0, None)[None, :, :], axis=2)
    return np.where(valid, factor, 0.0)[None, :] * powers


def barycentric_gradients(corners: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Constant gradients of lambda_i on every triangle.

    Args:
        corners: (F, 3, 2) vertex coordinates.

    Returns:
        (F, 3, 2) gradients and (F,) signed areas.
    """
    x, y = corners[..., 0], corners[..., 1]
    area = 0.5 * ((x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0]))
    grads = np.empty(corners.shape)
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        grads[:, i, 0] = y[:, j] - y[:, k]
        grads[:, i, 1] = x[:, k] - x[:, j]
    return grads / (2.0 * area)[:, None, None], area


class ElementFamily(ABC):
    """Affine-equivalent triangular element defined by a reference basis."""

    kind: str
    local_dof_count: int
    polynomial_degree: int
    local_kinds: List[DofKind]

    def __init__(self):
        self._coeffs = _coefficients(self.reference_terms())

    @abstractmethod
    def reference_terms(self) -> List[Terms]:
        """Reference basis, dual to the reference nodal variables."""

    @abstractmethod
    def transform(self, corners: np.ndarray) -> Optional[np.ndarray]:
        """(F, n_ref, n_local) map from physical local dofs to reference nodal variables."""

    @abstractmethod
    def nodal_values(
        self, corners: np.ndarray, value: PointFunction, gradient: Optional[PointFunction]
    ) -> np.ndarray:
        """Physical local dof values (F, n_local) of a smooth function."""

    def reference_basis(self, lam: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Reference basis and its barycentric derivatives.

        Returns values (Q, n), first derivatives (Q, n, 3) and second
        derivatives (Q, n, 3, 3) with respect to (lambda0, lambda1, lambda2).
        """
        lam = np.atleast_2d(np.asarray(lam, dtype=float))
        c = self._coeffs.T
        values = _monomial_derivative(lam, (0, 0, 0)) @ c
        first = np.stack([_monomial_derivative(lam, _unit(i)) @ c for i in range(3)], axis=-1)
        second = np.empty(first.shape + (3,))
        for i in range(3):
            for j in range(i, 3):
                beta = np.add(_unit(i), _unit(j))
                second[..., i, j] = _monomial_derivative(lam, beta) @ c
                second[..., j, i] = second[..., i, j]
        return values, first, second

    def physical_basis(
        self, lam: np.ndarray, corners: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Values (F, Q, n), gradients (F, Q, n, 2) and Hessians (F, Q, n, 2, 2)."""
        values, first, second = self.reference_basis(lam)
        g, _ = barycentric_gradients(corners)
        n_tri = len(corners)
        values = np.broadcast_to(values, (n_tri,) + values.shape)
        grads = np.einsum("qbi,fid->fqbd", first, g)
        hessians = np.einsum("qbij,fid,fje->fqbde", second, g, g)
        m = self.transform(corners)
        if m is not None:
            values = np.einsum("fjk,fqj->fqk", m, values)
            grads = np.einsum("fjk,fqjd->fqkd", m, grads)
            hessians = np.einsum("fjk,fqjde->fqkde", m, hessians)
        return np.array(values), grads, hessians

    def pointwise_basis(
        self, lam: np.ndarray, corners: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Basis at one point per triangle: lam (R, 3) paired with corners (R, 3, 2).

        Returns values (R, n), gradients (R, n, 2) and Hessians (R, n, 2, 2).
        """
        values, first, second = self.reference_basis(lam)
        g, _ = barycentric_gradients(corners)
        grads = np.einsum("rbi,rid->rbd", first, g)
        hessians = np.einsum("rbij,rid,rje->rbde", second, g, g)
        m = self.transform(corners)
        if m is not None:
            values = np.einsum("rjk,rj->rk", m, values)
            grads = np.einsum("rjk,rjd->rkd", m, grads)
            hessians = np.einsum("rjk,rjde->rkde", m, hessians)
        return values, grads, hessians


class LagrangeP2(ElementFamily):
    """Quadratic Lagrange triangle: vertex values, then mid-edge values (01, 12, 20)."""

    kind = LAGRANGE_P2
    local_dof_count = 6
    polynomial_degree = 2
    local_kinds = [DofKind.VERTEX_VALUE] * 3 + [DofKind.EDGE_MIDPOINT_VALUE] * 3

    NODES = np.array(
        [[1, 0, 0], [0, 1, 0], [0, 0, 1], [0.5, 0.5, 0], [0, 0.5, 0.5], [0.5, 0, 0.5]]
    )

    def reference_terms(self) -> List[Terms]:
        basis = []
        for i in range(3):
            square = [0, 0, 0]
            square[i] = 2
            basis.append(_add((2.0, _mono(*square)), (-1.0, {_unit(i): 1.0})))
        for i, j in ((0, 1), (1, 2), (2, 0)):
            basis.append({tuple(np.add(_unit(i), _unit(j)).tolist()): 4.0})
        return basis

    def transform(self, corners: np.ndarray) -> Optional[np.ndarray]:
        return None

    def nodal_values(self, corners, value, gradient=None):
        points = np.einsum("qk,fkd->fqd", self.NODES, corners)
        return value(points.reshape(-1, 2)).reshape(len(corners), 6)


class HermiteP3(ElementFamily):
    """Cubic Hermite triangle.

    Reference nodal variables: vertex values, barycentre value and the
    directional derivatives N_ij(u) = grad u(z_i) . (z_j - z_i). Physical local
    dofs: [u0, u1, u2, bubble, gx0, gy0, gx1, gy1, gx2, gy2].
    """

    kind = HERMITE_P3
    local_dof_count = 10
    polynomial_degree = 3
    local_kinds = (
        [DofKind.VERTEX_VALUE] * 3
        + [DofKind.BUBBLE_VALUE]
        + [DofKind.VERTEX_GRADIENT_X, DofKind.VERTEX_GRADIENT_Y] * 3
    )

    # Reference order of the directional nodal variables.
    DIRECTIONS = ((0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1))

    def reference_terms(self) -> List[Terms]:
        bubble = _mono(1, 1, 1)
        basis = []
        for i in range(3):
            square, cube = [0, 0, 0], [0, 0, 0]
            square[i], cube[i] = 2, 3
            basis.append(_add((3.0, _mono(*square)), (-2.0, _mono(*cube)), (-7.0, bubble)))
        basis.append({(1, 1, 1): 27.0})
        for i, j in self.DIRECTIONS:
            powers = [0, 0, 0]
            powers[i] += 2
            powers[j] += 1
            basis.append(_add((1.0, _mono(*powers)), (-1.0, bubble)))
        return basis

    def transform(self, corners: np.ndarray) -> np.ndarray:
        m = np.zeros((len(corners), 10, 10))
        for k in range(4):
            m[:, k, k] = 1.0
        for row, (i, j) in enumerate(self.DIRECTIONS, start=4):
            edge = corners[:, j] - corners[:, i]
            m[:, row, 4 + 2 * i] = edge[:, 0]
            m[:, row, 5 + 2 * i] = edge[:, 1]
        return m

    def nodal_values(self, corners, value, gradient=None):
        if gradient is None:
            raise InvalidArgumentError("Hermite interpolation needs the gradient of the function")
        n_tri = len(corners)
        vertex_points = corners.reshape(-1, 2)
        values = value(vertex_points).reshape(n_tri, 3)
        grads = gradient(vertex_points).reshape(n_tri, 3, 2)
        centre = value(corners.mean(axis=1)).reshape(n_tri, 1)
        return np.concatenate((values, centre, grads.reshape(n_tri, 6)), axis=1)


_FAMILIES = {LAGRANGE_P2: LagrangeP2, HERMITE_P3: HermiteP3}


def get_element(kind: str) -> ElementFamily:
    try:
        return _FAMILIES[kind]()
    except KeyError:
        raise InvalidArgumentError(
            f"unknown element family {kind!r}, expected one of {sorted(_FAMILIES)}"
        ) from None


def shape_eval(
    family: ElementFamily, barycentric: Sequence[float]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Reference shape functions at one point.

    Derivatives are with respect to the reference coordinates (xi, eta) =
    (lambda1, lambda2) of the unit right triangle.

    Returns:
        values (n,), gradients (n, 2), Hessians (n, 2, 2).
    """
    lam = np.asarray(barycentric, dtype=float)
    if lam.shape != (3,) or not np.all(np.isfinite(lam)):
        raise InvalidArgumentError(f"barycentric coordinates must be 3 finite numbers, got {barycentric!r}")
    if lam.min() < -1e-12 or abs(lam.sum() - 1.0) > 1e-12:
        raise InvalidArgumentError(
            f"barycentric coordinates must be nonnegative and sum to 1, got {barycentric!r}"
        )
    values, d, h = family.reference_basis(lam[None, :])
    d, h = d[0], h[0]
    gradients = np.column_stack((d[:, 1] - d[:, 0], d[:, 2] - d[:, 0]))
    h_xx = h[:, 1, 1] - 2.0 * h[:, 0, 1] + h[:, 0, 0]
    h_yy = h[:, 2, 2] - 2.0 * h[:, 0, 2] + h[:, 0, 0]
    h_xy = h[:, 1, 2] - h[:, 0, 1] - h[:, 0, 2] + h[:, 0, 0]
    hessians = np.stack((np.stack((h_xx, h_xy), -1), np.stack((h_xy, h_yy), -1)), axis=-2)
    return values[0], gradients, hessians
