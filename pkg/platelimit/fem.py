"""Global finite element spaces and the dof-linear operators of the plate problem.

An :class:`ElementSpace` ties an element family to a mesh through a
:class:`DofMap`. From it this module builds

* the curvature operator, mapping global dofs to kappa = (k11, k22, k12) at
  triangle quadrature points,
* the edge jump operator, mapping global dofs to the normal-derivative jump
  s on interior edges and on clamped or symmetry boundary edges,
* the Dirichlet reduction, a sparse matrix whose columns span the dof
  vectors that vanish on the supported boundary.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from platelimit.constants import (
    BC_CLAMPED,
    BC_DIRICHLET,
    BC_FREE,
    BC_KINDS,
    BC_SYMMETRY,
    HERMITE_P3,
    LAGRANGE_P2,
    RIGOR_QUADRATURE_LIMITED,
    RIGOR_STRICT,
)
from platelimit.elements import DofKind, ElementFamily, get_element
from platelimit.exceptions import InvalidArgumentError
from platelimit.mesh import Mesh
from platelimit.quadrature import (
    EdgeRule,
    TriangleRule,
    centroid_rule,
    dunavant7_rule,
    gauss_edge_rule,
    simpson_edge_rule,
    trapezoid_edge_rule,
    vertex_rule,
)

logger = logging.getLogger(__name__)

PointFunction = Callable[[np.ndarray], np.ndarray]


# ----------------------------------------------------------------- functions
@dataclass(frozen=True)
class SmoothFunction:
    """A field given with its derivatives; every callable maps (N, 2) points.

    ``value`` returns (N,), ``gradient`` (N, 2) and ``hessian`` (N, 2, 2).
    """

    value: PointFunction
    gradient: PointFunction
    hessian: PointFunction
    third_derivative_bound: Optional[float] = None


def sine_product(frequency: float = np.pi) -> SmoothFunction:
    """u = sin(w x) sin(w y)."""
    w = frequency

    def value(p):
        return np.sin(w * p[:, 0]) * np.sin(w * p[:, 1])

    def gradient(p):
        sx, sy = np.sin(w * p[:, 0]), np.sin(w * p[:, 1])
        cx, cy = np.cos(w * p[:, 0]), np.cos(w * p[:, 1])
        return w * np.column_stack((cx * sy, sx * cy))

    def hessian(p):
        sx, sy = np.sin(w * p[:, 0]), np.sin(w * p[:, 1])
        cx, cy = np.cos(w * p[:, 0]), np.cos(w * p[:, 1])
        h = np.empty((len(p), 2, 2))
        h[:, 0, 0] = h[:, 1, 1] = -(w**2) * sx * sy
        h[:, 0, 1] = h[:, 1, 0] = w**2 * cx * cy
        return h

    return SmoothFunction(value, gradient, hessian, third_derivative_bound=2.0 * w**3)


def pyramid_mechanism(width: float, height: float) -> SmoothFunction:
    """Roof mechanism of the quarter plate [0, width] x [0, height].

    Unit deflection at the origin, zero on the sides x = width and y = height,
    with a hinge along the line x / width = y / height. The Hessian is zero
    away from the hinge, so interpolants are exact on meshes containing it.
    """

    def value(p):
        return np.minimum(1.0 - p[:, 0] / width, 1.0 - p[:, 1] / height)

    def gradient(p):
        x_branch = p[:, 0] / width >= p[:, 1] / height
        g = np.zeros((len(p), 2))
        g[x_branch, 0] = -1.0 / width
        g[~x_branch, 1] = -1.0 / height
        return g

    def hessian(p):
        return np.zeros((len(p), 2, 2))

    return SmoothFunction(value, gradient, hessian)


# ------------------------------------------------------------------ dof maps
@dataclass(frozen=True)
class DofMap:
    n_dofs: int
    cell_dofs: np.ndarray  # (F, n_local)
    kinds: np.ndarray  # (n_dofs,) DofKind values
    locations: np.ndarray  # (n_dofs, 2)

    def of_kind(self, kind: DofKind) -> np.ndarray:
        return np.flatnonzero(self.kinds == kind.value)


def build_dof_map(family: ElementFamily, mesh: Mesh) -> DofMap:
    """Global numbering.

    P2: vertex values first, then one value per edge midpoint.
    Hermite: (value, d/dx, d/dy) per vertex, then one bubble per triangle.
    """
    n_v, n_e, n_t = mesh.n_vertices, mesh.n_edges, mesh.n_triangles
    tri = mesh.triangles
    if family.kind == LAGRANGE_P2:
        cell_dofs = np.hstack((tri, n_v + mesh.triangle_edges))
        kinds = np.array(
            [DofKind.VERTEX_VALUE.value] * n_v + [DofKind.EDGE_MIDPOINT_VALUE.value] * n_e
        )
        locations = np.vstack((mesh.vertices, mesh.edge_midpoints))
    elif family.kind == HERMITE_P3:
        bubble = 3 * n_v + np.arange(n_t)
        cell_dofs = np.column_stack(
            (
                3 * tri,
                bubble,
                3 * tri[:, 0] + 1,
                3 * tri[:, 0] + 2,
                3 * tri[:, 1] + 1,
                3 * tri[:, 1] + 2,
                3 * tri[:, 2] + 1,
                3 * tri[:, 2] + 2,
            )
        )
        vertex_kinds = [
            DofKind.VERTEX_VALUE.value,
            DofKind.VERTEX_GRADIENT_X.value,
            DofKind.VERTEX_GRADIENT_Y.value,
        ]
        kinds = np.array(vertex_kinds * n_v + [DofKind.BUBBLE_VALUE.value] * n_t)
        locations = np.vstack((np.repeat(mesh.vertices, 3, axis=0), mesh.centroids))
    else:
        raise InvalidArgumentError(f"no dof numbering for element family {family.kind!r}")
    cell_dofs = np.ascontiguousarray(cell_dofs, dtype=np.int64)
    logger.debug(f"{family.kind}: {len(kinds)} global dofs on {n_t} triangles")
    return DofMap(len(kinds), cell_dofs, kinds, locations)


class ElementSpace:
    """Continuous finite element space on a mesh."""

    def __init__(self, family: ElementFamily, mesh: Mesh):
        self.family = family
        self.mesh = mesh
        self.dof_map = build_dof_map(family, mesh)
        self.corners = mesh.vertices[mesh.triangles]

    @classmethod
    def create(cls, kind: str, mesh: Mesh) -> "ElementSpace":
        return cls(get_element(kind), mesh)

    @property
    def n_dofs(self) -> int:
        return self.dof_map.n_dofs

    def interpolate(self, u: SmoothFunction) -> np.ndarray:
        return interpolate(self.family, self.mesh, u, self.dof_map)

    def evaluate(
        self, dofs: np.ndarray, lam: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Values (F, Q), gradients (F, Q, 2), Hessians (F, Q, 2, 2) at shared barycentric points."""
        values, grads, hessians = self.family.physical_basis(np.atleast_2d(lam), self.corners)
        local = np.asarray(dofs)[self.dof_map.cell_dofs]
        return (
            np.einsum("fqb,fb->fq", values, local),
            np.einsum("fqbd,fb->fqd", grads, local),
            np.einsum("fqbde,fb->fqde", hessians, local),
        )

    def reinterpolate(self, dofs: np.ndarray) -> np.ndarray:
        """Interpolant of the finite element function with the given dofs."""
        dofs = np.asarray(dofs, dtype=float)
        result = np.zeros(self.n_dofs)
        if self.family.kind == LAGRANGE_P2:
            values, _, _ = self.evaluate(dofs, self.family.NODES)
            result[self.dof_map.cell_dofs] = values
        else:
            values, grads, _ = self.evaluate(dofs, np.eye(3))
            centre, _, _ = self.evaluate(dofs, np.full((1, 3), 1.0 / 3.0))
            local = np.concatenate((values, centre, grads.reshape(len(values), 6)), axis=1)
            result[self.dof_map.cell_dofs] = local
        return result


def interpolate(
    family: ElementFamily, mesh: Mesh, u: SmoothFunction, dof_map: Optional[DofMap] = None
) -> np.ndarray:
    """Global interpolant: dof vector matching every nodal variable of u."""
    dof_map = dof_map or build_dof_map(family, mesh)
    corners = mesh.vertices[mesh.triangles]
    local = family.nodal_values(corners, u.value, u.gradient)
    dofs = np.zeros(dof_map.n_dofs)
    dofs[dof_map.cell_dofs] = local
    return dofs


# ------------------------------------------------------- boundary conditions
@dataclass(frozen=True)
class BoundaryCondition:
    label: str
    kind: str

    def __post_init__(self):
        if self.kind not in BC_KINDS:
            raise InvalidArgumentError(
                f"unknown boundary condition {self.kind!r} for region {self.label!r}, "
                f"expected one of {list(BC_KINDS)}"
            )


def boundary_kinds(mesh: Mesh, bcs: Sequence[BoundaryCondition]) -> Dict[int, str]:
    """Kind of every boundary edge; regions without a condition are free."""
    by_label: Dict[str, str] = {}
    for bc in bcs:
        previous = by_label.setdefault(bc.label, bc.kind)
        if previous != bc.kind:
            raise InvalidArgumentError(
                f"region {bc.label!r} has conflicting conditions {previous!r} and {bc.kind!r}"
            )
    labels = set(mesh.boundary_tags.values())
    for label in sorted(set(by_label) - labels):
        logger.warning(f"Boundary condition for unknown region {label!r} is ignored")
    for label in sorted(labels - set(by_label)):
        logger.warning(f"Region {label!r} has no boundary condition; treating it as free")
    return {e: by_label.get(label, BC_FREE) for e, label in mesh.boundary_tags.items()}


def _edges_of(kinds: Mapping[int, str], wanted: Sequence[str]) -> np.ndarray:
    return np.array(sorted(e for e, k in kinds.items() if k in wanted), dtype=np.int64)


@dataclass(frozen=True)
class DirichletReduction:
    """u_all = matrix @ u_free for every dof vector vanishing on the supported boundary."""

    matrix: sp.csr_matrix  # (n_dofs, n_free)
    support_vertices: np.ndarray
    support_edges: np.ndarray

    @property
    def n_free(self) -> int:
        return self.matrix.shape[1]


def dirichlet_reduction(
    space: ElementSpace, bcs: Sequence[BoundaryCondition]
) -> DirichletReduction:
    """Eliminate dofs so that u = 0 holds exactly on dirichlet and clamped edges."""
    mesh = space.mesh
    kinds = boundary_kinds(mesh, bcs)
    support_edges = _edges_of(kinds, (BC_DIRICHLET, BC_CLAMPED))
    support_vertices = np.unique(mesh.edges[support_edges].ravel())
    n = space.n_dofs

    rows: List[int] = []
    data: List[float] = []
    cols: List[int] = []
    n_cols = 0

    if space.family.kind == LAGRANGE_P2:
        fixed = np.zeros(n, dtype=bool)
        fixed[support_vertices] = True
        fixed[mesh.n_vertices + support_edges] = True
        free = np.flatnonzero(~fixed)
        matrix = sp.csr_matrix(
            (np.ones(len(free)), (free, np.arange(len(free)))), shape=(n, len(free))
        )
        return DirichletReduction(matrix, support_vertices, support_edges)

    tangents: Dict[int, List[np.ndarray]] = {int(v): [] for v in support_vertices}
    for e in support_edges:
        a, b = mesh.edges[e]
        t = (mesh.vertices[b] - mesh.vertices[a]) / mesh.edge_lengths[e]
        tangents[int(a)].append(t)
        tangents[int(b)].append(t)

    for v in range(mesh.n_vertices):
        if v not in tangents:
            for k in range(3):
                rows.append(3 * v + k)
                cols.append(n_cols)
                data.append(1.0)
                n_cols += 1
            continue
        ts = tangents[v]
        independent = any(abs(ts[0][0] * t[1] - ts[0][1] * t[0]) > 1e-10 for t in ts[1:])
        if independent:
            continue
        # gradient restricted to the normal of the single support direction
        normal = (-ts[0][1], ts[0][0])
        rows.extend((3 * v + 1, 3 * v + 2))
        cols.extend((n_cols, n_cols))
        data.extend(normal)
        n_cols += 1

    for t in range(mesh.n_triangles):
        rows.append(3 * mesh.n_vertices + t)
        cols.append(n_cols)
        data.append(1.0)
        n_cols += 1

    matrix = sp.coo_matrix((data, (rows, cols)), shape=(n, n_cols)).tocsr()
    return DirichletReduction(matrix, support_vertices, support_edges)


# ------------------------------------------------------------------ operators
@dataclass(frozen=True)
class CurvatureOperator:
    """kappa = (k11, k22, k12) at every triangle quadrature point.

    ``local`` holds the (F, Q, 3, n_local) element matrices; ``matrix`` the
    assembled (3 F Q, n_dofs) operator with rows ordered by triangle, then
    quadrature point, then component.
    """

    rule: TriangleRule
    points: np.ndarray  # (F, Q, 2)
    weights: np.ndarray  # (F, Q), units of area
    local: np.ndarray
    matrix: sp.csr_matrix

    @property
    def n_points(self) -> int:
        return self.weights.size

    def apply(self, dofs: np.ndarray) -> np.ndarray:
        """(F * Q, 3) curvatures."""
        return (self.matrix @ dofs).reshape(-1, 3)


def curvature_rule(family: ElementFamily) -> TriangleRule:
    """Centroid for P2 (constant Hessian), vertices for Hermite (affine Hessian)."""
    return centroid_rule() if family.kind == LAGRANGE_P2 else vertex_rule()


def build_curvature_operator(
    family: ElementFamily, mesh: Mesh, dof_map: DofMap
) -> CurvatureOperator:
    rule = curvature_rule(family)
    corners = mesh.vertices[mesh.triangles]
    _, _, hessians = family.physical_basis(rule.barycentric, corners)
    local = np.stack(
        (hessians[..., 0, 0], hessians[..., 1, 1], hessians[..., 0, 1]), axis=2
    )  # (F, Q, 3, n)
    n_tri, n_q, _, n_loc = local.shape
    rows = np.broadcast_to(np.arange(n_tri * n_q * 3).reshape(n_tri, n_q, 3, 1), local.shape)
    cols = np.broadcast_to(dof_map.cell_dofs[:, None, None, :], local.shape)
    matrix = sp.coo_matrix(
        (local.ravel(), (rows.ravel(), cols.ravel())), shape=(n_tri * n_q * 3, dof_map.n_dofs)
    ).tocsr()
    weights = mesh.areas[:, None] * rule.weights[None, :]
    return CurvatureOperator(rule, rule.points(corners), weights, local, matrix)


@dataclass(frozen=True)
class EdgeJumpOperator:
    """Normal-derivative jump s at edge quadrature points.

    Row r belongs to edge ``edges[r]`` and lies at ``points[r]``; its
    dissipation enters the energy with weight ``weights[r]``. On interior
    edges s = du_hi/dn - du_lo/dn with n pointing out of the lower-index
    triangle; on boundary edges s = -du/dn with the outward normal.
    """

    edges: np.ndarray  # (R,)
    params: np.ndarray  # (R,) position along the edge
    points: np.ndarray  # (R, 2)
    normals: np.ndarray  # (R, 2)
    weights: np.ndarray  # (R,)
    matrix: sp.csr_matrix  # (R, n_dofs)
    quadrature_limited: np.ndarray  # (R,) bool
    rules: Dict[str, str] = field(default_factory=dict)

    @property
    def n_rows(self) -> int:
        return len(self.edges)

    def apply(self, dofs: np.ndarray) -> np.ndarray:
        return self.matrix @ dofs


def _local_position(triangles: np.ndarray, vertex: np.ndarray) -> np.ndarray:
    return np.argmax(triangles == vertex[:, None], axis=1)


def _normal_derivative_rows(
    family: ElementFamily,
    mesh: Mesh,
    dof_map: DofMap,
    edges: np.ndarray,
    params: np.ndarray,
    cells: np.ndarray,
    normals: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """Coefficients (R, n_local) and dofs (R, n_local) of grad u . n on the given cells."""
    a = mesh.edges[edges, 0]
    b = mesh.edges[edges, 1]
    tri = mesh.triangles[cells]
    lam = np.zeros((len(edges), 3))
    rows = np.arange(len(edges))
    lam[rows, _local_position(tri, a)] += 1.0 - params
    lam[rows, _local_position(tri, b)] += params
    _, grads, _ = family.pointwise_basis(lam, mesh.vertices[tri])
    coefficients = np.einsum("rbd,rd->rb", grads, normals)
    return coefficients, dof_map.cell_dofs[cells]


def _edge_rule(family: ElementFamily, interior: bool) -> Tuple[EdgeRule, float, bool]:
    """(rule, row scale in units of |e|, aggregated) for one edge class."""
    if family.kind == LAGRANGE_P2:
        return trapezoid_edge_rule(), 1.0, False
    if interior:
        return EdgeRule("aggregated_midpoint", 2, np.array([0.5]), np.array([1.0])), 2.0 / 3.0, True
    return simpson_edge_rule(), 1.0, False


def build_edge_jump_operator(
    family: ElementFamily,
    mesh: Mesh,
    dof_map: DofMap,
    bcs: Sequence[BoundaryCondition],
) -> EdgeJumpOperator:
    """Jump rows for interior edges and clamped or symmetry boundary edges.

    P2 uses the two endpoints with weights |e|/2. Hermite interior edges carry
    one aggregated row (2|e|/3) s(midpoint) = integral of s, weight 1, since s
    vanishes at both endpoints and keeps one sign. Hermite boundary edges use
    Simpson's rule, which does not bound the convex integrand from above.
    """
    kinds = boundary_kinds(mesh, bcs)
    interior = mesh.interior_edges
    neumann = _edges_of(kinds, (BC_CLAMPED, BC_SYMMETRY))

    blocks = []
    for edge_set, is_interior in ((interior, True), (neumann, False)):
        if edge_set.size == 0:
            continue
        rule, scale, aggregated = _edge_rule(family, is_interior)
        edges = np.repeat(edge_set, rule.size)
        params = np.tile(rule.params, len(edge_set))
        lengths = mesh.edge_lengths[edges]
        normals = mesh.edge_normals[edges]
        lo = mesh.edge_triangles[edges, 0]
        coef_lo, dofs_lo = _normal_derivative_rows(family, mesh, dof_map, edges, params, lo, normals)
        if is_interior:
            hi = mesh.edge_triangles[edges, 1]
            coef_hi, dofs_hi = _normal_derivative_rows(
                family, mesh, dof_map, edges, params, hi, normals
            )
            coefficients = np.hstack((coef_hi, -coef_lo))
            dofs = np.hstack((dofs_hi, dofs_lo))
        else:
            coefficients, dofs = -coef_lo, dofs_lo
        if aggregated:
            coefficients = coefficients * (scale * lengths)[:, None]
            weights = np.ones(len(edges))
        else:
            weights = np.tile(rule.weights, len(edge_set)) * lengths
        limited = np.full(len(edges), family.kind == HERMITE_P3 and not is_interior)
        blocks.append((edges, params, normals, weights, coefficients, dofs, limited, rule.name, is_interior))

    if not blocks:
        empty = np.zeros(0)
        return EdgeJumpOperator(
            np.zeros(0, dtype=np.int64),
            empty,
            np.zeros((0, 2)),
            np.zeros((0, 2)),
            empty,
            sp.csr_matrix((0, dof_map.n_dofs)),
            np.zeros(0, dtype=bool),
        )

    edges = np.concatenate([blk[0] for blk in blocks])
    params = np.concatenate([blk[1] for blk in blocks])
    normals = np.vstack([blk[2] for blk in blocks])
    weights = np.concatenate([blk[3] for blk in blocks])
    limited = np.concatenate([blk[6] for blk in blocks])
    row_offset = 0
    coo_rows, coo_cols, coo_data = [], [], []
    for blk in blocks:
        coefficients, dofs = blk[4], blk[5]
        r = row_offset + np.arange(len(coefficients))
        coo_rows.append(np.repeat(r, coefficients.shape[1]))
        coo_cols.append(dofs.ravel())
        coo_data.append(coefficients.ravel())
        row_offset += len(coefficients)
    matrix = sp.coo_matrix(
        (np.concatenate(coo_data), (np.concatenate(coo_rows), np.concatenate(coo_cols))),
        shape=(len(edges), dof_map.n_dofs),
    ).tocsr()
    matrix.eliminate_zeros()

    a = mesh.vertices[mesh.edges[edges, 0]]
    b = mesh.vertices[mesh.edges[edges, 1]]
    points = (1.0 - params)[:, None] * a + params[:, None] * b
    rules = {("interior" if blk[8] else "boundary"): blk[7] for blk in blocks}
    return EdgeJumpOperator(edges, params, points, normals, weights, matrix, limited, rules)


def rigor_flag(jumps: EdgeJumpOperator) -> str:
    """``strict`` when every quadrature rule overestimates the dissipation."""
    return RIGOR_QUADRATURE_LIMITED if jumps.quadrature_limited.any() else RIGOR_STRICT


# ------------------------------------------------------- interpolation error
@dataclass(frozen=True)
class InterpolationErrors:
    w11_error: float
    hessian_tv_error: float
    h: float
    w11_ratio: Optional[float] = None
    hessian_tv_ratio: Optional[float] = None


def interpolation_errors(
    family: ElementFamily,
    mesh: Mesh,
    u: SmoothFunction,
    third_derivative_bound: Optional[float] = None,
) -> InterpolationErrors:
    """W^{1,1} and Hessian total-variation errors of the interpolant of u.

    w11_error sums the L1 norms of u - Iu and |grad u - grad Iu| over the
    triangles (7-point rule); hessian_tv_error adds the L1 norm of the
    Frobenius Hessian error and the integrated |jump of d(Iu)/dn| over
    interior edges (5-point Gauss). With a bound on the third derivatives, the
    errors are also reported relative to |Omega| h^2 bound and |Omega| h bound.
    """
    space = ElementSpace(family, mesh)
    dofs = space.interpolate(u)
    rule = dunavant7_rule()
    corners = space.corners
    points = rule.points(corners).reshape(-1, 2)
    weights = (mesh.areas[:, None] * rule.weights[None, :]).ravel()

    values, grads, hessians = space.evaluate(dofs, rule.barycentric)
    value_err = np.abs(u.value(points) - values.ravel())
    grad_err = np.linalg.norm(u.gradient(points) - grads.reshape(-1, 2), axis=1)
    diff = u.hessian(points) - hessians.reshape(-1, 2, 2)
    hess_err = np.sqrt(diff[:, 0, 0] ** 2 + diff[:, 1, 1] ** 2 + 2.0 * diff[:, 0, 1] ** 2)

    w11 = float(weights @ (value_err + grad_err))
    tv_bulk = float(weights @ hess_err)

    tv_edges = 0.0
    interior = mesh.interior_edges
    if interior.size:
        edge_rule = gauss_edge_rule(5)
        edges = np.repeat(interior, edge_rule.size)
        params = np.tile(edge_rule.params, interior.size)
        normals = mesh.edge_normals[edges]
        lo = mesh.edge_triangles[edges, 0]
        hi = mesh.edge_triangles[edges, 1]
        c_lo, d_lo = _normal_derivative_rows(family, space.mesh, space.dof_map, edges, params, lo, normals)
        c_hi, d_hi = _normal_derivative_rows(family, space.mesh, space.dof_map, edges, params, hi, normals)
        jumps = (c_hi * dofs[d_hi]).sum(axis=1) - (c_lo * dofs[d_lo]).sum(axis=1)
        w = np.tile(edge_rule.weights, interior.size) * mesh.edge_lengths[edges]
        tv_edges = float(w @ np.abs(jumps))

    h = float(mesh.edge_lengths.max())
    errors = InterpolationErrors(w11, tv_bulk + tv_edges, h)
    if third_derivative_bound:
        area = float(mesh.areas.sum())
        errors = InterpolationErrors(
            w11,
            tv_bulk + tv_edges,
            h,
            w11 / (area * h**2 * third_derivative_bound),
            (tv_bulk + tv_edges) / (area * h * third_derivative_bound),
        )
    logger.debug(
        f"{family.kind} interpolation errors at h={h:.4g}: w11={w11:.3e}, "
        f"hessian_tv={tv_bulk + tv_edges:.3e}"
    )
    return errors
