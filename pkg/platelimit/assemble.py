"""Discrete kinematic limit analysis as a second-order cone program.

Unknowns, column by column:

* ``u``: the free dofs left after Dirichlet elimination (free cone),
* one bulk block per curvature quadrature point: (k11, k22, k12, t, aux),
* one edge block per jump row: (s, t, aux).

Rows: the linking equalities kappa_q = B_q u and s_r = J_r u, the
criterion's own block rows, and the single normalisation row <l, u> = 1.
The objective sums w_q t_q + w_r t_r, the quadrature-weighted dissipation.

Sizes, with Q bulk points, R jump rows and blocks of (rows, aux) =
(r_b, a_b) and (r_e, a_e)::

    rows    = 3 Q + R + Q r_b + R r_e + 1
    columns = n_free + Q (4 + a_b) + R (2 + a_e)
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from platelimit.cones import free, merge_cones
from platelimit.conic import ConicProgram, ConicSolution, Residuals
from platelimit.constants import LAGRANGE_P2, RIGOR_STRICT
from platelimit.criteria import ConeBlock, YieldCriterion
from platelimit.exceptions import AssemblyError, ExpressionError, InvalidArgumentError, SolverFailure
from platelimit.expression import Expression, evaluate_checked, parse_expression
from platelimit.fem import (
    BoundaryCondition,
    CurvatureOperator,
    DirichletReduction,
    EdgeJumpOperator,
    ElementSpace,
    build_curvature_operator,
    build_edge_jump_operator,
    dirichlet_reduction,
    rigor_flag,
)
from platelimit.geometry import orient2d_many
from platelimit.mesh import Mesh
from platelimit.quadrature import triangle_rule

logger = logging.getLogger(__name__)

UNIFORM_PRESSURE = "uniform_pressure"
DENSITY_EXPRESSION = "density_expression"


# ---------------------------------------------------------------------- loads
@dataclass(frozen=True)
class LoadSpec:
    """Transverse reference load: a uniform pressure or a density expression."""

    kind: str = UNIFORM_PRESSURE
    value: float = 1.0
    expression: Optional[Expression] = None

    def __post_init__(self):
        if self.kind == UNIFORM_PRESSURE:
            if not np.isfinite(self.value) or self.value == 0:
                raise InvalidArgumentError(f"uniform pressure must be finite and nonzero, got {self.value}")
        elif self.kind == DENSITY_EXPRESSION:
            if self.expression is None:
                raise InvalidArgumentError("density_expression load needs an expression")
        else:
            raise InvalidArgumentError(
                f"unknown load kind {self.kind!r}, expected {UNIFORM_PRESSURE!r} or {DENSITY_EXPRESSION!r}"
            )

    @classmethod
    def uniform(cls, value: float = 1.0) -> "LoadSpec":
        return cls(UNIFORM_PRESSURE, float(value))

    @classmethod
    def density(cls, text: Union[str, Expression]) -> "LoadSpec":
        expression = text if isinstance(text, Expression) else parse_expression(text)
        return cls(DENSITY_EXPRESSION, 1.0, expression)

    def scaled(self, factor: float) -> "LoadSpec":
        if self.kind == UNIFORM_PRESSURE:
            return LoadSpec.uniform(self.value * factor)
        return LoadSpec.density(f"{factor!r}*({self.expression.text})")

    @property
    def reference_value(self) -> float:
        return self.value if self.kind == UNIFORM_PRESSURE else 1.0

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        if self.kind == UNIFORM_PRESSURE:
            return np.full(len(points), self.value)
        return evaluate_checked(self.expression, points, "load density")

    def to_config(self) -> Dict[str, object]:
        if self.kind == UNIFORM_PRESSURE:
            return {"kind": self.kind, "value": self.value}
        return {"kind": self.kind, "expression": self.expression.text}


def assemble_load(mesh: Mesh, space: ElementSpace, load: LoadSpec) -> np.ndarray:
    """l with <l, dofs(u)> = integral of L u for every finite element u."""
    family = space.family
    rule = triangle_rule(2 * family.polynomial_degree)
    corners = space.corners
    points = rule.points(corners)
    try:
        density = load.evaluate(points.reshape(-1, 2)).reshape(points.shape[:2])
    except ExpressionError as exc:
        raise AssemblyError("load-evaluation", str(exc)) from exc
    values, _, _ = family.physical_basis(rule.barycentric, corners)
    weights = mesh.areas[:, None] * rule.weights[None, :]
    local = np.einsum("fq,fq,fqb->fb", weights, density, values)
    return np.bincount(
        space.dof_map.cell_dofs.ravel(), weights=local.ravel(), minlength=space.n_dofs
    )


# ---------------------------------------------------------------- normalisation
@dataclass(frozen=True)
class Normalization:
    """Report lambda as lambda * load * length^2 / strength."""

    length: float = 1.0
    load: float = 1.0
    strength: float = 1.0

    @property
    def factor(self) -> float:
        return self.load * self.length**2 / self.strength

    def to_dict(self) -> Dict[str, float]:
        return {"length": self.length, "load": self.load, "strength": self.strength}


def default_normalization(criterion: YieldCriterion, load: LoadSpec, length: float = 1.0) -> Normalization:
    return Normalization(length, load.reference_value, criterion.reference_strength())


# ------------------------------------------------------------------ problems
@dataclass
class AssembledProblem:
    program: ConicProgram
    space: ElementSpace
    criterion: YieldCriterion
    load: LoadSpec
    bcs: Tuple[BoundaryCondition, ...]
    reduction: DirichletReduction
    load_vector: np.ndarray
    curvature: CurvatureOperator
    jumps: EdgeJumpOperator
    bulk_block: ConeBlock
    edge_block: ConeBlock
    bulk_strengths: np.ndarray
    edge_strengths: np.ndarray
    normalization: Normalization
    rigor: str
    metadata: Dict[str, object] = field(default_factory=dict)

    @property
    def mesh(self) -> Mesh:
        return self.space.mesh

    @property
    def n_free(self) -> int:
        return self.reduction.n_free

    @property
    def bulk_offset(self) -> int:
        return self.n_free

    @property
    def edge_offset(self) -> int:
        return self.n_free + self.bulk_block.n_instances * self.bulk_block.n_columns

    @property
    def bulk_t_columns(self) -> np.ndarray:
        block = self.bulk_block
        return self.bulk_offset + np.arange(block.n_instances) * block.n_columns + block.t_column

    @property
    def edge_t_columns(self) -> np.ndarray:
        block = self.edge_block
        return self.edge_offset + np.arange(block.n_instances) * block.n_columns + block.t_column

    @property
    def normalization_row(self) -> int:
        return self.program.m - 1

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        """All dofs from the free ones; supported dofs come out exactly zero."""
        return self.reduction.matrix @ u_free

    def sizes(self) -> Dict[str, int]:
        return {
            "rows": self.program.m,
            "columns": self.program.n,
            "cones": len(self.program.cones),
            "nonzeros": int(self.program.A.nnz),
            "free_dofs": self.n_free,
            "bulk_points": self.bulk_block.n_instances,
            "edge_rows": self.edge_block.n_instances,
        }


def expected_sizes(n_free: int, bulk: ConeBlock, edge: ConeBlock) -> Tuple[int, int]:
    """(rows, columns) of the assembled program for the given blocks."""
    q, r = bulk.n_instances, edge.n_instances
    rows = 3 * q + r + q * bulk.n_rows + r * edge.n_rows + 1
    columns = n_free + q * bulk.n_columns + r * edge.n_columns
    return rows, columns


def _check_support(mesh: Mesh, reduction: DirichletReduction) -> None:
    points = mesh.vertices[reduction.support_vertices]
    if len(points) >= 3:
        p0 = points[0]
        far = points[np.argmax(np.linalg.norm(points - p0, axis=1))]
        turns = orient2d_many(
            np.broadcast_to(p0, points.shape), np.broadcast_to(far, points.shape), points
        )
        if np.any(turns != 0):
            return
    raise AssemblyError(
        "degenerate-Dirichlet",
        f"the supported boundary has {len(points)} vertices and no three non-aligned points; "
        "rigid motions would be admissible",
    )


def _linking_rows(
    operator: sp.csr_matrix, n_inputs: int, block: ConeBlock, col_offset: int, n_columns: int
) -> sp.csr_matrix:
    """[-operator | selector] placing +1 on every block input column."""
    n_rows = operator.shape[0]
    instance = np.arange(n_rows) // n_inputs
    component = np.arange(n_rows) % n_inputs
    selector_cols = col_offset + instance * block.n_columns + component
    selector = sp.csr_matrix(
        (np.ones(n_rows), (np.arange(n_rows), selector_cols)), shape=(n_rows, n_columns)
    )
    left = sp.hstack((-operator, sp.csr_matrix((n_rows, n_columns - operator.shape[1]))), format="csr")
    return (left + selector).tocsr()


def assemble(
    mesh: Mesh,
    space: ElementSpace,
    criterion: YieldCriterion,
    load: LoadSpec,
    bcs: Sequence[BoundaryCondition],
    normalization: Optional[Normalization] = None,
) -> AssembledProblem:
    """Build the discrete limit-analysis program on ``space``."""
    if space.mesh is not mesh:
        raise InvalidArgumentError("element space was built on a different mesh")
    bcs = tuple(bcs)
    reduction = dirichlet_reduction(space, bcs)
    _check_support(mesh, reduction)
    R = reduction.matrix
    load_vector = assemble_load(mesh, space, load)
    reduced_load = R.T @ load_vector
    if not np.any(np.abs(reduced_load) > 1e-14 * max(np.abs(load_vector).max(), 1e-300)):
        raise AssemblyError(
            "infeasible-bcs", "every loaded dof is constrained; no mechanism can do unit work"
        )

    curvature = build_curvature_operator(space.family, mesh, space.dof_map)
    jumps = build_edge_jump_operator(space.family, mesh, space.dof_map, bcs)
    bulk_points = curvature.points.reshape(-1, 2)
    bulk_strengths = criterion.strengths(bulk_points)
    edge_strengths = criterion.strengths(jumps.points)
    bulk_block = criterion.cone_block(bulk_points)
    edge_block = criterion.edge_cone_block(jumps.points)

    n_free = reduction.n_free
    rows, n_columns = expected_sizes(n_free, bulk_block, edge_block)
    bulk_offset = n_free
    edge_offset = n_free + bulk_block.n_instances * bulk_block.n_columns

    kappa_link = _linking_rows((curvature.matrix @ R).tocsr(), 3, bulk_block, bulk_offset, n_columns)
    jump_link = _linking_rows((jumps.matrix @ R).tocsr(), 1, edge_block, edge_offset, n_columns)
    bulk_rows = sp.hstack(
        (
            sp.csr_matrix((bulk_block.n_instances * bulk_block.n_rows, bulk_offset)),
            bulk_block.to_sparse(),
            sp.csr_matrix(
                (bulk_block.n_instances * bulk_block.n_rows, n_columns - edge_offset)
            ),
        ),
        format="csr",
    )
    edge_rows = sp.hstack(
        (
            sp.csr_matrix((edge_block.n_instances * edge_block.n_rows, edge_offset)),
            edge_block.to_sparse(),
        ),
        format="csr",
    )
    normalization_row = sp.hstack(
        (sp.csr_matrix(reduced_load[None, :]), sp.csr_matrix((1, n_columns - n_free))), format="csr"
    )
    A = sp.vstack((kappa_link, jump_link, bulk_rows, edge_rows, normalization_row), format="csr")
    A.eliminate_zeros()
    b = np.zeros(rows)
    b[-1] = 1.0

    c = np.zeros(n_columns)
    bulk_t = bulk_offset + np.arange(bulk_block.n_instances) * bulk_block.n_columns + bulk_block.t_column
    edge_t = edge_offset + np.arange(edge_block.n_instances) * edge_block.n_columns + edge_block.t_column
    c[bulk_t] = curvature.weights.ravel()
    c[edge_t] = jumps.weights

    cones = [free(n_free)]
    cones += [cone for _ in range(bulk_block.n_instances) for cone in bulk_block.instance_cones()]
    cones += [cone for _ in range(edge_block.n_instances) for cone in edge_block.instance_cones()]
    program = ConicProgram(A, b, c, merge_cones(cones))

    rigor = rigor_flag(jumps)
    normalization = normalization or default_normalization(criterion, load)
    metadata = {
        "element": space.family.kind,
        "criterion": criterion.kind,
        "bulk_rule": curvature.rule.name,
        "edge_rules": dict(jumps.rules),
        "load_rule": triangle_rule(2 * space.family.polynomial_degree).name,
    }
    problem = AssembledProblem(
        program,
        space,
        criterion,
        load,
        bcs,
        reduction,
        load_vector,
        curvature,
        jumps,
        bulk_block,
        edge_block,
        bulk_strengths,
        edge_strengths,
        normalization,
        rigor,
        metadata,
    )
    logger.debug(f"Assembled program: {problem.sizes()}")
    if rigor != RIGOR_STRICT:
        logger.warning(
            "Edge quadrature on clamped or symmetry boundaries does not bound the dissipation "
            "from above; the computed multiplier is a quadrature-limited bound"
        )
    return problem


# ------------------------------------------------------------------- results
@dataclass
class LimitAnalysisResult:
    lambda_h: float
    normalized_lambda: float
    dofs: np.ndarray
    vertex_values: np.ndarray
    bulk_density: np.ndarray  # (F, Q) pi at curvature points
    bulk_dissipation: np.ndarray  # (F,) integrated over each triangle
    edge_dissipation: np.ndarray  # (R,) w_r pi_edge at each jump row
    edge_ids: np.ndarray  # (R,)
    dissipation: float
    load_work: float
    status: str
    residuals: Residuals
    iterations: int
    reduced_accuracy: bool
    rigor: str
    cell_dissipation_density: np.ndarray  # (F,)
    cell_deformation_density: np.ndarray  # (F,) dissipation per unit strength
    cell_strength: np.ndarray  # (F,)

    @property
    def recomputation_gap(self) -> float:
        return abs(self.dissipation - self.lambda_h) / max(abs(self.lambda_h), 1e-300)


@dataclass(frozen=True)
class Dissipation:
    bulk_density: np.ndarray
    bulk_cells: np.ndarray
    edge_rows: np.ndarray

    @property
    def total(self) -> float:
        return float(self.bulk_cells.sum() + self.edge_rows.sum())


def dissipation_parts(problem: AssembledProblem, dofs: np.ndarray) -> Dissipation:
    """Quadrature dissipation of a full dof vector, split into cells and edge rows."""
    kappa = problem.curvature.apply(dofs)
    density = problem.criterion.support(kappa, problem.bulk_strengths)
    density = density.reshape(problem.curvature.weights.shape)
    cells = (problem.curvature.weights * density).sum(axis=1)
    if problem.jumps.n_rows:
        s = problem.jumps.apply(dofs)
        edges = problem.jumps.weights * problem.criterion.edge_support(s, problem.edge_strengths)
    else:
        edges = np.zeros(0)
    return Dissipation(density, cells, edges)


def discrete_dissipation(problem: AssembledProblem, dofs: np.ndarray) -> float:
    """J_h(u): the program's objective evaluated at any full dof vector."""
    return dissipation_parts(problem, np.asarray(dofs, dtype=float)).total


def _vertex_values(space: ElementSpace, dofs: np.ndarray) -> np.ndarray:
    n_v = space.mesh.n_vertices
    if space.family.kind == LAGRANGE_P2:
        return dofs[:n_v].copy()
    return dofs[0 : 3 * n_v : 3].copy()


def _cell_density(problem: AssembledProblem, bulk_cells: np.ndarray, edge_rows: np.ndarray) -> np.ndarray:
    """(bulk of the cell + half of each incident edge) / |T|."""
    mesh = problem.mesh
    totals = bulk_cells.copy()
    if edge_rows.size:
        per_edge = np.bincount(problem.jumps.edges, weights=edge_rows, minlength=mesh.n_edges)
        owners = mesh.edge_triangles
        for side in (0, 1):
            valid = owners[:, side] >= 0
            np.add.at(totals, owners[valid, side], 0.5 * per_edge[valid])
    return totals / mesh.areas


def _unit_strength_parts(problem: AssembledProblem, parts: Dissipation) -> Tuple[np.ndarray, np.ndarray]:
    """Cell and edge dissipation divided pointwise by the first strength field."""
    weights = problem.curvature.weights
    bulk_strength = problem.bulk_strengths[:, 0].reshape(weights.shape)
    cells = (weights * parts.bulk_density / bulk_strength).sum(axis=1)
    edges = parts.edge_rows / problem.edge_strengths[:, 0] if parts.edge_rows.size else parts.edge_rows
    return cells, edges


def recover_result(problem: AssembledProblem, solution: ConicSolution) -> LimitAnalysisResult:
    """Mechanism, dissipation fields and the multiplier from an optimal solve."""
    if not solution.is_optimal:
        raise SolverFailure(solution)
    u_free = solution.x[: problem.n_free]
    dofs = problem.expand(u_free)
    parts = dissipation_parts(problem, dofs)
    lambda_h = solution.primal_objective
    load_work = float(problem.load_vector @ dofs)
    result = LimitAnalysisResult(
        lambda_h=lambda_h,
        normalized_lambda=lambda_h * problem.normalization.factor,
        dofs=dofs,
        vertex_values=_vertex_values(problem.space, dofs),
        bulk_density=parts.bulk_density,
        bulk_dissipation=parts.bulk_cells,
        edge_dissipation=parts.edge_rows,
        edge_ids=problem.jumps.edges.copy(),
        dissipation=parts.total,
        load_work=load_work,
        status=solution.status_label,
        residuals=solution.residuals,
        iterations=solution.iterations,
        reduced_accuracy=solution.reduced_accuracy,
        rigor=problem.rigor,
        cell_dissipation_density=_cell_density(problem, parts.bulk_cells, parts.edge_rows),
        cell_deformation_density=_cell_density(problem, *_unit_strength_parts(problem, parts)),
        cell_strength=problem.criterion.fields[0].evaluate(problem.mesh.centroids),
    )
    if result.recomputation_gap > 1e-6:
        logger.warning(
            f"Recomputed dissipation {result.dissipation:.10g} differs from the objective "
            f"{lambda_h:.10g} by {result.recomputation_gap:.2e} (relative)"
        )
    if abs(load_work - 1.0) > 1e-6:
        logger.warning(f"Mechanism does {load_work:.10g} units of external work instead of 1")
    logger.info(f"lambda_h = {lambda_h:.8g} (normalized {result.normalized_lambda:.8g}), {result.status}")
    return result


def localization_ratio(result: LimitAnalysisResult, mesh: Mesh, fraction: float = 0.1) -> float:
    """Mean dissipation density over the weakest cells divided by the domain mean.

    The density is taken per unit strength (the dissipation of the unit-strength
    criterion), so a weak cell is not discounted for being weak: it measures how
    far the curvature of the mechanism concentrates on the strength minima.
    """
    if not 0 < fraction <= 1:
        raise InvalidArgumentError(f"fraction must lie in (0, 1], got {fraction}")
    areas = mesh.areas
    count = max(1, int(np.ceil(fraction * len(areas))))
    weakest = np.argsort(result.cell_strength, kind="stable")[:count]
    density = result.cell_deformation_density
    selected = float(density[weakest] @ areas[weakest] / areas[weakest].sum())
    overall = float(density @ areas / areas.sum())
    return selected / overall
