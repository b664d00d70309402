"""Tests for program assembly and result recovery"""

import logging
from types import SimpleNamespace

import numpy as np
import pytest

from platelimit.assemble import (
    LoadSpec,
    Normalization,
    assemble,
    assemble_load,
    discrete_dissipation,
    expected_sizes,
    localization_ratio,
    recover_result,
)
from platelimit.conic import SolverSettings, solve
from platelimit.constants import RIGOR_QUADRATURE_LIMITED, RIGOR_STRICT, UNTAGGED
from platelimit.criteria import make_criterion
from platelimit.exceptions import AssemblyError, InvalidArgumentError, SolverFailure
from platelimit.fem import BoundaryCondition, ElementSpace, pyramid_mechanism
from platelimit.mesh import Mesh, generate_rect_mesh

JOHANSEN = make_criterion("johansen", m0_plus=1.0, m0_minus=1.0)
ALL_SUPPORTED = [BoundaryCondition(side, "dirichlet") for side in ("left", "right", "bottom", "top")]
QUARTER_BCS = [
    BoundaryCondition("left", "symmetry"),
    BoundaryCondition("bottom", "symmetry"),
    BoundaryCondition("right", "dirichlet"),
    BoundaryCondition("top", "dirichlet"),
]


def quarter_problem(criterion=JOHANSEN, load=None, mesh=None):
    """Simply supported unit square reduced to [0, 0.5]^2, centre at the origin."""
    mesh = mesh if mesh is not None else generate_rect_mesh(0.5, 0.5, 2, 2, "crossed")
    space = ElementSpace.create("p2_lagrange", mesh)
    return assemble(mesh, space, criterion, load or LoadSpec.uniform(), QUARTER_BCS)


def solved_lambda(problem):
    solution = solve(problem.program)
    assert solution.is_optimal
    return solution.primal_objective


class TestProgramStructure:
    """Sizes and layout of the assembled program"""

    def test_sizes_on_supported_square(self):
        mesh = generate_rect_mesh(1.0, 1.0, 2, 2, "crossed")
        space = ElementSpace.create("p2_lagrange", mesh)
        problem = assemble(mesh, space, JOHANSEN, LoadSpec.uniform(), ALL_SUPPORTED)
        sizes = problem.sizes()
        assert sizes["free_dofs"] == 25
        assert sizes["bulk_points"] == 16
        assert sizes["edge_rows"] == 40
        assert (problem.program.m, problem.program.n) == (233, 345)
        assert expected_sizes(25, problem.bulk_block, problem.edge_block) == (233, 345)
        assert problem.program.validate() == []

    def test_objective_weights(self):
        problem = quarter_problem()
        c = problem.program.c
        assert c[problem.bulk_t_columns].sum() == pytest.approx(0.25)
        np.testing.assert_allclose(c[problem.edge_t_columns], problem.jumps.weights)
        assert np.count_nonzero(c) == len(problem.bulk_t_columns) + len(problem.edge_t_columns)

    def test_normalisation_row(self):
        problem = quarter_problem()
        b = problem.program.b
        assert b[problem.normalization_row] == 1.0
        assert np.count_nonzero(b) == 1

    def test_metadata(self):
        problem = quarter_problem()
        assert problem.metadata["element"] == "p2_lagrange"
        assert problem.metadata["criterion"] == "johansen"
        assert problem.metadata["edge_rules"] == {"interior": "trapezoid", "boundary": "trapezoid"}
        assert problem.rigor == RIGOR_STRICT

    def test_space_on_other_mesh(self):
        mesh = generate_rect_mesh(1.0, 1.0, 1, 1, "diag")
        space = ElementSpace.create("p2_lagrange", generate_rect_mesh(1.0, 1.0, 1, 1, "diag"))
        with pytest.raises(InvalidArgumentError, match="different mesh"):
            assemble(mesh, space, JOHANSEN, LoadSpec.uniform(), ALL_SUPPORTED)


class TestAssemblyErrors:
    """Problems that cannot be posed"""

    def test_every_loaded_dof_supported(self):
        mesh = Mesh([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], [[0, 1, 2]])
        space = ElementSpace.create("p2_lagrange", mesh)
        with pytest.raises(AssemblyError) as excinfo:
            assemble(mesh, space, JOHANSEN, LoadSpec.uniform(), [BoundaryCondition(UNTAGGED, "dirichlet")])
        assert excinfo.value.code == "infeasible-bcs"

    def test_aligned_support_admits_rigid_motions(self):
        mesh = generate_rect_mesh(1.0, 1.0, 2, 2, "crossed")
        space = ElementSpace.create("p2_lagrange", mesh)
        bcs = [BoundaryCondition("left", "dirichlet")]
        with pytest.raises(AssemblyError) as excinfo:
            assemble(mesh, space, JOHANSEN, LoadSpec.uniform(), bcs)
        assert excinfo.value.code == "degenerate-Dirichlet"
        assert str(excinfo.value).startswith("[degenerate-Dirichlet]")

    def test_load_expression_not_finite(self):
        mesh = generate_rect_mesh(1.0, 1.0, 1, 1, "diag")
        space = ElementSpace.create("p2_lagrange", mesh)
        with pytest.raises(AssemblyError) as excinfo:
            assemble(mesh, space, JOHANSEN, LoadSpec.density("1/(x1-x1)"), ALL_SUPPORTED)
        assert excinfo.value.code == "load-evaluation"


class TestLoads:
    """Reference loads and their consistent load vectors"""

    @pytest.mark.parametrize("value", [0.0, float("inf")])
    def test_uniform_rejects(self, value):
        with pytest.raises(InvalidArgumentError):
            LoadSpec.uniform(value)

    def test_unknown_kind(self):
        with pytest.raises(InvalidArgumentError, match="unknown load kind"):
            LoadSpec("point_load")

    def test_load_vector_integrates_to_total_force(self):
        mesh = generate_rect_mesh(2.0, 1.0, 3, 2, "diag")
        space = ElementSpace.create("p2_lagrange", mesh)
        assert assemble_load(mesh, space, LoadSpec.uniform(3.0)).sum() == pytest.approx(6.0)
        # integral of x1 over [0, 2] x [0, 1]
        assert assemble_load(mesh, space, LoadSpec.density("x1")).sum() == pytest.approx(2.0)

    def test_scaled_and_config(self):
        assert LoadSpec.uniform(2.0).scaled(1.5).value == 3.0
        density = LoadSpec.density("1 + x2").scaled(2.0)
        assert density.evaluate(np.array([[0.0, 1.0]]))[0] == pytest.approx(4.0)
        assert LoadSpec.density("x1").to_config() == {"kind": "density_expression", "expression": "x1"}
        assert LoadSpec.uniform().reference_value == 1.0

    def test_normalization_factor(self):
        assert Normalization(length=2.0, load=3.0, strength=4.0).factor == pytest.approx(3.0)


def test_pyramid_mechanism_ratio_is_exact():
    """The roof mechanism is in the P2 space of a crossed mesh and gives 24"""
    problem = quarter_problem()
    dofs = problem.space.interpolate(pyramid_mechanism(0.5, 0.5))
    work = problem.load_vector @ dofs
    assert work == pytest.approx(1.0 / 12.0)
    assert discrete_dissipation(problem, dofs) / work == pytest.approx(24.0, rel=1e-12)


class TestSolvedQuarterPlate:
    """End-to-end solve of the simply supported square"""

    def test_multiplier_and_recovery(self):
        problem = quarter_problem()
        solution = solve(problem.program)
        result = recover_result(problem, solution)
        assert result.lambda_h == pytest.approx(24.0, rel=1e-6)
        assert result.status.startswith("optimal")
        assert result.rigor == RIGOR_STRICT
        assert result.recomputation_gap < 1e-6
        assert result.load_work == pytest.approx(1.0, abs=1e-6)
        assert result.bulk_dissipation.shape == (problem.mesh.n_triangles,)
        assert result.cell_dissipation_density.shape == (problem.mesh.n_triangles,)
        # unit strength: both densities coincide
        assert result.cell_deformation_density == pytest.approx(result.cell_dissipation_density)

    def test_supported_vertices_are_exactly_zero(self):
        problem = quarter_problem()
        result = recover_result(problem, solve(problem.program))
        support = problem.reduction.support_vertices
        assert len(support) == 5
        assert (result.vertex_values[support] == 0.0).all()

    def test_strength_scaling(self):
        base = solved_lambda(quarter_problem())
        assert solved_lambda(quarter_problem(JOHANSEN.scaled(2.5))) == pytest.approx(2.5 * base, rel=1e-6)

    def test_deformation_density_is_per_unit_strength(self):
        problem = quarter_problem(JOHANSEN.scaled(2.5))
        result = recover_result(problem, solve(problem.program))
        assert result.cell_deformation_density == pytest.approx(result.cell_dissipation_density / 2.5)
        assert result.cell_strength == pytest.approx(np.full(problem.mesh.n_triangles, 2.5))

    def test_load_scaling(self):
        base = solved_lambda(quarter_problem())
        assert solved_lambda(quarter_problem(load=LoadSpec.uniform(4.0))) == pytest.approx(base / 4.0, rel=1e-6)

    def test_rigid_motion_invariance(self):
        base = solved_lambda(quarter_problem())
        moved = generate_rect_mesh(0.5, 0.5, 2, 2, "crossed").transformed(0.7, (2.0, -1.0))
        assert solved_lambda(quarter_problem(mesh=moved)) == pytest.approx(base, rel=1e-6)

    def test_non_optimal_solve_is_refused(self):
        problem = quarter_problem()
        solution = solve(problem.program, SolverSettings(max_iter=1))
        with pytest.raises(SolverFailure, match="status=max_iter"):
            recover_result(problem, solution)


def test_hermite_clamped_is_quadrature_limited(caplog):
    mesh = generate_rect_mesh(1.0, 1.0, 1, 1, "diag")
    space = ElementSpace.create("p3_hermite", mesh)
    bcs = [BoundaryCondition(side, "clamped") for side in ("left", "right", "bottom", "top")]
    with caplog.at_level(logging.WARNING):
        problem = assemble(mesh, space, make_criterion("von_mises", m0=1.0), LoadSpec.uniform(), bcs)
    assert problem.rigor == RIGOR_QUADRATURE_LIMITED
    assert problem.n_free == 2
    assert "quadrature-limited bound" in caplog.text
    assert (problem.program.m, problem.program.n) == expected_sizes(2, problem.bulk_block, problem.edge_block)


class TestLocalizationRatio:
    """Concentration of the unit-strength dissipation over the weakest cells"""

    mesh = SimpleNamespace(areas=np.array([1.0, 1.0, 2.0, 4.0]))

    def test_weakest_cells(self):
        result = SimpleNamespace(
            cell_strength=np.array([3.0, 0.5, 2.0, 1.0]),
            cell_deformation_density=np.array([1.0, 8.0, 1.0, 1.0]),
        )
        # mean density 15 / 8, weakest quarter (one cell) has density 8
        assert localization_ratio(result, self.mesh, 0.25) == pytest.approx(8.0 / (15.0 / 8.0))

    def test_uniform_density(self):
        result = SimpleNamespace(
            cell_strength=np.arange(4.0), cell_deformation_density=np.full(4, 2.0)
        )
        assert localization_ratio(result, self.mesh) == pytest.approx(1.0)

    @pytest.mark.parametrize("fraction", [0.0, 1.5])
    def test_fraction_range(self, fraction):
        result = SimpleNamespace(cell_strength=np.ones(4), cell_deformation_density=np.ones(4))
        with pytest.raises(InvalidArgumentError):
            localization_ratio(result, self.mesh, fraction)
