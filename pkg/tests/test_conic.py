"""Tests for the cone algebra and the interior-point conic solver"""

import numpy as np
import pytest
import scipy.sparse as sp

from platelimit.cones import ConeLayout, free, merge_cones, nonneg, nt_scaling, soc
from platelimit.conic import (
    ConicProgram,
    SolverSettings,
    SolveStatus,
    block_diagonal,
    random_certified_program,
    read_conic,
    solve,
    write_conic,
)
from platelimit.exceptions import InvalidArgumentError
from platelimit.selftest import empty_row_toy, infeasible_toy, lp_toy, soc3_toy


class TestConeAlgebra:
    """Jordan algebra and scaling on products of cones"""

    layout = ConeLayout([free(1), nonneg(2), soc(3), soc(3)])

    def test_identity(self):
        e = self.layout.identity()
        np.testing.assert_array_equal(e, [0, 1, 1, 1, 0, 0, 1, 0, 0])
        assert self.layout.degree == 4

    def test_jordan_divide_inverts_product(self):
        rng = np.random.default_rng(2)
        lam = self.layout.identity() * 3.0 + 0.3 * rng.standard_normal(9)
        lam[0] = 0.0
        d = rng.standard_normal(9)
        d[0] = 0.0
        r = self.layout.jordan_product(lam, d)
        np.testing.assert_allclose(self.layout.jordan_divide(lam, r)[1:], d[1:], atol=1e-12)

    def test_project_and_distance(self):
        x = np.array([5.0, -1.0, 2.0, 0.0, 3.0, 4.0, -3.0, 1.0, 0.0])
        p = self.layout.project(x)
        np.testing.assert_allclose(p, [5.0, 0.0, 2.0, 2.5, 1.5, 2.0, 0.0, 0.0, 0.0])
        assert self.layout.interior_margin(p) == pytest.approx(0.0, abs=1e-12)
        assert self.layout.distance(p) == pytest.approx(0.0, abs=1e-12)
        assert self.layout.dual_distance(np.concatenate(([0.0], p[1:]))) == pytest.approx(0.0, abs=1e-12)

    def test_max_step(self):
        layout = ConeLayout([nonneg(1), soc(2)])
        x = np.array([1.0, 2.0, 0.0])
        dx = np.array([-0.5, 0.0, 1.0])
        assert layout.max_step(x, dx) == pytest.approx(2.0)
        assert layout.max_step(x, np.array([1.0, 1.0, 0.0])) == np.inf

    def test_nt_scaling_maps_to_common_point(self):
        rng = np.random.default_rng(4)
        e = self.layout.identity()
        x = 2.0 * e + 0.2 * rng.standard_normal(9) * (e + (self.layout.constrained & (e == 0)))
        z = 1.5 * e + 0.2 * rng.standard_normal(9) * (e + (self.layout.constrained & (e == 0)))
        x[0] = z[0] = 0.0
        scaling = nt_scaling(self.layout, x, z)
        np.testing.assert_allclose(scaling.apply_w(z)[1:], scaling.lam[1:], atol=1e-10)
        np.testing.assert_allclose(scaling.apply_winv(x)[1:], scaling.lam[1:], atol=1e-10)

    def test_merge_cones(self):
        merged = merge_cones([free(2), free(1), nonneg(1), nonneg(2), soc(3), soc(3)])
        assert merged == [free(3), nonneg(3), soc(3), soc(3)]

    def test_invalid_cones(self):
        with pytest.raises(InvalidArgumentError):
            soc(1)
        with pytest.raises(InvalidArgumentError):
            nonneg(0)


class TestToyPrograms:
    """Small programs with known outcomes"""

    def test_soc3_toy(self):
        program, expected = soc3_toy()
        solution = solve(program)
        assert solution.status is SolveStatus.OPTIMAL
        assert solution.primal_objective == pytest.approx(expected, abs=1e-8)
        np.testing.assert_allclose(solution.x, [5.0, 3.0, 4.0], atol=1e-6)
        assert solution.residuals.within(1e-8, 1e-8)

    def test_lp_toy(self):
        program, expected = lp_toy()
        solution = solve(program)
        assert solution.is_optimal
        assert solution.primal_objective == pytest.approx(expected, abs=1e-8)
        assert solution.dual_objective == pytest.approx(expected, abs=1e-7)
        np.testing.assert_allclose(solution.x, [0.5, 0.5, 0.0], atol=1e-6)

    def test_primal_infeasible(self):
        solution = solve(infeasible_toy())
        assert solution.status is SolveStatus.PRIMAL_INFEASIBLE
        assert solution.status_label == "primal_infeasible"
        # Farkas certificate: b^T y = 1, A^T y + z = 0 with z >= 0
        assert solution.dual_objective == pytest.approx(1.0)
        program = infeasible_toy()
        np.testing.assert_allclose(program.A.T @ solution.y + solution.z, 0.0, atol=1e-6)

    def test_dual_infeasible(self):
        """min -x1 - x2 with x1 = x2, x >= 0 is unbounded"""
        program = ConicProgram(
            sp.csr_matrix(np.array([[1.0, -1.0]])), np.array([0.0]), np.array([-1.0, -1.0]), [nonneg(2)]
        )
        solution = solve(program)
        assert solution.status is SolveStatus.DUAL_INFEASIBLE
        assert solution.primal_objective == pytest.approx(-1.0)

    def test_inconsistent_empty_row(self):
        program = empty_row_toy()
        assert program.validate() == ["row 0 of A is empty"]
        solution = solve(program)
        assert solution.status is SolveStatus.PRIMAL_INFEASIBLE
        assert solution.iterations == 0

    def test_homogeneous_empty_row_is_dropped(self):
        program, expected = lp_toy()
        A = sp.vstack((program.A, sp.csr_matrix((1, 3)))).tocsr()
        padded = ConicProgram(A, np.append(program.b, 0.0), program.c, program.cones)
        assert list(padded.empty_rows()) == [2]
        solution = solve(padded)
        assert solution.is_optimal
        assert solution.primal_objective == pytest.approx(expected, abs=1e-8)
        assert solution.y.shape == (3,)
        assert solution.y[2] == 0.0
        # the trace measures the presolved program, the solution the full one
        last = solution.trace[-1]
        assert last.r_primal == pytest.approx(solution.residuals.primal, rel=1e-9, abs=1e-15)
        assert last.r_dual == pytest.approx(solution.residuals.dual, rel=1e-9, abs=1e-15)
        assert last.gap == pytest.approx(solution.residuals.gap, rel=1e-9, abs=1e-15)

    def test_max_iter(self):
        program, _ = soc3_toy()
        solution = solve(program, SolverSettings(max_iter=1))
        assert solution.status is SolveStatus.MAX_ITER
        assert solution.status_label == "max_iter"
        assert solution.iterations == 1

    def test_trace_records_every_iteration(self):
        program, _ = lp_toy()
        solution = solve(program)
        assert len(solution.trace) == solution.iterations + 1
        assert solution.trace[-1].to_dict()["iteration"] == solution.iterations


@pytest.mark.parametrize("seed, n", [(0, 12), (1, 40), (2, 90)])
def test_random_certified_programs(seed, n):
    instance = random_certified_program(np.random.default_rng(seed), n)
    solution = solve(instance.program)
    assert solution.is_optimal
    assert solution.primal_objective == pytest.approx(instance.objective, rel=1e-6, abs=1e-6)


def test_block_diagonal_adds_objectives():
    (p1, v1), (p2, v2) = soc3_toy(), lp_toy()
    combined = block_diagonal([p1, p2])
    assert (combined.m, combined.n) == (p1.m + p2.m, p1.n + p2.n)
    assert solve(combined).primal_objective == pytest.approx(v1 + v2, abs=1e-7)


class TestProgramValidation:
    """Structural checks before solving"""

    def test_cone_dimension_mismatch(self):
        program = ConicProgram(sp.eye(3, format="csr"), np.ones(3), np.ones(3), [nonneg(2)])
        with pytest.raises(InvalidArgumentError, match="cone dimensions"):
            program.validate()

    def test_rhs_length(self):
        program = ConicProgram(sp.eye(2, format="csr"), np.ones(3), np.ones(2), [nonneg(2)])
        with pytest.raises(InvalidArgumentError, match="b has length 3"):
            solve(program)

    def test_non_finite_data(self):
        program = ConicProgram(sp.eye(2, format="csr"), np.ones(2), np.array([1.0, np.inf]), [nonneg(2)])
        with pytest.raises(InvalidArgumentError, match="non-finite"):
            program.validate()

    @pytest.mark.parametrize(
        "kwargs", [{"tol_feas": 0.0}, {"tol_gap": -1.0}, {"max_iter": 0}, {"step_fraction": 1.0}]
    )
    def test_invalid_settings(self, kwargs):
        with pytest.raises(InvalidArgumentError):
            SolverSettings(**kwargs)


class TestConicDump:
    """ASCII dump format"""

    def test_round_trip(self, tmp_path):
        program, expected = soc3_toy()
        path = write_conic(program, tmp_path / "toy.conic")
        text = path.read_text()
        assert text.startswith("PLATELIMIT-CONIC 1\ndims 2 3 2\ncones 1\nsoc 3\n")
        assert text.endswith("end\n")
        loaded = read_conic(path)
        assert loaded.cones == program.cones
        np.testing.assert_array_equal(loaded.A.toarray(), program.A.toarray())
        assert solve(loaded).primal_objective == pytest.approx(expected, abs=1e-8)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.conic"
        path.write_text("SOMETHING ELSE\n")
        with pytest.raises(InvalidArgumentError, match="missing header"):
            read_conic(path)

    def test_truncated_dump(self, tmp_path):
        program, _ = lp_toy()
        path = write_conic(program, tmp_path / "lp.conic")
        lines = path.read_text().splitlines()
        path.write_text("\n".join(lines[:-3]) + "\n")
        with pytest.raises(InvalidArgumentError, match="unexpected end"):
            read_conic(path)
