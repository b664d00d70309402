"""Tests for the exception hierarchy and error reporting"""

import pytest

from platelimit.conic import SolverSettings, solve
from platelimit.exceptions import (
    AssemblyError,
    ConfigError,
    ExpressionError,
    InvalidArgumentError,
    MeshParseError,
    MeshValidationError,
    PlateLimitError,
    SolverFailure,
)
from platelimit.mesh_io import import_mesh
from platelimit.selftest import soc3_toy


@pytest.mark.parametrize(
    "error",
    [
        InvalidArgumentError("bad"),
        MeshValidationError("bad mesh"),
        MeshParseError("plate.node", 3, "bad line"),
        ExpressionError("1 +", 3, "unexpected end"),
        AssemblyError("infeasible-bcs", "nothing to move"),
        ConfigError("/mesh", "bad"),
    ],
    ids=lambda e: type(e).__name__,
)
def test_every_error_is_a_platelimit_error(error):
    assert isinstance(error, PlateLimitError)


def test_invalid_argument_is_a_value_error():
    with pytest.raises(ValueError):
        raise InvalidArgumentError("nx must be positive")


def test_mesh_parse_error_names_file_and_line():
    error = MeshParseError("plate.ele", 12, "expected 4 integers")
    assert str(error) == "plate.ele:12: expected 4 integers"
    assert (error.path, error.line_number) == ("plate.ele", 12)


def test_mesh_validation_error_truncates_issue_list():
    issues = [f"triangle {i} is degenerate" for i in range(12)]
    error = MeshValidationError("invalid mesh", issues)
    assert error.issues == issues
    assert str(error).startswith("invalid mesh: triangle 0 is degenerate; ")
    assert "triangle 9 is degenerate; ... (2 more)" in str(error)
    assert "triangle 10" not in str(error)
    assert str(MeshValidationError("empty mesh")) == "empty mesh"


def test_expression_error_position():
    error = ExpressionError("x1 $ 2", 3, "unexpected character '$'")
    assert str(error) == "unexpected character '$' at position 3 in 'x1 $ 2'"


def test_assembly_error_code():
    error = AssemblyError("degenerate-Dirichlet", "aligned support")
    assert error.code == "degenerate-Dirichlet"
    assert str(error) == "[degenerate-Dirichlet] aligned support"


def test_config_error_pointer():
    assert ConfigError("", "cannot parse").pointer == "/"
    assert str(ConfigError("/mesh/nx", "expected an integer >= 1, got 0")) == (
        "/mesh/nx: expected an integer >= 1, got 0"
    )


def test_solver_failure_summarises_solution():
    program, _ = soc3_toy()
    solution = solve(program, SolverSettings(max_iter=1))
    error = SolverFailure(solution)
    assert error.solution is solution
    message = str(error)
    assert message.startswith("conic solve did not reach optimality: status=max_iter")
    assert "iterations=1" in message
    assert "r_primal=" in message and "gap=" in message


class TestFileErrors:
    """Errors surfaced while reading inputs"""

    def test_missing_mesh_file(self, tmp_path):
        with pytest.raises(PlateLimitError):
            import_mesh(tmp_path / "absent.msh")

    def test_garbage_msh_reports_a_line(self, tmp_path):
        path = tmp_path / "garbage.msh"
        path.write_text("$MeshFormat\nnot a version\n$EndMeshFormat\n", encoding="utf-8")
        with pytest.raises(MeshParseError) as excinfo:
            import_mesh(path)
        assert excinfo.value.line_number == 2
        assert str(excinfo.value).startswith(f"{path}:2: ")
