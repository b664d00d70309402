"""Tests for the command-line interface"""

import json
import logging
from types import SimpleNamespace
from unittest.mock import MagicMock, patch

import pytest
from click.testing import CliRunner
from colorama import Fore, Style

from platelimit.cli import main
from platelimit.conic import SolverSettings, solve
from platelimit.exceptions import AssemblyError, SolverFailure
from platelimit.logger import get_logger, setup_logging
from platelimit.selftest import soc3_toy


@pytest.fixture
def runner():
    return CliRunner()


def failed_solution():
    program, _ = soc3_toy()
    return solve(program, SolverSettings(max_iter=1))


class TestSolveCommand:
    """platelimit solve"""

    def test_writes_result_and_mechanism(self, runner, quarter_config_file, tmp_path):
        out = tmp_path / "out"
        result = runner.invoke(main, ["solve", str(quarter_config_file), "-o", str(out), "--timings"])
        assert result.exit_code == 0, result.output
        record = json.loads((out / "result.json").read_text(encoding="utf-8"))
        assert record["lambda_h"] == pytest.approx(24.0, rel=1e-6)
        assert record["rigor"] == "strict"
        assert set(record["timings"]) == {"assemble", "solve"}
        assert (out / "mechanism.vtk").read_text().startswith("# vtk DataFile Version 3.0")

    def test_log_file(self, runner, quarter_config_file, tmp_path):
        out = tmp_path / "logged"
        result = runner.invoke(main, ["solve", str(quarter_config_file), "-o", str(out), "--log-file"])
        assert result.exit_code == 0, result.output
        assert "lambda_h" in (out / "platelimit.log").read_text(encoding="utf-8")

    def test_solver_failure_exit_code(self, runner, quarter_config_file, tmp_path):
        with patch("platelimit.cli.run_solve", side_effect=SolverFailure(failed_solution())):
            result = runner.invoke(main, ["solve", str(quarter_config_file), "-o", str(tmp_path)])
        assert result.exit_code == 2

    def test_assembly_error_exit_code(self, runner, quarter_config_file, tmp_path):
        error = AssemblyError("degenerate-Dirichlet", "rigid motions would be admissible")
        with patch("platelimit.cli.run_solve", side_effect=error):
            result = runner.invoke(main, ["solve", str(quarter_config_file), "-o", str(tmp_path)])
        assert result.exit_code == 1

    def test_invalid_config_exit_code(self, runner, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"domain": {"type": "rect", "width": -1, "height": 1}}), encoding="utf-8")
        result = runner.invoke(main, ["solve", str(path), "-o", str(tmp_path / "out")])
        assert result.exit_code == 1
        assert not (tmp_path / "out" / "result.json").exists()

    def test_tolerance_flags_reach_the_config(self, runner, quarter_config_file, tmp_path):
        outcome = MagicMock()
        outcome.result = SimpleNamespace(normalized_lambda=24.0, status="optimal", rigor="strict", iterations=12)
        outcome.files = {}
        with patch("platelimit.cli.run_solve", return_value=outcome) as run:
            result = runner.invoke(
                main, ["solve", str(quarter_config_file), "-o", str(tmp_path), "--tol-gap", "1e-6"]
            )
        assert result.exit_code == 0, result.output
        config = run.call_args.args[0]
        assert config.solver.tol_gap == 1e-6

    def test_missing_config(self, runner, tmp_path):
        result = runner.invoke(main, ["solve", str(tmp_path / "absent.json")])
        assert result.exit_code == 2
        assert "does not exist" in result.output


class TestConvergenceCommand:
    """platelimit convergence"""

    def test_writes_table(self, runner, quarter_config_file, tmp_path):
        out = tmp_path / "study"
        result = runner.invoke(main, ["convergence", str(quarter_config_file), "-o", str(out)])
        assert result.exit_code == 0, result.output
        lines = (out / "convergence.csv").read_text(encoding="utf-8").splitlines()
        assert lines[0] == "level,h,nx,ny,dofs,lambda_h,relative_error,rigor,status"
        assert len(lines) == 3
        record = json.loads((out / "result.json").read_text(encoding="utf-8"))
        assert [row["nx"] for row in record["rows"]] == [2, 4]

    def test_failed_level_exit_code(self, runner, quarter_config_file, tmp_path):
        outcome = MagicMock()
        outcome.rows = [MagicMock(succeeded=True, relative_error=None), MagicMock(succeeded=False)]
        outcome.rate = None
        outcome.files = {}
        with patch("platelimit.cli.run_convergence", return_value=outcome):
            result = runner.invoke(main, ["convergence", str(quarter_config_file), "-o", str(tmp_path)])
        assert result.exit_code == 2

    def test_h_list_option(self, runner, quarter_config_file, tmp_path):
        with patch("platelimit.cli.run_convergence") as run:
            run.return_value.rows = []
            run.return_value.rate = None
            run.return_value.files = {}
            result = runner.invoke(
                main,
                ["convergence", str(quarter_config_file), "-o", str(tmp_path), "--h-list", "0.5,0.25", "--threads", "2"],
            )
        assert result.exit_code == 0, result.output
        assert run.call_args.kwargs["h_list"] == (0.5, 0.25)
        assert run.call_args.kwargs["threads"] == 2

    @pytest.mark.parametrize("value", ["0.5", "0.5,abc", "0.5,-0.25"])
    def test_bad_h_list(self, runner, quarter_config_file, value):
        result = runner.invoke(main, ["convergence", str(quarter_config_file), "--h-list", value])
        assert result.exit_code == 2
        assert "--h-list" in result.output


class TestSelftestCommand:
    """platelimit selftest"""

    def _report(self, passed):
        report = MagicMock()
        report.passed = passed
        report.table.return_value = "suite  checks  failures"
        report.coercivity = {"von_mises": MagicMock(alpha=0.816497, beta=1.414214)}
        report.to_dict.return_value = {"passed": passed}
        return report

    def test_passing_report(self, runner, tmp_path):
        with patch("platelimit.cli.run_selftest", return_value=self._report(True)) as run:
            result = runner.invoke(
                main, ["selftest", "--seed", "7", "--suite", "socp-random", "--json", str(tmp_path / "st.json")]
            )
        assert result.exit_code == 0, result.output
        assert run.call_args.args[0] == 7
        assert run.call_args.kwargs["suites"] == ("socp-random",)
        assert "von_mises: alpha = 0.816497, beta = 1.41421" in result.output
        assert json.loads((tmp_path / "st.json").read_text()) == {"passed": True}

    def test_failing_report(self, runner):
        with patch("platelimit.cli.run_selftest", return_value=self._report(False)):
            result = runner.invoke(main, ["selftest"])
        assert result.exit_code == 1

    def test_unknown_suite(self, runner):
        result = runner.invoke(main, ["selftest", "--suite", "everything"])
        assert result.exit_code == 2


class TestConicDumpCommands:
    """platelimit dump-conic and solve-dump"""

    def test_dump_then_solve(self, runner, quarter_config_file, tmp_path):
        dump = tmp_path / "dumps" / "quarter.conic"
        result = runner.invoke(main, ["dump-conic", str(quarter_config_file), str(dump)])
        assert result.exit_code == 0, result.output
        assert dump.read_text().startswith("PLATELIMIT-CONIC 1\n")

        result = runner.invoke(main, ["solve-dump", str(dump)])
        assert result.exit_code == 0, result.output
        assert "status: optimal" in result.output
        objective = next(line for line in result.output.splitlines() if line.startswith("objective: "))
        assert float(objective.split(": ")[1]) == pytest.approx(24.0, rel=1e-6)

    def test_solve_dump_not_optimal(self, runner, quarter_config_file, tmp_path):
        dump = tmp_path / "quarter.conic"
        assert runner.invoke(main, ["dump-conic", str(quarter_config_file), str(dump)]).exit_code == 0
        result = runner.invoke(main, ["solve-dump", str(dump), "--max-iter", "1"])
        assert result.exit_code == 2
        assert "status: max_iter" in result.output

    def test_solve_dump_malformed(self, runner, tmp_path):
        dump = tmp_path / "broken.conic"
        dump.write_text("not a dump\n")
        result = runner.invoke(main, ["solve-dump", str(dump)])
        assert result.exit_code == 1


class TestLogging:
    """Console and file handlers"""

    def test_log_file_keeps_debug_without_colour_codes(self, tmp_path):
        path = tmp_path / "run.log"
        setup_logging(logging.INFO, path)
        try:
            get_logger("platelimit.conic").debug("iter   0  gap 1.00e+00")
            get_logger("platelimit.cli").info(f"{Fore.GREEN}done{Style.RESET_ALL}")
        finally:
            setup_logging(logging.INFO)
        text = path.read_text(encoding="utf-8")
        assert "iter   0  gap 1.00e+00" in text
        assert "platelimit.cli - INFO - done" in text
        assert "\x1b[" not in text

    def test_repeated_setup_replaces_handlers(self):
        root = logging.getLogger()
        before = len(root.handlers)
        setup_logging(logging.INFO)
        setup_logging(logging.DEBUG)
        assert len(root.handlers) <= before + 1
