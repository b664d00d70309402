"""Command Line Interface for platelimit"""

import json
import logging
import sys
from pathlib import Path
from typing import Callable, NoReturn, Optional, Tuple

import click
from colorama import Fore, Style, init

from platelimit.config import RunConfig, load_config
from platelimit.conic import SolverSettings
from platelimit.constants import DEFAULT_MAX_ITER, DEFAULT_OUTPUT_FOLDER, LOG_FILE_NAME
from platelimit.exceptions import PlateLimitError, SolverFailure
from platelimit.logger import get_logger, setup_logging
from platelimit.performance_utils import get_performance_monitor, log_performance_summary
from platelimit.report import ConvergenceRow
from platelimit.runner import run_convergence, run_dump, run_solve, run_solve_dump
from platelimit.selftest import SUITES, run_selftest

# Initialize colorama for cross-platform colored output
init()

EXIT_ERROR = 1
EXIT_SOLVER = 2


def _prepare(output_dir: Optional[str], verbose: bool, log_file: bool) -> Optional[Path]:
    output_path = Path(output_dir) if output_dir else None
    if output_path is not None:
        output_path.mkdir(parents=True, exist_ok=True)
    log_file_path = output_path / LOG_FILE_NAME if (log_file and output_path) else None
    setup_logging(logging.DEBUG if verbose else logging.INFO, log_file_path)
    if log_file_path:
        get_logger(__name__).info(f"Log file: {log_file_path.absolute()}")
    return output_path


def _fail(message: str, code: int) -> NoReturn:
    get_logger(__name__).error(f"{Fore.RED}{message}{Style.RESET_ALL}")
    sys.exit(code)


def _load(config_path: str, tol_feas: Optional[float], tol_gap: Optional[float]) -> RunConfig:
    return load_config(config_path).with_solver(tol_feas, tol_gap)


COMMON_OPTIONS = (
    click.option(
        "--output-dir",
        "-o",
        default=DEFAULT_OUTPUT_FOLDER,
        type=click.Path(file_okay=False),
        show_default=True,
        help="Directory receiving result files",
    ),
    click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging"),
    click.option(
        "--log-file",
        is_flag=True,
        help=f"Save logs to a file ({LOG_FILE_NAME}) in the output directory",
    ),
)

TOLERANCE_OPTIONS = (
    click.option("--tol-feas", type=click.FloatRange(min=0, min_open=True), help="Primal/dual feasibility tolerance"),
    click.option("--tol-gap", type=click.FloatRange(min=0, min_open=True), help="Relative duality gap tolerance"),
)


def with_options(*options: Callable) -> Callable:
    def decorator(func: Callable) -> Callable:
        for option in reversed(options):
            func = option(func)
        return func

    return decorator


def _parse_h_list(ctx, param, value: Optional[str]) -> Optional[Tuple[float, ...]]:
    if value is None:
        return None
    try:
        sizes = tuple(float(item) for item in value.split(",") if item.strip())
    except ValueError as exc:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}") from exc
    if len(sizes) < 2 or any(h <= 0 for h in sizes):
        raise click.BadParameter("expected at least two positive mesh sizes")
    return sizes


@click.group()
@click.version_option(package_name="platelimit")
def main():
    """
    platelimit - Upper-bound collapse loads of thin plates.

    Discretises the kinematic limit-analysis problem with P2 Lagrange or P3
    Hermite elements and solves the resulting second-order cone program with
    a built-in interior-point method.
    """


@main.command()
@click.argument("config_path", metavar="CONFIG", type=click.Path(exists=True, dir_okay=False))
@with_options(*COMMON_OPTIONS)
@with_options(*TOLERANCE_OPTIONS)
@click.option("--timings", is_flag=True, help="Record assembly and solve times in the result record")
def solve(config_path, output_dir, verbose, log_file, tol_feas, tol_gap, timings):
    """Compute the collapse multiplier of one configuration."""
    output_path = _prepare(output_dir, verbose, log_file)
    logger = get_logger(__name__)
    logger.info(f"{Fore.CYAN}Starting platelimit solve: {config_path}{Style.RESET_ALL}")
    try:
        config = _load(config_path, tol_feas, tol_gap)
        outcome = run_solve(config, output_path, timings=timings)
    except SolverFailure as exc:
        _fail(f"Solve failed: {exc}", EXIT_SOLVER)
    except PlateLimitError as exc:
        if verbose:
            logger.exception("Full error details:")
        _fail(f"Error: {exc}", EXIT_ERROR)

    result = outcome.result
    logger.info(
        f"{Fore.GREEN}✓ lambda_h = {result.normalized_lambda:.8g} "
        f"({result.status}, {result.rigor}, {result.iterations} iterations){Style.RESET_ALL}"
    )
    for kind, path in outcome.files.items():
        logger.info(f"  {kind}: {path}")
    if timings:
        log_performance_summary(get_performance_monitor())


@main.command()
@click.argument("config_path", metavar="CONFIG", type=click.Path(exists=True, dir_okay=False))
@with_options(*COMMON_OPTIONS)
@with_options(*TOLERANCE_OPTIONS)
@click.option("--levels", type=click.IntRange(min=2), help="Number of nested refinement levels")
@click.option("--h-list", callback=_parse_h_list, help="Comma-separated mesh sizes h/a, e.g. 0.25,0.125")
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True, help="Levels solved in parallel")
@click.option("--timings", is_flag=True, help="Add a solve_seconds column to the CSV")
def convergence(config_path, output_dir, verbose, log_file, tol_feas, tol_gap, levels, h_list, threads, timings):
    """Mesh-convergence study: one row per refinement level."""
    output_path = _prepare(output_dir, verbose, log_file)
    logger = get_logger(__name__)
    logger.info(f"{Fore.CYAN}Starting platelimit convergence study: {config_path}{Style.RESET_ALL}")

    def report(row: ConvergenceRow) -> None:
        if row.succeeded:
            error = "" if row.relative_error is None else f", relative error {row.relative_error:.3e}"
            logger.info(
                f"{Fore.YELLOW}Level {row.level}: h = {row.h:.4g}, dofs = {row.dofs}, "
                f"lambda_h = {row.lambda_h:.8g}{error}{Style.RESET_ALL}"
            )
        else:
            logger.error(f"{Fore.RED}Level {row.level}: h = {row.h:.4g} failed ({row.status}){Style.RESET_ALL}")

    try:
        config = _load(config_path, tol_feas, tol_gap)
        outcome = run_convergence(
            config, output_path, levels=levels, h_list=h_list, threads=threads, timings=timings, on_level=report
        )
    except PlateLimitError as exc:
        if verbose:
            logger.exception("Full error details:")
        _fail(f"Error: {exc}", EXIT_ERROR)

    failed = sum(not row.succeeded for row in outcome.rows)
    logger.info(f"{Fore.CYAN}Convergence study complete:{Style.RESET_ALL}")
    logger.info(f"  {Fore.GREEN}Successful levels: {len(outcome.rows) - failed}{Style.RESET_ALL}")
    if outcome.rate is not None:
        logger.info(f"  Fitted rate: {outcome.rate:.3f}")
    for kind, path in outcome.files.items():
        logger.info(f"  {kind}: {path}")
    if failed:
        logger.info(f"  {Fore.RED}Failed levels: {failed}{Style.RESET_ALL}")
        sys.exit(EXIT_SOLVER)


@main.command()
@click.option("--seed", type=int, default=0, show_default=True, help="Seed of the random suites")
@click.option(
    "--suite",
    "suites",
    multiple=True,
    type=click.Choice(SUITES),
    help="Run only the named suite (repeatable)",
)
@click.option("--json", "json_path", type=click.Path(dir_okay=False), help="Also write the report as JSON")
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging")
def selftest(seed, suites, json_path, verbose):
    """Run the built-in oracle suites; exit status 0 iff all pass."""
    setup_logging(logging.DEBUG if verbose else logging.INFO)
    logger = get_logger(__name__)
    logger.info(f"{Fore.CYAN}Starting platelimit self-test (seed {seed}){Style.RESET_ALL}")
    report = run_selftest(seed, suites=suites or SUITES)
    click.echo(report.table())
    for kind, bounds in report.coercivity.items():
        click.echo(f"{kind}: alpha = {bounds.alpha:.6g}, beta = {bounds.beta:.6g}")
    if json_path:
        path = Path(json_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    if report.passed:
        logger.info(f"{Fore.GREEN}✓ All self-test suites passed{Style.RESET_ALL}")
    else:
        _fail("Self-test failed", EXIT_ERROR)


@main.command("dump-conic")
@click.argument("config_path", metavar="CONFIG", type=click.Path(exists=True, dir_okay=False))
@click.argument("out", type=click.Path(dir_okay=False))
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging")
def dump_conic(config_path, out, verbose):
    """Write the assembled conic program of CONFIG to OUT."""
    setup_logging(logging.DEBUG if verbose else logging.INFO)
    try:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        problem = run_dump(load_config(config_path), out)
    except PlateLimitError as exc:
        _fail(f"Error: {exc}", EXIT_ERROR)
    get_logger(__name__).info(f"{Fore.GREEN}✓ Wrote {out}: {problem.sizes()}{Style.RESET_ALL}")


@main.command("solve-dump")
@click.argument("dump_path", metavar="FILE", type=click.Path(exists=True, dir_okay=False))
@with_options(*TOLERANCE_OPTIONS)
@click.option("--max-iter", type=click.IntRange(min=1), default=DEFAULT_MAX_ITER, show_default=True)
@click.option("--verbose", "-v", is_flag=True, help="Enable verbose logging")
def solve_dump(dump_path, tol_feas, tol_gap, max_iter, verbose):
    """Solve a conic program previously written by dump-conic."""
    setup_logging(logging.DEBUG if verbose else logging.INFO)
    logger = get_logger(__name__)
    defaults = SolverSettings()
    settings = SolverSettings(
        tol_feas=tol_feas or defaults.tol_feas, tol_gap=tol_gap or defaults.tol_gap, max_iter=max_iter
    )
    try:
        solution = run_solve_dump(dump_path, settings)
    except PlateLimitError as exc:
        _fail(f"Error: {exc}", EXIT_ERROR)
    residuals = solution.residuals
    click.echo(
        f"status: {solution.status_label}\n"
        f"objective: {solution.primal_objective:.12g}\n"
        f"iterations: {solution.iterations}\n"
        f"residuals: primal {residuals.primal:.3e}, dual {residuals.dual:.3e}, gap {residuals.gap:.3e}"
    )
    if not solution.is_optimal:
        _fail(f"Solve did not reach optimality ({solution.status_label})", EXIT_SOLVER)
    logger.info(f"{Fore.GREEN}✓ Optimal{Style.RESET_ALL}")


if __name__ == "__main__":
    main()
