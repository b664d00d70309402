"""Run orchestration: single solves, convergence studies and conic dumps."""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

from platelimit.assemble import AssembledProblem, LimitAnalysisResult, assemble, localization_ratio, recover_result
from platelimit.config import RunConfig
from platelimit.conic import ConicSolution, SolverSettings, read_conic, solve, write_conic
from platelimit.exceptions import ConfigError, PlateLimitError, SolverFailure
from platelimit.fem import ElementSpace
from platelimit.mesh import Mesh, generate_rect_mesh, refine_uniform
from platelimit.mesh_io import import_mesh
from platelimit.performance_utils import PerformanceMonitor, get_performance_monitor, performance_monitored
from platelimit.plotting import Series, write_convergence_svg
from platelimit.report import (
    ConvergenceRow,
    ResultRecordGenerator,
    fitted_rate,
    relative_error,
    write_convergence_csv,
)
from platelimit.vtk_writer import write_result_vtk

logger = logging.getLogger(__name__)


# -------------------------------------------------------------------- build
def build_mesh(config: RunConfig) -> Mesh:
    domain = config.domain
    if domain.type == "rect":
        return generate_rect_mesh(
            domain.width, domain.height, config.mesh.nx, config.mesh.ny, config.mesh.pattern
        )
    return import_mesh(domain.path, domain.format)


def build_problem(config: RunConfig, mesh: Optional[Mesh] = None) -> AssembledProblem:
    """Assemble the discrete program described by ``config``."""
    mesh = mesh if mesh is not None else build_mesh(config)
    criterion = config.build_criterion()
    load = config.build_load()
    space = ElementSpace.create(config.element, mesh)
    logger.debug(
        f"Mesh: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles; "
        f"{config.element}: {space.n_dofs} dofs"
    )
    return assemble(
        mesh,
        space,
        criterion,
        load,
        config.boundary_conditions(),
        config.build_normalization(criterion, load),
    )


# -------------------------------------------------------------------- solve
@dataclass
class SolveOutcome:
    problem: AssembledProblem
    solution: ConicSolution
    result: LimitAnalysisResult
    record: Dict[str, object]
    files: Dict[str, Path] = field(default_factory=dict)


def run_solve(
    config: RunConfig,
    output_dir: Optional[Union[str, Path]] = None,
    timings: bool = False,
    monitor: Optional[PerformanceMonitor] = None,
) -> SolveOutcome:
    """Assemble, solve and export one configuration.

    Files named in ``config.outputs`` are written below ``output_dir``; with
    no output directory nothing is written. A non-optimal solve still writes
    its JSON record before SolverFailure propagates.
    """
    monitor = monitor or get_performance_monitor()
    generator = ResultRecordGenerator()
    output_dir = Path(output_dir) if output_dir is not None else None
    echo = config.to_dict()

    with monitor.measure("assemble"):
        problem = build_problem(config)
    logger.info(f"Solving {problem.program.m} x {problem.program.n} conic program")
    with monitor.measure("solve"):
        solution = solve(problem.program, config.solver.settings())

    files: Dict[str, Path] = {}
    try:
        result = recover_result(problem, solution)
    except SolverFailure as exc:
        if output_dir is not None and config.outputs.json:
            generator.write(output_dir / config.outputs.json, generator.failure_record(echo, solution, str(exc)))
        raise

    extra = {}
    if not problem.criterion.is_homogeneous:
        extra["localization_ratio"] = localization_ratio(result, problem.mesh)
    timing_record = None
    if timings:
        timing_record = monitor.timings(("assemble", "solve"))
    record = generator.solve_record(echo, problem, result, timing_record, extra)

    if output_dir is not None:
        if config.outputs.json:
            files["json"] = generator.write(output_dir / config.outputs.json, record)
        if config.outputs.vtk:
            files["vtk"] = write_result_vtk(output_dir / config.outputs.vtk, problem.mesh, result)
    return SolveOutcome(problem, solution, result, record, files)


# -------------------------------------------------------------- convergence
@dataclass(frozen=True)
class Level:
    level: int
    h: float
    nx: Optional[int] = None
    ny: Optional[int] = None
    mesh: Optional[Mesh] = None


@dataclass
class ConvergenceOutcome:
    rows: List[ConvergenceRow]
    rate: Optional[float]
    record: Dict[str, object]
    files: Dict[str, Path] = field(default_factory=dict)


def convergence_levels(
    config: RunConfig, levels: Optional[int] = None, h_list: Optional[Sequence[float]] = None
) -> List[Level]:
    """Refinement levels ordered by decreasing h (in units of the normalisation length)."""
    levels = levels if levels is not None else config.convergence.levels
    h_list = h_list if h_list is not None else config.convergence.h_list
    a = config.normalization.length
    domain = config.domain

    if domain.type == "rect":
        if h_list:
            sizes = [
                (max(1, round(domain.width / (h * a))), max(1, round(domain.height / (h * a))))
                for h in h_list
            ]
        else:
            sizes = [(config.mesh.nx * 2**k, config.mesh.ny * 2**k) for k in range(levels)]
        plan = [
            Level(0, max(domain.width / nx, domain.height / ny) / a, nx, ny) for nx, ny in sizes
        ]
    else:
        if h_list:
            raise ConfigError("/convergence/h_list", "mesh sizes can only be prescribed for rectangular domains")
        mesh = build_mesh(config)
        plan = []
        for _ in range(levels):
            plan.append(Level(0, float(mesh.edge_lengths.max()) / a, mesh=mesh))
            mesh = refine_uniform(mesh)

    if len(plan) < 2:
        raise ConfigError("/convergence/levels", "a convergence study needs at least two levels")
    plan.sort(key=lambda entry: -entry.h)
    return [replace(entry, level=k) for k, entry in enumerate(plan)]


def _run_level(config: RunConfig, entry: Level) -> ConvergenceRow:
    level_config = config.with_mesh(entry.nx, entry.ny) if entry.nx is not None else config
    monitor = PerformanceMonitor()
    dofs = 0
    try:
        with monitor.measure("assemble"):
            problem = build_problem(level_config, entry.mesh)
        dofs = problem.space.n_dofs
        with monitor.measure("solve"):
            solution = solve(problem.program, config.solver.settings())
        result = recover_result(problem, solution)
    except SolverFailure as exc:
        logger.error(f"Level {entry.level} (h = {entry.h:.4g}) failed: {exc}")
        return ConvergenceRow(
            entry.level, entry.h, entry.nx, entry.ny, dofs, None, None, problem.rigor,
            exc.solution.status_label, monitor.last("solve").seconds,
        )
    except PlateLimitError as exc:
        logger.error(f"Level {entry.level} (h = {entry.h:.4g}) failed: {exc}")
        return ConvergenceRow(entry.level, entry.h, entry.nx, entry.ny, dofs, None, None, "", "error", None)
    return ConvergenceRow(
        entry.level,
        entry.h,
        entry.nx,
        entry.ny,
        dofs,
        result.normalized_lambda,
        None,
        result.rigor,
        result.status,
        monitor.last("solve").seconds,
    )


def run_convergence(
    config: RunConfig,
    output_dir: Optional[Union[str, Path]] = None,
    levels: Optional[int] = None,
    h_list: Optional[Sequence[float]] = None,
    threads: int = 1,
    timings: bool = False,
    on_level: Optional[Callable[[ConvergenceRow], None]] = None,
) -> ConvergenceOutcome:
    """Solve every level, then write the CSV, the JSON summary and the SVG plot.

    Levels run concurrently on ``threads`` workers; rows come back in level
    order regardless of completion order. A failed level keeps its row with
    an empty ``lambda_h`` and the study continues.
    """
    plan = convergence_levels(config, levels, h_list)
    logger.info(f"Convergence study over {len(plan)} levels, h = {[round(s.h, 6) for s in plan]}")

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        rows = list(executor.map(lambda entry: _run_level(config, entry), plan))

    reference = config.reference_lambda
    for row in rows:
        row.relative_error = relative_error(row.lambda_h, reference)
        if on_level is not None:
            on_level(row)

    rate = fitted_rate(rows)
    if rate is not None:
        logger.info(f"Fitted convergence rate of the relative error: {rate:.3f}")

    generator = ResultRecordGenerator()
    record = generator.convergence_record(config.to_dict(), rows, reference, include_timings=timings)
    files: Dict[str, Path] = {}
    if output_dir is not None:
        output_dir = Path(output_dir)
        outputs = config.outputs
        if outputs.csv:
            files["csv"] = write_convergence_csv(output_dir / outputs.csv, rows, include_timings=timings)
        if outputs.json:
            files["json"] = generator.write(output_dir / outputs.json, record)
        errors = [(row.h, row.relative_error) for row in rows if row.relative_error]
        if outputs.svg and reference is not None and any(e > 0 for _, e in errors):
            label = f"{config.element}, {config.criterion.kind}"
            files["svg"] = write_convergence_svg(output_dir / outputs.svg, [Series(label, tuple(errors))])
        elif outputs.svg and reference is not None:
            logger.warning("No positive relative errors; convergence plot skipped")
    return ConvergenceOutcome(rows, rate, record, files)


# -------------------------------------------------------------------- dumps
@performance_monitored
def run_dump(config: RunConfig, path: Union[str, Path]) -> AssembledProblem:
    """Write the assembled program of ``config`` in the text conic format."""
    problem = build_problem(config)
    write_conic(problem.program, path)
    logger.info(f"Wrote {problem.program.m} x {problem.program.n} conic program to {path}")
    return problem


@performance_monitored
def run_solve_dump(path: Union[str, Path], settings: Optional[SolverSettings] = None) -> ConicSolution:
    program = read_conic(path)
    for warning in program.validate():
        logger.warning(warning)
    return solve(program, settings)
