"""Built-in self-test suites: oracle cross-checks that run without any input files.

Suites

* ``pi-oracle``: closed-form support functions against brute-force sampling
  of the strength domain, 1000 random curvatures per criterion.
* ``cone-block``: epigraph blocks minimised by the conic solver reproduce the
  closed forms to 1e-6.
* ``interpolation-rates``: log-log slopes of interpolation errors of
  sin(pi x) sin(pi y) for both element families.
* ``socp-random``: random programs with known optima plus two optimal and
  two infeasible toys.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.sparse as sp

from platelimit.conic import ConicProgram, SolveStatus, random_certified_program, solve
from platelimit.cones import nonneg, soc
from platelimit.constants import HERMITE_P3, LAGRANGE_P2, PATTERN_DIAG
from platelimit.criteria import (
    CoercivityBounds,
    YieldCriterion,
    block_minimum,
    brute_force_pi,
    coercivity_bounds,
    emit_cone_block,
    make_criterion,
    pi_eval,
)
from platelimit.elements import get_element
from platelimit.exceptions import InvalidArgumentError, PlateLimitError
from platelimit.fem import interpolation_errors, sine_product
from platelimit.mesh import generate_rect_mesh
from platelimit.performance_utils import get_performance_monitor

logger = logging.getLogger(__name__)

ORACLE_SAMPLES = 100_000
ORACLE_CURVATURES = 1000
ORACLE_TOLERANCE = 1e-3
BLOCK_TOLERANCE = 1e-6
INTERPOLATION_CELLS = (4, 8, 16, 32)
W11_MIN_SLOPE = 1.9
HESSIAN_TV_MIN_SLOPE = 0.9
RANDOM_INSTANCES = 100
RANDOM_MAX_SIZE = 500
RANDOM_TOLERANCE = 1e-6
TOY_TOLERANCE = 1e-8

SAMPLE_POINT = np.array([0.3, 0.7])


def default_criteria() -> List[YieldCriterion]:
    return [
        make_criterion("von_mises", m0=1.0),
        make_criterion("tresca", m0=1.0),
        make_criterion("johansen", m0_plus=1.0, m0_minus=0.6),
    ]


@dataclass
class SuiteResult:
    name: str
    checks: int
    failures: int
    seconds: float = 0.0
    details: Dict[str, Any] = field(default_factory=dict)
    messages: List[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failures == 0 and self.checks > 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "passed": self.passed,
            "checks": self.checks,
            "failures": self.failures,
            "seconds": self.seconds,
            "details": self.details,
            "messages": self.messages,
        }


@dataclass
class SelftestReport:
    suites: List[SuiteResult]
    coercivity: Dict[str, CoercivityBounds]
    seed: int

    @property
    def passed(self) -> bool:
        return all(suite.passed for suite in self.suites)

    def table(self) -> str:
        frame = pd.DataFrame(
            [
                {
                    "suite": s.name,
                    "result": "PASS" if s.passed else "FAIL",
                    "checks": s.checks,
                    "failures": s.failures,
                    "seconds": round(s.seconds, 2),
                }
                for s in self.suites
            ]
        )
        return frame.to_string(index=False)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "passed": self.passed,
            "seed": self.seed,
            "suites": [suite.to_dict() for suite in self.suites],
            "coercivity": {kind: bounds._asdict() for kind, bounds in self.coercivity.items()},
        }


# ---------------------------------------------------------------- oracles
def pi_oracle_suite(
    rng: np.random.Generator,
    criteria: Sequence[YieldCriterion],
    count: int = ORACLE_CURVATURES,
    samples: int = ORACLE_SAMPLES,
) -> SuiteResult:
    result = SuiteResult("pi-oracle", 0, 0)
    for criterion in criteria:
        kappa = rng.standard_normal((count, 3))
        exact = pi_eval(criterion, SAMPLE_POINT, kappa)
        estimate = brute_force_pi(criterion, SAMPLE_POINT, kappa, samples)
        error = np.abs(exact - estimate) / exact
        # the sampled value is a lower estimate up to rounding
        overshoot = estimate > exact * (1.0 + 1e-12) + 1e-14
        bad = (error > ORACLE_TOLERANCE) | overshoot
        result.checks += count
        result.failures += int(bad.sum())
        result.details[criterion.kind] = {"max_relative_error": float(error.max())}
        if bad.any():
            result.messages.append(f"{criterion.kind}: {int(bad.sum())} curvatures outside tolerance")
    return result


def cone_block_suite(
    rng: np.random.Generator, criteria: Sequence[YieldCriterion], count: int = ORACLE_CURVATURES
) -> SuiteResult:
    result = SuiteResult("cone-block", 0, 0)
    points = np.repeat(SAMPLE_POINT[None, :], count, axis=0)
    for criterion in criteria:
        kappa = rng.standard_normal((count, 3))
        exact = pi_eval(criterion, SAMPLE_POINT, kappa)
        try:
            minima = block_minimum(emit_cone_block(criterion, points), kappa)
        except PlateLimitError as exc:
            result.checks += count
            result.failures += count
            result.messages.append(f"{criterion.kind}: {exc}")
            continue
        error = np.abs(minima - exact) / np.maximum(exact, 1.0)
        bad = error > BLOCK_TOLERANCE
        result.checks += count
        result.failures += int(bad.sum())
        result.details[criterion.kind] = {"max_relative_error": float(error.max())}
        if bad.any():
            result.messages.append(f"{criterion.kind}: {int(bad.sum())} blocks off the closed form")
    return result


def loglog_slope(h: Sequence[float], errors: Sequence[float]) -> float:
    return float(np.polyfit(np.log(h), np.log(errors), 1)[0])


def interpolation_rate_suite(cells: Sequence[int] = INTERPOLATION_CELLS) -> SuiteResult:
    result = SuiteResult("interpolation-rates", 0, 0)
    u = sine_product()
    for kind in (LAGRANGE_P2, HERMITE_P3):
        family = get_element(kind)
        h, w11, tv = [], [], []
        for n in cells:
            errors = interpolation_errors(family, generate_rect_mesh(1.0, 1.0, n, n, PATTERN_DIAG), u)
            h.append(1.0 / n)
            w11.append(errors.w11_error)
            tv.append(errors.hessian_tv_error)
        slopes = {"w11": loglog_slope(h, w11), "hessian_tv": loglog_slope(h, tv)}
        result.details[kind] = slopes
        for name, slope, minimum in (
            ("w11", slopes["w11"], W11_MIN_SLOPE),
            ("hessian_tv", slopes["hessian_tv"], HESSIAN_TV_MIN_SLOPE),
        ):
            result.checks += 1
            if not slope >= minimum:
                result.failures += 1
                result.messages.append(f"{kind}: {name} slope {slope:.3f} < {minimum}")
    return result


# ------------------------------------------------------------------- toys
def soc3_toy() -> Tuple[ConicProgram, float]:
    """min t with (t, x1, x2) in SOC3, x1 = 3, x2 = 4; optimum 5."""
    A = sp.csr_matrix(np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]))
    return ConicProgram(A, np.array([3.0, 4.0]), np.array([1.0, 0.0, 0.0]), [soc(3)]), 5.0


def lp_toy() -> Tuple[ConicProgram, float]:
    """min x1 + 2 x2 + 3 x3 with x1 + x2 + x3 = 1, x2 - x3 = 0.5, x >= 0; optimum 1.5 at (0.5, 0.5, 0)."""
    A = sp.csr_matrix(np.array([[1.0, 1.0, 1.0], [0.0, 1.0, -1.0]]))
    return ConicProgram(A, np.array([1.0, 0.5]), np.array([1.0, 2.0, 3.0]), [nonneg(3)]), 1.5


def infeasible_toy() -> ConicProgram:
    """x1 + x2 = -1 with x >= 0."""
    A = sp.csr_matrix(np.array([[1.0, 1.0]]))
    return ConicProgram(A, np.array([-1.0]), np.array([1.0, 1.0]), [nonneg(2)])


def empty_row_toy() -> ConicProgram:
    """0 x = 1."""
    return ConicProgram(sp.csr_matrix((1, 2)), np.array([1.0]), np.array([1.0, 1.0]), [nonneg(2)])


def socp_random_suite(
    rng: np.random.Generator, count: int = RANDOM_INSTANCES, max_size: int = RANDOM_MAX_SIZE
) -> SuiteResult:
    result = SuiteResult("socp-random", 0, 0)
    sizes = np.linspace(10, max_size, count).round().astype(int)
    worst = 0.0
    for n in sizes:
        instance = random_certified_program(rng, int(n), density=min(0.3, 20.0 / n))
        solution = solve(instance.program)
        error = abs(solution.primal_objective - instance.objective) / max(1.0, abs(instance.objective))
        result.checks += 1
        if not (solution.is_optimal and error <= RANDOM_TOLERANCE):
            result.failures += 1
            result.messages.append(f"n={n}: status {solution.status_label}, objective error {error:.2e}")
        elif np.isfinite(error):
            worst = max(worst, error)
    result.details["max_objective_error"] = worst

    for name, (program, expected) in (("soc3", soc3_toy()), ("lp", lp_toy())):
        solution = solve(program)
        result.checks += 1
        if not (solution.is_optimal and abs(solution.primal_objective - expected) <= TOY_TOLERANCE):
            result.failures += 1
            result.messages.append(f"{name} toy: {solution.status_label}, objective {solution.primal_objective!r}")
    for name, program in (("infeasible", infeasible_toy()), ("empty-row", empty_row_toy())):
        solution = solve(program)
        result.checks += 1
        if solution.status is not SolveStatus.PRIMAL_INFEASIBLE:
            result.failures += 1
            result.messages.append(f"{name} toy: expected primal_infeasible, got {solution.status.value}")
    return result


# ----------------------------------------------------------------- driver
def _timed(name: str, func: Callable[[], SuiteResult]) -> SuiteResult:
    monitor = get_performance_monitor()
    operation = f"selftest.{name}"
    try:
        with monitor.measure(operation):
            result = func()
    except PlateLimitError as exc:
        result = SuiteResult(name, 1, 1, messages=[str(exc)])
    result.seconds = monitor.last(operation).seconds
    logger.info(
        f"{result.name}: {'passed' if result.passed else 'FAILED'} "
        f"({result.checks - result.failures}/{result.checks}) in {result.seconds:.1f}s"
    )
    for message in result.messages:
        logger.error(f"{result.name}: {message}")
    return result


SUITES = ("pi-oracle", "cone-block", "interpolation-rates", "socp-random")


def run_selftest(
    seed: int = 0,
    criteria: Optional[Sequence[YieldCriterion]] = None,
    suites: Sequence[str] = SUITES,
) -> SelftestReport:
    """Run the selected suites; every suite draws from its own seeded stream."""
    criteria = list(criteria) if criteria is not None else default_criteria()
    streams = np.random.SeedSequence(seed).spawn(len(SUITES))
    rng = {name: np.random.default_rng(stream) for name, stream in zip(SUITES, streams)}
    runners = {
        "pi-oracle": lambda: pi_oracle_suite(rng["pi-oracle"], criteria),
        "cone-block": lambda: cone_block_suite(rng["cone-block"], criteria),
        "interpolation-rates": interpolation_rate_suite,
        "socp-random": lambda: socp_random_suite(rng["socp-random"]),
    }
    results = []
    for name in suites:
        if name not in runners:
            raise InvalidArgumentError(f"unknown self-test suite {name!r}, expected one of {list(SUITES)}")
        results.append(_timed(name, runners[name]))
    coercivity = {criterion.kind: coercivity_bounds(criterion, SAMPLE_POINT) for criterion in criteria}
    for kind, bounds in coercivity.items():
        logger.info(f"{kind}: alpha = {bounds.alpha:.6g}, beta = {bounds.beta:.6g}")
    return SelftestReport(results, coercivity, seed)
