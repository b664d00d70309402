"""Primal-dual interior-point solver for linear programs over cone products.

Solves

    minimise c^T x  subject to  A x = b,  x in K

with K a product of free blocks, nonnegative orthants and second-order
cones, together with the dual

    maximise b^T y  subject to  A^T y + z = c,  z in K*.

The iteration runs on the homogeneous self-dual embedding with
Nesterov-Todd scaling and Mehrotra predictor-corrector steps, so
infeasible and unbounded programs end with a certificate rather than a
diverging iterate.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from platelimit.cones import Cone, ConeKind, ConeLayout, NumericalTrouble, nonneg, nt_scaling, soc
from platelimit.constants import (
    CONIC_DUMP_HEADER,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL_FEAS,
    DEFAULT_TOL_GAP,
    KKT_REGULARIZATION,
    STEP_FRACTION,
)
from platelimit.exceptions import InvalidArgumentError
from platelimit.kkt import KKTFactorizationError, KKTSolver

logger = logging.getLogger(__name__)


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    PRIMAL_INFEASIBLE = "primal_infeasible"
    DUAL_INFEASIBLE = "dual_infeasible"
    MAX_ITER = "max_iter"
    NUMERICAL = "numerical"


@dataclass(frozen=True)
class SolverSettings:
    tol_feas: float = DEFAULT_TOL_FEAS
    tol_gap: float = DEFAULT_TOL_GAP
    max_iter: int = DEFAULT_MAX_ITER
    regularization: float = KKT_REGULARIZATION
    step_fraction: float = STEP_FRACTION
    stagnation_window: int = 5
    stagnation_factor: float = 10.0
    equilibrate: bool = True

    def __post_init__(self):
        if self.tol_feas <= 0 or self.tol_gap <= 0:
            raise InvalidArgumentError("solver tolerances must be positive")
        if self.max_iter < 1:
            raise InvalidArgumentError(f"max_iter must be at least 1, got {self.max_iter}")
        if not 0 < self.step_fraction < 1:
            raise InvalidArgumentError(f"step_fraction must lie in (0, 1), got {self.step_fraction}")


@dataclass(frozen=True)
class Residuals:
    primal: float
    dual: float
    gap: float

    def within(self, tol_feas: float, tol_gap: float) -> bool:
        return self.primal <= tol_feas and self.dual <= tol_feas and self.gap <= tol_gap


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    primal_objective: float
    dual_objective: float
    gap: float
    r_primal: float
    r_dual: float
    tau: float
    kappa: float
    sigma: float
    step: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ConicProgram:
    """min c^T x s.t. A x = b, x in K; ``cones`` partitions the columns in order."""

    A: sp.csr_matrix
    b: np.ndarray
    c: np.ndarray
    cones: List[Cone]

    def __post_init__(self):
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.A.sum_duplicates()
        self.b = np.asarray(self.b, dtype=float).ravel()
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.cones = list(self.cones)

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def n(self) -> int:
        return self.A.shape[1]

    def empty_rows(self) -> np.ndarray:
        stored = np.concatenate(([0], np.cumsum(self.A.data != 0)))
        return np.flatnonzero(np.diff(stored[self.A.indptr]) == 0)

    def validate(self) -> List[str]:
        """Raise on structural errors; return warnings (empty rows) otherwise."""
        if self.b.shape != (self.m,):
            raise InvalidArgumentError(f"b has length {len(self.b)}, A has {self.m} rows")
        if self.c.shape != (self.n,):
            raise InvalidArgumentError(f"c has length {len(self.c)}, A has {self.n} columns")
        total = sum(cone.dim for cone in self.cones)
        if total != self.n:
            raise InvalidArgumentError(f"cone dimensions sum to {total}, A has {self.n} columns")
        for name, values in (("A", self.A.data), ("b", self.b), ("c", self.c)):
            if not np.all(np.isfinite(values)):
                raise InvalidArgumentError(f"{name} contains non-finite entries")
        return [f"row {i} of A is empty" for i in self.empty_rows()]

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x)


@dataclass
class ConicSolution:
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    status: SolveStatus
    residuals: Residuals
    iterations: int
    primal_objective: float
    dual_objective: float
    reduced_accuracy: bool = False
    trace: List[IterationRecord] = field(default_factory=list)

    @property
    def is_optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    @property
    def status_label(self) -> str:
        if self.is_optimal and self.reduced_accuracy:
            return "optimal (reduced-accuracy)"
        return self.status.value


def residuals(program: ConicProgram, x: np.ndarray, y: np.ndarray, z: np.ndarray) -> Residuals:
    """Relative primal, dual and gap residuals of a candidate point."""
    return _relative_residuals(program.A, program.b, program.c, x, y, z)


def _relative_residuals(A, b: np.ndarray, c: np.ndarray, x: np.ndarray, y: np.ndarray, z: np.ndarray) -> Residuals:
    r_primal = np.linalg.norm(A @ x - b) / (1.0 + np.linalg.norm(b))
    r_dual = np.linalg.norm(A.T @ y + z - c) / (1.0 + np.linalg.norm(c))
    pcost, dcost = float(c @ x), float(b @ y)
    gap = abs(pcost - dcost) / (1.0 + abs(pcost) + abs(dcost))
    return Residuals(float(r_primal), float(r_dual), float(gap))


class _Direction:
    __slots__ = ("dx", "dy", "dz", "dtau", "dkappa")

    def __init__(self, dx, dy, dz, dtau, dkappa):
        self.dx, self.dy, self.dz, self.dtau, self.dkappa = dx, dy, dz, dtau, dkappa


class InteriorPointSolver:
    """Homogeneous self-dual interior-point iteration for one program."""

    def __init__(self, program: ConicProgram, settings: Optional[SolverSettings] = None):
        self.program = program
        self.settings = settings or SolverSettings()
        self.logger = logging.getLogger(__name__)

    # ------------------------------------------------------------- presolve
    def _presolve(self) -> Optional[ConicSolution]:
        program = self.program
        empty = program.empty_rows()
        inconsistent = empty[program.b[empty] != 0.0]
        if inconsistent.size:
            i = int(inconsistent[0])
            y = np.zeros(program.m)
            y[i] = np.sign(program.b[i])
            z = np.zeros(program.n)
            self.logger.info(f"Row {i} of A is empty with b[{i}] = {program.b[i]!r}: primal infeasible")
            return ConicSolution(
                np.zeros(program.n), y, z, SolveStatus.PRIMAL_INFEASIBLE,
                residuals(program, np.zeros(program.n), y, z), 0, np.nan, float(program.b @ y),
            )
        keep = np.ones(program.m, dtype=bool)
        keep[empty] = False
        self.rows = np.flatnonzero(keep)
        A = program.A[self.rows]
        b = program.b[self.rows]
        if self.settings.equilibrate and len(self.rows):
            scale = 1.0 / np.abs(A).max(axis=1).toarray().ravel()
        else:
            scale = np.ones(len(self.rows))
        self.row_scale = scale
        self.A_orig = A
        self.b_orig = b
        self.A = sp.diags(scale) @ A
        self.A = self.A.tocsr()
        self.b = scale * b
        return None

    def _expand_y(self, y_reduced: np.ndarray) -> np.ndarray:
        y = np.zeros(self.program.m)
        y[self.rows] = y_reduced
        return y

    # ----------------------------------------------------------------- solve
    def solve(self) -> ConicSolution:
        program = self.program
        program.validate()
        early = self._presolve()
        if early is not None:
            return early

        settings = self.settings
        layout = ConeLayout(program.cones)
        self.layout = layout
        A, b, c = self.A, self.b, program.c
        n, m = program.n, len(self.b)
        e = layout.identity()
        nu = layout.degree

        x = e.copy()
        z = e.copy()
        y = np.zeros(m)
        tau, kappa = 1.0, 1.0
        kkt = KKTSolver(A, layout, settings.regularization)

        trace: List[IterationRecord] = []
        status = SolveStatus.MAX_ITER
        reduced = False
        near_count = 0
        sigma, step = 0.0, 0.0
        iteration = 0
        certificate = None

        for iteration in range(settings.max_iter + 1):
            r1 = A @ x - b * tau
            r2 = A.T @ y + z - c * tau
            r3 = kappa + c @ x - b @ y

            x_hat, z_hat = x / tau, z / tau
            y_hat = self.row_scale * y / tau
            res = _relative_residuals(self.A_orig, self.b_orig, c, x_hat, y_hat, z_hat)
            pcost, dcost = float(c @ x_hat), float(self.b_orig @ y_hat)
            trace.append(
                IterationRecord(iteration, pcost, dcost, res.gap, res.primal, res.dual, tau, kappa, sigma, step)
            )
            self.logger.debug(
                f"iter {iteration:3d}  pcost {pcost: .9e}  dcost {dcost: .9e}  "
                f"gap {res.gap:.2e}  pres {res.primal:.2e}  dres {res.dual:.2e}  "
                f"tau {tau:.2e}  kappa {kappa:.2e}  step {step:.3f}"
            )

            if res.within(settings.tol_feas, settings.tol_gap):
                status = SolveStatus.OPTIMAL
                break
            certificate = self._infeasibility(x, y, z, tau, kappa)
            if certificate is not None:
                status = certificate
                break
            loose = res.within(
                settings.stagnation_factor * settings.tol_feas,
                settings.stagnation_factor * settings.tol_gap,
            )
            near_count = near_count + 1 if loose else 0
            if near_count >= settings.stagnation_window:
                status, reduced = SolveStatus.OPTIMAL, True
                self.logger.warning(
                    f"Interior-point progress stalled within {settings.stagnation_factor:g}x tolerance; "
                    "accepting a reduced-accuracy optimum"
                )
                break
            if iteration == settings.max_iter:
                break

            mu = (layout.inner(x, z) + tau * kappa) / (nu + 1)
            try:
                scaling = nt_scaling(layout, x, z)
                kkt.factor(scaling)
                x1, w1 = kkt.solve(-c, b)
                lam = scaling.lam

                def direction(eta, rc, rtau):
                    q = layout.jordan_divide(lam, rc)
                    q[layout.free] = 0.0
                    winv_q = scaling.apply_winv(q)
                    x2, w2 = kkt.solve(eta * r2 + winv_q, -eta * r1)
                    denominator = c @ x1 + b @ w1 - kappa / tau
                    dtau = (-eta * r3 - c @ x2 - b @ w2 - rtau / tau) / denominator
                    dx = x2 + dtau * x1
                    dy = -(w2 + dtau * w1)
                    dz = scaling.apply_winv(q - scaling.apply_winv(dx))
                    dkappa = (rtau - kappa * dtau) / tau
                    return _Direction(dx, dy, dz, dtau, dkappa)

                lam_sq = layout.jordan_product(lam, lam)
                affine = direction(1.0, -lam_sq, -tau * kappa)
                alpha_aff = min(1.0, self._max_step(x, z, tau, kappa, affine))
                sigma = (1.0 - alpha_aff) ** 3

                correction = layout.jordan_product(
                    scaling.apply_winv(affine.dx), scaling.apply_w(affine.dz)
                )
                rc = -lam_sq + sigma * mu * e - correction
                rtau = sigma * mu - tau * kappa - affine.dtau * affine.dkappa
                d = direction(1.0 - sigma, rc, rtau)
                step = min(1.0, settings.step_fraction * self._max_step(x, z, tau, kappa, d))
            except (NumericalTrouble, KKTFactorizationError, FloatingPointError) as exc:
                self.logger.warning(f"Interior-point iteration {iteration} failed: {exc}")
                status, reduced = self._fallback(res)
                break
            if not np.isfinite(step) or step < 1e-10:
                self.logger.warning(f"Interior-point step collapsed at iteration {iteration}")
                status, reduced = self._fallback(res)
                break

            x = x + step * d.dx
            y = y + step * d.dy
            z = z + step * d.dz
            tau = tau + step * d.dtau
            kappa = kappa + step * d.dkappa

        return self._finish(x, y, z, tau, kappa, status, reduced, iteration, trace)

    def _max_step(self, x, z, tau, kappa, d: _Direction) -> float:
        alpha = min(self.layout.max_step(x, d.dx), self.layout.max_step(z, d.dz))
        if d.dtau < 0:
            alpha = min(alpha, -tau / d.dtau)
        if d.dkappa < 0:
            alpha = min(alpha, -kappa / d.dkappa)
        return alpha

    def _infeasibility(self, x, y, z, tau, kappa) -> Optional[SolveStatus]:
        if kappa <= tau:
            return None
        tol = self.settings.tol_feas
        y_orig = self.row_scale * y
        bty = float(self.b_orig @ y_orig)
        if bty > 0 and np.linalg.norm(self.A_orig.T @ y_orig + z) <= tol * bty:
            return SolveStatus.PRIMAL_INFEASIBLE
        ctx = float(self.program.c @ x)
        if ctx < 0 and np.linalg.norm(self.A_orig @ x) <= tol * (-ctx):
            return SolveStatus.DUAL_INFEASIBLE
        return None

    def _fallback(self, res: Residuals):
        s = self.settings
        if res.within(s.stagnation_factor * s.tol_feas, s.stagnation_factor * s.tol_gap):
            return SolveStatus.OPTIMAL, True
        return SolveStatus.NUMERICAL, False

    def _finish(self, x, y, z, tau, kappa, status, reduced, iteration, trace) -> ConicSolution:
        program = self.program
        y_orig = self.row_scale * y
        if status is SolveStatus.PRIMAL_INFEASIBLE:
            scale = float(self.b_orig @ y_orig)
            x_out, y_out, z_out = np.zeros(program.n), y_orig / scale, z / scale
        elif status is SolveStatus.DUAL_INFEASIBLE:
            scale = -float(program.c @ x)
            x_out, y_out, z_out = x / scale, np.zeros(len(y)), np.zeros(program.n)
        else:
            x_out, y_out, z_out = x / tau, y_orig / tau, z / tau
        y_full = self._expand_y(y_out)
        res = residuals(program, x_out, y_full, z_out)
        solution = ConicSolution(
            x_out,
            y_full,
            z_out,
            status,
            res,
            iteration,
            float(program.c @ x_out),
            float(program.b @ y_full),
            reduced,
            trace,
        )
        self.logger.debug(
            f"Conic solve finished: {solution.status_label} after {iteration} iterations, "
            f"objective {solution.primal_objective:.10g}"
        )
        return solution


def solve(program: ConicProgram, settings: Optional[SolverSettings] = None) -> ConicSolution:
    """Solve ``program``; numerical trouble is reported through the status, never raised."""
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return InteriorPointSolver(program, settings).solve()


# ------------------------------------------------------------ ASCII dumps
def write_conic(program: ConicProgram, path: Union[str, Path]) -> Path:
    """Write the documented ASCII dump: header, sizes, cones, b, c, COO triplets."""
    path = Path(path)
    A = program.A.tocoo()
    order = np.lexsort((A.col, A.row))
    lines = [
        CONIC_DUMP_HEADER,
        f"dims {program.m} {program.n} {A.nnz}",
        f"cones {len(program.cones)}",
    ]
    lines.extend(f"{cone.kind.value} {cone.dim}" for cone in program.cones)
    lines.append("b")
    lines.extend(f"{v:.17g}" for v in program.b)
    lines.append("c")
    lines.extend(f"{v:.17g}" for v in program.c)
    lines.append("A")
    lines.extend(f"{A.row[k]} {A.col[k]} {A.data[k]:.17g}" for k in order)
    lines.append("end")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_conic(path: Union[str, Path]) -> ConicProgram:
    """Read a dump written by :func:`write_conic`."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    cursor = 0

    def take(expected: Optional[str] = None) -> List[str]:
        nonlocal cursor
        if cursor >= len(lines):
            raise InvalidArgumentError(f"{path}:{cursor + 1}: unexpected end of conic dump")
        tokens = lines[cursor].split()
        cursor += 1
        if expected is not None and (not tokens or tokens[0] != expected):
            raise InvalidArgumentError(f"{path}:{cursor}: expected {expected!r}")
        return tokens

    try:
        if lines[:1] != [CONIC_DUMP_HEADER]:
            raise InvalidArgumentError(f"{path}:1: missing header {CONIC_DUMP_HEADER!r}")
        cursor = 1
        _, m, n, nnz = take("dims")
        m, n, nnz = int(m), int(n), int(nnz)
        count = int(take("cones")[1])
        cones = []
        for _ in range(count):
            kind, dim = take()
            cones.append(Cone(ConeKind(kind), int(dim)))
        take("b")
        b = np.array([float(take()[0]) for _ in range(m)])
        take("c")
        c = np.array([float(take()[0]) for _ in range(n)])
        take("A")
        triplets = [take() for _ in range(nnz)]
        take("end")
    except (ValueError, IndexError) as exc:
        raise InvalidArgumentError(f"{path}:{cursor}: malformed conic dump ({exc})") from exc
    rows = np.array([int(t[0]) for t in triplets], dtype=np.int64)
    cols = np.array([int(t[1]) for t in triplets], dtype=np.int64)
    data = np.array([float(t[2]) for t in triplets])
    A = sp.csr_matrix((data, (rows, cols)), shape=(m, n))
    return ConicProgram(A, b, c, cones)


# ------------------------------------------------------ certified instances
@dataclass
class CertifiedInstance:
    program: ConicProgram
    objective: float
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray


def random_certified_program(
    rng: np.random.Generator,
    n: int,
    m: Optional[int] = None,
    soc_fraction: float = 0.6,
    density: float = 0.3,
) -> CertifiedInstance:
    """Random feasible program with a known optimum.

    A strictly complementary pair (x*, z*) is sampled block by block, then
    b = A x* and c = A^T y* + z*, so c^T x* = b^T y* is the optimal value.
    """
    if n < 2:
        raise InvalidArgumentError(f"need at least 2 variables, got {n}")
    m = m if m is not None else max(1, n // 2)
    cones: List[Cone] = []
    remaining = n
    while remaining > 0:
        if remaining >= 3 and rng.random() < soc_fraction:
            dim = int(rng.integers(3, min(remaining, 10) + 1))
            cones.append(soc(dim))
        else:
            dim = int(rng.integers(1, min(remaining, 5) + 1))
            cones.append(nonneg(dim))
        remaining -= dim

    x_star = np.zeros(n)
    z_star = np.zeros(n)
    offset = 0
    for cone in cones:
        block = slice(offset, offset + cone.dim)
        if cone.kind is ConeKind.NONNEG:
            primal_side = rng.random(cone.dim) < 0.5
            values = rng.uniform(0.5, 2.0, cone.dim)
            x_star[block] = np.where(primal_side, values, 0.0)
            z_star[block] = np.where(primal_side, 0.0, values)
        else:
            choice = rng.integers(3)
            u = rng.standard_normal(cone.dim - 1)
            u /= np.linalg.norm(u)
            a, s = rng.uniform(0.5, 2.0, 2)
            if choice == 0:
                x_star[block] = a * np.concatenate(([1.0], u))
                z_star[block] = s * np.concatenate(([1.0], -u))
            elif choice == 1:
                x_star[block] = np.concatenate(([a * 1.5], 0.5 * a * u))
            else:
                z_star[block] = np.concatenate(([s * 1.5], 0.5 * s * u))
        offset += cone.dim

    A = sp.random(m, n, density=density, random_state=rng, data_rvs=rng.standard_normal, format="lil")
    for i in range(m):
        A[i, int(rng.integers(n))] = rng.standard_normal() + 2.0
    A = A.tocsr()
    y_star = rng.standard_normal(m)
    b = A @ x_star
    c = A.T @ y_star + z_star
    program = ConicProgram(A, b, c, cones)
    return CertifiedInstance(program, float(c @ x_star), x_star, y_star, z_star)


def block_diagonal(programs: Sequence[ConicProgram]) -> ConicProgram:
    """Stack independent programs into one (objectives add up)."""
    A = sp.block_diag([p.A for p in programs], format="csr")
    b = np.concatenate([p.b for p in programs])
    c = np.concatenate([p.c for p in programs])
    cones = [cone for p in programs for cone in p.cones]
    return ConicProgram(A, b, c, cones)
