"""Isotropic plate yield criteria through their support functions.

A curvature tensor kappa is passed as the triple (k11, k22, k12). For each
criterion this module provides

* ``pi``: the dissipation density pi(x, kappa) = sup {M : kappa, M in G(x)},
* ``pi_edge``: the same for the rank-one tensor s nu (x) nu of a hinge line,
* a conic epigraph block encoding t >= pi(x, kappa) with kappa entering
  linearly, used by the assembler,
* sampled strength-domain boundaries for the brute-force oracle.

Strengths are :class:`StrengthField` objects, constant or given as an
expression over (x1, x2), evaluated pointwise.
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

from platelimit.cones import Cone, free, nonneg, soc
from platelimit.conic import ConicProgram, SolverSettings, solve
from platelimit.constants import JOHANSEN, TRESCA, VON_MISES
from platelimit.exceptions import InvalidArgumentError, SolverFailure
from platelimit.expression import Expression, evaluate_checked, parse_expression

logger = logging.getLogger(__name__)

SQRT3 = np.sqrt(3.0)
GOLDEN_CONJUGATE = (np.sqrt(5.0) - 1.0) / 2.0
PLASTIC_NUMBER = 1.32471795724474602596
COERCIVITY_DIRECTIONS = 64


# ------------------------------------------------------------ strength fields
class StrengthField:
    """A positive strength M0(x), constant or an expression over x1, x2."""

    def __init__(self, value: Union[float, str, Expression]):
        if isinstance(value, Expression):
            self.constant: Optional[float] = None
            self.expression: Optional[Expression] = value
        elif isinstance(value, str):
            self.constant = None
            self.expression = parse_expression(value)
        else:
            if isinstance(value, bool) or not np.isfinite(value) or value <= 0:
                raise InvalidArgumentError(f"strength must be a positive number, got {value!r}")
            self.constant = float(value)
            self.expression = None

    @classmethod
    def coerce(cls, value: Union["StrengthField", float, str]) -> "StrengthField":
        return value if isinstance(value, StrengthField) else cls(value)

    @property
    def is_constant(self) -> bool:
        return self.constant is not None

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Strength at (N, 2) points; nonpositive values are rejected."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.constant is not None:
            return np.full(len(points), self.constant)
        values = evaluate_checked(self.expression, points, "strength")
        bad = np.flatnonzero(values <= 0)
        if bad.size:
            x1, x2 = points[bad[0]]
            raise InvalidArgumentError(
                f"strength {self.expression.text!r} is {values[bad[0]]:.6g} <= 0 "
                f"at (x1={x1:.6g}, x2={x2:.6g})"
            )
        return values

    def scaled(self, factor: float) -> "StrengthField":
        if factor <= 0:
            raise InvalidArgumentError(f"strength scale factor must be positive, got {factor}")
        if self.constant is not None:
            return StrengthField(self.constant * factor)
        return StrengthField(f"{factor!r}*({self.expression.text})")

    def to_config(self) -> Union[float, str]:
        return self.constant if self.constant is not None else self.expression.text

    def __eq__(self, other) -> bool:
        return isinstance(other, StrengthField) and self.to_config() == other.to_config()

    def __hash__(self) -> int:
        return hash(self.to_config())

    def __repr__(self) -> str:
        return f"StrengthField({self.to_config()!r})"


# ---------------------------------------------------------------- cone blocks
@dataclass(frozen=True)
class ConeBlock:
    """Epigraph template instantiated at N points.

    Every instance owns the local columns ``[inputs, t, aux]``; inputs and t
    are free, ``aux_cones`` partitions the auxiliaries. Each row of
    ``coefficients[i]`` is a homogeneous equality over those columns.
    """

    name: str
    n_inputs: int
    aux_cones: Tuple[Cone, ...]
    coefficients: np.ndarray  # (N, n_rows, n_inputs + 1 + n_aux)

    @property
    def n_instances(self) -> int:
        return self.coefficients.shape[0]

    @property
    def n_rows(self) -> int:
        return self.coefficients.shape[1]

    @property
    def n_aux(self) -> int:
        return sum(cone.dim for cone in self.aux_cones)

    @property
    def n_columns(self) -> int:
        return self.n_inputs + 1 + self.n_aux

    @property
    def t_column(self) -> int:
        return self.n_inputs

    def instance_cones(self) -> List[Cone]:
        return [free(self.n_inputs + 1), *self.aux_cones]

    def subset(self, index: Union[slice, np.ndarray]) -> "ConeBlock":
        return ConeBlock(self.name, self.n_inputs, self.aux_cones, self.coefficients[index])

    def to_sparse(self) -> sp.csr_matrix:
        """Block-diagonal (N n_rows, N n_columns) matrix, instance after instance."""
        n, r, c = self.coefficients.shape
        inst, row, col = np.nonzero(self.coefficients)
        return sp.csr_matrix(
            (self.coefficients[inst, row, col], (inst * r + row, inst * c + col)),
            shape=(n * r, n * c),
        )


def _block_array(n: int, rows: int, cols: int) -> np.ndarray:
    return np.zeros((n, rows, cols))


# ------------------------------------------------------------------ criteria
class CoercivityBounds(NamedTuple):
    alpha: float
    beta: float


def principal_curvatures(kappa: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Mean m and radius r of the eigenvalues m +- r of each (k11, k22, k12)."""
    kappa = np.asarray(kappa, dtype=float)
    m = 0.5 * (kappa[..., 0] + kappa[..., 1])
    r = np.hypot(0.5 * (kappa[..., 0] - kappa[..., 1]), kappa[..., 2])
    return m, r


def frobenius_norm(kappa: np.ndarray) -> np.ndarray:
    kappa = np.asarray(kappa, dtype=float)
    return np.sqrt(kappa[..., 0] ** 2 + kappa[..., 1] ** 2 + 2.0 * kappa[..., 2] ** 2)


class YieldCriterion(ABC):
    """Isotropic strength criterion with one or two strength fields."""

    kind: str = ""
    field_names: Tuple[str, ...] = ()

    def __init__(self, *fields: Union[StrengthField, float, str]):
        if len(fields) != len(self.field_names):
            raise InvalidArgumentError(
                f"{self.kind} needs strengths {list(self.field_names)}, got {len(fields)} values"
            )
        self.fields: Tuple[StrengthField, ...] = tuple(StrengthField.coerce(f) for f in fields)

    # ----------------------------------------------------------- strengths
    def strengths(self, points: np.ndarray) -> np.ndarray:
        """(N, n_fields) strengths, validated positive."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        return np.column_stack([f.evaluate(points) for f in self.fields])

    @property
    def is_homogeneous(self) -> bool:
        return all(f.is_constant for f in self.fields)

    def reference_strength(self) -> float:
        """Constant of the first field, or 1 for expression fields."""
        first = self.fields[0]
        return first.constant if first.is_constant else 1.0

    def scaled(self, factor: float) -> "YieldCriterion":
        return type(self)(*(f.scaled(factor) for f in self.fields))

    def to_config(self) -> Dict[str, object]:
        config: Dict[str, object] = {"kind": self.kind}
        config.update({name: f.to_config() for name, f in zip(self.field_names, self.fields)})
        return config

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self.fields == other.fields

    def __hash__(self) -> int:
        return hash((self.kind, self.fields))

    def __repr__(self) -> str:
        args = ", ".join(f"{n}={f.to_config()!r}" for n, f in zip(self.field_names, self.fields))
        return f"{type(self).__name__}({args})"

    # ------------------------------------------------------ support function
    def pi(self, points: np.ndarray, kappa: np.ndarray) -> np.ndarray:
        kappa = np.atleast_2d(np.asarray(kappa, dtype=float))
        return self.support(kappa, self.strengths(points))

    def pi_edge(self, points: np.ndarray, s: np.ndarray) -> np.ndarray:
        return self.edge_support(np.atleast_1d(np.asarray(s, dtype=float)), self.strengths(points))

    @abstractmethod
    def support(self, kappa: np.ndarray, strengths: np.ndarray) -> np.ndarray:
        """pi for (N, 3) curvatures and (N, n_fields) strengths."""

    @abstractmethod
    def edge_support(self, s: np.ndarray, strengths: np.ndarray) -> np.ndarray:
        """pi(s nu (x) nu) for (N,) jumps."""

    # ------------------------------------------------------------ conic form
    def cone_block(self, points: np.ndarray) -> ConeBlock:
        return self._cone_block(self.strengths(points))

    def edge_cone_block(self, points: np.ndarray) -> ConeBlock:
        return self._edge_cone_block(self.strengths(points))

    @abstractmethod
    def _cone_block(self, strengths: np.ndarray) -> ConeBlock:
        ...

    @abstractmethod
    def _edge_cone_block(self, strengths: np.ndarray) -> ConeBlock:
        ...

    # --------------------------------------------------------------- oracle
    @abstractmethod
    def boundary_samples(self, strengths: np.ndarray, n: int) -> np.ndarray:
        """(n', 3) moment tensors (M11, M22, M12) on the boundary of G at one point."""


def _rank_one_cone_block(name: str, factor: np.ndarray) -> ConeBlock:
    """t = factor |s| through (r, s') in SOC2 with s' = s and t = factor r."""
    n = len(factor)
    coefficients = _block_array(n, 2, 4)  # [s, t, r, s']
    coefficients[:, 0, 3] = 1.0
    coefficients[:, 0, 0] = -1.0
    coefficients[:, 1, 1] = 1.0
    coefficients[:, 1, 2] = -factor
    return ConeBlock(name, 1, (soc(2),), coefficients)


def _rotated_moments(theta: np.ndarray, m1: np.ndarray, m2: np.ndarray) -> np.ndarray:
    """(M11, M22, M12) of R(theta) diag(m1, m2) R(theta)^T."""
    c, s = np.cos(theta), np.sin(theta)
    return np.column_stack((m1 * c * c + m2 * s * s, m1 * s * s + m2 * c * c, (m1 - m2) * c * s))


def _polygon_samples(vertices: np.ndarray, n: int) -> np.ndarray:
    n_theta = max(1, n // len(vertices))
    theta = np.pi * np.modf(np.arange(n_theta) * GOLDEN_CONJUGATE)[0]
    theta = np.repeat(theta, len(vertices))
    m1 = np.tile(vertices[:, 0], n_theta)
    m2 = np.tile(vertices[:, 1], n_theta)
    return _rotated_moments(theta, m1, m2)


class VonMises(YieldCriterion):
    """G = {M : M11^2 + M22^2 - M11 M22 + 3 M12^2 <= M0^2}."""

    kind = VON_MISES
    field_names = ("m0",)

    def support(self, kappa, strengths):
        k11, k22, k12 = kappa[:, 0], kappa[:, 1], kappa[:, 2]
        quadratic = k11 * k11 + k22 * k22 + k11 * k22 + k12 * k12
        return 2.0 * strengths[:, 0] / SQRT3 * np.sqrt(np.maximum(quadratic, 0.0))

    def edge_support(self, s, strengths):
        return 2.0 * strengths[:, 0] * np.abs(s) / SQRT3

    def _cone_block(self, strengths):
        # columns [k11, k22, k12, t, tau, w1, w2, w3]; (tau, w) in SOC4, w = W kappa
        coefficients = _block_array(len(strengths), 4, 8)
        coefficients[:, 0, [5, 0, 1]] = (1.0, -1.0, -0.5)
        coefficients[:, 1, [6, 1]] = (1.0, -SQRT3 / 2.0)
        coefficients[:, 2, [7, 2]] = (1.0, -1.0)
        coefficients[:, 3, 3] = 1.0
        coefficients[:, 3, 4] = -2.0 * strengths[:, 0] / SQRT3
        return ConeBlock(self.kind, 3, (soc(4),), coefficients)

    def _edge_cone_block(self, strengths):
        return _rank_one_cone_block(f"{self.kind}_edge", 2.0 * strengths[:, 0] / SQRT3)

    def boundary_samples(self, strengths, n):
        m0 = float(strengths[0])
        j = np.arange(n)
        theta = np.pi * np.modf(0.5 + j / PLASTIC_NUMBER)[0]
        phi = 2.0 * np.pi * np.modf(0.5 + j / PLASTIC_NUMBER**2)[0]
        m1 = m0 * (np.cos(phi) + np.sin(phi) / SQRT3)
        m2 = m0 * (np.cos(phi) - np.sin(phi) / SQRT3)
        return _rotated_moments(theta, m1, m2)


class Tresca(YieldCriterion):
    """max(|M_I|, |M_II|, |M_I - M_II|) <= M0 on the principal moments."""

    kind = TRESCA
    field_names = ("m0",)

    def support(self, kappa, strengths):
        m, r = principal_curvatures(kappa)
        return strengths[:, 0] * np.maximum(np.abs(m) + r, 2.0 * np.abs(m))

    def edge_support(self, s, strengths):
        return strengths[:, 0] * np.abs(s)

    def _cone_block(self, strengths):
        # columns [k11, k22, k12, t, v, a1, a2, b1, b2, r, d, k]
        # v >= |m| via slacks a, t >= M0 (v + r) and t >= 2 M0 v via slacks b,
        # (r, d, k) in SOC3 with d = (k11 - k22) / 2 and k = k12
        m0 = strengths[:, 0]
        coefficients = _block_array(len(strengths), 6, 12)
        coefficients[:, 0, [4, 0, 1, 5]] = (1.0, -0.5, -0.5, -1.0)
        coefficients[:, 1, [4, 0, 1, 6]] = (1.0, 0.5, 0.5, -1.0)
        coefficients[:, 2, [3, 7]] = (1.0, -1.0)
        coefficients[:, 2, 4] = -m0
        coefficients[:, 2, 9] = -m0
        coefficients[:, 3, [3, 8]] = (1.0, -1.0)
        coefficients[:, 3, 4] = -2.0 * m0
        coefficients[:, 4, [10, 0, 1]] = (1.0, -0.5, 0.5)
        coefficients[:, 5, [11, 2]] = (1.0, -1.0)
        return ConeBlock(self.kind, 3, (nonneg(5), soc(3)), coefficients)

    def _edge_cone_block(self, strengths):
        return _rank_one_cone_block(f"{self.kind}_edge", strengths[:, 0].copy())

    def boundary_samples(self, strengths, n):
        m0 = float(strengths[0])
        hexagon = m0 * np.array([[1, 0], [1, 1], [0, 1], [-1, 0], [-1, -1], [0, -1]], dtype=float)
        return _polygon_samples(hexagon, n)


class Johansen(YieldCriterion):
    """Square criterion -M0_minus <= M_I, M_II <= M0_plus."""

    kind = JOHANSEN
    field_names = ("m0_plus", "m0_minus")

    def support(self, kappa, strengths):
        m, r = principal_curvatures(kappa)
        k1, k2 = m + r, m - r
        positive = np.maximum(k1, 0.0) + np.maximum(k2, 0.0)
        negative = np.maximum(-k1, 0.0) + np.maximum(-k2, 0.0)
        return strengths[:, 0] * positive + strengths[:, 1] * negative

    def edge_support(self, s, strengths):
        return strengths[:, 0] * np.maximum(s, 0.0) + strengths[:, 1] * np.maximum(-s, 0.0)

    def _cone_block(self, strengths):
        # kappa = P - N with P = [[(aP + bP)/2, cP/2], [cP/2, (aP - bP)/2]] and
        # (aP, bP, cP) in SOC3 <=> P psd with trace aP; N likewise
        # columns [k11, k22, k12, t, aP, bP, cP, aN, bN, cN]
        coefficients = _block_array(len(strengths), 4, 10)
        coefficients[:, 0, [0, 4, 5, 7, 8]] = (1.0, -0.5, -0.5, 0.5, 0.5)
        coefficients[:, 1, [1, 4, 5, 7, 8]] = (1.0, -0.5, 0.5, 0.5, -0.5)
        coefficients[:, 2, [2, 6, 9]] = (1.0, -0.5, 0.5)
        coefficients[:, 3, 3] = 1.0
        coefficients[:, 3, 4] = -strengths[:, 0]
        coefficients[:, 3, 7] = -strengths[:, 1]
        return ConeBlock(self.kind, 3, (soc(3), soc(3)), coefficients)

    def _edge_cone_block(self, strengths):
        # columns [s, t, a, b]: s = a - b, t = M+ a + M- b
        coefficients = _block_array(len(strengths), 2, 4)
        coefficients[:, 0, [0, 2, 3]] = (1.0, -1.0, 1.0)
        coefficients[:, 1, 1] = 1.0
        coefficients[:, 1, 2] = -strengths[:, 0]
        coefficients[:, 1, 3] = -strengths[:, 1]
        return ConeBlock(f"{self.kind}_edge", 1, (nonneg(2),), coefficients)

    def boundary_samples(self, strengths, n):
        plus, minus = float(strengths[0]), float(strengths[1])
        box = np.array([[plus, plus], [plus, -minus], [-minus, plus], [-minus, -minus]])
        return _polygon_samples(box, n)


CRITERIA = {VON_MISES: VonMises, TRESCA: Tresca, JOHANSEN: Johansen}


def make_criterion(kind: str, **strengths: Union[float, str, StrengthField]) -> YieldCriterion:
    """Build a criterion from its kind and named strength fields.

    >>> make_criterion("johansen", m0_plus=2.0, m0_minus=1.0)
    Johansen(m0_plus=2.0, m0_minus=1.0)
    """
    try:
        cls = CRITERIA[kind]
    except KeyError:
        raise InvalidArgumentError(
            f"unknown criterion {kind!r}, expected one of {sorted(CRITERIA)}"
        ) from None
    unknown = set(strengths) - set(cls.field_names)
    missing = [name for name in cls.field_names if name not in strengths]
    if unknown or missing:
        raise InvalidArgumentError(
            f"{kind} takes strengths {list(cls.field_names)}; "
            f"missing {missing}, unexpected {sorted(unknown)}"
        )
    return cls(*(strengths[name] for name in cls.field_names))


# ------------------------------------------------------- module-level API
def _single_or_many(points, kappa) -> Tuple[np.ndarray, np.ndarray, bool]:
    points = np.asarray(points, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    scalar = points.ndim == 1 and kappa.ndim <= 1
    points = np.atleast_2d(points)
    kappa = np.atleast_2d(kappa) if kappa.ndim else kappa.reshape(1)
    return points, kappa, scalar


def pi_eval(criterion: YieldCriterion, x: Sequence[float], kappa: Sequence[float]):
    """pi(x, kappa); scalar for one point and one tensor, (N,) otherwise."""
    points, kappa, scalar = _single_or_many(x, kappa)
    if len(points) == 1 and len(kappa) > 1:
        points = np.repeat(points, len(kappa), axis=0)
    values = criterion.pi(points, kappa)
    return float(values[0]) if scalar else values


def pi_edge(
    criterion: YieldCriterion,
    x: Sequence[float],
    s: Union[float, np.ndarray],
    normal: Optional[Sequence[float]] = None,
):
    """pi(x, s nu (x) nu); isotropy makes the value independent of nu."""
    if normal is not None:
        norm = float(np.linalg.norm(normal))
        if abs(norm - 1.0) > 1e-9:
            raise InvalidArgumentError(f"edge normal must have unit length, got |nu| = {norm:.6g}")
    points = np.atleast_2d(np.asarray(x, dtype=float))
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if len(points) == 1 and len(s_arr) > 1:
        points = np.repeat(points, len(s_arr), axis=0)
    values = criterion.pi_edge(points, s_arr)
    return float(values[0]) if np.ndim(s) == 0 and np.ndim(x) == 1 else values


def emit_cone_block(criterion: YieldCriterion, x: Sequence[float]) -> ConeBlock:
    """Epigraph block of pi at one point (2,) or at each of (N, 2) points."""
    return criterion.cone_block(np.atleast_2d(np.asarray(x, dtype=float)))


def brute_force_pi(
    criterion: YieldCriterion,
    x: Sequence[float],
    kappa: Sequence[float],
    n: int,
    chunk: int = 64,
):
    """Lower estimate of pi: max of M : kappa over n boundary samples of G(x).

    The sample sequences are prefix-nested, so the estimate is nondecreasing
    in n. Accepts one (3,) tensor or a (K, 3) batch.
    """
    if n < 1:
        raise InvalidArgumentError(f"sample count must be at least 1, got {n}")
    strengths = criterion.strengths(np.atleast_2d(np.asarray(x, dtype=float)))[0]
    moments = criterion.boundary_samples(strengths, n)
    weights = np.column_stack((moments[:, 0], moments[:, 1], 2.0 * moments[:, 2]))
    kappa_arr = np.atleast_2d(np.asarray(kappa, dtype=float))
    best = np.empty(len(kappa_arr))
    for start in range(0, len(kappa_arr), chunk):
        block = kappa_arr[start : start + chunk]
        best[start : start + chunk] = (block @ weights.T).max(axis=1)
    best = np.maximum(best, 0.0)
    return float(best[0]) if np.ndim(kappa) == 1 else best


def coercivity_bounds(criterion: YieldCriterion, points: np.ndarray) -> CoercivityBounds:
    """Min and max of pi(x, kappa) / |kappa|_F over points and 64 unit directions.

    The directions are diag(cos psi, sin psi) with psi equally spaced on
    [0, 2 pi); isotropy makes this cover every tensor direction up to the grid.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    psi = 2.0 * np.pi * np.arange(COERCIVITY_DIRECTIONS) / COERCIVITY_DIRECTIONS
    directions = np.column_stack((np.cos(psi), np.sin(psi), np.zeros_like(psi)))
    strengths = criterion.strengths(points)
    n_p, n_d = len(points), len(directions)
    kappa = np.tile(directions, (n_p, 1))
    values = criterion.support(kappa, np.repeat(strengths, n_d, axis=0)) / frobenius_norm(kappa)
    bounds = CoercivityBounds(float(values.min()), float(values.max()))
    logger.debug(f"{criterion.kind} coercivity bounds: alpha={bounds.alpha:.6g}, beta={bounds.beta:.6g}")
    return bounds


def block_program(block: ConeBlock, inputs: np.ndarray) -> ConicProgram:
    """min sum of t over the block instances with their inputs fixed."""
    inputs = np.asarray(inputs, dtype=float).reshape(block.n_instances, block.n_inputs)
    n_inst, n_cols, n_rows = block.n_instances, block.n_columns, block.n_rows
    offsets = np.arange(n_inst) * n_cols

    local = block.to_sparse()
    fix_rows = np.arange(n_inst * block.n_inputs)
    fix_cols = (offsets[:, None] + np.arange(block.n_inputs)[None, :]).ravel()
    fix = sp.csr_matrix(
        (np.ones(len(fix_rows)), (fix_rows, fix_cols)), shape=(len(fix_rows), n_inst * n_cols)
    )
    A = sp.vstack((local, fix), format="csr")
    b = np.concatenate((np.zeros(n_inst * n_rows), inputs.ravel()))
    c = np.zeros(n_inst * n_cols)
    c[offsets + block.t_column] = 1.0
    cones = [cone for _ in range(n_inst) for cone in block.instance_cones()]
    return ConicProgram(A, b, c, cones)


def block_minimum(
    block: ConeBlock,
    inputs: np.ndarray,
    settings: Optional[SolverSettings] = None,
    chunk: int = 10,
) -> np.ndarray:
    """Minimal t of every block instance at fixed inputs, solved in small batches."""
    inputs = np.asarray(inputs, dtype=float).reshape(block.n_instances, block.n_inputs)
    minima = np.empty(block.n_instances)
    for start in range(0, block.n_instances, chunk):
        index = slice(start, start + chunk)
        sub = block.subset(index)
        solution = solve(block_program(sub, inputs[index]), settings)
        if not solution.is_optimal:
            raise SolverFailure(solution, f"{block.name} epigraph block did not solve")
        t = solution.x.reshape(sub.n_instances, sub.n_columns)[:, sub.t_column]
        minima[index] = t
    return minima
