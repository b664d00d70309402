"""Run configuration: JSON or TOML documents validated into frozen dataclasses.

Validation errors carry the JSON pointer of the offending value, e.g.
``/mesh/nx: expected a positive integer, got 0``. ``RunConfig.to_dict()``
is the echo written into result records; it re-parses to an equal config.
"""

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import toml

from platelimit.assemble import LoadSpec, Normalization
from platelimit.conic import SolverSettings
from platelimit.constants import (
    BC_KINDS,
    BC_SYMMETRY,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL_FEAS,
    DEFAULT_TOL_GAP,
    FORMAT_MSH2,
    FORMAT_TRIANGLE,
    HERMITE_P3,
    LAGRANGE_P2,
    PATTERN_CROSSED,
    PATTERN_DIAG,
    RECT_SIDES,
)
from platelimit.criteria import CRITERIA, YieldCriterion, make_criterion
from platelimit.exceptions import ConfigError, ExpressionError, InvalidArgumentError
from platelimit.expression import parse_expression
from platelimit.fem import BoundaryCondition

Strength = Union[float, str]


# -------------------------------------------------------------- validators
def _pointer(parent: str, key: Union[str, int]) -> str:
    token = str(key).replace("~", "~0").replace("/", "~1")
    return f"{parent}/{token}"


def _mapping(value: Any, pointer: str) -> Mapping[str, Any]:
    if not isinstance(value, Mapping):
        raise ConfigError(pointer, f"expected an object, got {type(value).__name__}")
    return value


def _check_keys(value: Mapping[str, Any], allowed: Sequence[str], pointer: str) -> None:
    for key in value:
        if key not in allowed:
            raise ConfigError(_pointer(pointer, key), f"unknown key, expected one of {sorted(allowed)}")


def _require(value: Mapping[str, Any], key: str, pointer: str) -> Any:
    if key not in value:
        raise ConfigError(_pointer(pointer, key), "required key is missing")
    return value[key]


def _number(value: Any, pointer: str, positive: bool = True) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(pointer, f"expected a finite number, got {value!r}")
    if positive and value <= 0:
        raise ConfigError(pointer, f"expected a positive number, got {value!r}")
    return float(value)


def _integer(value: Any, pointer: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(pointer, f"expected an integer >= {minimum}, got {value!r}")
    return value


def _choice(value: Any, choices: Sequence[str], pointer: str) -> str:
    if value not in choices:
        raise ConfigError(pointer, f"expected one of {list(choices)}, got {value!r}")
    return value


def _string(value: Any, pointer: str) -> str:
    if not isinstance(value, str) or not value:
        raise ConfigError(pointer, f"expected a non-empty string, got {value!r}")
    return value


def _strength(value: Any, pointer: str) -> Strength:
    if isinstance(value, str):
        try:
            parse_expression(value)
        except ExpressionError as exc:
            raise ConfigError(pointer, str(exc)) from exc
        return value
    return _number(value, pointer)


def _optional_path(value: Any, pointer: str) -> Optional[str]:
    return None if value is None else _string(value, pointer)


# ----------------------------------------------------------------- sections
@dataclass(frozen=True)
class DomainConfig:
    type: str
    width: Optional[float] = None
    height: Optional[float] = None
    path: Optional[str] = None
    format: Optional[str] = None

    @classmethod
    def from_dict(cls, value: Any, pointer: str) -> "DomainConfig":
        value = _mapping(value, pointer)
        kind = _choice(_require(value, "type", pointer), ("rect", "mesh_file"), _pointer(pointer, "type"))
        if kind == "rect":
            _check_keys(value, ("type", "width", "height"), pointer)
            return cls(
                "rect",
                width=_number(_require(value, "width", pointer), _pointer(pointer, "width")),
                height=_number(_require(value, "height", pointer), _pointer(pointer, "height")),
            )
        _check_keys(value, ("type", "path", "format"), pointer)
        mesh_format = value.get("format")
        if mesh_format is not None:
            _choice(mesh_format, (FORMAT_TRIANGLE, FORMAT_MSH2), _pointer(pointer, "format"))
        return cls(
            "mesh_file",
            path=_string(_require(value, "path", pointer), _pointer(pointer, "path")),
            format=mesh_format,
        )

    def to_dict(self) -> Dict[str, Any]:
        if self.type == "rect":
            return {"type": "rect", "width": self.width, "height": self.height}
        return {"type": "mesh_file", "path": self.path, "format": self.format}


@dataclass(frozen=True)
class SymmetryConfig:
    enabled: bool = False
    sides: Tuple[str, ...] = ("left", "bottom")

    @classmethod
    def from_dict(cls, value: Any, pointer: str) -> "SymmetryConfig":
        value = _mapping(value, pointer)
        _check_keys(value, ("enabled", "sides"), pointer)
        enabled = value.get("enabled", False)
        if not isinstance(enabled, bool):
            raise ConfigError(_pointer(pointer, "enabled"), f"expected true or false, got {enabled!r}")
        sides = value.get("sides", list(cls.sides))
        if not isinstance(sides, list) or not sides:
            raise ConfigError(_pointer(pointer, "sides"), "expected a non-empty list of region labels")
        labels = tuple(
            _string(side, _pointer(_pointer(pointer, "sides"), i)) for i, side in enumerate(sides)
        )
        return cls(enabled, labels)

    def to_dict(self) -> Dict[str, Any]:
        return {"enabled": self.enabled, "sides": list(self.sides)}


@dataclass(frozen=True)
class CriterionConfig:
    kind: str
    strengths: Tuple[Tuple[str, Strength], ...]

    @classmethod
    def from_dict(cls, value: Any, pointer: str) -> "CriterionConfig":
        value = _mapping(value, pointer)
        kind = _choice(_require(value, "kind", pointer), sorted(CRITERIA), _pointer(pointer, "kind"))
        names = CRITERIA[kind].field_names
        _check_keys(value, ("kind",) + names, pointer)
        strengths = tuple(
            (name, _strength(_require(value, name, pointer), _pointer(pointer, name))) for name in names
        )
        return cls(kind, strengths)

    def build(self) -> YieldCriterion:
        return make_criterion(self.kind, **dict(self.strengths))

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, **dict(self.strengths)}


@dataclass(frozen=True)
class LoadConfig:
    kind: str = "uniform_pressure"
    value: float = 1.0
    expression: Optional[str] = None

    @classmethod
    def from_dict(cls, value: Any, pointer: str) -> "LoadConfig":
        value = _mapping(value, pointer)
        kind = _choice(
            value.get("kind", "uniform_pressure"),
            ("uniform_pressure", "density_expression"),
            _pointer(pointer, "kind"),
        )
        if kind == "uniform_pressure":
            _check_keys(value, ("kind", "value"), pointer)
            return cls(kind, _number(value.get("value", 1.0), _pointer(pointer, "value")))
        _check_keys(value, ("kind", "expression"), pointer)
        text = _strength(_require(value, "expression", pointer), _pointer(pointer, "expression"))
        if not isinstance(text, str):
            raise ConfigError(_pointer(pointer, "expression"), "expected an expression string")
        return cls(kind, 1.0, text)

    def build(self) -> LoadSpec:
        if self.kind == "uniform_pressure":
            return LoadSpec.uniform(self.value)
        return LoadSpec.density(self.expression)

    def to_dict(self) -> Dict[str, Any]:
        if self.kind == "uniform_pressure":
            return {"kind": self.kind, "value": self.value}
        return {"kind": self.kind, "expression": self.expression}


@dataclass(frozen=True)
class MeshConfig:
    nx: int = 10
    ny: int = 10
    pattern: str = PATTERN_CROSSED

    @classmethod
    def from_dict(cls, value: Any, pointer: str) -> "MeshConfig":
        value = _mapping(value, pointer)
        _check_keys(value, ("nx", "ny", "pattern"), pointer)
        return cls(
            _integer(value.get("nx", cls.nx), _pointer(pointer, "nx")),
            _integer(value.get("ny", cls.ny), _pointer(pointer, "ny")),
            _choice(value.get("pattern", cls.pattern), (PATTERN_DIAG, PATTERN_CROSSED), _pointer(pointer, "pattern")),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"nx": self.nx, "ny": self.ny, "pattern": self.pattern}


@dataclass(frozen=True)
class SolverConfig:
    tol_feas: float = DEFAULT_TOL_FEAS
    tol_gap: float = DEFAULT_TOL_GAP
    max_iter: int = DEFAULT_MAX_ITER

    @classmethod
    def from_dict(cls, value: Any, pointer: str) -> "SolverConfig":
        value = _mapping(value, pointer)
        _check_keys(value, ("tol_feas", "tol_gap", "max_iter"), pointer)
        return cls(
            _number(value.get("tol_feas", cls.tol_feas), _pointer(pointer, "tol_feas")),
            _number(value.get("tol_gap", cls.tol_gap), _pointer(pointer, "tol_gap")),
            _integer(value.get("max_iter", cls.max_iter), _pointer(pointer, "max_iter")),
        )

    def settings(self) -> SolverSettings:
        return SolverSettings(tol_feas=self.tol_feas, tol_gap=self.tol_gap, max_iter=self.max_iter)

    def to_dict(self) -> Dict[str, Any]:
        return {"tol_feas": self.tol_feas, "tol_gap": self.tol_gap, "max_iter": self.max_iter}


@dataclass(frozen=True)
class OutputsConfig:
    json: Optional[str] = "result.json"
    csv: Optional[str] = "convergence.csv"
    vtk: Optional[str] = None
    svg: Optional[str] = "convergence.svg"

    @classmethod
    def from_dict(cls, value: Any, pointer: str) -> "OutputsConfig":
        value = _mapping(value, pointer)
        _check_keys(value, ("json", "csv", "vtk", "svg"), pointer)
        paths = {}
        for key in ("json", "csv", "vtk", "svg"):
            raw = value.get(key, getattr(cls, key))
            path = _optional_path(raw, _pointer(pointer, key))
            if path is not None and (Path(path).is_absolute() or ".." in Path(path).parts):
                raise ConfigError(_pointer(pointer, key), "output paths must stay inside the output directory")
            paths[key] = path
        return cls(**paths)

    def to_dict(self) -> Dict[str, Any]:
        return {"json": self.json, "csv": self.csv, "vtk": self.vtk, "svg": self.svg}


@dataclass(frozen=True)
class NormalizationConfig:
    length: float = 1.0
    load: Optional[float] = None
    strength: Optional[float] = None

    @classmethod
    def from_dict(cls, value: Any, pointer: str) -> "NormalizationConfig":
        value = _mapping(value, pointer)
        _check_keys(value, ("length", "load", "strength"), pointer)
        optional = {
            key: None if value.get(key) is None else _number(value[key], _pointer(pointer, key))
            for key in ("load", "strength")
        }
        return cls(_number(value.get("length", 1.0), _pointer(pointer, "length")), **optional)

    def to_dict(self) -> Dict[str, Any]:
        return {"length": self.length, "load": self.load, "strength": self.strength}


@dataclass(frozen=True)
class ConvergenceConfig:
    levels: int = 3
    h_list: Optional[Tuple[float, ...]] = None

    @classmethod
    def from_dict(cls, value: Any, pointer: str) -> "ConvergenceConfig":
        value = _mapping(value, pointer)
        _check_keys(value, ("levels", "h_list"), pointer)
        levels = _integer(value.get("levels", cls.levels), _pointer(pointer, "levels"), minimum=2)
        h_list = value.get("h_list")
        if h_list is not None:
            if not isinstance(h_list, list) or len(h_list) < 2:
                raise ConfigError(_pointer(pointer, "h_list"), "expected a list of at least two mesh sizes")
            h_list = tuple(
                _number(h, _pointer(_pointer(pointer, "h_list"), i)) for i, h in enumerate(h_list)
            )
        return cls(levels, h_list)

    def to_dict(self) -> Dict[str, Any]:
        return {"levels": self.levels, "h_list": list(self.h_list) if self.h_list else None}


# ------------------------------------------------------------------- config
TOP_LEVEL_KEYS = (
    "domain",
    "quarter_symmetry",
    "element",
    "criterion",
    "bcs",
    "load",
    "mesh",
    "solver",
    "outputs",
    "normalization",
    "reference_lambda",
    "convergence",
)


@dataclass(frozen=True)
class RunConfig:
    domain: DomainConfig
    criterion: CriterionConfig
    element: str = LAGRANGE_P2
    quarter_symmetry: SymmetryConfig = field(default_factory=SymmetryConfig)
    bcs: Tuple[Tuple[str, str], ...] = ()
    load: LoadConfig = field(default_factory=LoadConfig)
    mesh: MeshConfig = field(default_factory=MeshConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    outputs: OutputsConfig = field(default_factory=OutputsConfig)
    normalization: NormalizationConfig = field(default_factory=NormalizationConfig)
    reference_lambda: Optional[float] = None
    convergence: ConvergenceConfig = field(default_factory=ConvergenceConfig)

    @classmethod
    def from_dict(cls, data: Any) -> "RunConfig":
        data = _mapping(data, "")
        _check_keys(data, TOP_LEVEL_KEYS, "")
        bcs_raw = _mapping(data.get("bcs", {}), "/bcs")
        bcs = tuple(
            (_string(label, "/bcs"), _choice(kind, BC_KINDS, _pointer("/bcs", label)))
            for label, kind in bcs_raw.items()
        )
        reference = data.get("reference_lambda")
        config = cls(
            domain=DomainConfig.from_dict(_require(data, "domain", ""), "/domain"),
            criterion=CriterionConfig.from_dict(_require(data, "criterion", ""), "/criterion"),
            element=_choice(data.get("element", LAGRANGE_P2), (LAGRANGE_P2, HERMITE_P3), "/element"),
            quarter_symmetry=SymmetryConfig.from_dict(data.get("quarter_symmetry", {}), "/quarter_symmetry"),
            bcs=bcs,
            load=LoadConfig.from_dict(data.get("load", {}), "/load"),
            mesh=MeshConfig.from_dict(data.get("mesh", {}), "/mesh"),
            solver=SolverConfig.from_dict(data.get("solver", {}), "/solver"),
            outputs=OutputsConfig.from_dict(data.get("outputs", {}), "/outputs"),
            normalization=NormalizationConfig.from_dict(data.get("normalization", {}), "/normalization"),
            reference_lambda=None if reference is None else _number(reference, "/reference_lambda"),
            convergence=ConvergenceConfig.from_dict(data.get("convergence", {}), "/convergence"),
        )
        config.boundary_conditions()
        if config.domain.type == "rect":
            for i, side in enumerate(config.quarter_symmetry.sides):
                if side not in RECT_SIDES:
                    raise ConfigError(
                        _pointer("/quarter_symmetry/sides", i),
                        f"rectangle sides are {list(RECT_SIDES)}, got {side!r}",
                    )
        return config

    def to_dict(self) -> Dict[str, Any]:
        return {
            "domain": self.domain.to_dict(),
            "quarter_symmetry": self.quarter_symmetry.to_dict(),
            "element": self.element,
            "criterion": self.criterion.to_dict(),
            "bcs": dict(self.bcs),
            "load": self.load.to_dict(),
            "mesh": self.mesh.to_dict(),
            "solver": self.solver.to_dict(),
            "outputs": self.outputs.to_dict(),
            "normalization": self.normalization.to_dict(),
            "reference_lambda": self.reference_lambda,
            "convergence": self.convergence.to_dict(),
        }

    # ---------------------------------------------------------- derived
    def boundary_conditions(self) -> List[BoundaryCondition]:
        """Configured conditions plus symmetry on the quarter-model sides."""
        conditions = dict(self.bcs)
        if self.quarter_symmetry.enabled:
            for side in self.quarter_symmetry.sides:
                previous = conditions.setdefault(side, BC_SYMMETRY)
                if previous != BC_SYMMETRY:
                    raise ConfigError(
                        _pointer("/bcs", side),
                        f"side is a quarter-symmetry axis but configured as {previous!r}",
                    )
        try:
            return [BoundaryCondition(label, kind) for label, kind in conditions.items()]
        except InvalidArgumentError as exc:
            raise ConfigError("/bcs", str(exc)) from exc

    def build_criterion(self) -> YieldCriterion:
        try:
            return self.criterion.build()
        except (InvalidArgumentError, ExpressionError) as exc:
            raise ConfigError("/criterion", str(exc)) from exc

    def build_load(self) -> LoadSpec:
        return self.load.build()

    def build_normalization(self, criterion: YieldCriterion, load: LoadSpec) -> Normalization:
        return Normalization(
            self.normalization.length,
            self.normalization.load if self.normalization.load is not None else load.reference_value,
            self.normalization.strength
            if self.normalization.strength is not None
            else criterion.reference_strength(),
        )

    def with_solver(self, tol_feas: Optional[float] = None, tol_gap: Optional[float] = None) -> "RunConfig":
        """Copy with solver tolerances overridden (CLI flags)."""
        solver = replace(
            self.solver,
            tol_feas=self.solver.tol_feas if tol_feas is None else _number(tol_feas, "/solver/tol_feas"),
            tol_gap=self.solver.tol_gap if tol_gap is None else _number(tol_gap, "/solver/tol_gap"),
        )
        return replace(self, solver=solver)

    def with_mesh(self, nx: int, ny: int) -> "RunConfig":
        return replace(self, mesh=replace(self.mesh, nx=nx, ny=ny))


def parse_config_text(text: str, suffix: str = ".json") -> RunConfig:
    try:
        if suffix.lower() == ".toml":
            data = toml.loads(text)
        else:
            data = json.loads(text)
    except (ValueError, toml.TomlDecodeError) as exc:
        raise ConfigError("", f"cannot parse configuration: {exc}") from exc
    return RunConfig.from_dict(data)


def load_config(path: Union[str, Path]) -> RunConfig:
    """Load a JSON or TOML run configuration; mesh paths resolve against its folder."""
    path = Path(path)
    if path.suffix.lower() not in (".json", ".toml"):
        raise ConfigError("", f"unsupported configuration file type {path.suffix!r} (use .json or .toml)")
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc}") from exc
    config = parse_config_text(text, path.suffix)
    if config.domain.type == "mesh_file" and not Path(config.domain.path).is_absolute():
        resolved = str((path.parent / config.domain.path).resolve())
        config = replace(config, domain=replace(config.domain, path=resolved))
    return config
