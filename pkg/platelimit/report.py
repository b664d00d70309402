"""Result records (JSON) and convergence tables (CSV)."""

import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd
import scipy

from platelimit.__version__ import __version__
from platelimit.assemble import AssembledProblem, LimitAnalysisResult
from platelimit.conic import ConicSolution, Residuals

CONVERGENCE_COLUMNS = [
    "level",
    "h",
    "nx",
    "ny",
    "dofs",
    "lambda_h",
    "relative_error",
    "rigor",
    "status",
]
TIMING_COLUMN = "solve_seconds"
FLOAT_FORMAT = "%.10g"


def versions() -> Dict[str, str]:
    return {"platelimit": __version__, "numpy": np.__version__, "scipy": scipy.__version__}


def residuals_dict(residuals: Residuals) -> Dict[str, float]:
    return {"primal": residuals.primal, "dual": residuals.dual, "gap": residuals.gap}


@dataclass
class ConvergenceRow:
    """One refinement level of a convergence study."""

    level: int
    h: float
    nx: Optional[int]
    ny: Optional[int]
    dofs: int
    lambda_h: Optional[float]
    relative_error: Optional[float]
    rigor: str
    status: str
    solve_seconds: Optional[float] = None

    @property
    def succeeded(self) -> bool:
        return self.lambda_h is not None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def relative_error(value: Optional[float], reference: Optional[float]) -> Optional[float]:
    if value is None or reference is None:
        return None
    return (value - reference) / reference


def fitted_rate(rows: Sequence[ConvergenceRow]) -> Optional[float]:
    """Slope of log|relative error| against log h over the successful levels."""
    points = [
        (row.h, abs(row.relative_error))
        for row in rows
        if row.relative_error is not None and row.relative_error != 0 and math.isfinite(row.relative_error)
    ]
    if len(points) < 2:
        return None
    h, err = np.log(np.array(points)).T
    return float(np.polyfit(h, err, 1)[0])


class ResultRecordGenerator:
    """Serialises solve outcomes into the JSON result record."""

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    def solve_record(
        self,
        config: Dict[str, Any],
        problem: AssembledProblem,
        result: LimitAnalysisResult,
        timings: Optional[Dict[str, float]] = None,
        extra: Optional[Dict[str, Any]] = None,
    ) -> Dict[str, Any]:
        record: Dict[str, Any] = {
            "lambda_h": result.lambda_h,
            "normalized_lambda": result.normalized_lambda,
            "normalization": problem.normalization.to_dict(),
            "status": result.status,
            "reduced_accuracy": result.reduced_accuracy,
            "iterations": result.iterations,
            "residuals": residuals_dict(result.residuals),
            "rigor": result.rigor,
            "dissipation": result.dissipation,
            "load_work": result.load_work,
            "sizes": problem.sizes(),
            "mesh": {"vertices": problem.mesh.n_vertices, "triangles": problem.mesh.n_triangles},
            "dofs": problem.space.n_dofs,
            "discretization": problem.metadata,
            "config": config,
            "versions": versions(),
        }
        if extra:
            record.update(extra)
        if timings is not None:
            record["timings"] = timings
        return record

    def failure_record(self, config: Dict[str, Any], solution: ConicSolution, message: str) -> Dict[str, Any]:
        return {
            "lambda_h": None,
            "status": solution.status_label,
            "iterations": solution.iterations,
            "residuals": residuals_dict(solution.residuals),
            "error": message,
            "config": config,
            "versions": versions(),
        }

    def convergence_record(
        self,
        config: Dict[str, Any],
        rows: Sequence[ConvergenceRow],
        reference_lambda: Optional[float],
        include_timings: bool = False,
    ) -> Dict[str, Any]:
        row_dicts = [row.to_dict() for row in rows]
        if not include_timings:
            for row in row_dicts:
                row.pop(TIMING_COLUMN)
        return {
            "reference_lambda": reference_lambda,
            "rate": fitted_rate(rows),
            "rows": row_dicts,
            "config": config,
            "versions": versions(),
        }

    def generate(self, record: Dict[str, Any]) -> str:
        self.logger.debug("Generating JSON result record")
        return json.dumps(record, indent=2, ensure_ascii=False, default=self._json_serializer) + "\n"

    def write(self, path: Union[str, Path], record: Dict[str, Any]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.generate(record), encoding="utf-8", newline="\n")
        self.logger.debug(f"Wrote result record {path}")
        return path

    def _json_serializer(self, obj: Any) -> Any:
        if isinstance(obj, np.integer):
            return int(obj)
        if isinstance(obj, np.floating):
            return float(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, Path):
            return str(obj)
        if hasattr(obj, "to_dict"):
            return obj.to_dict()
        return str(obj)


def convergence_frame(rows: Sequence[ConvergenceRow], include_timings: bool = False) -> pd.DataFrame:
    columns = CONVERGENCE_COLUMNS + ([TIMING_COLUMN] if include_timings else [])
    frame = pd.DataFrame([row.to_dict() for row in rows], columns=CONVERGENCE_COLUMNS + [TIMING_COLUMN])
    frame = frame[columns]
    for column in ("nx", "ny"):
        frame[column] = frame[column].astype("Int64")
    return frame


def write_convergence_csv(
    path: Union[str, Path], rows: Sequence[ConvergenceRow], include_timings: bool = False
) -> Path:
    """CSV with the documented column order; empty cells where a value is absent."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    convergence_frame(rows, include_timings).to_csv(
        path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
    )
    return path


def read_convergence_csv(path: Union[str, Path]) -> List[Dict[str, Any]]:
    frame = pd.read_csv(path, keep_default_na=True)
    return [
        {key: (None if pd.isna(value) else value) for key, value in record.items()}
        for record in frame.to_dict(orient="records")
    ]
