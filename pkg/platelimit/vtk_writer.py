"""Legacy ASCII VTK export of mechanisms and dissipation fields."""

import logging
from pathlib import Path
from typing import Dict, Iterable, Optional, Union

import numpy as np

from platelimit.assemble import LimitAnalysisResult
from platelimit.exceptions import InvalidArgumentError
from platelimit.mesh import Mesh

VTK_TRIANGLE = 5


def _format(values: Iterable[float]) -> str:
    return "\n".join(f"{float(v):.10g}" for v in values)


class VTKWriter:
    """Writes a triangulation with point and cell scalars as DATASET UNSTRUCTURED_GRID."""

    def __init__(self, title: str = "platelimit mechanism"):
        self.title = title.replace("\n", " ")
        self.logger = logging.getLogger(__name__)

    def render(
        self,
        mesh: Mesh,
        point_data: Optional[Dict[str, np.ndarray]] = None,
        cell_data: Optional[Dict[str, np.ndarray]] = None,
    ) -> str:
        point_data = point_data or {}
        cell_data = cell_data or {}
        n_v, n_t = mesh.n_vertices, mesh.n_triangles
        for name, values in point_data.items():
            if len(values) != n_v:
                raise InvalidArgumentError(f"point field {name!r} has {len(values)} values, mesh has {n_v} vertices")
        for name, values in cell_data.items():
            if len(values) != n_t:
                raise InvalidArgumentError(f"cell field {name!r} has {len(values)} values, mesh has {n_t} triangles")

        lines = [
            "# vtk DataFile Version 3.0",
            self.title,
            "ASCII",
            "DATASET UNSTRUCTURED_GRID",
            f"POINTS {n_v} double",
        ]
        lines += [f"{x:.10g} {y:.10g} 0" for x, y in mesh.vertices]
        lines.append(f"CELLS {n_t} {4 * n_t}")
        lines += [f"3 {a} {b} {c}" for a, b, c in mesh.triangles]
        lines.append(f"CELL_TYPES {n_t}")
        lines += [str(VTK_TRIANGLE)] * n_t
        if point_data:
            lines.append(f"POINT_DATA {n_v}")
            for name, values in point_data.items():
                lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default", _format(values)]
        if cell_data:
            lines.append(f"CELL_DATA {n_t}")
            for name, values in cell_data.items():
                lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default", _format(values)]
        return "\n".join(lines) + "\n"

    def write(self, path: Union[str, Path], mesh: Mesh, **fields) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.render(mesh, **fields), encoding="utf-8", newline="\n")
        self.logger.debug(f"Wrote VTK file {path} ({mesh.n_vertices} points, {mesh.n_triangles} cells)")
        return path


def write_result_vtk(path: Union[str, Path], mesh: Mesh, result: LimitAnalysisResult) -> Path:
    """Mechanism ``u`` at the vertices, ``dissipation`` and ``deformation`` densities and ``strength`` per cell."""
    return VTKWriter().write(
        path,
        mesh,
        point_data={"u": result.vertex_values},
        cell_data={
            "dissipation": result.cell_dissipation_density,
            "deformation": result.cell_deformation_density,
            "strength": result.cell_strength,
        },
    )
