"""Readers for Triangle (.node/.ele/.edge) and Gmsh MSH 2.2 ASCII meshes."""

import logging
import shlex
from collections import Counter
from enum import Enum
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from platelimit.constants import FORMAT_MSH2, FORMAT_TRIANGLE
from platelimit.exceptions import InvalidArgumentError, MeshParseError
from platelimit.geometry import orient2d_many
from platelimit.mesh import EdgeKey, Mesh

logger = logging.getLogger(__name__)

# Gmsh element types understood by the reader.
MSH_POINT = 15
MSH_LINE = 1
MSH_TRIANGLE = 2


class MeshFormat(Enum):
    """Supported mesh file formats"""

    TRIANGLE = FORMAT_TRIANGLE
    MSH2 = FORMAT_MSH2
    UNKNOWN = "unknown"


def detect_mesh_format(file_path: Path) -> MeshFormat:
    """Detect the mesh format from the file extension"""
    format_mapping = {
        ".node": MeshFormat.TRIANGLE,
        ".ele": MeshFormat.TRIANGLE,
        ".msh": MeshFormat.MSH2,
    }
    return format_mapping.get(file_path.suffix.lower(), MeshFormat.UNKNOWN)


class _LineReader:
    """Yields (line number, tokens) for non-blank, non-comment lines."""

    def __init__(self, path: Path, comment: Optional[str] = "#"):
        self.path = path
        try:
            self._lines = path.read_text(encoding="utf-8").splitlines()
        except OSError as exc:
            raise MeshParseError(path, 0, f"cannot read file: {exc}") from exc
        self._comment = comment
        self._index = 0
        self.line_number = 0

    def __iter__(self) -> Iterator[Tuple[int, List[str]]]:
        return self

    def __next__(self) -> Tuple[int, List[str]]:
        while self._index < len(self._lines):
            raw = self._lines[self._index]
            self._index += 1
            self.line_number = self._index
            if self._comment is not None:
                raw = raw.split(self._comment, 1)[0]
            tokens = raw.split()
            if tokens:
                return self.line_number, tokens
        raise StopIteration

    def next_tokens(self, what: str) -> Tuple[int, List[str]]:
        try:
            return next(self)
        except StopIteration:
            raise MeshParseError(
                self.path, self.line_number + 1, f"unexpected end of file, expected {what}"
            ) from None

    def error(self, line_number: int, message: str) -> MeshParseError:
        return MeshParseError(self.path, line_number, message)


def _ints(reader: _LineReader, line_number: int, tokens: List[str], what: str) -> List[int]:
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise reader.error(line_number, f"expected integers for {what}, got {' '.join(tokens)!r}") from None


def _floats(reader: _LineReader, line_number: int, tokens: List[str], what: str) -> List[float]:
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise reader.error(line_number, f"expected numbers for {what}, got {' '.join(tokens)!r}") from None


def _orient_counter_clockwise(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    p = vertices[triangles]
    clockwise = orient2d_many(p[:, 0], p[:, 1], p[:, 2]) < 0
    if clockwise.any():
        logger.debug(f"Reorienting {int(clockwise.sum())} clockwise triangles")
        triangles = triangles.copy()
        triangles[clockwise] = triangles[clockwise][:, [0, 2, 1]]
    return triangles


# ---------------------------------------------------------------- Triangle
def _read_node_file(path: Path) -> Tuple[np.ndarray, Dict[int, int], Dict[int, int]]:
    reader = _LineReader(path)
    line_number, header = reader.next_tokens("node header")
    values = _ints(reader, line_number, header[:4], "node header")
    if len(values) < 2 or values[1] != 2:
        raise reader.error(line_number, "node header must read '<count> 2 <attributes> <markers>'")
    count = values[0]
    n_attributes = values[2] if len(values) > 2 else 0
    has_markers = len(values) > 3 and values[3] > 0

    points = np.zeros((count, 2))
    index_of: Dict[int, int] = {}
    markers: Dict[int, int] = {}
    for k in range(count):
        line_number, tokens = reader.next_tokens(f"node {k + 1} of {count}")
        expected = 3 + n_attributes + (1 if has_markers else 0)
        if len(tokens) < expected:
            raise reader.error(line_number, f"node line needs {expected} fields, got {len(tokens)}")
        node_id = _ints(reader, line_number, tokens[:1], "node index")[0]
        if node_id in index_of:
            raise reader.error(line_number, f"node {node_id} defined twice")
        points[k] = _floats(reader, line_number, tokens[1:3], "node coordinates")
        index_of[node_id] = k
        if has_markers:
            markers[k] = _ints(reader, line_number, tokens[expected - 1 : expected], "marker")[0]
    return points, index_of, markers


def _read_ele_file(path: Path, index_of: Dict[int, int]) -> np.ndarray:
    reader = _LineReader(path)
    line_number, header = reader.next_tokens("element header")
    values = _ints(reader, line_number, header[:3], "element header")
    count = values[0]
    if len(values) > 1 and values[1] != 3:
        raise reader.error(line_number, f"only 3-node triangles are supported, got {values[1]}")
    triangles = np.zeros((count, 3), dtype=np.int64)
    for k in range(count):
        line_number, tokens = reader.next_tokens(f"element {k + 1} of {count}")
        if len(tokens) < 4:
            raise reader.error(line_number, f"element line needs 4 fields, got {len(tokens)}")
        ids = _ints(reader, line_number, tokens[1:4], "element vertices")
        for node_id in ids:
            if node_id not in index_of:
                raise reader.error(line_number, f"element references unknown node {node_id}")
        triangles[k] = [index_of[i] for i in ids]
    return triangles


def _read_edge_file(path: Path, index_of: Dict[int, int]) -> Dict[EdgeKey, str]:
    reader = _LineReader(path)
    line_number, header = reader.next_tokens("edge header")
    values = _ints(reader, line_number, header[:2], "edge header")
    count = values[0]
    has_markers = len(values) > 1 and values[1] > 0
    tags: Dict[EdgeKey, str] = {}
    for k in range(count):
        line_number, tokens = reader.next_tokens(f"edge {k + 1} of {count}")
        if len(tokens) < (4 if has_markers else 3):
            raise reader.error(line_number, "edge line is too short")
        a, b = _ints(reader, line_number, tokens[1:3], "edge vertices")
        if a not in index_of or b not in index_of:
            raise reader.error(line_number, f"edge references unknown node {a if a not in index_of else b}")
        if has_markers:
            marker = _ints(reader, line_number, tokens[3:4], "edge marker")[0]
            if marker != 0:
                tags[(index_of[a], index_of[b])] = str(marker)
    return tags


def _marker_tags(triangles: np.ndarray, markers: Dict[int, int]) -> Dict[EdgeKey, str]:
    """Tag a boundary edge with the vertex marker shared by both of its endpoints."""
    uses = Counter(
        (min(int(tri[k]), int(tri[(k + 1) % 3])), max(int(tri[k]), int(tri[(k + 1) % 3])))
        for tri in triangles
        for k in range(3)
    )
    tags: Dict[EdgeKey, str] = {}
    for (a, b), count in uses.items():
        ma, mb = markers.get(a, 0), markers.get(b, 0)
        if count == 1 and ma != 0 and ma == mb:
            tags[(a, b)] = str(ma)
    return tags


def read_triangle(path: Union[str, Path]) -> Mesh:
    """Read a Triangle mesh given its .node or .ele file (siblings share the stem)."""
    path = Path(path)
    node_path = path.with_suffix(".node")
    ele_path = path.with_suffix(".ele")
    edge_path = path.with_suffix(".edge")
    vertices, index_of, markers = _read_node_file(node_path)
    triangles = _read_ele_file(ele_path, index_of)
    if edge_path.exists():
        tags = _read_edge_file(edge_path, index_of)
    else:
        tags = _marker_tags(triangles, markers)
    triangles = _orient_counter_clockwise(vertices, triangles)
    return Mesh(vertices, triangles, tags)


# ---------------------------------------------------------------- Gmsh 2.2
def _expect(reader: _LineReader, keyword: str) -> None:
    line_number, tokens = reader.next_tokens(keyword)
    if tokens[0] != keyword:
        raise reader.error(line_number, f"expected {keyword}, got {tokens[0]!r}")


def read_msh2(path: Union[str, Path]) -> Mesh:
    """Read the nodes, physical-tagged lines and triangles of an ASCII MSH 2.2 file."""
    path = Path(path)
    reader = _LineReader(path, comment=None)
    physical_names: Dict[int, str] = {}
    vertices: Optional[np.ndarray] = None
    index_of: Dict[int, int] = {}
    triangles: List[List[int]] = []
    line_tags: Dict[EdgeKey, int] = {}
    seen_format = False

    for line_number, tokens in reader:
        section = tokens[0]
        if section == "$MeshFormat":
            line_number, tokens = reader.next_tokens("mesh format")
            if not tokens[0].startswith("2."):
                raise reader.error(line_number, f"unsupported MSH version {tokens[0]}")
            if len(tokens) > 1 and tokens[1] != "0":
                raise reader.error(line_number, "binary MSH files are not supported")
            _expect(reader, "$EndMeshFormat")
            seen_format = True
        elif section == "$PhysicalNames":
            line_number, tokens = reader.next_tokens("physical name count")
            count = _ints(reader, line_number, tokens[:1], "physical name count")[0]
            for _ in range(count):
                line_number, tokens = reader.next_tokens("physical name")
                parts = shlex.split(" ".join(tokens))
                if len(parts) < 3:
                    raise reader.error(line_number, "physical name line needs '<dim> <tag> \"name\"'")
                tag = _ints(reader, line_number, parts[1:2], "physical tag")[0]
                physical_names[tag] = parts[2]
            _expect(reader, "$EndPhysicalNames")
        elif section == "$Nodes":
            line_number, tokens = reader.next_tokens("node count")
            count = _ints(reader, line_number, tokens[:1], "node count")[0]
            vertices = np.zeros((count, 2))
            for k in range(count):
                line_number, tokens = reader.next_tokens(f"node {k + 1} of {count}")
                if len(tokens) < 4:
                    raise reader.error(line_number, f"node line needs 4 fields, got {len(tokens)}")
                node_id = _ints(reader, line_number, tokens[:1], "node id")[0]
                if node_id in index_of:
                    raise reader.error(line_number, f"node {node_id} defined twice")
                vertices[k] = _floats(reader, line_number, tokens[1:3], "node coordinates")
                index_of[node_id] = k
            _expect(reader, "$EndNodes")
        elif section == "$Elements":
            line_number, tokens = reader.next_tokens("element count")
            count = _ints(reader, line_number, tokens[:1], "element count")[0]
            for k in range(count):
                line_number, tokens = reader.next_tokens(f"element {k + 1} of {count}")
                fields = _ints(reader, line_number, tokens, "element")
                if len(fields) < 3:
                    raise reader.error(line_number, "element line is too short")
                elem_type, n_tags = fields[1], fields[2]
                nodes = fields[3 + n_tags :]
                physical = fields[3] if n_tags > 0 else 0
                if elem_type == MSH_POINT:
                    continue
                expected = {MSH_LINE: 2, MSH_TRIANGLE: 3}.get(elem_type)
                if expected is None:
                    raise reader.error(line_number, f"unsupported element type {elem_type}")
                if len(nodes) != expected:
                    raise reader.error(
                        line_number, f"element type {elem_type} needs {expected} nodes, got {len(nodes)}"
                    )
                for node_id in nodes:
                    if node_id not in index_of:
                        raise reader.error(line_number, f"element references unknown node {node_id}")
                local = [index_of[n] for n in nodes]
                if elem_type == MSH_TRIANGLE:
                    triangles.append(local)
                elif physical != 0:
                    line_tags[(local[0], local[1])] = physical
            _expect(reader, "$EndElements")
        elif section.startswith("$"):
            # Skip unknown sections such as $NodeData.
            end = "$End" + section[1:]
            for _, skipped in reader:
                if skipped[0] == end:
                    break
            else:
                raise reader.error(reader.line_number, f"section {section} is not terminated")
        else:
            raise reader.error(line_number, f"unexpected content {tokens[0]!r} outside a section")

    if not seen_format:
        raise reader.error(1, "missing $MeshFormat section")
    if vertices is None:
        raise reader.error(reader.line_number, "missing $Nodes section")

    tags = {key: physical_names.get(tag, str(tag)) for key, tag in line_tags.items()}
    tri_array = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    tri_array = _orient_counter_clockwise(vertices, tri_array)
    return Mesh(vertices, tri_array, tags)


def import_mesh(path: Union[str, Path], mesh_format: Optional[str] = None) -> Mesh:
    """Read and validate a mesh file.

    Args:
        path: Mesh file. For the Triangle format, either the .node or .ele file.
        mesh_format: ``triangle_node_ele`` or ``msh2_ascii``; detected from the
            suffix when omitted.

    Raises:
        MeshParseError: malformed file, with the offending line number.
        MeshValidationError: the triangulation breaks a mesh invariant.
    """
    path = Path(path)
    try:
        fmt = MeshFormat(mesh_format) if mesh_format else detect_mesh_format(path)
    except ValueError:
        raise InvalidArgumentError(f"unknown mesh format {mesh_format!r}") from None
    if fmt is MeshFormat.TRIANGLE:
        mesh = read_triangle(path)
    elif fmt is MeshFormat.MSH2:
        mesh = read_msh2(path)
    else:
        raise InvalidArgumentError(f"cannot determine mesh format of {path}")
    mesh.validate()
    logger.info(
        f"Imported {path.name}: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles, "
        f"regions {mesh.region_labels}"
    )
    return mesh
