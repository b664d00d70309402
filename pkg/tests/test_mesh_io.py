"""Tests for the Triangle and Gmsh mesh readers"""

import logging
from pathlib import Path

import numpy as np
import pytest

from platelimit.exceptions import InvalidArgumentError, MeshParseError, MeshValidationError
from platelimit.mesh_io import MeshFormat, detect_mesh_format, import_mesh, read_msh2, read_triangle

from tests.conftest import SAMPLES_DIR

MESH_DIR = SAMPLES_DIR / "meshes"

NODE_TEXT = """# unit square
4 2 0 1
1 0.0 0.0 1
2 1.0 0.0 1
3 1.0 1.0 1
4 0.0 1.0 1
"""

ELE_TEXT = """2 3 0
1 1 2 3
2 1 4 3
"""


def _write_triangle(tmp_path: Path, node_text: str = NODE_TEXT, ele_text: str = ELE_TEXT) -> Path:
    (tmp_path / "plate.node").write_text(node_text)
    (tmp_path / "plate.ele").write_text(ele_text)
    return tmp_path / "plate.node"


@pytest.mark.parametrize(
    "name, expected",
    [
        ("a.node", MeshFormat.TRIANGLE),
        ("a.ELE", MeshFormat.TRIANGLE),
        ("a.msh", MeshFormat.MSH2),
        ("a.vtk", MeshFormat.UNKNOWN),
    ],
)
def test_detect_mesh_format(name, expected):
    assert detect_mesh_format(Path(name)) == expected


def test_sample_triangle_mesh():
    """The sample Triangle mesh tags its boundary with vertex marker 1"""
    mesh = import_mesh(MESH_DIR / "square.node")
    assert mesh.n_vertices == 5
    assert mesh.n_triangles == 4
    assert mesh.region_labels == ["1"]
    assert len(mesh.edges_with_tag("1")) == 4
    assert mesh.areas.sum() == pytest.approx(1.0)


def test_sample_msh_mesh():
    """Physical names of boundary lines become region labels"""
    mesh = import_mesh(MESH_DIR / "square.msh")
    assert mesh.n_triangles == 4
    assert mesh.region_labels == ["support"]
    assert len(mesh.edges_with_tag("support")) == 4


def test_triangle_reader_reorients_clockwise_triangles(tmp_path):
    """Element 2 is listed clockwise in the file"""
    mesh = read_triangle(_write_triangle(tmp_path))
    assert (mesh.areas > 0).all()
    mesh.validate()


def test_triangle_reader_from_ele_path(tmp_path):
    _write_triangle(tmp_path)
    mesh = import_mesh(tmp_path / "plate.ele", mesh_format="triangle_node_ele")
    assert mesh.n_triangles == 2


def test_vertex_markers_tag_boundary_edges_only(tmp_path, caplog):
    """The diagonal joins two marked vertices but is interior"""
    with caplog.at_level(logging.WARNING, logger="platelimit.mesh"):
        mesh = read_triangle(_write_triangle(tmp_path))
    assert len(mesh.edges_with_tag("1")) == 4
    assert "not boundary edges" not in caplog.text


def test_triangle_edge_file_overrides_markers(tmp_path):
    path = _write_triangle(tmp_path)
    (tmp_path / "plate.edge").write_text("2 1\n1 1 2 7\n2 3 4 9\n")
    mesh = read_triangle(path)
    assert mesh.region_labels == ["7", "9", "untagged"]


def test_node_parse_error_reports_line_number(tmp_path):
    """Line numbers count every raw line, comments included"""
    bad = NODE_TEXT.replace("2 1.0 0.0 1", "2 1.0 zero 1")
    with pytest.raises(MeshParseError) as excinfo:
        read_triangle(_write_triangle(tmp_path, node_text=bad))
    assert excinfo.value.line_number == 4
    assert "plate.node:4" in str(excinfo.value)


def test_ele_unknown_node(tmp_path):
    with pytest.raises(MeshParseError) as excinfo:
        read_triangle(_write_triangle(tmp_path, ele_text="1 3 0\n1 1 2 9\n"))
    assert excinfo.value.line_number == 2
    assert "unknown node 9" in str(excinfo.value)


def test_truncated_node_file(tmp_path):
    with pytest.raises(MeshParseError, match="unexpected end of file"):
        read_triangle(_write_triangle(tmp_path, node_text="3 2 0 0\n1 0 0\n"))


class TestMsh2Reader:
    """Gmsh 2.2 ASCII parsing"""

    def _write(self, tmp_path: Path, text: str) -> Path:
        path = tmp_path / "plate.msh"
        path.write_text(text)
        return path

    def test_round_trip_of_sample_content(self, tmp_path):
        text = (MESH_DIR / "square.msh").read_text()
        mesh = read_msh2(self._write(tmp_path, text))
        np.testing.assert_allclose(sorted(mesh.areas), [0.25] * 4)

    def test_binary_rejected(self, tmp_path):
        path = self._write(tmp_path, "$MeshFormat\n2.2 1 8\n$EndMeshFormat\n")
        with pytest.raises(MeshParseError, match="binary") as excinfo:
            read_msh2(path)
        assert excinfo.value.line_number == 2

    def test_unsupported_version(self, tmp_path):
        path = self._write(tmp_path, "$MeshFormat\n4.1 0 8\n$EndMeshFormat\n")
        with pytest.raises(MeshParseError, match="unsupported MSH version"):
            read_msh2(path)

    def test_missing_nodes(self, tmp_path):
        path = self._write(tmp_path, "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
        with pytest.raises(MeshParseError, match="missing \\$Nodes"):
            read_msh2(path)

    def test_unknown_sections_are_skipped(self, tmp_path):
        text = (MESH_DIR / "square.msh").read_text() + "$NodeData\n1\n\"u\"\n$EndNodeData\n"
        mesh = read_msh2(self._write(tmp_path, text))
        assert mesh.n_triangles == 4

    def test_unsupported_element_type(self, tmp_path):
        text = (
            "$MeshFormat\n2.2 0 8\n$EndMeshFormat\n"
            "$Nodes\n3\n1 0 0 0\n2 1 0 0\n3 0 1 0\n$EndNodes\n"
            "$Elements\n1\n1 3 2 1 1 1 2 3\n$EndElements\n"
        )
        with pytest.raises(MeshParseError, match="unsupported element type 3") as excinfo:
            read_msh2(self._write(tmp_path, text))
        assert excinfo.value.line_number == 12


def test_import_validates(tmp_path):
    """A hanging node read from file fails validation"""
    node = "5 2 0 0\n1 0 0\n2 2 0\n3 2 2\n4 0 2\n5 1 1\n"
    ele = "3 3 0\n1 1 2 3\n2 1 5 4\n3 5 3 4\n"
    with pytest.raises(MeshValidationError, match="hanging"):
        import_mesh(_write_triangle(tmp_path, node, ele))


def test_import_unknown_format(tmp_path):
    with pytest.raises(InvalidArgumentError):
        import_mesh(tmp_path / "plate.off")
    with pytest.raises(InvalidArgumentError):
        import_mesh(tmp_path / "plate.msh", mesh_format="obj")
