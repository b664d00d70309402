"""Triangulations of convex polygonal plates with tagged boundary regions."""

import logging
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree
from scipy.spatial.distance import pdist

from platelimit.constants import PATTERN_CROSSED, PATTERN_DIAG, UNTAGGED
from platelimit.exceptions import InvalidArgumentError, MeshValidationError
from platelimit.geometry import (
    incircle_diameters,
    orient2d,
    orient2d_many,
    signed_areas,
    triangle_diameters,
)

logger = logging.getLogger(__name__)

EdgeKey = Tuple[int, int]

# Local edge k of a triangle joins local vertices k and (k + 1) % 3.
LOCAL_EDGES = np.array([[0, 1], [1, 2], [2, 0]])


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.ascontiguousarray(array)
    array.flags.writeable = False
    return array


class Mesh:
    """Immutable conforming triangulation with edge topology.

    Attributes:
        vertices: (V, 2) coordinates.
        triangles: (F, 3) counter-clockwise vertex indices.
        edges: (E, 2) vertex pairs, sorted within each pair, lexicographic order.
        edge_triangles: (E, 2) incident triangles, lower index first, -1 on the boundary.
        triangle_edges: (F, 3) global edge index of each local edge.
        edge_normals: (E, 2) unit normals pointing out of ``edge_triangles[:, 0]``;
            for boundary edges this is the outward normal.
        boundary_tags: boundary edge index -> region label.
    """

    def __init__(
        self,
        vertices: np.ndarray,
        triangles: np.ndarray,
        edge_tags: Optional[Mapping[EdgeKey, str]] = None,
    ):
        vertices = np.asarray(vertices, dtype=float).reshape(-1, 2)
        triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise MeshValidationError(
                "triangle references a missing vertex",
                [f"vertex indices must lie in [0, {len(vertices) - 1}]"],
            )
        duplicates = _duplicate_triangle_issues(triangles)
        if duplicates:
            raise MeshValidationError("duplicated triangles", duplicates)
        self.vertices = _frozen(vertices)
        self.triangles = _frozen(triangles)
        self._build_topology()
        self._assign_tags(edge_tags or {})
        logger.debug(
            f"Mesh built: {self.n_vertices} vertices, {self.n_triangles} triangles, "
            f"{self.n_edges} edges ({len(self.boundary_edges)} on the boundary)"
        )

    # ------------------------------------------------------------------ topology
    def _build_topology(self) -> None:
        n_tri = len(self.triangles)
        local = self.triangles[:, LOCAL_EDGES].reshape(-1, 2)
        keys = np.sort(local, axis=1)
        if n_tri == 0:
            edges = np.zeros((0, 2), dtype=np.int64)
            inverse = np.zeros(0, dtype=np.int64)
        else:
            edges, inverse = np.unique(keys, axis=0, return_inverse=True)
            inverse = inverse.reshape(-1)
        counts = np.bincount(inverse, minlength=len(edges))
        overfull = np.flatnonzero(counts > 2)
        if overfull.size:
            raise MeshValidationError(
                "edges shared by more than two triangles",
                [
                    f"edge ({edges[e, 0]}, {edges[e, 1]}) has {counts[e]} incident triangles"
                    for e in overfull
                ],
            )

        owner = np.repeat(np.arange(n_tri), 3)
        order = np.argsort(inverse, kind="stable")
        starts = np.concatenate(([0], np.cumsum(counts)[:-1])) if len(edges) else counts
        edge_triangles = np.full((len(edges), 2), -1, dtype=np.int64)
        if len(edges):
            edge_triangles[:, 0] = owner[order[starts]]
            shared = counts == 2
            edge_triangles[shared, 1] = owner[order[starts[shared] + 1]]

        self.edges = _frozen(edges)
        self.edge_triangles = _frozen(edge_triangles)
        self.triangle_edges = _frozen(inverse.reshape(n_tri, 3))

        pa = self.vertices[edges[:, 0]]
        pb = self.vertices[edges[:, 1]]
        tangent = pb - pa
        lengths = np.linalg.norm(tangent, axis=1)
        safe = np.where(lengths > 0, lengths, 1.0)
        normals = np.column_stack((tangent[:, 1], -tangent[:, 0])) / safe[:, None]
        if len(edges):
            owner_vertices = self.triangles[edge_triangles[:, 0]]
            opposite = owner_vertices.sum(axis=1) - edges.sum(axis=1)
            inward = np.einsum("ij,ij->i", normals, self.vertices[opposite] - pa)
            normals[inward > 0] *= -1.0
        self.edge_lengths = _frozen(lengths)
        self.edge_normals = _frozen(normals)

    def _assign_tags(self, edge_tags: Mapping[EdgeKey, str]) -> None:
        lookup = {(int(a), int(b)): e for e, (a, b) in enumerate(self.edges)}
        tags: Dict[int, str] = {}
        for e in self.boundary_edges:
            tags[int(e)] = UNTAGGED
        dropped: Dict[str, int] = {}
        for (a, b), label in edge_tags.items():
            key = (min(a, b), max(a, b))
            e = lookup.get(key)
            if e is None or self.edge_triangles[e, 1] >= 0:
                dropped[str(label)] = dropped.get(str(label), 0) + 1
                continue
            tags[e] = str(label)
        for label, count in sorted(dropped.items()):
            logger.warning(f"Region {label!r}: {count} tagged edge(s) are not boundary edges and keep no tag")
        self.boundary_tags: Dict[int, str] = tags

    # ---------------------------------------------------------------- measures
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def boundary_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_triangles[:, 1] < 0)

    @property
    def interior_edges(self) -> np.ndarray:
        return np.flatnonzero(self.edge_triangles[:, 1] >= 0)

    @property
    def areas(self) -> np.ndarray:
        return signed_areas(self.vertices, self.triangles)

    @property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @property
    def edge_midpoints(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.edges[:, 0]] + self.vertices[self.edges[:, 1]])

    @property
    def region_labels(self) -> List[str]:
        return sorted(set(self.boundary_tags.values()))

    def edges_with_tag(self, label: str) -> np.ndarray:
        return np.array(
            sorted(e for e, tag in self.boundary_tags.items() if tag == label), dtype=np.int64
        )

    def edge_tag_map(self) -> Dict[EdgeKey, str]:
        """Boundary tags keyed by sorted vertex pair."""
        return {
            (int(self.edges[e, 0]), int(self.edges[e, 1])): tag
            for e, tag in self.boundary_tags.items()
        }

    # -------------------------------------------------------------- validation
    def validate(self, domain_area: Optional[float] = None) -> "Mesh":
        """Check every mesh invariant and raise :class:`MeshValidationError` on failure.

        Args:
            domain_area: Area of the closed domain. Defaults to the area of the
                convex hull of the vertices, since supported domains are convex.
        """
        issues: List[str] = []
        if self.n_triangles == 0:
            raise MeshValidationError("invalid mesh", ["mesh has no triangles"])

        p = self.vertices[self.triangles]
        signs = orient2d_many(p[:, 0], p[:, 1], p[:, 2])
        for t in np.flatnonzero(signs == 0):
            issues.append(f"triangle {t} {self.triangles[t].tolist()} is degenerate (zero area)")
        for t in np.flatnonzero(signs < 0):
            issues.append(f"triangle {t} {self.triangles[t].tolist()} is clockwise")

        used = np.zeros(self.n_vertices, dtype=bool)
        used[self.triangles.ravel()] = True
        for v in np.flatnonzero(~used):
            issues.append(f"vertex {v} belongs to no triangle")

        issues.extend(self._hanging_vertex_issues())

        euler = self.n_vertices - self.n_edges + self.n_triangles
        if euler != 1:
            issues.append(
                f"Euler relation V - E + F = {self.n_vertices} - {self.n_edges} + "
                f"{self.n_triangles} = {euler}, expected 1"
            )

        if not issues:
            if domain_area is None:
                domain_area = _hull_area(self.vertices)
            total = float(self.areas.sum())
            if abs(total - domain_area) > 1e-12 * max(abs(domain_area), 1.0):
                issues.append(
                    f"triangles cover area {total!r}, domain area is {domain_area!r}"
                )

        if issues:
            raise MeshValidationError("invalid mesh", issues)
        return self

    def _hanging_vertex_issues(self) -> List[str]:
        if self.n_edges == 0:
            return []
        tree = cKDTree(self.vertices)
        midpoints = self.edge_midpoints
        radii = 0.5 * self.edge_lengths * (1.0 + 1e-9)
        candidates = tree.query_ball_point(midpoints, radii)
        issues = []
        for e, near in enumerate(candidates):
            a, b = self.edges[e]
            pa, pb = self.vertices[a], self.vertices[b]
            for v in near:
                if v == a or v == b:
                    continue
                pv = self.vertices[v]
                if orient2d(pa, pb, pv) != 0:
                    continue
                t = np.dot(pv - pa, pb - pa)
                if 0.0 < t < np.dot(pb - pa, pb - pa):
                    issues.append(
                        f"vertex {v} lies in the interior of edge ({a}, {b}) (hanging node)"
                    )
        return issues

    # ------------------------------------------------------------ derivations
    def transformed(self, angle: float = 0.0, translation: Sequence[float] = (0.0, 0.0)) -> "Mesh":
        """Rigidly rotated (counter-clockwise, radians) and translated copy."""
        c, s = np.cos(angle), np.sin(angle)
        rotation = np.array([[c, -s], [s, c]])
        moved = self.vertices @ rotation.T + np.asarray(translation, dtype=float)
        return Mesh(moved, self.triangles, self.edge_tag_map())


def _duplicate_triangle_issues(triangles: np.ndarray) -> List[str]:
    if len(triangles) < 2:
        return []
    keys = np.sort(triangles, axis=1)
    _, first, counts = np.unique(keys, axis=0, return_index=True, return_counts=True)
    return [
        f"triangle {t} {tuple(int(v) for v in triangles[t])} is duplicated {c} times"
        for t, c in zip(first, counts)
        if c > 1
    ]


def _hull_area(points: np.ndarray) -> float:
    try:
        return float(ConvexHull(points).volume)
    except (QhullError, ValueError):
        return 0.0


def generate_rect_mesh(
    width: float, height: float, nx: int, ny: int, pattern: str = PATTERN_CROSSED
) -> Mesh:
    """Structured mesh of [0, width] x [0, height].

    ``diag`` splits each cell along its (i, j)-(i+1, j+1) diagonal, ``crossed``
    splits it into four triangles through the cell centre. Boundary edges are
    tagged ``left``, ``right``, ``bottom`` and ``top``.
    """
    if width <= 0 or height <= 0:
        raise InvalidArgumentError(f"plate dimensions must be positive, got {width} x {height}")
    if nx < 1 or ny < 1:
        raise InvalidArgumentError(f"cell counts must be at least 1, got nx={nx}, ny={ny}")
    if pattern not in (PATTERN_DIAG, PATTERN_CROSSED):
        raise InvalidArgumentError(f"unknown mesh pattern {pattern!r}")

    xs = np.linspace(0.0, width, nx + 1)
    ys = np.linspace(0.0, height, ny + 1)
    gx, gy = np.meshgrid(xs, ys)
    vertices = np.column_stack((gx.ravel(), gy.ravel()))

    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    i, j = i.ravel(), j.ravel()
    v00 = j * (nx + 1) + i
    v10 = v00 + 1
    v01 = v00 + nx + 1
    v11 = v01 + 1

    if pattern == PATTERN_DIAG:
        triangles = np.stack(
            (np.column_stack((v00, v10, v11)), np.column_stack((v00, v11, v01))), axis=1
        ).reshape(-1, 3)
    else:
        centres = np.column_stack(((xs[i] + xs[i + 1]) / 2, (ys[j] + ys[j + 1]) / 2))
        c = len(vertices) + np.arange(nx * ny)
        vertices = np.vstack((vertices, centres))
        triangles = np.stack(
            (
                np.column_stack((v00, v10, c)),
                np.column_stack((v10, v11, c)),
                np.column_stack((v11, v01, c)),
                np.column_stack((v01, v00, c)),
            ),
            axis=1,
        ).reshape(-1, 3)

    tags: Dict[EdgeKey, str] = {}
    for k in range(nx):
        tags[(k, k + 1)] = "bottom"
        top = ny * (nx + 1) + k
        tags[(top, top + 1)] = "top"
    for k in range(ny):
        left = k * (nx + 1)
        tags[(left, left + nx + 1)] = "left"
        tags[(left + nx, left + 2 * nx + 1)] = "right"

    mesh = Mesh(vertices, triangles, tags)
    mesh.validate(domain_area=width * height)
    return mesh


def refine_uniform(mesh: Mesh) -> Mesh:
    """Red refinement: every triangle is split into four through its edge midpoints."""
    n_v = mesh.n_vertices
    vertices = np.vstack((mesh.vertices, mesh.edge_midpoints))
    a, b, c = mesh.triangles.T
    m_ab, m_bc, m_ca = (n_v + mesh.triangle_edges).T
    triangles = np.stack(
        (
            np.column_stack((a, m_ab, m_ca)),
            np.column_stack((m_ab, b, m_bc)),
            np.column_stack((m_ca, m_bc, c)),
            np.column_stack((m_ab, m_bc, m_ca)),
        ),
        axis=1,
    ).reshape(-1, 3)
    tags: Dict[EdgeKey, str] = {}
    for e, label in mesh.boundary_tags.items():
        p, q = mesh.edges[e]
        mid = n_v + e
        tags[(int(p), mid)] = label
        tags[(mid, int(q))] = label
    refined = Mesh(vertices, triangles, tags)
    refined.validate(domain_area=float(mesh.areas.sum()))
    return refined


def nondegeneracy_ratio(mesh: Mesh) -> float:
    """Minimum over triangles of incircle diameter / triangle diameter."""
    if mesh.n_triangles == 0:
        raise MeshValidationError("invalid mesh", ["mesh has no triangles"])
    p = mesh.vertices[mesh.triangles]
    signs = orient2d_many(p[:, 0], p[:, 1], p[:, 2])
    degenerate = np.flatnonzero(signs == 0)
    if degenerate.size:
        raise MeshValidationError(
            "degenerate triangles", [f"triangle {t} has zero area" for t in degenerate]
        )
    ratios = incircle_diameters(mesh.vertices, mesh.triangles) / triangle_diameters(
        mesh.vertices, mesh.triangles
    )
    return float(ratios.min())


def mesh_diameter(mesh: Mesh) -> float:
    """Diameter of the meshed domain (largest distance between boundary vertices)."""
    boundary_vertices = np.unique(mesh.edges[mesh.boundary_edges].ravel())
    points = mesh.vertices[boundary_vertices]
    if len(points) > 64:
        try:
            points = points[ConvexHull(points).vertices]
        except (QhullError, ValueError):
            pass
    return float(pdist(points).max()) if len(points) > 1 else 0.0


def mesh_size(mesh: Mesh, domain_diameter: Optional[float] = None) -> float:
    """Largest triangle diameter relative to the domain diameter."""
    if mesh.n_triangles == 0:
        raise MeshValidationError("invalid mesh", ["mesh has no triangles"])
    if domain_diameter is None:
        domain_diameter = mesh_diameter(mesh)
    if domain_diameter <= 0:
        raise InvalidArgumentError(f"domain diameter must be positive, got {domain_diameter}")
    return float(triangle_diameters(mesh.vertices, mesh.triangles).max() / domain_diameter)
