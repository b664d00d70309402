"""Robust planar predicates and small triangle measures."""

from fractions import Fraction
from typing import Sequence

import numpy as np

# Shewchuk's static error bound for the 2x2 orientation determinant.
_CCW_ERRBOUND = (3.0 + 16.0 * np.finfo(float).eps) * np.finfo(float).eps


def _orient2d_exact(a: Sequence[float], b: Sequence[float], c: Sequence[float]) -> int:
    ax, ay = Fraction(a[0]), Fraction(a[1])
    bx, by = Fraction(b[0]), Fraction(b[1])
    cx, cy = Fraction(c[0]), Fraction(c[1])
    det = (ax - cx) * (by - cy) - (ay - cy) * (bx - cx)
    return (det > 0) - (det < 0)


def orient2d(a: Sequence[float], b: Sequence[float], c: Sequence[float]) -> int:
    """Sign of the signed area of (a, b, c): +1 counter-clockwise, -1 clockwise, 0 collinear.

    The floating-point determinant is trusted only when it clears the
    forward error bound; otherwise the sign is recomputed in exact
    rational arithmetic.
    """
    detleft = (a[0] - c[0]) * (b[1] - c[1])
    detright = (a[1] - c[1]) * (b[0] - c[0])
    det = detleft - detright
    errbound = _CCW_ERRBOUND * (abs(detleft) + abs(detright))
    if det > errbound:
        return 1
    if -det > errbound:
        return -1
    return _orient2d_exact(a, b, c)


def orient2d_many(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Vectorized :func:`orient2d` over rows of (N, 2) arrays."""
    detleft = (a[:, 0] - c[:, 0]) * (b[:, 1] - c[:, 1])
    detright = (a[:, 1] - c[:, 1]) * (b[:, 0] - c[:, 0])
    det = detleft - detright
    errbound = _CCW_ERRBOUND * (np.abs(detleft) + np.abs(detright))
    signs = np.where(det > errbound, 1, np.where(-det > errbound, -1, 0))
    uncertain = np.flatnonzero(np.abs(det) <= errbound)
    for i in uncertain:
        signs[i] = _orient2d_exact(a[i], b[i], c[i])
    return signs.astype(int)


def signed_areas(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Signed area of every triangle (positive for counter-clockwise)."""
    p0 = points[triangles[:, 0]]
    p1 = points[triangles[:, 1]]
    p2 = points[triangles[:, 2]]
    return 0.5 * (
        (p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
        - (p1[:, 1] - p0[:, 1]) * (p2[:, 0] - p0[:, 0])
    )


def edge_lengths(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """(F, 3) lengths of local edges (v0,v1), (v1,v2), (v2,v0)."""
    p = points[triangles]
    return np.linalg.norm(p[:, [1, 2, 0]] - p, axis=2)


def triangle_diameters(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Diameter (longest edge) of every triangle."""
    return edge_lengths(points, triangles).max(axis=1)


def incircle_diameters(points: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Diameter of the inscribed circle of every triangle: 4|T| / perimeter."""
    perimeter = edge_lengths(points, triangles).sum(axis=1)
    return 4.0 * np.abs(signed_areas(points, triangles)) / perimeter
