"""Vectorised algebra on products of free, nonnegative and second-order cones.

Second-order cones use the convention x = (x0, x1) with x0 >= ||x1||. All
operations act on full-length vectors; second-order blocks of equal
dimension are processed together.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Sequence, Tuple

import numpy as np

from platelimit.exceptions import InvalidArgumentError


class ConeKind(Enum):
    FREE = "free"
    NONNEG = "nonneg"
    SOC = "soc"


@dataclass(frozen=True)
class Cone:
    kind: ConeKind
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidArgumentError(f"cone dimension must be positive, got {self.dim}")
        if self.kind is ConeKind.SOC and self.dim < 2:
            raise InvalidArgumentError(f"second-order cones need dimension >= 2, got {self.dim}")

    def to_dict(self) -> Dict[str, object]:
        return {"kind": self.kind.value, "dim": self.dim}


def free(dim: int) -> Cone:
    return Cone(ConeKind.FREE, dim)


def nonneg(dim: int) -> Cone:
    return Cone(ConeKind.NONNEG, dim)


def soc(dim: int) -> Cone:
    return Cone(ConeKind.SOC, dim)


def merge_cones(cones: Sequence[Cone]) -> List[Cone]:
    """Fuse adjacent free or nonnegative blocks; second-order cones stay separate."""
    merged: List[Cone] = []
    for cone in cones:
        if merged and cone.kind is not ConeKind.SOC and merged[-1].kind is cone.kind:
            merged[-1] = Cone(cone.kind, merged[-1].dim + cone.dim)
        else:
            merged.append(cone)
    return merged


class ConeLayout:
    """Index bookkeeping for a cone product partitioning n variables."""

    def __init__(self, cones: Sequence[Cone]):
        self.cones = list(cones)
        free_idx: List[np.ndarray] = []
        nonneg_idx: List[np.ndarray] = []
        soc_starts: Dict[int, List[int]] = {}
        offset = 0
        for cone in self.cones:
            block = np.arange(offset, offset + cone.dim)
            if cone.kind is ConeKind.FREE:
                free_idx.append(block)
            elif cone.kind is ConeKind.NONNEG:
                nonneg_idx.append(block)
            else:
                soc_starts.setdefault(cone.dim, []).append(offset)
            offset += cone.dim
        self.n = offset
        self.free = np.concatenate(free_idx) if free_idx else np.zeros(0, dtype=np.int64)
        self.nonneg = np.concatenate(nonneg_idx) if nonneg_idx else np.zeros(0, dtype=np.int64)
        self.soc_groups: List[Tuple[int, np.ndarray]] = [
            (dim, np.asarray(starts)[:, None] + np.arange(dim)[None, :])
            for dim, starts in sorted(soc_starts.items())
        ]
        self.n_soc = sum(len(idx) for _, idx in self.soc_groups)
        self.degree = len(self.nonneg) + self.n_soc
        self.constrained = np.ones(self.n, dtype=bool)
        self.constrained[self.free] = False

    def identity(self) -> np.ndarray:
        e = np.zeros(self.n)
        e[self.nonneg] = 1.0
        for _, idx in self.soc_groups:
            e[idx[:, 0]] = 1.0
        return e

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        """Inner product restricted to the constrained (non-free) entries."""
        return float(u[self.constrained] @ v[self.constrained])

    def jordan_product(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = np.zeros(self.n)
        out[self.nonneg] = u[self.nonneg] * v[self.nonneg]
        for _, idx in self.soc_groups:
            U, V = u[idx], v[idx]
            out[idx[:, 0]] = np.einsum("kd,kd->k", U, V)
            out[idx[:, 1:]] = U[:, :1] * V[:, 1:] + V[:, :1] * U[:, 1:]
        return out

    def jordan_divide(self, lam: np.ndarray, r: np.ndarray) -> np.ndarray:
        """Solve lam o d = r for d, with lam in the interior of the cone."""
        out = np.zeros(self.n)
        out[self.nonneg] = r[self.nonneg] / lam[self.nonneg]
        for _, idx in self.soc_groups:
            L, R = lam[idx], r[idx]
            l0, l1 = L[:, 0], L[:, 1:]
            r0, r1 = R[:, 0], R[:, 1:]
            det = l0**2 - np.einsum("kd,kd->k", l1, l1)
            d0 = (l0 * r0 - np.einsum("kd,kd->k", l1, r1)) / det
            out[idx[:, 0]] = d0
            out[idx[:, 1:]] = (r1 - d0[:, None] * l1) / l0[:, None]
        return out

    def interior_margin(self, x: np.ndarray) -> float:
        """min over blocks of x_i (orthant) or x0 - ||x1|| (second-order)."""
        margins = [np.inf]
        if self.nonneg.size:
            margins.append(float(x[self.nonneg].min()))
        for _, idx in self.soc_groups:
            X = x[idx]
            margins.append(float((X[:, 0] - np.linalg.norm(X[:, 1:], axis=1)).min()))
        return min(margins)

    def max_step(self, x: np.ndarray, dx: np.ndarray) -> float:
        """Largest alpha >= 0 keeping x + alpha dx in the cone (inf when unbounded)."""
        alpha = np.inf
        if self.nonneg.size:
            d = dx[self.nonneg]
            neg = d < 0
            if neg.any():
                alpha = min(alpha, float((-x[self.nonneg][neg] / d[neg]).min()))
        for _, idx in self.soc_groups:
            U, D = x[idx], dx[idx]
            a = D[:, 0] ** 2 - np.einsum("kd,kd->k", D[:, 1:], D[:, 1:])
            b = U[:, 0] * D[:, 0] - np.einsum("kd,kd->k", U[:, 1:], D[:, 1:])
            c = U[:, 0] ** 2 - np.einsum("kd,kd->k", U[:, 1:], U[:, 1:])
            disc = b**2 - a * c
            hits = (a < 0) | ((b < 0) & (disc >= 0))
            if hits.any():
                root = np.sqrt(np.maximum(disc[hits], 0.0))
                steps = c[hits] / (-b[hits] + root)
                alpha = min(alpha, float(steps.min()))
        return alpha

    def project(self, x: np.ndarray) -> np.ndarray:
        """Euclidean projection onto the cone (free entries unchanged)."""
        out = x.copy()
        out[self.nonneg] = np.maximum(x[self.nonneg], 0.0)
        for _, idx in self.soc_groups:
            X = x[idx]
            t, v = X[:, 0], X[:, 1:]
            norm = np.linalg.norm(v, axis=1)
            P = X.copy()
            below = norm <= -t
            P[below] = 0.0
            between = (norm > np.abs(t)) & ~below
            if between.any():
                scale = 0.5 * (t[between] + norm[between])
                P[between, 0] = scale
                P[between, 1:] = scale[:, None] * v[between] / norm[between, None]
            out[idx] = P
        return out

    def distance(self, x: np.ndarray) -> float:
        return float(np.linalg.norm(x - self.project(x)))

    def dual_distance(self, z: np.ndarray) -> float:
        """Distance to the dual cone: {0} on free blocks, self-dual elsewhere."""
        projected = self.project(z)
        projected[self.free] = 0.0
        return float(np.linalg.norm(z - projected))


class NumericalTrouble(ArithmeticError):
    """An iterate left the interior of the cone."""


@dataclass
class NTScaling:
    """Nesterov-Todd scaling W with W z = W^{-1} x = lam.

    Orthant: W = diag(sqrt(x / z)). Second-order block:
    W = beta (2 v v^T - J) with v = (wbar + e) / sqrt(2 (wbar0 + 1)).
    """

    layout: ConeLayout
    w_nonneg: np.ndarray
    soc_v: List[np.ndarray]  # per group (k, d)
    soc_beta: List[np.ndarray]  # per group (k,)
    lam: np.ndarray

    def apply_w(self, u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u)
        out[self.layout.nonneg] = self.w_nonneg * u[self.layout.nonneg]
        for (_, idx), v, beta in zip(self.layout.soc_groups, self.soc_v, self.soc_beta):
            U = u[idx]
            vu = np.einsum("kd,kd->k", v, U)
            JU = U.copy()
            JU[:, 1:] *= -1.0
            out[idx] = beta[:, None] * (2.0 * v * vu[:, None] - JU)
        return out

    def apply_winv(self, u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u)
        out[self.layout.nonneg] = u[self.layout.nonneg] / self.w_nonneg
        for (_, idx), v, beta in zip(self.layout.soc_groups, self.soc_v, self.soc_beta):
            U = u[idx]
            Jv = v.copy()
            Jv[:, 1:] *= -1.0
            JU = U.copy()
            JU[:, 1:] *= -1.0
            vJu = np.einsum("kd,kd->k", Jv, U)
            out[idx] = (2.0 * Jv * vJu[:, None] - JU) / beta[:, None]
        return out

    def hessian_blocks(self) -> Tuple[np.ndarray, List[np.ndarray]]:
        """W^{-2}: diagonal entries on the orthant and dense (k, d, d) blocks per group."""
        diag = 1.0 / self.w_nonneg**2
        blocks = []
        for (dim, _), v, beta in zip(self.layout.soc_groups, self.soc_v, self.soc_beta):
            Jv = v.copy()
            Jv[:, 1:] *= -1.0
            J = np.diag(np.concatenate(([1.0], -np.ones(dim - 1))))
            winv = (2.0 * np.einsum("ki,kj->kij", Jv, Jv) - J[None]) / beta[:, None, None]
            blocks.append(np.einsum("kij,kjl->kil", winv, winv))
        return diag, blocks


def nt_scaling(layout: ConeLayout, x: np.ndarray, z: np.ndarray) -> NTScaling:
    xn, zn = x[layout.nonneg], z[layout.nonneg]
    if xn.size and (xn.min() <= 0 or zn.min() <= 0):
        raise NumericalTrouble("orthant iterate on the boundary")
    w_nonneg = np.sqrt(xn / zn)
    soc_v, soc_beta = [], []
    for _, idx in layout.soc_groups:
        X, Z = x[idx], z[idx]
        xjx = X[:, 0] ** 2 - np.einsum("kd,kd->k", X[:, 1:], X[:, 1:])
        zjz = Z[:, 0] ** 2 - np.einsum("kd,kd->k", Z[:, 1:], Z[:, 1:])
        if (xjx <= 0).any() or (zjz <= 0).any() or (X[:, 0] <= 0).any() or (Z[:, 0] <= 0).any():
            raise NumericalTrouble("second-order iterate on the boundary")
        sbar = X / np.sqrt(xjx)[:, None]
        zbar = Z / np.sqrt(zjz)[:, None]
        gamma = np.sqrt(0.5 * (1.0 + np.einsum("kd,kd->k", sbar, zbar)))
        Jz = zbar.copy()
        Jz[:, 1:] *= -1.0
        wbar = (sbar + Jz) / (2.0 * gamma[:, None])
        v = wbar.copy()
        v[:, 0] += 1.0
        v /= np.sqrt(2.0 * (wbar[:, 0] + 1.0))[:, None]
        soc_v.append(v)
        soc_beta.append((xjx / zjz) ** 0.25)
    scaling = NTScaling(layout, w_nonneg, soc_v, soc_beta, np.zeros(layout.n))
    scaling.lam = scaling.apply_w(z)
    return scaling
