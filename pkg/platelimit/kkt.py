"""Quasi-definite KKT systems of the interior-point method, factorised with QDLDL.

The system is

    [ H + d I    A^T  ] [ dx ]   [ r_x ]
    [ A         -d I  ] [ w  ] = [ r_y ]

where H is the block-diagonal Nesterov-Todd Hessian (zero on free
variables) and d the static regularisation. The sparsity pattern never
changes between iterations: it is fixed once, converted to CSC once, and
only the values are refreshed before each numerical factorisation.
"""

import logging
from typing import List, Tuple

import numpy as np
import qdldl
import scipy.sparse as sp

from platelimit.cones import ConeLayout, NTScaling
from platelimit.constants import KKT_REGULARIZATION

logger = logging.getLogger(__name__)


class KKTFactorizationError(ArithmeticError):
    """The regularised KKT matrix could not be factorised."""


class KKTSolver:
    def __init__(
        self,
        A: sp.csr_matrix,
        layout: ConeLayout,
        regularization: float = KKT_REGULARIZATION,
        refinement_tolerance: float = 1e-6,
    ):
        self.A = A.tocsr()
        self.m, self.n = self.A.shape
        self.layout = layout
        self.regularization = regularization
        self.refinement_tolerance = refinement_tolerance
        self._build_pattern()
        self._solver = None
        self._fresh = False
        self.factorizations = 0

    def _build_pattern(self) -> None:
        n, m = self.n, self.m
        layout = self.layout
        rows: List[np.ndarray] = []
        cols: List[np.ndarray] = []

        soc_members = np.zeros(n, dtype=bool)
        for _, idx in layout.soc_groups:
            soc_members[idx.ravel()] = True
        self._diag_idx = np.flatnonzero(~soc_members)
        rows.append(self._diag_idx)
        cols.append(self._diag_idx)
        for _, idx in layout.soc_groups:
            d = idx.shape[1]
            rows.append(np.repeat(idx, d, axis=1).ravel())
            cols.append(np.tile(idx, (1, d)).ravel())

        a = self.A.tocoo()
        rows.extend((n + a.row, a.col, n + np.arange(m)))
        cols.extend((a.col, n + a.row, n + np.arange(m)))

        rows_all = np.concatenate(rows).astype(np.int64)
        cols_all = np.concatenate(cols).astype(np.int64)
        self._a_data = np.concatenate((a.data, a.data))
        placeholder = np.arange(1, len(rows_all) + 1, dtype=float)
        pattern = sp.csc_matrix((placeholder, (rows_all, cols_all)), shape=(n + m, n + m))
        pattern.sort_indices()
        self._order = pattern.data.astype(np.int64) - 1
        self._pattern = pattern
        self._nonneg_pos = np.searchsorted(self._diag_idx, layout.nonneg)
        logger.debug(f"KKT pattern: dimension {n + m}, {pattern.nnz} stored entries")

    def _values(self, diag_h: np.ndarray, blocks: List[np.ndarray], delta: float) -> np.ndarray:
        diagonal = np.zeros(len(self._diag_idx))
        diagonal[self._nonneg_pos] = diag_h
        parts = [diagonal + delta]
        for (dim, _), block in zip(self.layout.soc_groups, blocks):
            parts.append((block + delta * np.eye(dim)[None]).ravel())
        parts.append(self._a_data)
        parts.append(np.full(self.m, -delta))
        return np.concatenate(parts)

    def _matrix(self, values: np.ndarray) -> sp.csc_matrix:
        K = self._pattern.copy()
        K.data = values[self._order]
        return K

    def factor(self, scaling: NTScaling) -> None:
        """Numerically factorise for the current scaling, raising the regularisation on failure."""
        diag_h, blocks = scaling.hessian_blocks()
        self._unregularized = self._matrix(self._values(diag_h, blocks, 0.0))
        delta = self.regularization
        for attempt in range(3):
            K = self._matrix(self._values(diag_h, blocks, delta))
            try:
                if self._solver is None or attempt > 0:
                    self._solver = qdldl.Solver(K)
                    self._fresh = True
                else:
                    self._solver.update(K)
                    self._fresh = False
                self.factorizations += 1
                self._delta = delta
                self._regularized = K
                return
            except (ValueError, RuntimeError) as exc:
                logger.debug(f"KKT factorisation failed with regularisation {delta:.1e}: {exc}")
                self._solver = None
                delta *= 100.0
        raise KKTFactorizationError("KKT matrix is numerically singular")

    def _refine(self, rhs: np.ndarray, sol: np.ndarray, steps: int) -> Tuple[np.ndarray, float]:
        for _ in range(steps):
            sol = sol + self._solver.solve(rhs - self._unregularized @ sol)
        final = rhs - self._unregularized @ sol
        return sol, np.linalg.norm(final, np.inf) / (1.0 + np.linalg.norm(rhs, np.inf))

    def solve(self, rhs_x: np.ndarray, rhs_y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Solve with one step of iterative refinement against the unregularised matrix.

        When refinement leaves a residual above tolerance the matrix is
        factorised from scratch and refined again.
        """
        rhs = np.concatenate((rhs_x, rhs_y))
        sol, error = self._refine(rhs, self._solver.solve(rhs), 1)
        if not error <= self.refinement_tolerance and not self._fresh:
            logger.debug(f"KKT refinement residual {error:.2e}; refactorising")
            self._solver = qdldl.Solver(self._regularized)
            self._fresh = True
            self.factorizations += 1
            sol, error = self._refine(rhs, self._solver.solve(rhs), 3)
        if not np.isfinite(error):
            raise KKTFactorizationError("KKT solve produced non-finite values")
        return sol[: self.n], sol[self.n :]
