"""Sparse CSR storage and the direct solver used for every time step.

Storage and factorisation are delegated to :mod:`scipy.sparse` (SuperLU with
a fill-reducing column ordering); this module pins down the canonical-form
and error contracts the rest of the package relies on.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

CsrMatrix = sp.csr_matrix


class SingularMatrixError(RuntimeError):
    """Raised when a system cannot be factorised."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


def canonical(a) -> sp.csr_matrix:
    """Return ``a`` as CSR with sorted, duplicate-free column indices."""
    a = sp.csr_matrix(a)
    a.sum_duplicates()
    a.sort_indices()
    return a


def from_triplets(n_rows: int, n_cols: int, rows, cols, values) -> sp.csr_matrix:
    """Build a canonical CSR matrix, summing duplicate ``(row, col)`` entries."""
    rows = np.asarray(rows, dtype=np.int64).ravel()
    cols = np.asarray(cols, dtype=np.int64).ravel()
    values = np.asarray(values, dtype=float).ravel()
    if not (len(rows) == len(cols) == len(values)):
        raise ValueError("triplet arrays differ in length")
    if len(rows):
        if rows.min() < 0 or rows.max() >= n_rows:
            bad = rows[(rows < 0) | (rows >= n_rows)][0]
            raise IndexError(f"row index {bad} out of range for {n_rows} rows")
        if cols.min() < 0 or cols.max() >= n_cols:
            bad = cols[(cols < 0) | (cols >= n_cols)][0]
            raise IndexError(f"column index {bad} out of range for {n_cols} columns")
    a = sp.coo_matrix((values, (rows, cols)), shape=(n_rows, n_cols)).tocsr()
    return canonical(a)


def matvec(a, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if a.shape[1] != len(x):
        raise ValueError(f"shape mismatch: matrix {a.shape}, vector {len(x)}")
    return np.asarray(a @ x).ravel()


def _zero_line(a: sp.csr_matrix):
    """First structurally empty row (or column) index, else None."""
    mag = np.abs(a.data)
    rows = np.repeat(np.arange(a.shape[0]), np.diff(a.indptr))
    for idx, size in ((rows, a.shape[0]), (a.indices, a.shape[1])):
        empty = np.flatnonzero(np.bincount(idx, weights=mag, minlength=size) == 0)
        if len(empty):
            return int(empty[0])
    return None


def nested_dissection(coords, leaf_size: int = 32, priority=None) -> np.ndarray:
    """Geometric nested-dissection ordering for unknowns on a structured lattice.

    ``coords`` are integer lattice coordinates (one row per unknown) such
    that no matrix coupling crosses a line of even coordinate without
    touching it; this holds for P2 nodes on the half-spacing lattice of a
    structured mesh.  Separators are ordered last; within a block, unknowns
    with smaller ``priority`` come first (pressure after velocity).
    """
    coords = np.asarray(coords)
    priority = np.zeros(len(coords)) if priority is None else np.asarray(priority)
    out = []

    def finish(idx):
        out.append(idx[np.argsort(priority[idx], kind="stable")])

    def split(idx):
        if len(idx) <= leaf_size:
            finish(idx)
            return
        c = coords[idx]
        extent = c.max(axis=0) - c.min(axis=0)
        ax = int(extent[1] > extent[0])
        line = 2 * int(round(np.median(c[:, ax]) / 2))
        left, right = idx[c[:, ax] < line], idx[c[:, ax] > line]
        if len(left) == 0 or len(right) == 0:
            finish(idx)
            return
        split(left)
        split(right)
        finish(idx[c[:, ax] == line])

    split(np.arange(len(coords)))
    return np.concatenate(out)


class LuSolver:
    """Sparse LU solves that reuse the last factorisation while the matrix is unchanged.

    Threshold partial pivoting: with ``ordering`` (a symmetric fill-reducing
    permutation) the matrix is permuted and factorised in SuperLU's
    symmetric mode, preferring diagonal pivots within ``pivot_threshold`` of
    the column maximum; otherwise COLAMD column ordering with full partial
    pivoting is used.  The residual is checked against
    ``1e-9 (|a|_F |x| + |b|)``; on a miss the solve is refined once and,
    failing that, repeated without the ordering.
    """

    def __init__(self, pivot_threshold: float = 0.01):
        self.pivot_threshold = pivot_threshold
        self._key = None
        self._solve = None
        self._anorm = None
        self.factorisations = 0

    def _same(self, a, ordering) -> bool:
        if self._key is None:
            return False
        ka, kord = self._key
        return (ka.shape == a.shape and ka.nnz == a.nnz and np.array_equal(ka.indptr, a.indptr)
                and np.array_equal(ka.indices, a.indices) and np.array_equal(ka.data, a.data)
                and (kord is ordering or (kord is not None and ordering is not None
                                          and np.array_equal(kord, ordering))))

    def _factor(self, a, perm):
        if perm is None:
            lu = spla.splu(a.tocsc(), permc_spec="COLAMD")
            return lu.solve
        pa = a[perm][:, perm].tocsc()
        lu = spla.splu(pa, permc_spec="NATURAL", diag_pivot_thresh=self.pivot_threshold,
                       options=dict(SymmetricMode=True))
        inv = np.empty_like(perm)
        inv[perm] = np.arange(len(perm))
        return lambda rhs: lu.solve(rhs[perm])[inv]

    def _checked(self, a, b, solve, anorm):
        x = solve(b)
        if not np.all(np.isfinite(x)):
            return None, SingularMatrixError("LU solve produced non-finite values (numerically singular matrix)")
        bound = 1e-9 * (anorm * np.linalg.norm(x) + np.linalg.norm(b))
        r = b - a @ x
        if np.linalg.norm(r) > bound:
            x = x + solve(r)
            r = b - a @ x
        if np.linalg.norm(r) <= bound:
            return x, None
        return None, SingularMatrixError(
            f"residual {np.linalg.norm(r):.3e} exceeds {bound:.3e} (ill-conditioned system)")

    def solve(self, a, b, ordering=None) -> np.ndarray:
        a = canonical(a)
        b = np.asarray(b, dtype=float)
        n, m = a.shape
        if n != m:
            raise ValueError(f"matrix must be square, got {a.shape}")
        if len(b) != n:
            raise ValueError(f"right-hand side has length {len(b)}, expected {n}")
        if self._same(a, ordering):
            x, _ = self._checked(a, b, self._solve, self._anorm)
            if x is not None:
                return x
        self._key = None
        row = _zero_line(a)
        if row is not None:
            raise SingularMatrixError(f"matrix is structurally singular at row/column {row}", row=row)
        anorm = sp.linalg.norm(a)
        last = None
        for perm in ((ordering, None) if ordering is not None else (None,)):
            try:
                solve = self._factor(a, perm)
            except RuntimeError as err:
                last = SingularMatrixError(f"LU factorisation failed: {err}")
                continue
            self.factorisations += 1
            x, last = self._checked(a, b, solve, anorm)
            if x is not None:
                self._key = (a.copy(), None if ordering is None else np.asarray(ordering).copy())
                self._solve, self._anorm = solve, anorm
                return x
        raise last


def solve_direct(a, b, ordering=None, pivot_threshold: float = 0.01) -> np.ndarray:
    """One-off sparse LU solve of ``a x = b`` (see :class:`LuSolver`)."""
    return LuSolver(pivot_threshold).solve(a, b, ordering)
