"""GF(2) linear algebra on numpy uint8 matrices (rows are exponent vectors)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np


def to_gf2(matrix: object, n_cols: Optional[int] = None) -> np.ndarray:
    mat = np.array(matrix, dtype=np.int64) % 2
    if mat.ndim == 1:
        if mat.size == 0 and n_cols is not None:
            return np.zeros((0, n_cols), dtype=np.uint8)
        mat = mat.reshape(1, -1) if mat.size else mat.reshape(0, n_cols or 0)
    return mat.astype(np.uint8)


@dataclass(frozen=True)
class RowReduceResult:
    matrix: np.ndarray
    rank: int
    pivots: Tuple[int, ...]


def gf2_row_reduce(matrix: np.ndarray) -> RowReduceResult:
    """fully reduced row echelon form over GF(2)"""
    mat = to_gf2(matrix).copy()
    m, n = mat.shape
    pivots: List[int] = []
    row = 0
    for col in range(n):
        if row == m:
            break
        candidates = np.nonzero(mat[row:, col])[0]
        if candidates.size == 0:
            continue
        pivot = row + int(candidates[0])
        if pivot != row:
            mat[[row, pivot]] = mat[[pivot, row]]
        ones = np.nonzero(mat[:, col])[0]
        ones = ones[ones != row]
        if ones.size:
            mat[ones, :] ^= mat[row, :]
        pivots.append(col)
        row += 1
    return RowReduceResult(matrix=mat, rank=len(pivots), pivots=tuple(pivots))


def gf2_rank(matrix: np.ndarray) -> int:
    if np.asarray(matrix).size == 0:
        return 0
    return gf2_row_reduce(matrix).rank


def gf2_nullspace_basis(matrix: np.ndarray) -> np.ndarray:
    """Return a basis for the nullspace of matrix over GF(2)."""
    reduced = gf2_row_reduce(matrix)
    mat = reduced.matrix
    m, n = mat.shape
    pivots = set(reduced.pivots)
    free_cols = [c for c in range(n) if c not in pivots]
    basis = []
    for free in free_cols:
        vec = np.zeros(n, dtype=np.uint8)
        vec[free] = 1
        for row, col in enumerate(reduced.pivots):
            if mat[row, free] == 1:
                vec[col] = 1
        basis.append(vec)
    if not basis:
        return np.zeros((0, n), dtype=np.uint8)
    return np.vstack(basis)


def gf2_solve_rowspan(rows: np.ndarray, vector: Sequence[int]) -> Optional[np.ndarray]:
    """coefficients c with c @ rows == vector (mod 2), or None if vector is outside the row span"""
    vec = to_gf2(vector).reshape(-1)
    mat = to_gf2(rows, n_cols=vec.size)
    k = mat.shape[0]
    if k == 0:
        return np.zeros(0, dtype=np.uint8) if not vec.any() else None
    aug = np.concatenate([mat.T, vec.reshape(-1, 1)], axis=1)
    reduced = gf2_row_reduce(aug)
    if k in reduced.pivots:
        return None
    coeffs = np.zeros(k, dtype=np.uint8)
    for row, col in enumerate(reduced.pivots):
        coeffs[col] = reduced.matrix[row, k]
    return coeffs


def gf2_in_rowspan(rows: np.ndarray, vector: Sequence[int]) -> bool:
    return gf2_solve_rowspan(rows, vector) is not None


def gf2_independent_rows(rows: np.ndarray) -> List[int]:
    """indices of a greedy maximal independent subset, in input order"""
    mat = to_gf2(rows)
    chosen: List[int] = []
    rank = 0
    for idx in range(mat.shape[0]):
        trial = mat[chosen + [idx]]
        trial_rank = gf2_rank(trial)
        if trial_rank > rank:
            chosen.append(idx)
            rank = trial_rank
    return chosen


def gf2_annihilator(rows: np.ndarray, n_cols: int) -> np.ndarray:
    """rows spanning the orthogonal complement of the row span"""
    mat = to_gf2(rows, n_cols=n_cols)
    if mat.shape[0] == 0:
        return np.eye(n_cols, dtype=np.uint8)
    return gf2_nullspace_basis(mat)


def gf2_same_span(a: np.ndarray, b: np.ndarray) -> bool:
    ra, rb = gf2_rank(a), gf2_rank(b)
    if ra != rb:
        return False
    return gf2_rank(np.vstack([to_gf2(a), to_gf2(b)])) == ra
