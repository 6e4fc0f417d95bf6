"""Coefficient matrix -> symmetric nonnegative sample similarities."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SimilarityError(ValueError):
    pass


@dataclass(frozen=True)
class SimilarityMatrix:
    S: np.ndarray
    normalized: bool = False

    def off_diagonal(self) -> np.ndarray:
        out = self.S.copy()
        np.fill_diagonal(out, 0.0)
        return out


def similarity_from_coefficients(C) -> SimilarityMatrix:
    """``s_ij = (|c_ij| + |c_ji|) / 2`` off the diagonal; ``s_ii`` is the row's off-diagonal sum."""
    C = np.asarray(getattr(C, "coeffs", C), dtype=float)
    A = np.abs(C)
    np.fill_diagonal(A, 0.0)
    S = 0.5 * (A + A.T)
    np.fill_diagonal(S, S.sum(axis=1))
    return SimilarityMatrix(S, normalized=False)


def normalize_similarity(sim: SimilarityMatrix, literal: bool = False) -> SimilarityMatrix:
    """Return ``M^-1/2 S M^-1/2`` with ``M`` the diagonal of row sums.

    ``literal=True`` applies ``M^1/2 S M^1/2`` instead, kept for comparison runs.
    """
    if sim.normalized:
        raise SimilarityError("similarity matrix is already normalized")
    S = sim.S
    m = S.sum(axis=1)
    bad = np.flatnonzero(~(m > 0))
    if bad.size:
        raise SimilarityError(
            f"sample {int(bad[0])} has zero similarity mass; cannot normalize")
    scale = np.sqrt(m) if literal else 1.0 / np.sqrt(m)
    out = scale[:, None] * S * scale[None, :]
    # Exact symmetry: elementwise products above are not guaranteed to commute bitwise.
    out = np.triu(out) + np.triu(out, 1).T
    return SimilarityMatrix(out, normalized=True)
