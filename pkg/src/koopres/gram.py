"""Empirical Gram matrices: the sufficient statistics for the Koopman
matrix, spectral residuals, and pseudospectra.

For dictionary samples Psi_X, Psi_Y (m x n_k, real) the triple is

    G = (1/m) Psi_X^T Psi_X,   A = (1/m) Psi_X^T Psi_Y,   L = (1/m) Psi_Y^T Psi_Y.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GramTriple:
    G: np.ndarray
    A: np.ndarray
    L: np.ndarray
    m: int
    _g_norm: float | None = field(default=None, repr=False, compare=False)

    @property
    def n_k(self) -> int:
        return self.G.shape[0]

    @property
    def g_norm(self) -> float:
        """Spectral norm of G (cached; G is symmetric PSD)."""
        if self._g_norm is None:
            self._g_norm = float(np.max(np.abs(np.linalg.eigvalsh(self.G)))) if self.n_k else 0.0
        return self._g_norm

    def to_dict(self):
        return {"m": self.m, "G": self.G.tolist(), "A": self.A.tolist(), "L": self.L.tolist()}


def compute_gram(psi_x, psi_y) -> GramTriple:
    """Assemble (G, A, L) from dictionary evaluations.

    G and L are symmetrized as (M + M^T)/2 so that downstream Cholesky
    factorizations see exactly symmetric inputs.
    """
    psi_x = np.asarray(psi_x, dtype=float)
    psi_y = np.asarray(psi_y, dtype=float)
    if psi_x.ndim != 2 or psi_x.shape != psi_y.shape:
        raise ValueError("Psi_X and Psi_Y must be matrices of identical shape")
    m = psi_x.shape[0]
    if m == 0:
        raise ValueError("need at least one sample")
    G = psi_x.T @ psi_x / m
    A = psi_x.T @ psi_y / m
    L = psi_y.T @ psi_y / m
    G = 0.5 * (G + G.T)
    L = 0.5 * (L + L.T)
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(A)) and np.all(np.isfinite(L))):
        raise ValueError("Gram matrices contain non-finite entries")
    return GramTriple(G=G, A=A, L=L, m=m)
