"""Hankel-DMD: the time-delay-embedding baseline.

A trajectory is stacked into a Hankel matrix whose columns are
delay-length windows (all of them, so a series of length n gives
n - delay + 1 columns); DMD on the column shift yields eigenvalues, and
residuals are evaluated through the usual Gram machinery with
Psi_X = H_1^T, Psi_Y = H_2^T.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dynamics import Trajectory
from .edmd import EigenPair, Spectrum, NULL_NORM_RTOL
from .gram import compute_gram
from .residual import residuals_for_spectrum


@dataclass
class HankelMatrix:
    H: np.ndarray        # (delay * d, n_cols)
    delay: int
    source_dim: int

    @property
    def n_cols(self) -> int:
        return self.H.shape[1]


def build_hankel(traj: Trajectory, delay: int) -> HankelMatrix:
    """Stack delay-length windows of the trajectory as columns.

    Column j holds states j..j+delay-1, vectorized coordinate-major within
    each time slot, so a d-dimensional series gives d*delay rows and
    len(traj) - delay + 1 columns; column j+1 is the one-step shift of
    column j's window.
    """
    if delay < 1:
        raise ValueError("delay must be positive")
    states = traj.states
    n, d = states.shape
    if n <= delay:
        raise ValueError(f"trajectory length {n} too short for delay {delay}")
    n_cols = n - delay + 1
    cols = np.empty((delay * d, n_cols))
    for j in range(n_cols):
        cols[:, j] = states[j:j + delay].ravel()
    return HankelMatrix(H=cols, delay=delay, source_dim=d)


def hankel_dmd(hankel: HankelMatrix, rank="full") -> Spectrum:
    """SVD-projected DMD of the Hankel column shift, residuals filled.

    Splits H into H1 (all but last column) and H2 (all but first), forms
    the reduced operator U^H H2 V S^{-1} from the rank-r SVD of H1, and
    lifts its eigenvectors back with U.  rank="full" keeps the numerical
    rank of H1 (singular values below max(S) * max(dim) * eps are dropped).
    """
    H = hankel.H
    if H.shape[1] < 2:
        raise ValueError("Hankel matrix needs at least two columns")
    H1 = H[:, :-1]
    H2 = H[:, 1:]
    U, S, Vh = np.linalg.svd(H1, full_matrices=False)
    max_rank = min(H1.shape)
    if rank == "full":
        tol = S[0] * max(H1.shape) * np.finfo(float).eps if S.size else 0.0
        r = max(1, int(np.sum(S > tol)))
    else:
        r = int(rank)
        if r < 1 or r > max_rank:
            raise ValueError(f"rank {r} outside 1..{max_rank}")
    U = U[:, :r]
    S = S[:r]
    Vh = Vh[:r]
    reduced = U.conj().T @ H2 @ Vh.conj().T / S[None, :]
    # the residual convention Psi_X = H1^T needs coefficient vectors w with
    # reduced^T w = lambda w, i.e. conjugated left eigenvectors of `reduced`
    lams, left, _ = scipy.linalg.eig(reduced, left=True, right=True)
    W = left.conj()
    order = np.lexsort((lams.imag, -lams.real, -np.abs(lams)))
    lams = lams[order]
    W = W[:, order]

    gram = compute_gram(H1.T, H2.T)
    pairs = []
    for i in range(len(lams)):
        v = U.astype(complex) @ W[:, i]
        q = float(np.real(np.vdot(v, gram.G @ v)))
        if q > NULL_NORM_RTOL * float(np.real(np.vdot(v, v))) * gram.g_norm:
            v = v / np.sqrt(q)
        pairs.append(EigenPair(eigenvalue=complex(lams[i]), vector=v))
    spectrum = Spectrum(pairs=pairs, n_k=H.shape[0])
    return residuals_for_spectrum(spectrum, gram)
