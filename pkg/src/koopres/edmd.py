"""Finite-dimensional Koopman matrix, eigenpairs, eigenfunctions, modes.

The Koopman matrix solves (G + sigma I) K = A (the regularized normal
equations of the dictionary least-squares problem); its eigenvectors are
rescaled to the empirical L2 normalization v^H G v = 1 so that each
eigenfunction phi = Psi v has unit norm in the data measure.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .dictionaries import evaluate_batch
from .gram import GramTriple

# below this, v^H G v is treated as numerically null and the eigenvector
# is left at unit Euclidean norm instead of the G-normalization
NULL_NORM_RTOL = 1e-14


class RegularizationRequiredError(ValueError):
    """G is numerically singular and sigma == 0."""


@dataclass
class KoopmanMatrix:
    K: np.ndarray
    sigma: float

    @property
    def n_k(self) -> int:
        return self.K.shape[0]


@dataclass
class EigenPair:
    eigenvalue: complex
    vector: np.ndarray
    residual: float | None = None


@dataclass
class Spectrum:
    pairs: list
    n_k: int

    def __len__(self) -> int:
        return len(self.pairs)

    def eigenvalues(self) -> np.ndarray:
        return np.array([p.eigenvalue for p in self.pairs], dtype=complex)

    def vector_matrix(self) -> np.ndarray:
        """Eigenvectors as columns, (n_k, #pairs)."""
        return np.stack([p.vector for p in self.pairs], axis=1) if self.pairs else np.zeros((self.n_k, 0), dtype=complex)

    def residuals(self) -> np.ndarray:
        return np.array(
            [np.nan if p.residual is None else p.residual for p in self.pairs], dtype=float
        )


def default_sigma(gram: GramTriple) -> float:
    """Scale-aware regularization 1e-8 * trace(G) / n_k."""
    return 1e-8 * float(np.trace(gram.G)) / gram.n_k


def solve_koopman(gram: GramTriple, sigma=None) -> KoopmanMatrix:
    """Solve (G + sigma I) K = A by Cholesky.

    sigma=None picks the scale-aware default; sigma=0 requires G to be
    numerically invertible (min eigenvalue > 1e-12 * ||G||) and raises
    RegularizationRequiredError otherwise.
    """
    if sigma is None:
        sigma = default_sigma(gram)
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    G = gram.G
    if sigma == 0:
        eigs = np.linalg.eigvalsh(G)
        if eigs[0] <= 1e-12 * gram.g_norm:
            raise RegularizationRequiredError(
                f"G is numerically singular (min eig {eigs[0]:.3e}); regularization required"
            )
        lhs = G
    else:
        lhs = G + sigma * np.eye(gram.n_k)
    try:
        c, low = scipy.linalg.cho_factor(lhs)
    except np.linalg.LinAlgError as exc:
        raise RegularizationRequiredError(f"Cholesky of G + sigma*I failed: {exc}") from exc
    K = scipy.linalg.cho_solve((c, low), gram.A)
    return KoopmanMatrix(K=K, sigma=float(sigma))


def _sort_pairs(lams, vecs):
    # descending |lambda|, then descending Re, then ascending Im; keeps
    # conjugate pairs adjacent since LAPACK returns exact conjugates
    order = np.lexsort((lams.imag, -lams.real, -np.abs(lams)))
    return lams[order], vecs[:, order]


def eig(koopman: KoopmanMatrix, gram: GramTriple) -> Spectrum:
    """Full eigendecomposition of K with v^H G v = 1 normalization.

    Pairs are sorted by descending |lambda| (ties: descending Re, then
    ascending Im), which keeps complex-conjugate pairs adjacent.
    """
    K = koopman.K
    if not np.all(np.isfinite(K)):
        raise ValueError("Koopman matrix contains non-finite entries")
    try:
        lams, vecs = np.linalg.eig(K)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(f"eigensolver failed on the Koopman matrix: {exc}") from exc
    lams, vecs = _sort_pairs(lams, vecs)
    G = gram.G
    pairs = []
    for i in range(len(lams)):
        v = vecs[:, i]
        q = float(np.real(np.vdot(v, G @ v)))
        if q > NULL_NORM_RTOL * float(np.real(np.vdot(v, v))) * gram.g_norm:
            v = v / np.sqrt(q)
        pairs.append(EigenPair(eigenvalue=complex(lams[i]), vector=v))
    return Spectrum(pairs=pairs, n_k=koopman.n_k)


def eval_eigenfunctions(dictionary, spectrum: Spectrum, states):
    """Sample eigenfunctions phi_i = Psi v_i on states; (p, #pairs) complex."""
    psi = evaluate_batch(dictionary, states)
    return psi.astype(complex) @ spectrum.vector_matrix()


def koopman_modes(spectrum: Spectrum, psi_x, X):
    """Koopman modes of the full-state observable.

    Solves min_B ||X - Phi B||_F with Phi = Psi_X V by ridge-regularized
    normal equations (ridge 1e-10 * ||Phi^H Phi||); one row per eigenpair,
    one column per state coordinate.  A rank-deficient Phi triggers a
    warning rather than a failure.
    """
    if not spectrum.pairs:
        raise ValueError("spectrum has no eigenpairs")
    psi_x = np.asarray(psi_x)
    X = np.asarray(X, dtype=float)
    Phi = psi_x.astype(complex) @ spectrum.vector_matrix()
    H = Phi.conj().T @ Phi
    norm_h = float(np.max(np.abs(np.linalg.eigvalsh(H)))) if H.size else 0.0
    rank = np.linalg.matrix_rank(Phi)
    if rank < len(spectrum.pairs):
        warnings.warn(
            f"eigenfunction sample matrix is rank deficient ({rank}/{len(spectrum.pairs)}); "
            "modes are ridge-regularized",
            RuntimeWarning,
            stacklevel=2,
        )
    lhs = H + (1e-10 * norm_h) * np.eye(H.shape[0])
    return np.linalg.solve(lhs, Phi.conj().T @ X.astype(complex))


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def write_spectrum_csv(path, spectrum: Spectrum):
    """Columns re_lambda,im_lambda,abs_lambda,residual (nan if unfilled)."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["re_lambda", "im_lambda", "abs_lambda", "residual"])
        for p in spectrum.pairs:
            res = np.nan if p.residual is None else p.residual
            writer.writerow(
                [
                    f"{p.eigenvalue.real:.17g}",
                    f"{p.eigenvalue.imag:.17g}",
                    f"{abs(p.eigenvalue):.17g}",
                    f"{res:.17g}",
                ]
            )


def read_spectrum_csv(path):
    """Read back (eigenvalues, residuals) from a spectrum CSV."""
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["re_lambda", "im_lambda"]:
            raise ValueError(f"{path}: not a spectrum CSV (header {header})")
        lams, residuals = [], []
        for row in reader:
            lams.append(complex(float(row[0]), float(row[1])))
            residuals.append(float(row[3]))
    return np.array(lams, dtype=complex), np.array(residuals, dtype=float)


def write_modes_csv(path, modes):
    """One row per mode; columns re_m_1,im_m_1,...,re_m_d,im_m_d."""
    modes = np.atleast_2d(np.asarray(modes, dtype=complex))
    d = modes.shape[1]
    header = []
    for j in range(1, d + 1):
        header.extend([f"re_m_{j}", f"im_m_{j}"])
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in modes:
            flat = []
            for v in row:
                flat.extend([f"{v.real:.17g}", f"{v.imag:.17g}"])
            writer.writerow(flat)


def read_modes_csv(path):
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "re_m_1":
            raise ValueError(f"{path}: not a modes CSV (header {header})")
        d = len(header) // 2
        rows = []
        for row in reader:
            vals = [complex(float(row[2 * j]), float(row[2 * j + 1])) for j in range(d)]
            rows.append(vals)
    return np.array(rows, dtype=complex)
