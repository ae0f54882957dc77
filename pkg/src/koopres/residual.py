"""Spectral residuals, ResDMD filtering, and pseudospectrum scans.

The squared residual of a candidate eigenpair (lambda, phi = Psi v) is the
quadratic form

    res^2 = v^H [ L - lambda A^H - conj(lambda) A + |lambda|^2 G ] v  /  (v^H G v),

which equals (1/m) ||(Psi_Y - lambda Psi_X) v||^2 / ((1/m) ||Psi_X v||^2)
exactly; the test suite checks that identity against the direct sample sum.
The pseudospectrum value tau(z) minimizes the residual over the dictionary
span, computed as the smallest eigenvalue of the Cholesky-congruent
Hermitian pencil (D(z), G + sigma I).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .edmd import NULL_NORM_RTOL, Spectrum
from .gram import GramTriple


class NullEigenfunctionError(ValueError):
    """v^H G v vanishes: the candidate eigenfunction is numerically null."""


@dataclass
class PseudospectrumGrid:
    points: np.ndarray     # complex grid values z_j
    tau: np.ndarray        # residual minima tau_j >= 0
    epsilon: float
    accepted: np.ndarray   # boolean mask tau_j < epsilon

    def __post_init__(self):
        if not (len(self.points) == len(self.tau) == len(self.accepted)):
            raise ValueError("grid field lengths differ")


def residual_matrix(gram: GramTriple, z) -> np.ndarray:
    """Hermitian matrix D(z) = L - z A^H - conj(z) A + |z|^2 G."""
    z = complex(z)
    return gram.L - z * gram.A.conj().T - np.conj(z) * gram.A + abs(z) ** 2 * gram.G


def spectral_residual(lam, v, gram: GramTriple) -> float:
    """Normalized spectral residual of the pair (lam, Psi v)."""
    v = np.asarray(v, dtype=complex).ravel()
    if v.shape[0] != gram.n_k:
        raise ValueError(f"eigenvector length {v.shape[0]}, dictionary size {gram.n_k}")
    q = float(np.real(np.vdot(v, gram.G @ v)))
    vv = float(np.real(np.vdot(v, v)))
    if vv == 0.0:
        raise NullEigenfunctionError("zero eigenvector")
    if q <= NULL_NORM_RTOL * vv * gram.g_norm:
        raise NullEigenfunctionError(
            f"eigenfunction numerically null (v^H G v = {q:.3e})"
        )
    lam = complex(lam)
    s_a = np.vdot(v, gram.A @ v)
    num = (
        float(np.real(np.vdot(v, gram.L @ v)))
        - 2.0 * float(np.real(np.conj(lam) * s_a))
        + abs(lam) ** 2 * q
    )
    return float(np.sqrt(max(0.0, num / q)))


def residuals_for_spectrum(spectrum: Spectrum, gram: GramTriple, null_action="raise") -> Spectrum:
    """Fill the residual field of every eigenpair (order preserved).

    A pair whose eigenfunction is numerically null in the data measure
    (v^H G v below the relative threshold) raises by default;
    null_action="inf" assigns residual +inf instead, which any filter
    discards.  Training uses the tolerant mode because redundant learned
    features can collapse into the span of the augmentation.
    """
    if not spectrum.pairs:
        return spectrum
    V = spectrum.vector_matrix()
    lams = spectrum.eigenvalues()
    GV = gram.G @ V
    AV = gram.A @ V
    LV = gram.L @ V
    q_g = np.real(np.einsum("ij,ij->j", V.conj(), GV))
    q_l = np.real(np.einsum("ij,ij->j", V.conj(), LV))
    s_a = np.einsum("ij,ij->j", V.conj(), AV)
    vv = np.real(np.einsum("ij,ij->j", V.conj(), V))
    null = q_g <= NULL_NORM_RTOL * vv * gram.g_norm
    if np.any(null) and null_action != "inf":
        raise NullEigenfunctionError(
            f"{int(null.sum())} eigenfunction(s) numerically null in the data measure"
        )
    safe_q = np.where(null, 1.0, q_g)
    num = q_l - 2.0 * np.real(np.conj(lams) * s_a) + np.abs(lams) ** 2 * q_g
    res = np.sqrt(np.maximum(0.0, num / safe_q))
    res[null] = np.inf
    for pair, r in zip(spectrum.pairs, res):
        pair.residual = float(r)
    return spectrum


def resdmd_filter(spectrum: Spectrum, epsilon) -> Spectrum:
    """Keep exactly the eigenpairs with residual <= epsilon, order preserved."""
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    kept = []
    for p in spectrum.pairs:
        if p.residual is None:
            raise ValueError("residuals must be filled before filtering")
        if p.residual <= epsilon:
            kept.append(p)
    return Spectrum(pairs=kept, n_k=spectrum.n_k)


def complex_grid(re_min, re_max, im_min, im_max, n_re, n_im) -> np.ndarray:
    """Rectangular grid over a complex box, row-major by imaginary part."""
    if n_re < 1 or n_im < 1:
        raise ValueError("grid resolution must be positive")
    re = np.linspace(re_min, re_max, n_re)
    im = np.linspace(im_min, im_max, n_im)
    R, I = np.meshgrid(re, im)
    return (R + 1j * I).ravel()


def _resolve_jobs(n_jobs):
    if n_jobs is not None:
        return max(1, int(n_jobs))
    env = os.environ.get("KOOPMAN_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def pseudospectrum(gram: GramTriple, grid, epsilon, sigma=0.0, n_jobs=None) -> PseudospectrumGrid:
    """Minimal residual tau_j at every grid point z_j.

    Reduces D(z) v = tau^2 G v through the Cholesky factor of G + sigma I
    to a standard Hermitian eigenproblem and takes the smallest eigenvalue
    (clamped at zero before the square root).  Grid points are independent;
    n_jobs > 1 (default from KOOPMAN_THREADS) scans them in a thread pool
    with output order fixed by grid index.
    """
    grid = np.asarray(grid, dtype=complex).ravel()
    if grid.size == 0:
        raise ValueError("grid must be nonempty")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    lhs = gram.G + sigma * np.eye(gram.n_k)
    try:
        C = np.linalg.cholesky(lhs)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(
            f"Cholesky of G + sigma*I failed even with sigma={sigma}: {exc}"
        ) from exc

    def tau_at(z):
        D = residual_matrix(gram, z)
        half = scipy.linalg.solve_triangular(C, D, lower=True)
        M = scipy.linalg.solve_triangular(C, half.T, lower=True).T
        smallest = scipy.linalg.eigvalsh(M, subset_by_index=(0, 0))[0]
        return float(np.sqrt(max(0.0, smallest)))

    n_jobs = _resolve_jobs(n_jobs)
    if n_jobs == 1 or grid.size == 1:
        tau = np.array([tau_at(z) for z in grid])
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            tau = np.array(list(pool.map(tau_at, grid)))
    return PseudospectrumGrid(points=grid, tau=tau, epsilon=float(epsilon), accepted=tau < epsilon)


# ---------------------------------------------------------------------------
# CSV export
# ---------------------------------------------------------------------------

def write_pseudospectrum_csv(path, grid: PseudospectrumGrid):
    """Columns re_z,im_z,tau,accepted (accepted as 0/1)."""
    with open(path, "w", newline="\n") as fh:
        fh.write("re_z,im_z,tau,accepted\n")
        for z, t, a in zip(grid.points, grid.tau, grid.accepted):
            fh.write(f"{z.real:.17g},{z.imag:.17g},{t:.17g},{int(a)}\n")


def read_pseudospectrum_csv(path, epsilon=None):
    import csv as _csv

    with open(path) as fh:
        reader = _csv.reader(fh)
        header = next(reader)
        if header[:3] != ["re_z", "im_z", "tau"]:
            raise ValueError(f"{path}: not a pseudospectrum CSV (header {header})")
        pts, tau, acc = [], [], []
        for row in reader:
            pts.append(complex(float(row[0]), float(row[1])))
            tau.append(float(row[2]))
            acc.append(bool(int(row[3])))
    pts = np.array(pts, dtype=complex)
    tau = np.array(tau)
    acc = np.array(acc, dtype=bool)
    if epsilon is None:
        # largest accepted tau bounds epsilon from below; keep the stored mask
        epsilon = float(tau[acc].max()) + 1e-300 if acc.any() else float("nan")
    return PseudospectrumGrid(points=pts, tau=tau, epsilon=epsilon, accepted=acc)
