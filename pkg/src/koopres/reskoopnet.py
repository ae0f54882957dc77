"""Dictionary training by spectral-residual minimization.

The loop alternates a closed-form Koopman update with gradient descent on
the eigenspace-projected loss

    J(theta) = (1/m) || (Psi_Y(theta) - Psi_X(theta) K(theta)) V(theta) ||_F^2,

where K(theta) = (G + sigma I)^{-1} A and V(theta) holds the G-normalized
right eigenvectors of K.  K and V are treated as constants during the
gradient step (no differentiation through the eigendecomposition); they
are refreshed from the current parameters every ``k_update_period`` epochs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dictionaries import NeuralDictionary, adam_init, adam_step
from .dynamics import SnapshotPairs
from .edmd import KoopmanMatrix, Spectrum, eig, solve_koopman
from .gram import compute_gram
from .residual import residuals_for_spectrum

# eigenvector-matrix condition number beyond which K counts as defective
DEFECTIVE_COND = 1e12


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    sigma: float = 1e-6
    loss_threshold: float = 1e-8
    max_epochs: int = 1000
    batch_size: int | str = "full"
    seed: int = 0
    k_update_period: int = 1

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.loss_threshold <= 0:
            raise ValueError("loss_threshold must be positive")
        if self.max_epochs < 0:
            raise ValueError("max_epochs must be nonnegative")
        if self.batch_size != "full" and (not isinstance(self.batch_size, int) or self.batch_size < 1):
            raise ValueError('batch_size must be a positive int or "full"')
        if self.k_update_period < 1:
            raise ValueError("k_update_period must be positive")


@dataclass
class TrainReport:
    loss_history: list = field(default_factory=list)   # (epoch, J) tuples
    final_J: float = np.nan
    epochs_run: int = 0
    converged: bool = False
    hit_max_epochs: bool = False
    k_perturbations: int = 0


class TrainingDivergedError(RuntimeError):
    """Loss became non-finite; carries the report and last finite parameters."""

    def __init__(self, message, report: TrainReport, last_good_params):
        super().__init__(message)
        self.report = report
        self.last_good_params = last_good_params


def loss_J(psi_x, psi_y, koopman: KoopmanMatrix, V) -> float:
    """J = (1/m) ||(Psi_Y - Psi_X K) V||_F^2."""
    psi_x = np.asarray(psi_x)
    psi_y = np.asarray(psi_y)
    if psi_x.shape != psi_y.shape:
        raise ValueError("Psi_X and Psi_Y shapes differ")
    V = np.asarray(V)
    if V.shape[0] != psi_x.shape[1]:
        raise ValueError("V row count must match the dictionary size")
    R = psi_y - psi_x @ koopman.K
    proj = R.astype(complex) @ V if np.iscomplexobj(V) else R @ V
    return float(np.sum(np.abs(proj) ** 2) / psi_x.shape[0])


def _projector(V):
    """Re(V V^H): the real quadratic form behind the complex column mix."""
    V = np.asarray(V)
    if np.iscomplexobj(V):
        return V.real @ V.real.T + V.imag @ V.imag.T
    return V @ V.T


def grad_loss(ndict: NeuralDictionary, batch: SnapshotPairs, koopman: KoopmanMatrix, V):
    """Exact gradient of loss_J w.r.t. the network parameters, K and V frozen.

    dJ/dPsi_Y = (2/m) (Psi_Y - Psi_X K) Re(V V^H) and dJ/dPsi_X is its image
    under -K^T; both flow through the dictionary's reverse-mode backward.
    """
    out_x, cache_x = ndict.forward_with_cache(batch.X)
    out_y, cache_y = ndict.forward_with_cache(batch.Y)
    K = koopman.K
    m = batch.m
    R = out_y - out_x @ K
    P = _projector(V)
    d_psi_y = (2.0 / m) * (R @ P)
    d_psi_x = -(d_psi_y @ K.T)
    gx = ndict.backward(cache_x, d_psi_x)
    gy = ndict.backward(cache_y, d_psi_y)
    return [a + b for a, b in zip(gx, gy)]


def _training_V(spectrum, gram, sigma):
    """Eigenvector matrix entering the training loss (v^H G v = 1 columns).

    eig() already applies the contractual normalization wherever the data
    resolves the direction; scale invariance of the normalized residuals
    is what makes the loss immune to global feature shrinkage.
    """
    return spectrum.vector_matrix()


def _koopman_and_eigs(psi_x, psi_y, sigma, rng, report: TrainReport):
    """Refresh (gram, K, spectrum, V); perturb K once if defective."""
    gram = compute_gram(psi_x, psi_y)
    koopman = solve_koopman(gram, sigma)
    spectrum = eig(koopman, gram)
    V = _training_V(spectrum, gram, sigma)
    cond = np.linalg.cond(V) if V.size else 1.0
    if cond > DEFECTIVE_COND:
        scale = 1e-10 * np.linalg.norm(koopman.K)
        koopman = KoopmanMatrix(
            K=koopman.K + scale * rng.standard_normal(koopman.K.shape),
            sigma=koopman.sigma,
        )
        spectrum = eig(koopman, gram)
        V = _training_V(spectrum, gram, sigma)
        report.k_perturbations += 1
    return gram, koopman, spectrum, V


def _batches(m, batch_size, rng):
    if batch_size == "full" or batch_size >= m:
        yield slice(None)
        return
    order = rng.permutation(m)
    for start in range(0, m, batch_size):
        yield order[start:start + batch_size]


def train(data: SnapshotPairs, ndict: NeuralDictionary, config: TrainConfig,
          on_epoch=None):
    """Run the alternating training loop; returns (ndict, spectrum, report).

    ndict is updated in place.  Stops when the full-data loss drops to
    config.loss_threshold or max_epochs is reached; the returned spectrum
    is computed on the full data with residuals filled.  ``on_epoch`` is an
    optional callback (epoch, ndict, J) invoked after each epoch, e.g. for
    checkpointing.
    """
    if data.m == 0:
        raise ValueError("empty snapshot data")
    if data.d != ndict.d:
        raise ValueError(f"data dim {data.d} does not match dictionary dim {ndict.d}")
    rng = np.random.default_rng(config.seed)
    report = TrainReport()

    psi_x = ndict.evaluate(data.X)
    psi_y = ndict.evaluate(data.Y)
    gram, koopman, spectrum, V = _koopman_and_eigs(psi_x, psi_y, config.sigma, rng, report)
    J = loss_J(psi_x, psi_y, koopman, V)
    report.loss_history.append((0, J))
    last_good_params = ndict.parameters()

    params = ndict.parameters()
    adam = adam_init(params, config.learning_rate)

    epoch = 0
    while epoch < config.max_epochs and J > config.loss_threshold:
        epoch += 1
        for idx in _batches(data.m, config.batch_size, rng):
            batch = SnapshotPairs(data.X[idx], data.Y[idx])
            grads = grad_loss(ndict, batch, koopman, V)
            params, adam = adam_step(adam, params, grads)
            ndict.set_parameters(params)
        psi_x = ndict.evaluate(data.X)
        psi_y = ndict.evaluate(data.Y)
        if epoch % config.k_update_period == 0:
            gram, koopman, spectrum, V = _koopman_and_eigs(
                psi_x, psi_y, config.sigma, rng, report
            )
        J = loss_J(psi_x, psi_y, koopman, V)
        report.loss_history.append((epoch, J))
        if not np.isfinite(J):
            report.final_J = J
            report.epochs_run = epoch
            raise TrainingDivergedError(
                f"loss became non-finite at epoch {epoch}", report, last_good_params
            )
        last_good_params = ndict.parameters()
        if on_epoch is not None:
            on_epoch(epoch, ndict, J)

    # final spectrum on the full data, residuals filled
    psi_x = ndict.evaluate(data.X)
    psi_y = ndict.evaluate(data.Y)
    gram, koopman, spectrum, V = _koopman_and_eigs(psi_x, psi_y, config.sigma, rng, report)
    spectrum = residuals_for_spectrum(spectrum, gram, null_action="inf")
    J = loss_J(psi_x, psi_y, koopman, V)

    report.final_J = J
    report.epochs_run = epoch
    report.converged = J <= config.loss_threshold
    report.hit_max_epochs = epoch >= config.max_epochs and not report.converged
    return ndict, spectrum, report


def write_loss_csv(path, loss_history):
    with open(path, "w", newline="\n") as fh:
        fh.write("epoch,J\n")
        for epoch, J in loss_history:
            fh.write(f"{epoch},{J:.17g}\n")
