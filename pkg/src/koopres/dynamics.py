"""Reference dynamical systems and snapshot-pair generation.

Every generator is deterministic given its seed and returns either
:class:`SnapshotPairs` (paired states ``x_i -> y_i``) or labeled
:class:`Trajectory` objects.  Snapshot files can be written/read in a
CSV format and a compact binary format (see :func:`save_snapshots`).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

SNAPSHOT_MAGIC = b"KSNP1"


@dataclass
class Trajectory:
    """Time-ordered states of one system realisation.

    states : (T, d) array, T >= 2
    dt     : sampling interval, > 0
    """

    states: np.ndarray
    dt: float

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 2 or self.states.shape[0] < 2:
            raise ValueError("trajectory needs a (T, d) array with T >= 2")
        if not np.all(np.isfinite(self.states)):
            raise ValueError("trajectory contains non-finite states")
        if self.dt <= 0:
            raise ValueError("dt must be positive")

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    def __len__(self) -> int:
        return self.states.shape[0]


@dataclass
class SnapshotPairs:
    """Paired snapshot matrices with y_i the one-step image of x_i."""

    X: np.ndarray
    Y: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float)
        if self.X.ndim != 2 or self.X.shape != self.Y.shape:
            raise ValueError("X and Y must be matrices of identical shape")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.Y))):
            raise ValueError("snapshot pairs contain non-finite entries")

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def wrap_angle(theta):
    """Map angles into [-pi, pi)."""
    return np.mod(theta + np.pi, 2.0 * np.pi) - np.pi


def _pendulum_rhs(state):
    # state columns (theta, theta_dot); governing equation theta'' = sin(theta)
    return np.stack([state[:, 1], np.sin(state[:, 0])], axis=1)


def _rk4_step(state, dt):
    k1 = _pendulum_rhs(state)
    k2 = _pendulum_rhs(state + 0.5 * dt * k1)
    k3 = _pendulum_rhs(state + 0.5 * dt * k2)
    k4 = _pendulum_rhs(state + dt * k3)
    return state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def pendulum_step(state, dt, substeps=10):
    """Advance pendulum states (n, 2) by one recorded interval ``dt``.

    Integrates with ``substeps`` classical RK4 steps of size dt/substeps;
    theta is wrapped into [-pi, pi) after each internal step (sin(theta)
    is 2*pi-periodic so wrapping does not alter the dynamics).
    """
    state = np.array(state, dtype=float)
    h = dt / substeps
    for _ in range(substeps):
        state = _rk4_step(state, h)
        state[:, 0] = wrap_angle(state[:, 0])
    return state


def pendulum_energy(states):
    """Conserved energy theta_dot**2 / 2 + cos(theta), rowwise."""
    states = np.atleast_2d(np.asarray(states, dtype=float))
    return 0.5 * states[:, 1] ** 2 + np.cos(states[:, 0])


def simulate_pendulum(n_init, n_steps, dt, seed, substeps=10):
    """Snapshot pairs of the pendulum theta'' = sin(theta).

    Initial conditions are sampled uniformly on [-pi, pi] x [-15, 15];
    each of the ``n_init`` trajectories evolves for ``n_steps`` recorded
    steps of size ``dt``, yielding n_init * n_steps pairs.
    """
    if n_init < 1 or n_steps < 1:
        raise ValueError("n_init and n_steps must be positive")
    if dt <= 0:
        raise ValueError("dt must be positive")
    rng = np.random.default_rng(seed)
    state = np.stack(
        [
            rng.uniform(-np.pi, np.pi, size=n_init),
            rng.uniform(-15.0, 15.0, size=n_init),
        ],
        axis=1,
    )
    xs = np.empty((n_steps, n_init, 2))
    ys = np.empty((n_steps, n_init, 2))
    for k in range(n_steps):
        nxt = pendulum_step(state, dt, substeps=substeps)
        xs[k] = state
        ys[k] = nxt
        state = nxt
    return SnapshotPairs(xs.reshape(-1, 2), ys.reshape(-1, 2))


def simulate_linear(M, n_init, n_steps, seed, x0=None):
    """Snapshot pairs of the exact linear map x_{k+1} = M x_k.

    Initial states are standard normal draws from ``seed`` unless ``x0``
    (an (n_init, d) array) overrides them.  Pairs are collected from all
    steps of every trajectory, so Y == X @ M.T holds by construction.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("M must be square")
    if not np.all(np.isfinite(M)):
        raise ValueError("M contains non-finite entries")
    if n_init < 1 or n_steps < 1:
        raise ValueError("n_init and n_steps must be positive")
    d = M.shape[0]
    if x0 is None:
        rng = np.random.default_rng(seed)
        state = rng.standard_normal((n_init, d))
    else:
        state = np.array(x0, dtype=float).reshape(n_init, d)
    xs = np.empty((n_steps, n_init, d))
    ys = np.empty((n_steps, n_init, d))
    MT = M.T.copy()
    for k in range(n_steps):
        nxt = state @ MT
        xs[k] = state
        ys[k] = nxt
        state = nxt
    return SnapshotPairs(xs.reshape(-1, d), ys.reshape(-1, d))


def random_stable_matrix(d, rng, radius_range=(0.7, 0.98)):
    """Random matrix rescaled to a spectral radius drawn from radius_range."""
    M = rng.standard_normal((d, d))
    rho = np.max(np.abs(np.linalg.eigvals(M)))
    target = rng.uniform(*radius_range)
    return M * (target / rho)


def simulate_multiregime(n_regimes, d, n_trials, n_steps, noise, seed):
    """Labeled trajectories from ``n_regimes`` random stable linear systems.

    Each regime r is a random stable matrix M_r (spectral radius in
    [0.7, 0.98]) with a fixed per-regime initial state; every trial
    replays the same clean trajectory plus additive Gaussian observation
    noise, so trials of one regime are identical when noise == 0.

    Returns (trajectories, labels): n_regimes * n_trials trajectories with
    integer regime labels.
    """
    if n_regimes < 2:
        raise ValueError("need at least two regimes")
    if d < 1 or n_trials < 1 or n_steps < 2:
        raise ValueError("d, n_trials positive and n_steps >= 2 required")
    if noise < 0:
        raise ValueError("noise must be nonnegative")
    rng = np.random.default_rng(seed)
    trajectories = []
    labels = []
    for r in range(n_regimes):
        M = random_stable_matrix(d, rng)
        x0 = rng.standard_normal(d)
        clean = np.empty((n_steps, d))
        clean[0] = x0
        for k in range(1, n_steps):
            clean[k] = M @ clean[k - 1]
        for _ in range(n_trials):
            observed = clean if noise == 0 else clean + noise * rng.standard_normal(clean.shape)
            trajectories.append(Trajectory(observed.copy(), dt=1.0))
            labels.append(r)
    return trajectories, np.array(labels, dtype=int)


def pairs_from_trajectory(traj: Trajectory) -> SnapshotPairs:
    """Consecutive-state pairs of a single trajectory."""
    return SnapshotPairs(traj.states[:-1], traj.states[1:])


def pairs_from_trajectories(trajs) -> SnapshotPairs:
    """Pool consecutive-state pairs across several trajectories."""
    if not trajs:
        raise ValueError("no trajectories given")
    X = np.concatenate([t.states[:-1] for t in trajs], axis=0)
    Y = np.concatenate([t.states[1:] for t in trajs], axis=0)
    return SnapshotPairs(X, Y)


def save_snapshots_csv(path, pairs: SnapshotPairs):
    """CSV snapshot file: `# d=<dim>,m=<count>` header, rows x_1..x_d,y_1..y_d."""
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# d={pairs.d},m={pairs.m}\n")
        for x, y in zip(pairs.X, pairs.Y):
            row = np.concatenate([x, y])
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_snapshots_csv(path) -> SnapshotPairs:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing `# d=...,m=...` header line")
        fields = dict(item.split("=") for item in header.lstrip("# ").split(","))
        d, m = int(fields["d"]), int(fields["m"])
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape != (m, 2 * d):
        raise ValueError(f"{path}: expected {m} rows of {2 * d} values, got {data.shape}")
    return SnapshotPairs(data[:, :d], data[:, d:])


def save_snapshots_binary(path, pairs: SnapshotPairs):
    """Binary snapshot file: magic KSNP1, u64 m, u64 d, X then Y row-major f64 (LE)."""
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<QQ", pairs.m, pairs.d))
        fh.write(np.ascontiguousarray(pairs.X, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(pairs.Y, dtype="<f8").tobytes())


def load_snapshots_binary(path) -> SnapshotPairs:
    with open(path, "rb") as fh:
        magic = fh.read(len(SNAPSHOT_MAGIC))
        if magic != SNAPSHOT_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        m, d = struct.unpack("<QQ", fh.read(16))
        X = np.frombuffer(fh.read(8 * m * d), dtype="<f8").reshape(m, d)
        Y = np.frombuffer(fh.read(8 * m * d), dtype="<f8").reshape(m, d)
    return SnapshotPairs(X.copy(), Y.copy())


def save_snapshots(path, pairs: SnapshotPairs, fmt="csv"):
    if fmt == "csv":
        save_snapshots_csv(path, pairs)
    elif fmt == "binary":
        save_snapshots_binary(path, pairs)
    else:
        raise ValueError(f"unknown snapshot format {fmt!r}")


def load_snapshots(path) -> SnapshotPairs:
    """Load a snapshot file, sniffing binary magic vs CSV header."""
    with open(path, "rb") as fh:
        magic = fh.read(len(SNAPSHOT_MAGIC))
    if magic == SNAPSHOT_MAGIC:
        return load_snapshots_binary(path)
    return load_snapshots_csv(path)


def save_trajectory_csv(path, traj: Trajectory):
    """CSV trajectory file: `# d=<dim>,n=<len>,dt=<dt>` header, one state per row."""
    with open(path, "w", newline="\n") as fh:
        fh.write(f"# d={traj.dim},n={len(traj)},dt={traj.dt:.17g}\n")
        for row in traj.states:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_trajectory_csv(path) -> Trajectory:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing `# d=...,n=...,dt=...` header line")
        fields = dict(item.split("=") for item in header.lstrip("# ").split(","))
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    d, n = int(fields["d"]), int(fields["n"])
    if data.shape != (n, d):
        raise ValueError(f"{path}: expected {n} rows of {d} values, got {data.shape}")
    return Trajectory(data, dt=float(fields["dt"]))
