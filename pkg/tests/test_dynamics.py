import numpy as np
import pytest

from koopres.dynamics import (
    SnapshotPairs,
    Trajectory,
    load_snapshots,
    load_snapshots_csv,
    load_trajectory_csv,
    pairs_from_trajectories,
    pendulum_energy,
    pendulum_step,
    save_snapshots_binary,
    save_snapshots_csv,
    save_trajectory_csv,
    simulate_linear,
    simulate_multiregime,
    simulate_pendulum,
    wrap_angle,
)


class TestPendulum:
    def test_pair_count_matches_init_times_steps(self):
        pairs = simulate_pendulum(n_init=9, n_steps=100, dt=0.5, seed=0)
        assert pairs.m == 900
        assert pairs.d == 2

    def test_paper_scale_count(self):
        # 90 x 1000 would give 9e4 pairs; scaled-down shape check of the same law
        pairs = simulate_pendulum(n_init=90, n_steps=10, dt=0.5, seed=1)
        assert pairs.m == 900

    def test_equilibrium_initial_condition_is_fixed_point(self):
        state = np.array([[0.0, 0.0]])
        nxt = pendulum_step(state, dt=0.5)
        assert np.allclose(nxt, 0.0, atol=1e-15)

    def test_energy_drift_one_step_vs_fine_oracle(self):
        # energy theta_dot^2/2 + cos(theta) is conserved; compare one dt=0.01
        # step against an RK4 oracle with dt=1e-4 substeps
        rng = np.random.default_rng(3)
        state = np.stack([rng.uniform(-np.pi, np.pi, 8), rng.uniform(-15, 15, 8)], axis=1)
        e0 = pendulum_energy(state)
        coarse = pendulum_step(state, dt=0.01)
        drift = np.abs(pendulum_energy(coarse) - e0) / np.abs(e0)
        assert drift.max() < 1e-6
        oracle = pendulum_step(state, dt=0.01, substeps=100)
        assert np.allclose(coarse, oracle, atol=1e-9)

    def test_theta_wrapped_and_thetadot_sampled_in_box(self):
        pairs = simulate_pendulum(n_init=20, n_steps=50, dt=0.5, seed=7)
        assert np.all(pairs.X[:, 0] >= -np.pi) and np.all(pairs.X[:, 0] <= np.pi)
        assert np.all(pairs.Y[:, 0] >= -np.pi) and np.all(pairs.Y[:, 0] <= np.pi)
        first = pairs.X[:20]  # first recorded step holds the initial conditions
        assert np.all(np.abs(first[:, 1]) <= 15.0)

    def test_same_seed_bit_identical(self):
        a = simulate_pendulum(n_init=5, n_steps=20, dt=0.5, seed=11)
        b = simulate_pendulum(n_init=5, n_steps=20, dt=0.5, seed=11)
        assert np.array_equal(a.X, b.X) and np.array_equal(a.Y, b.Y)

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            simulate_pendulum(n_init=0, n_steps=5, dt=0.5, seed=0)
        with pytest.raises(ValueError):
            simulate_pendulum(n_init=5, n_steps=5, dt=-1.0, seed=0)


class TestLinear:
    def test_single_step_diagonal(self):
        pairs = simulate_linear(np.diag([0.9, 0.5]), n_init=1, n_steps=1, seed=0,
                                x0=np.array([[1.0, 1.0]]))
        assert np.allclose(pairs.X, [[1.0, 1.0]])
        assert np.allclose(pairs.Y, [[0.9, 0.5]])

    def test_identity_map(self):
        pairs = simulate_linear(np.eye(3), n_init=4, n_steps=6, seed=2)
        assert np.array_equal(pairs.X, pairs.Y)

    def test_rotation_preserves_norms(self):
        th = 0.3
        R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
        pairs = simulate_linear(R, n_init=10, n_steps=8, seed=3)
        assert np.allclose(np.linalg.norm(pairs.Y, axis=1), np.linalg.norm(pairs.X, axis=1))

    def test_pairs_satisfy_map_exactly(self):
        rng = np.random.default_rng(5)
        M = rng.standard_normal((3, 3)) * 0.4
        pairs = simulate_linear(M, n_init=6, n_steps=10, seed=5)
        assert np.allclose(pairs.Y, pairs.X @ M.T, rtol=0, atol=1e-14 * np.abs(pairs.X).max())

    def test_rejects_nonsquare(self):
        with pytest.raises(ValueError):
            simulate_linear(np.ones((2, 3)), n_init=1, n_steps=1, seed=0)


class TestMultiregime:
    def test_zero_noise_trials_identical(self):
        trajs, labels = simulate_multiregime(2, d=3, n_trials=2, n_steps=10, noise=0.0, seed=0)
        assert np.array_equal(trajs[0].states, trajs[1].states)
        assert labels[0] == labels[1] == 0

    def test_trial_count(self):
        trajs, labels = simulate_multiregime(6, d=4, n_trials=10, n_steps=5, noise=0.1, seed=1)
        assert len(trajs) == 60
        assert np.array_equal(np.sort(np.unique(labels)), np.arange(6))

    def test_spectral_radius_in_range(self):
        # regenerate the regime matrices with the same seed stream
        from koopres.dynamics import random_stable_matrix

        rng = np.random.default_rng(9)
        for _ in range(8):
            M = random_stable_matrix(5, rng)
            rho = np.max(np.abs(np.linalg.eigvals(M)))
            assert 0.7 - 1e-12 <= rho <= 0.98 + 1e-12
            rng.standard_normal(5)  # mirror the initial-state draw

    def test_pool_pairs(self):
        trajs, _ = simulate_multiregime(2, d=2, n_trials=1, n_steps=7, noise=0.0, seed=4)
        pooled = pairs_from_trajectories(trajs)
        assert pooled.m == 2 * 6


class TestTypes:
    def test_trajectory_validation(self):
        with pytest.raises(ValueError):
            Trajectory(np.ones((1, 2)), dt=1.0)
        with pytest.raises(ValueError):
            Trajectory(np.array([[1.0], [np.inf]]), dt=1.0)

    def test_snapshot_shape_mismatch(self):
        with pytest.raises(ValueError):
            SnapshotPairs(np.ones((3, 2)), np.ones((4, 2)))

    def test_wrap_angle_range(self):
        x = np.linspace(-20, 20, 401)
        w = wrap_angle(x)
        assert np.all(w >= -np.pi) and np.all(w < np.pi)
        assert np.allclose(np.cos(w), np.cos(x), atol=1e-12)


class TestSnapshotFiles:
    def test_csv_roundtrip(self, tmp_path):
        pairs = simulate_linear(np.diag([0.9, 0.5]), n_init=4, n_steps=3, seed=8)
        path = tmp_path / "snaps.csv"
        save_snapshots_csv(path, pairs)
        header = path.read_text().splitlines()[0]
        assert header == "# d=2,m=12"
        back = load_snapshots_csv(path)
        assert np.allclose(back.X, pairs.X) and np.allclose(back.Y, pairs.Y)

    def test_binary_roundtrip_bitexact(self, tmp_path):
        pairs = simulate_pendulum(n_init=3, n_steps=4, dt=0.5, seed=1)
        path = tmp_path / "snaps.ksnp"
        save_snapshots_binary(path, pairs)
        assert path.read_bytes()[:5] == b"KSNP1"
        back = load_snapshots(path)
        assert np.array_equal(back.X, pairs.X) and np.array_equal(back.Y, pairs.Y)

    def test_load_sniffs_format(self, tmp_path):
        pairs = simulate_linear(np.eye(2), n_init=2, n_steps=2, seed=0)
        save_snapshots_csv(tmp_path / "a.csv", pairs)
        back = load_snapshots(tmp_path / "a.csv")
        assert np.allclose(back.X, pairs.X)

    def test_trajectory_roundtrip(self, tmp_path):
        traj = Trajectory(np.arange(12.0).reshape(6, 2), dt=0.25)
        save_trajectory_csv(tmp_path / "t.csv", traj)
        back = load_trajectory_csv(tmp_path / "t.csv")
        assert back.dt == 0.25
        assert np.allclose(back.states, traj.states)
