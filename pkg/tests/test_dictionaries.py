import numpy as np
import pytest

from koopres.dictionaries import (
    FixedDictionary,
    NeuralDictionary,
    adam_init,
    adam_step,
    evaluate_batch,
    hermite_functions,
    monomial_exponents,
)


class TestFixedDictionaries:
    def test_monomial_degree1(self):
        dic = FixedDictionary("monomial", d=2, max_degree=1)
        out = evaluate_batch(dic, np.array([[2.0, 3.0]]))
        assert np.allclose(out, [[1.0, 2.0, 3.0]])

    def test_monomial_count_and_order(self):
        dic = FixedDictionary("monomial", d=2, max_degree=2)
        assert dic.n_k == 6
        out = evaluate_batch(dic, np.array([[2.0, 3.0]]))
        # 1, x1, x2, x1^2, x1*x2, x2^2
        assert np.allclose(out, [[1, 2, 3, 4, 6, 9]])

    def test_monomial_exponent_listing(self):
        exps = monomial_exponents(2, 1)
        assert exps == [(0, 0), (1, 0), (0, 1)]

    def test_rbf_peak_at_center(self):
        center = np.array([[0.4, -1.2]])
        dic = FixedDictionary("rbf", d=2, centers=center, bandwidth=0.7)
        out = evaluate_batch(dic, center)
        assert np.isclose(out[0, 0], 1.0)

    def test_rbf_decay(self):
        dic = FixedDictionary("rbf", d=1, centers=[[0.0]], bandwidth=1.0)
        out = evaluate_batch(dic, np.array([[0.0], [1.0], [3.0]]))
        assert out[0, 0] > out[1, 0] > out[2, 0]

    def test_fourier_hermite_size_and_rank(self):
        dic = FixedDictionary("fourier_hermite", d=2, fourier_order=2, hermite_order=3)
        assert dic.n_k == (2 * 2 + 1) * (3 + 1)
        rng = np.random.default_rng(0)
        states = np.stack([rng.uniform(-np.pi, np.pi, 200), rng.uniform(-3, 3, 200)], axis=1)
        psi = evaluate_batch(dic, states)
        assert psi.shape == (200, dic.n_k)
        # linear independence on generic samples
        assert np.linalg.matrix_rank(psi) == dic.n_k

    def test_hermite_recurrence_against_probabilist_form(self):
        # h_n = H_n(x) exp(-x^2/2) / sqrt(2^n n! sqrt(pi)) with physicists' H_n
        from math import factorial, pi, sqrt

        x = np.linspace(-2, 2, 9)
        h = hermite_functions(x, 3)
        H0, H1 = np.ones_like(x), 2 * x
        H2 = 4 * x**2 - 2
        H3 = 8 * x**3 - 12 * x
        for n, Hn in enumerate([H0, H1, H2, H3]):
            ref = Hn * np.exp(-x**2 / 2) / sqrt(2.0**n * factorial(n) * sqrt(pi))
            assert np.allclose(h[n], ref, atol=1e-12)

    def test_dimension_mismatch(self):
        dic = FixedDictionary("monomial", d=2, max_degree=1)
        with pytest.raises(ValueError):
            evaluate_batch(dic, np.ones((3, 5)))


class TestNeuralDictionary:
    def test_zero_network_returns_augmentation(self):
        nd = NeuralDictionary(d=2, hidden=(4, 4, 4), n_train=3, seed=0)
        nd.set_parameters([np.zeros_like(p) for p in nd.parameters()])
        out = evaluate_batch(nd, np.array([[0.3, -0.2]]))
        assert np.allclose(out[0, :3], [1.0, 0.3, -0.2])
        assert np.allclose(out[0, 3:], 0.0)

    def test_augmentation_columns_for_random_params(self):
        nd = NeuralDictionary(d=3, hidden=(5, 5, 5), n_train=4, seed=1)
        rng = np.random.default_rng(2)
        states = rng.standard_normal((20, 3))
        out = evaluate_batch(nd, states)
        assert out.shape == (20, nd.n_k)
        assert np.allclose(out[:, 0], 1.0)
        assert np.array_equal(out[:, 1:4], states)

    def test_forward_with_cache_matches_evaluate(self):
        nd = NeuralDictionary(d=2, hidden=(3, 3, 3), n_train=2, seed=3)
        states = np.random.default_rng(4).standard_normal((7, 2))
        out, cache = nd.forward_with_cache(states)
        assert np.array_equal(out, nd.evaluate(states))
        assert len(cache.pre_activations) == nd.N_HIDDEN + 1

    def test_single_sample_batch(self):
        nd = NeuralDictionary(d=2, hidden=(3, 3, 3), n_train=2, seed=5)
        out, _ = nd.forward_with_cache(np.array([[0.1, 0.2]]))
        assert out.shape == (1, nd.n_k)

    def test_row_permutation_equivariance(self):
        nd = NeuralDictionary(d=2, hidden=(4, 4, 4), n_train=3, seed=6)
        rng = np.random.default_rng(7)
        states = rng.standard_normal((15, 2))
        perm = rng.permutation(15)
        assert np.allclose(nd.evaluate(states)[perm], nd.evaluate(states[perm]))

    def test_backward_zero_upstream(self):
        nd = NeuralDictionary(d=2, hidden=(3, 3, 3), n_train=2, seed=8)
        states = np.random.default_rng(9).standard_normal((5, 2))
        _, cache = nd.forward_with_cache(states)
        grads = nd.backward(cache, np.zeros((5, nd.n_k)))
        assert all(np.allclose(g, 0.0) for g in grads)

    def test_backward_ignores_augmentation_gradient(self):
        nd = NeuralDictionary(d=2, hidden=(3, 3, 3), n_train=2, seed=10)
        states = np.random.default_rng(11).standard_normal((5, 2))
        _, cache = nd.forward_with_cache(states)
        up = np.zeros((5, nd.n_k))
        up[:, : 1 + nd.d] = 1.0  # loss depending only on augmentation columns
        grads = nd.backward(cache, up)
        assert all(np.allclose(g, 0.0) for g in grads)

    @pytest.mark.parametrize("draw", range(20))
    def test_backward_matches_finite_differences(self, draw):
        rng = np.random.default_rng(100 + draw)
        nd = NeuralDictionary(d=2, hidden=(3, 3, 3), n_train=2, seed=draw)
        states = rng.standard_normal((5, 2))
        C = rng.standard_normal((5, nd.n_k))  # loss L = sum(C * Psi)
        out, cache = nd.forward_with_cache(states)
        grads = nd.backward(cache, C)

        params = nd.parameters()
        h = 1e-6
        gmax = max(np.abs(g).max() for g in grads)
        for pi, g in enumerate(grads):
            flat = params[pi].ravel()
            gflat = g.ravel()
            for j in range(flat.size):
                orig = flat[j]
                vals = []
                for sgn in (+1.0, -1.0):
                    flat[j] = orig + sgn * h
                    nd.set_parameters(params)
                    vals.append(float(np.sum(C * nd.evaluate(states))))
                flat[j] = orig
                fd = (vals[0] - vals[1]) / (2 * h)
                denom = max(abs(fd), abs(gflat[j]), 1e-3 * gmax)
                assert abs(fd - gflat[j]) / denom < 1e-5
        nd.set_parameters(params)

    def test_hidden_layer_count_enforced(self):
        with pytest.raises(ValueError):
            NeuralDictionary(d=2, hidden=(3, 3), n_train=2)

    def test_multiscale_init_improves_gram_rank(self):
        rng = np.random.default_rng(12)
        states = rng.uniform(-2, 2, size=(400, 2))
        ranks = {}
        for init in ("glorot", "multiscale"):
            nd = NeuralDictionary(d=2, hidden=(64, 64, 64), n_train=47, seed=0, init=init)
            psi = nd.evaluate(states)
            ev = np.linalg.eigvalsh(psi.T @ psi / 400)
            ranks[init] = int(np.sum(ev > 1e-6 * ev[-1]))
        assert ranks["multiscale"] > ranks["glorot"]

    def test_json_roundtrip(self, tmp_path):
        nd = NeuralDictionary(d=2, hidden=(4, 4, 4), n_train=3, seed=13)
        path = tmp_path / "dict.json"
        nd.save_json(path)
        back = NeuralDictionary.load_json(path)
        states = np.random.default_rng(14).standard_normal((6, 2))
        assert np.allclose(back.evaluate(states), nd.evaluate(states))


class TestAdam:
    def test_zero_gradient_keeps_params(self):
        params = [np.array([1.0, -2.0]), np.array([[0.5]])]
        st = adam_init(params, learning_rate=0.1)
        new, st2 = adam_step(st, params, [np.zeros(2), np.zeros((1, 1))])
        assert np.allclose(new[0], params[0]) and np.allclose(new[1], params[1])
        assert st2.t == 1

    def test_first_step_magnitude(self):
        # hand evaluation at t=1: m_hat = 1, v_hat = 1, update = -lr/(1+eps)
        params = [np.array(0.0)]
        st = adam_init(params, learning_rate=0.1)
        new, _ = adam_step(st, params, [np.array(1.0)])
        assert abs(new[0] - (-0.1)) < 1e-6

    def test_determinism(self):
        params = [np.array([0.3, 0.7])]
        grads = [np.array([0.1, -0.2])]
        st = adam_init(params, learning_rate=0.01)
        a1, s1 = adam_step(st, params, grads)
        a2, s2 = adam_step(st, params, grads)
        assert np.array_equal(a1[0], a2[0])
        assert s1.t == s2.t and np.array_equal(s1.m[0], s2.m[0])

    def test_shape_mismatch(self):
        params = [np.zeros(3)]
        st = adam_init(params, learning_rate=0.1)
        with pytest.raises(ValueError):
            adam_step(st, params, [np.zeros(4)])
