import numpy as np
import pytest

from koopres.gram import compute_gram


def test_identity_data():
    m = 4
    I = np.eye(m)
    g = compute_gram(I, I)
    assert np.allclose(g.G, I / m)
    assert np.allclose(g.A, I / m)
    assert np.allclose(g.L, I / m)


def test_single_sample_outer_products():
    u = np.array([[1.0, 2.0, -1.0]])
    w = np.array([[0.5, 0.0, 3.0]])
    g = compute_gram(u, w)
    assert np.allclose(g.G, u.T @ u)
    assert np.allclose(g.A, u.T @ w)
    assert np.allclose(g.L, w.T @ w)


def test_psd_of_random_inputs():
    rng = np.random.default_rng(0)
    g = compute_gram(rng.standard_normal((50, 8)), rng.standard_normal((50, 8)))
    assert np.linalg.eigvalsh(g.G).min() >= -1e-12
    assert np.linalg.eigvalsh(g.L).min() >= -1e-12


def test_exact_symmetry():
    rng = np.random.default_rng(1)
    g = compute_gram(rng.standard_normal((30, 5)), rng.standard_normal((30, 5)))
    assert np.array_equal(g.G, g.G.T)
    assert np.array_equal(g.L, g.L.T)


def test_same_input_gives_symmetric_A():
    rng = np.random.default_rng(2)
    P = rng.standard_normal((20, 4))
    g = compute_gram(P, P)
    assert np.allclose(g.G, g.L)
    assert np.allclose(g.A, g.A.T)
    assert np.allclose(g.G, g.A)


def test_residual_quadratic_form_nonnegative():
    # v^H (L - lam*A^H - conj(lam)*A + |lam|^2 G) v = ||(Psi_Y - lam Psi_X) v||^2 / m >= 0
    rng = np.random.default_rng(3)
    px = rng.standard_normal((40, 6))
    py = rng.standard_normal((40, 6))
    g = compute_gram(px, py)
    for _ in range(25):
        lam = complex(rng.standard_normal(), rng.standard_normal())
        v = rng.standard_normal(6) + 1j * rng.standard_normal(6)
        D = g.L - lam * g.A.conj().T - np.conj(lam) * g.A + abs(lam) ** 2 * g.G
        q = np.real(np.vdot(v, D @ v))
        direct = np.sum(np.abs((py - lam * px).astype(complex) @ v) ** 2) / 40
        assert q >= -1e-10 * np.linalg.norm(D)
        assert np.isclose(q, direct, rtol=1e-10)


def test_chunked_accumulation_matches():
    # chunked Gram accumulation is an independent oracle for the same sums
    rng = np.random.default_rng(4)
    px = rng.standard_normal((97, 7))
    py = rng.standard_normal((97, 7))
    g = compute_gram(px, py)
    G = np.zeros((7, 7))
    A = np.zeros((7, 7))
    L = np.zeros((7, 7))
    for s in range(0, 97, 13):
        cx, cy = px[s:s + 13], py[s:s + 13]
        G += cx.T @ cx
        A += cx.T @ cy
        L += cy.T @ cy
    assert np.allclose(g.G, 0.5 * (G + G.T) / 97, rtol=1e-12)
    assert np.allclose(g.A, A / 97, rtol=1e-12)
    assert np.allclose(g.L, 0.5 * (L + L.T) / 97, rtol=1e-12)


def test_shape_and_empty_errors():
    with pytest.raises(ValueError):
        compute_gram(np.ones((3, 2)), np.ones((3, 3)))
    with pytest.raises(ValueError):
        compute_gram(np.ones((0, 2)), np.ones((0, 2)))


def test_g_norm_cached_value():
    rng = np.random.default_rng(5)
    g = compute_gram(rng.standard_normal((25, 4)), rng.standard_normal((25, 4)))
    assert np.isclose(g.g_norm, np.linalg.norm(g.G, 2), rtol=1e-12)
