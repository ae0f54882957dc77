"""Observable dictionaries Psi: R^d -> R^{n_k}.

Fixed families (monomial, Gaussian RBF, Fourier x Hermite tensor) and the
trainable neural dictionary: a three-hidden-layer tanh MLP whose output is
augmented with the constant function and the raw state coordinates.  The
augmentation occupies slots 0..d of every evaluation and carries no
parameters, which rules out the trivial all-zero minimiser during training.

Gradients are exact reverse-mode (hand-rolled, verified against central
finite differences in the test suite), and parameter updates use Adam.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb

import numpy as np

DICTIONARY_FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# fixed dictionaries
# ---------------------------------------------------------------------------

def monomial_exponents(d, max_degree):
    """Multi-indices with total degree <= max_degree, graded, coordinate order."""
    exps = []
    for deg in range(max_degree + 1):
        for combo in combinations_with_replacement(range(d), deg):
            e = [0] * d
            for i in combo:
                e[i] += 1
            exps.append(tuple(e))
    return exps


def hermite_functions(x, order):
    """Normalized Hermite functions h_0..h_order evaluated at x (stable recurrence)."""
    x = np.asarray(x, dtype=float)
    out = np.empty((order + 1,) + x.shape)
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if order >= 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(1, order):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * x * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out


class FixedDictionary:
    """Deterministic dictionary of a fixed functional family.

    kind is one of:
      * ("monomial", max_degree)
      * ("rbf", centers (n_c, d), bandwidth)
      * ("fourier_hermite", fourier_order, hermite_order) -- d == 2 only,
        sin/cos in the first (periodic) coordinate crossed with Hermite
        functions in the second.
    """

    def __init__(self, kind, d, **params):
        self.kind = kind
        self.d = int(d)
        self.params = params
        if kind == "monomial":
            self.max_degree = int(params["max_degree"])
            if self.max_degree < 0:
                raise ValueError("max_degree must be nonnegative")
            self._exponents = np.array(monomial_exponents(self.d, self.max_degree))
            self.n_k = comb(self.d + self.max_degree, self.max_degree)
        elif kind == "rbf":
            self.centers = np.atleast_2d(np.asarray(params["centers"], dtype=float))
            if self.centers.shape[1] != self.d:
                raise ValueError("center dimension mismatch")
            self.bandwidth = float(params["bandwidth"])
            if self.bandwidth <= 0:
                raise ValueError("bandwidth must be positive")
            self.n_k = self.centers.shape[0]
        elif kind == "fourier_hermite":
            if self.d != 2:
                raise ValueError("fourier_hermite dictionary requires d == 2")
            self.fourier_order = int(params["fourier_order"])
            self.hermite_order = int(params["hermite_order"])
            self.n_k = (2 * self.fourier_order + 1) * (self.hermite_order + 1)
        else:
            raise ValueError(f"unknown dictionary kind {kind!r}")

    def evaluate(self, states):
        states = np.atleast_2d(np.asarray(states, dtype=float))
        if states.shape[1] != self.d:
            raise ValueError(f"states have dim {states.shape[1]}, dictionary expects {self.d}")
        m = states.shape[0]
        if self.kind == "monomial":
            out = np.ones((m, self.n_k))
            for j, exps in enumerate(self._exponents):
                for i, e in enumerate(exps):
                    if e:
                        out[:, j] *= states[:, i] ** e
            return out
        if self.kind == "rbf":
            sq = ((states[:, None, :] - self.centers[None, :, :]) ** 2).sum(axis=2)
            return np.exp(-sq / (2.0 * self.bandwidth**2))
        # fourier_hermite: trig-major ordering, hermite index fastest
        herm = hermite_functions(states[:, 1], self.hermite_order)  # (H+1, m)
        theta = states[:, 0]
        blocks = [herm]
        for f in range(1, self.fourier_order + 1):
            blocks.append(np.cos(f * theta)[None, :] * herm)
            blocks.append(np.sin(f * theta)[None, :] * herm)
        return np.concatenate(blocks, axis=0).T


# ---------------------------------------------------------------------------
# neural dictionary
# ---------------------------------------------------------------------------

@dataclass
class ForwardCache:
    """Inputs and per-layer pre-activations saved by forward_with_cache."""

    inputs: np.ndarray
    pre_activations: list


def glorot_uniform(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


class NeuralDictionary:
    """Trainable tanh MLP dictionary with non-trainable augmentation.

    Evaluation of a state x returns (1, x_1, ..., x_d, net(x)) so that
    n_k = 1 + d + n_train.  Hidden activations are tanh; the output layer
    is linear.  Exactly three hidden layers, matching the reference
    architecture this package targets.
    """

    N_HIDDEN = 3

    def __init__(self, d, hidden, n_train, seed=0, init="glorot"):
        hidden = tuple(int(h) for h in hidden)
        if len(hidden) != self.N_HIDDEN:
            raise ValueError(f"expected {self.N_HIDDEN} hidden widths, got {len(hidden)}")
        if min(hidden) < 1 or n_train < 1 or d < 1:
            raise ValueError("layer widths must be positive")
        self.d = int(d)
        self.n_train = int(n_train)
        self.layer_sizes = [self.d, *hidden, self.n_train]
        rng = np.random.default_rng(seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            self.weights.append(glorot_uniform(rng, fan_in, fan_out))
            self.biases.append(np.zeros(fan_out))
        if init == "multiscale":
            # random-Fourier-feature style first layer: per-unit log-uniform
            # frequency scales with matching bias spread.  Plain Glorot
            # features on low-dimensional states are near rank-deficient,
            # which starves dictionary training of resolvable directions.
            n_units = self.layer_sizes[1]
            freqs = np.exp(rng.uniform(np.log(0.5), np.log(8.0), size=n_units))
            self.weights[0] = rng.standard_normal((self.d, n_units)) * freqs / np.sqrt(self.d)
            self.biases[0] = rng.uniform(-1.0, 1.0, size=n_units) * freqs
        elif init != "glorot":
            raise ValueError(f"unknown init {init!r}")

    @property
    def n_k(self) -> int:
        return 1 + self.d + self.n_train

    # -- evaluation ---------------------------------------------------------

    def _augment(self, states, net_out):
        m = states.shape[0]
        return np.concatenate([np.ones((m, 1)), states, net_out], axis=1)

    def evaluate(self, states):
        states = np.atleast_2d(np.asarray(states, dtype=float))
        if states.shape[1] != self.d:
            raise ValueError(f"states have dim {states.shape[1]}, dictionary expects {self.d}")
        a = states
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.tanh(a @ W + b)
        net_out = a @ self.weights[-1] + self.biases[-1]
        return self._augment(states, net_out)

    def forward_with_cache(self, states):
        """Same output as evaluate plus the cache needed by backward."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        if states.shape[1] != self.d:
            raise ValueError(f"states have dim {states.shape[1]}, dictionary expects {self.d}")
        pre = []
        a = states
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            z = a @ W + b
            pre.append(z)
            a = np.tanh(z)
        z_out = a @ self.weights[-1] + self.biases[-1]
        pre.append(z_out)
        return self._augment(states, z_out), ForwardCache(inputs=states, pre_activations=pre)

    def backward(self, cache: ForwardCache, dl_dpsi):
        """Parameter gradients from an upstream gradient on the full output.

        Columns 0..d of dl_dpsi belong to the parameter-free augmentation
        and are ignored.  Returns [dW_1, db_1, ..., dW_4, db_4] matching
        parameters().
        """
        dl_dpsi = np.asarray(dl_dpsi, dtype=float)
        m = cache.inputs.shape[0]
        if dl_dpsi.shape != (m, self.n_k):
            raise ValueError(f"upstream gradient shape {dl_dpsi.shape}, expected {(m, self.n_k)}")
        delta = dl_dpsi[:, 1 + self.d:]
        activations = [cache.inputs] + [np.tanh(z) for z in cache.pre_activations[:-1]]
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        for layer in range(len(self.weights) - 1, -1, -1):
            grads_w[layer] = activations[layer].T @ delta
            grads_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * (1.0 - np.tanh(cache.pre_activations[layer - 1]) ** 2)
        out = []
        for gw, gb in zip(grads_w, grads_b):
            out.extend([gw, gb])
        return out

    # -- parameter access ---------------------------------------------------

    def parameters(self):
        """Flat list [W_1, b_1, ..., W_4, b_4] (copies)."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out.extend([W.copy(), b.copy()])
        return out

    def set_parameters(self, params):
        if len(params) != 2 * len(self.weights):
            raise ValueError("parameter list length mismatch")
        for i in range(len(self.weights)):
            W, b = params[2 * i], params[2 * i + 1]
            if W.shape != self.weights[i].shape or b.shape != self.biases[i].shape:
                raise ValueError("parameter shape mismatch")
            self.weights[i] = np.asarray(W, dtype=float).copy()
            self.biases[i] = np.asarray(b, dtype=float).copy()

    # -- serialization ------------------------------------------------------

    def to_json_dict(self):
        return {
            "format_version": DICTIONARY_FORMAT_VERSION,
            "layer_sizes": list(self.layer_sizes),
            "augmentation": {"constant": True, "coordinates": self.d},
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    def save_json(self, path):
        with open(path, "w", newline="\n") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_json_dict(cls, doc):
        if doc.get("format_version") != DICTIONARY_FORMAT_VERSION:
            raise ValueError(f"unsupported dictionary format version {doc.get('format_version')}")
        sizes = doc["layer_sizes"]
        nd = cls(d=sizes[0], hidden=sizes[1:-1], n_train=sizes[-1], seed=0)
        params = []
        for W, b in zip(doc["weights"], doc["biases"]):
            params.extend([np.asarray(W, dtype=float), np.asarray(b, dtype=float)])
        nd.set_parameters(params)
        return nd

    @classmethod
    def load_json(cls, path):
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def evaluate_batch(dictionary, states):
    """Evaluate any dictionary on an (m, d) state matrix, row by row."""
    return dictionary.evaluate(states)


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    """Adam moment buffers mirroring a flat parameter list."""

    m: list
    v: list
    t: int
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params, learning_rate, beta1=0.9, beta2=0.999, eps=1e-8) -> AdamState:
    return AdamState(
        m=[np.zeros_like(np.asarray(p, dtype=float)) for p in params],
        v=[np.zeros_like(np.asarray(p, dtype=float)) for p in params],
        t=0,
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_step(state: AdamState, params, grads):
    """One Adam update with bias correction; returns (new_params, new_state)."""
    if len(params) != len(state.m) or len(grads) != len(state.m):
        raise ValueError("params/grads length mismatch with Adam buffers")
    t = state.t + 1
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        p = np.asarray(p, dtype=float)
        g = np.asarray(g, dtype=float)
        if g.shape != p.shape:
            raise ValueError("gradient shape mismatch")
        mk = state.beta1 * m + (1.0 - state.beta1) * g
        vk = state.beta2 * v + (1.0 - state.beta2) * g * g
        m_hat = mk / (1.0 - state.beta1**t)
        v_hat = vk / (1.0 - state.beta2**t)
        new_params.append(p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(mk)
        new_v.append(vk)
    return new_params, AdamState(
        m=new_m,
        v=new_v,
        t=t,
        learning_rate=state.learning_rate,
        beta1=state.beta1,
        beta2=state.beta2,
        eps=state.eps,
    )
