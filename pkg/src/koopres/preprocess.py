"""Truncated-SVD reduction with mode lift-back, and clustering quality.

The reducer keeps the top-r right singular vectors with a deterministic
sign convention (largest-magnitude entry of each vector made positive) so
that serialized reducers and exported modes are reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass
class SvdReducer:
    V_r: np.ndarray   # (d, r) orthonormal columns
    S_r: np.ndarray   # top r singular values, nonincreasing
    r: int

    def to_json_dict(self):
        return {
            "r": self.r,
            "d": self.V_r.shape[0],
            "singular_values": self.S_r.tolist(),
            "V_r": self.V_r.tolist(),
        }

    def save_json(self, path):
        with open(path, "w", newline="\n") as fh:
            json.dump(self.to_json_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_json_dict(cls, doc):
        V = np.asarray(doc["V_r"], dtype=float)
        S = np.asarray(doc["singular_values"], dtype=float)
        return cls(V_r=V, S_r=S, r=int(doc["r"]))

    @classmethod
    def load_json(cls, path):
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def fit_truncated_svd(X, r) -> SvdReducer:
    """Top-r SVD of X with the deterministic sign convention."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a matrix")
    if r < 1 or r > min(X.shape):
        raise ValueError(f"r must lie in 1..{min(X.shape)}")
    _, S, Vh = np.linalg.svd(X, full_matrices=False)
    V = Vh[:r].T.copy()
    for j in range(r):
        i = int(np.argmax(np.abs(V[:, j])))
        if V[i, j] < 0:
            V[:, j] = -V[:, j]
    return SvdReducer(V_r=V, S_r=S[:r].copy(), r=r)


def project(reducer: SvdReducer, X):
    """Coordinates of X in the retained subspace: X @ V_r."""
    X = np.asarray(X, dtype=float)
    if X.shape[1] != reducer.V_r.shape[0]:
        raise ValueError("state dimension does not match the reducer")
    return X @ reducer.V_r


def lift_modes(reducer: SvdReducer, modes):
    """Map reduced-space modes (k, r) back to the original dimensions."""
    modes = np.atleast_2d(np.asarray(modes))
    if modes.shape[1] != reducer.r:
        raise ValueError("mode width does not match the reducer rank")
    return modes @ reducer.V_r.T


def davies_bouldin(features, labels) -> float:
    """Davies-Bouldin index with Euclidean scatter and centroid distances.

    s_i is the mean distance of cluster i's points to their centroid and
    d_ij the centroid distance; DBI = mean_i max_{j != i} (s_i + s_j)/d_ij.
    Lower is better.  Raises if two cluster centroids coincide.
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    if features.ndim != 2 or features.shape[0] != labels.shape[0]:
        raise ValueError("features (n, p) and labels (n,) are required")
    uniq = np.unique(labels)
    k = len(uniq)
    if k < 2:
        raise ValueError("need at least two distinct labels")
    centroids = np.stack([features[labels == c].mean(axis=0) for c in uniq])
    scatter = np.array(
        [np.linalg.norm(features[labels == c] - centroids[i], axis=1).mean() for i, c in enumerate(uniq)]
    )
    diff = centroids[:, None, :] - centroids[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    off = ~np.eye(k, dtype=bool)
    if np.any(dist[off] == 0.0):
        raise ValueError("distinct clusters share a centroid; DBI undefined")
    ratio = (scatter[:, None] + scatter[None, :]) / np.where(off, dist, np.inf)
    return float(np.mean(ratio.max(axis=1)))
