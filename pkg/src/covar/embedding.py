"""PCA and diffusion-map embeddings of learned representations."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numeric import as_matrix


class EmbeddingError(ValueError):
    pass


@dataclass
class EmbeddingResult:
    coordinates: np.ndarray  # (n, k)
    eigenvalues: np.ndarray  # (k,), non-increasing
    method: str
    bandwidth: float | None = None


def fix_signs(vectors):
    """Flip each column so its largest-magnitude entry is positive."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def pca(points, k):
    x = as_matrix(points, "points")
    n, dim = x.shape
    if n < 2:
        raise EmbeddingError("PCA needs at least 2 points")
    if not 1 <= k <= min(n, dim):
        raise EmbeddingError(f"k={k} out of range for {n} points in {dim} dimensions")
    centred = x - x.mean(axis=0)
    cov = centred.T @ centred / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:k]
    vecs = fix_signs(evecs[:, order])
    return EmbeddingResult(centred @ vecs, np.clip(evals[order], 0.0, None), "pca")


def pairwise_sq_dists(x):
    # centring first keeps the Gram expansion from cancelling on tight clusters
    x = x - x.mean(axis=0)
    sq = np.einsum("ij,ij->i", x, x)
    d = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.fill_diagonal(d, 0.0)
    return np.maximum(d, 0.0)


def median_bandwidth(d2):
    iu = np.triu_indices(d2.shape[0], k=1)
    return float(np.median(d2[iu]))


def neighbor_bandwidth(d2, neighbors):
    """Median squared distance from each point to its ``neighbors``-th nearest neighbour."""
    if not 1 <= neighbors < d2.shape[0]:
        raise EmbeddingError(f"neighbors={neighbors} out of range for {d2.shape[0]} points")
    return float(np.median(np.partition(d2, neighbors, axis=1)[:, neighbors]))


def transition_matrix(points, bandwidth=None, neighbors=None):
    """Row-stochastic Gaussian-kernel operator ``P = D^-1 W`` and its parts.

    The bandwidth is ``bandwidth`` if given, else the nearest-neighbour scale
    when ``neighbors`` is given, else the median pairwise squared distance.
    """
    x = as_matrix(points, "points")
    d2 = pairwise_sq_dists(x)
    if bandwidth is not None:
        eps = float(bandwidth)
    elif neighbors is not None:
        eps = neighbor_bandwidth(d2, neighbors)
    else:
        eps = median_bandwidth(d2)
    if not eps > 0:
        raise EmbeddingError("kernel bandwidth is zero (all points identical?)")
    w = np.exp(-d2 / eps)
    deg = w.sum(axis=1)
    return w / deg[:, None], w, deg, eps


def diffusion_maps(points, k, bandwidth=None, neighbors=None):
    """Diffusion-map coordinates ``lambda_l * psi_l(i)``, l = 1..k (t = 1).

    The eigenproblem is solved on the symmetric conjugate
    ``D^-1/2 W D^-1/2``; the trivial constant eigenvector is dropped.
    """
    x = as_matrix(points, "points")
    n = x.shape[0]
    if n < 3:
        raise EmbeddingError("diffusion maps need at least 3 points")
    if not 1 <= k <= n - 1:
        raise EmbeddingError(f"k={k} out of range for {n} points")
    _, w, deg, eps = transition_matrix(x, bandwidth, neighbors)
    root = np.sqrt(deg)
    sym = w / np.outer(root, root)
    evals, evecs = np.linalg.eigh((sym + sym.T) / 2.0)
    order = np.argsort(evals)[::-1][1:k + 1]
    psi = evecs[:, order] / root[:, None]
    psi /= np.linalg.norm(psi, axis=0)
    psi = fix_signs(psi)
    lam = evals[order]
    return EmbeddingResult(psi * lam, lam, "diffusion", eps)


def embed(points, method, k, bandwidth=None, neighbors=None):
    if method == "pca":
        return pca(points, k)
    if method == "diffusion":
        return diffusion_maps(points, k, bandwidth, neighbors)
    raise EmbeddingError(f"unknown embedding method {method!r}")
