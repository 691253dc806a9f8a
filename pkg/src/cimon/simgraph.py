"""Similarity mining: cosine distances, thresholded pseudo-graph, spectral
global refinement, half-Gaussian distance fitting, and confidence weights.

The output of :func:`generate_semantic_info` is one ``SemanticInfo`` per
feature view: a refined similarity graph over {-1, 0, +1} plus a per-pair
confidence matrix in [0, 1], used as the training signal downstream.

Sidecar format (little-endian): magic ``CIMS`` | u64 n | f64 t | u32 K |
4 f64 fit params | n u32 cluster ids | refined graph packed 2 bits/entry
row-major | float32 upper triangle (with diagonal) of the weight matrix.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy.special import ndtr

from .errors import EigenFailure, InsufficientPairs, MalformedHeader, ShapeMismatch, ZeroRow

SEMANTIC_MAGIC = b"CIMS"

_HIST_BINS = 64
_SMOOTH_WINDOW = 5
_SIGMA_FLOOR = 1e-4
_DENOM_FLOOR = 1e-12


@dataclass
class HalfGaussianFit:
    """Mode/deviation of the two half-Gaussian lobes of the distance histogram."""

    m1: float
    sigma1: float
    m2: float
    sigma2: float


@dataclass
class SemanticInfo:
    """Per-view training signal: refined graph, confidence weights, fit, clusters."""

    s_hat: np.ndarray      # n x n over {-1, 0, +1}
    weights: np.ndarray    # n x n in [0, 1], zero exactly where s_hat == 0
    fit: HalfGaussianFit
    clusters: np.ndarray   # n cluster ids in [0, K)
    k: int
    t: float

    @property
    def n(self) -> int:
        return self.s_hat.shape[0]


def cosine_distances(F: np.ndarray) -> np.ndarray:
    """Pairwise cosine distances 1 - cos(F_i, F_j), clamped to [0, 2]."""
    F = np.asarray(F, dtype=np.float64)
    norms = np.linalg.norm(F, axis=1)
    zero = norms == 0
    if zero.any():
        raise ZeroRow(int(np.nonzero(zero)[0][0]))
    unit = F / norms[:, None]
    D = 1.0 - unit @ unit.T
    D = 0.5 * (D + D.T)
    np.clip(D, 0.0, 2.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


def build_pseudo_graph(D: np.ndarray, t: float) -> np.ndarray:
    """Threshold distances into a {-1, +1} similarity graph (d <= t is similar)."""
    if not 0.0 < t < 2.0:
        raise ValueError(f"threshold must be in (0, 2), got {t}")
    return np.where(D <= t, 1, -1).astype(np.int8)


def _pairwise_sq(X, C):
    d2 = (X * X).sum(axis=1)[:, None] + (C * C).sum(axis=1)[None, :] - 2.0 * X @ C.T
    np.clip(d2, 0.0, None, out=d2)
    return d2


def _kmeans_pp_init(X, k, rng):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2min = _pairwise_sq(X, centers[:1])[:, 0]
    for j in range(1, k):
        total = d2min.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2min / total))
        centers[j] = X[idx]
        d2min = np.minimum(d2min, _pairwise_sq(X, centers[j : j + 1])[:, 0])
    return centers


def _fill_empty_clusters(X, centers, labels, k):
    """Empty cells steal the farthest point of the currently largest cluster."""
    counts = np.bincount(labels, minlength=k)
    for empty in np.nonzero(counts == 0)[0]:
        largest = int(counts.argmax())
        members = np.nonzero(labels == largest)[0]
        d2 = ((X[members] - centers[largest]) ** 2).sum(axis=1)
        far = members[int(d2.argmax())]
        labels[far] = empty
        counts[largest] -= 1
        counts[empty] += 1
    return labels


def _kmeans(X, k, rng, n_iter=100, restarts=8):
    best_labels = None
    best_inertia = np.inf
    for _ in range(restarts):
        centers = _kmeans_pp_init(X, k, rng)
        labels = None
        for _ in range(n_iter):
            d2 = _pairwise_sq(X, centers)
            new_labels = d2.argmin(axis=1)
            new_labels = _fill_empty_clusters(X, centers, new_labels, k)
            if labels is not None and np.array_equal(new_labels, labels):
                break
            labels = new_labels
            centers = np.stack([X[labels == c].mean(axis=0) for c in range(k)])
        inertia = float(_pairwise_sq(X, centers)[np.arange(X.shape[0]), labels].sum())
        if inertia < best_inertia:
            best_inertia = inertia
            best_labels = labels
    return best_labels.astype(np.int64)


def spectral_cluster(F: np.ndarray, k: int, seed=0) -> np.ndarray:
    """Normalized spectral clustering on the cosine-distance Gaussian affinity.

    Affinity exp(-d^2 / (2 sigma^2)) with sigma = median off-diagonal
    distance, symmetric-normalized Laplacian, K smallest eigenvectors with
    length-normalized rows, k-means++ with 8 restarts (best inertia).
    """
    F = np.asarray(F, dtype=np.float64)
    n = F.shape[0]
    if k < 2:
        raise ValueError("k must be >= 2")
    if n <= k:
        raise ValueError(f"need n > k, got n={n}, k={k}")
    D = cosine_distances(F)
    off = D[~np.eye(n, dtype=bool)]
    sigma = max(float(np.median(off)), _DENOM_FLOOR)
    A = np.exp(-(D * D) / (2.0 * sigma * sigma))
    np.fill_diagonal(A, 0.0)
    deg = A.sum(axis=1) + 1e-12  # isolated vertices regularized
    inv_sqrt = 1.0 / np.sqrt(deg)
    lap = np.eye(n) - inv_sqrt[:, None] * A * inv_sqrt[None, :]
    lap = 0.5 * (lap + lap.T)
    try:
        _, vecs = scipy.linalg.eigh(lap, subset_by_index=(0, k - 1))
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    row_norms = np.linalg.norm(vecs, axis=1)
    row_norms[row_norms < 1e-12] = 1.0
    embedding = vecs / row_norms[:, None]
    rng = np.random.default_rng(seed)
    return _kmeans(embedding, k, rng)


def refine_graph(S: np.ndarray, clusters: np.ndarray) -> np.ndarray:
    """Keep +1 only within a cluster and -1 only across clusters; zero the rest."""
    if S.shape[0] != clusters.shape[0]:
        raise ShapeMismatch(
            f"graph has {S.shape[0]} rows, assignment has {clusters.shape[0]}"
        )
    same = clusters[:, None] == clusters[None, :]
    s_hat = np.zeros_like(S, dtype=np.int8)
    s_hat[same & (S == 1)] = 1
    s_hat[~same & (S == -1)] = -1
    np.fill_diagonal(s_hat, 1)
    return s_hat


def _mode_bins(smooth):
    """Local-maximum bins; a plateau of equal values counts once, at its center."""
    n = len(smooth)
    modes = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and smooth[j + 1] == smooth[i]:
            j += 1
        left = smooth[i - 1] if i > 0 else -np.inf
        right = smooth[j + 1] if j + 1 < n else -np.inf
        if smooth[i] > left and smooth[i] > right and smooth[i] > 0:
            modes.append((i + j) // 2)
        i = j + 1
    return modes


def fit_half_gaussians(D: np.ndarray) -> HalfGaussianFit:
    """Fit the two lobes of the off-diagonal distance histogram.

    64 uniform bins on [0, 2], 5-bin moving average; m1/m2 are the centers
    of the leftmost/rightmost local-maximum bins, and each sigma is the
    mirrored half-sample deviation on its side of the mode (floored at 1e-4).
    """
    n = D.shape[0]
    pairs = D[np.triu_indices(n, 1)]
    if pairs.size < 6:
        raise InsufficientPairs(f"need at least 6 pair distances, got {pairs.size}")
    hist, edges = np.histogram(pairs, bins=_HIST_BINS, range=(0.0, 2.0))
    kernel = np.ones(_SMOOTH_WINDOW) / _SMOOTH_WINDOW
    smooth = np.convolve(hist.astype(np.float64), kernel, mode="same")
    modes = _mode_bins(smooth)
    if not modes:
        modes = [int(smooth.argmax())]
    centers = 0.5 * (edges[:-1] + edges[1:])
    m1 = float(centers[modes[0]])
    m2 = float(centers[modes[-1]])
    left = pairs[pairs <= m1]
    right = pairs[pairs >= m2]
    sigma1 = np.sqrt(np.mean((left - m1) ** 2)) if left.size else 0.0
    sigma2 = np.sqrt(np.mean((right - m2) ** 2)) if right.size else 0.0
    return HalfGaussianFit(m1, max(float(sigma1), _SIGMA_FLOOR),
                           m2, max(float(sigma2), _SIGMA_FLOOR))


def confidence_weights(D: np.ndarray, s_hat: np.ndarray, t: float,
                       fit: HalfGaussianFit) -> np.ndarray:
    """Per-pair reliability in [0, 1] from the half-Gaussian CDFs.

    Below the threshold the weight falls from 1 at d=0 to 0 at d=t; above it
    the weight rises from 0 at d=t to 1 at d=2. Pairs zeroed by refinement
    get weight 0. A collapsed CDF span (< 1e-12) puts weight 1 on the exact
    extreme point of that branch and 0 elsewhere.
    """
    if not 0.0 < t < 2.0:
        raise ValueError(f"threshold must be in (0, 2), got {t}")
    D = np.asarray(D, dtype=np.float64)

    def phi1(x):
        return ndtr((x - fit.m1) / fit.sigma1)

    def phi2(x):
        return ndtr((x - fit.m2) / fit.sigma2)

    W = np.zeros_like(D)
    low = D <= t
    den1 = float(phi1(t) - phi1(0.0))
    if den1 >= _DENOM_FLOOR:
        W[low] = (phi1(t) - phi1(D[low])) / den1
    else:
        W[low] = (D[low] == 0.0).astype(np.float64)
    high = ~low
    den2 = float(phi2(2.0) - phi2(t))
    if den2 >= _DENOM_FLOOR:
        W[high] = (phi2(D[high]) - phi2(t)) / den2
    else:
        W[high] = (D[high] == 2.0).astype(np.float64)
    np.clip(W, 0.0, 1.0, out=W)
    W[s_hat == 0] = 0.0
    return W


def generate_semantic_info(F: np.ndarray, t: float, k: int, seed=0) -> SemanticInfo:
    """Full mining pass over one feature view, deterministic given seed."""
    D = cosine_distances(F)
    S = build_pseudo_graph(D, t)
    clusters = spectral_cluster(F, k, seed)
    s_hat = refine_graph(S, clusters)
    fit = fit_half_gaussians(D)
    W = confidence_weights(D, s_hat, t, fit)
    return SemanticInfo(s_hat, W, fit, clusters, k, t)


def _pack_trits(values):
    """Pack {-1, 0, +1} entries into 2 bits each, 4 per byte, little-end first."""
    codes = (values.reshape(-1).astype(np.int16) + 1).astype(np.uint8)
    pad = (-codes.size) % 4
    if pad:
        codes = np.concatenate([codes, np.zeros(pad, dtype=np.uint8)])
    quads = codes.reshape(-1, 4)
    return (quads[:, 0] | (quads[:, 1] << 2) | (quads[:, 2] << 4)
            | (quads[:, 3] << 6)).astype(np.uint8)


def _unpack_trits(packed, count):
    quads = np.empty((packed.size, 4), dtype=np.uint8)
    quads[:, 0] = packed & 3
    quads[:, 1] = (packed >> 2) & 3
    quads[:, 2] = (packed >> 4) & 3
    quads[:, 3] = (packed >> 6) & 3
    codes = quads.reshape(-1)[:count]
    if (codes > 2).any():
        raise MalformedHeader("invalid packed graph entry")
    return codes.astype(np.int8) - 1


def save_semantic_info(path, info: SemanticInfo):
    """Persist as a binary sidecar; weights are stored as float32."""
    n = info.n
    chunks = [
        SEMANTIC_MAGIC,
        struct.pack("<QdI", n, info.t, info.k),
        struct.pack("<4d", info.fit.m1, info.fit.sigma1, info.fit.m2, info.fit.sigma2),
        info.clusters.astype("<u4").tobytes(),
        _pack_trits(info.s_hat).tobytes(),
        info.weights[np.triu_indices(n)].astype("<f4").tobytes(),
    ]
    Path(path).write_bytes(b"".join(chunks))


def load_semantic_info(path) -> SemanticInfo:
    data = Path(path).read_bytes()
    if len(data) < 4 + 20 + 32 or data[:4] != SEMANTIC_MAGIC:
        raise MalformedHeader("not a semantic-info sidecar")
    n, t, k = struct.unpack_from("<QdI", data, 4)
    m1, s1, m2, s2 = struct.unpack_from("<4d", data, 24)
    offset = 56
    clusters = np.frombuffer(data, dtype="<u4", count=n, offset=offset).astype(np.int64)
    offset += 4 * n
    packed_len = (n * n + 3) // 4
    packed = np.frombuffer(data, dtype=np.uint8, count=packed_len, offset=offset)
    s_hat = _unpack_trits(packed, n * n).reshape(n, n)
    offset += packed_len
    tri_len = n * (n + 1) // 2
    tri = np.frombuffer(data, dtype="<f4", count=tri_len, offset=offset)
    offset += 4 * tri_len
    if len(data) != offset:
        raise ShapeMismatch(f"{len(data) - offset} trailing bytes after payload")
    W = np.zeros((n, n), dtype=np.float64)
    iu = np.triu_indices(n)
    W[iu] = tri
    W[(iu[1], iu[0])] = tri
    return SemanticInfo(s_hat, W, HalfGaussianFit(m1, s1, m2, s2), clusters, k, t)
