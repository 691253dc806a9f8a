"""Loss functions over relaxed codes, each returning its value together with
the exact gradient with respect to the code matrices.

* parallel semantic: weighted squared error between each view's code
  similarity and that same view's refined graph;
* cross semantic: the same but with the graphs swapped across views;
* contrastive: temperature-scaled softmax over cosine similarities that pulls
  the two views of an item together and pushes all other items away, with the
  positive pair excluded from the normalizer;
* total: parallel + cross + eta * contrastive.

Batch-level sums are normalized by 1/M^2 (M = batch size), indexing the
precomputed global graph/weight matrices with the batch's global ids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BatchTooSmall, IndexOutOfRange, ShapeMismatch, ZeroCodeRow


@dataclass
class LossBreakdown:
    psc: float
    csc: float
    cc: float
    total: float
    eta: float
    tau: float


def code_similarity(V: np.ndarray) -> np.ndarray:
    """Normalized code similarity V V^T / L, in [-1, 1] for codes in [-1, 1]."""
    V = np.asarray(V, dtype=np.float64)
    if V.ndim != 2 or V.shape[1] < 1:
        raise ShapeMismatch(f"expected (M, L) codes, got {V.shape}")
    return V @ V.T / V.shape[1]


def _batch_submatrices(info, batch):
    batch = np.asarray(batch)
    if batch.size and (batch.min() < 0 or batch.max() >= info.n):
        raise IndexOutOfRange(
            f"batch ids must lie in [0, {info.n}), got [{batch.min()}, {batch.max()}]"
        )
    grid = np.ix_(batch, batch)
    return info.weights[grid], info.s_hat[grid].astype(np.float64)


def _graph_mse(V, W, S, include_diagonal=True):
    """(1/M^2) sum_ij W_ij (H_ij - S_ij)^2 and its gradient wrt V."""
    M, L = V.shape
    H = V @ V.T / L
    diff = H - S
    terms = W * diff * diff
    G = W * diff
    if not include_diagonal:
        np.fill_diagonal(terms, 0.0)
        np.fill_diagonal(G, 0.0)
    value = float(terms.sum()) / (M * M)
    dV = (2.0 / (M * M)) * (G + G.T) @ V / L
    return value, dV


def parallel_semantic_loss(V1, V2, info1, info2, batch, include_diagonal=True):
    """Match each view's code similarity against its own refined graph."""
    V1 = np.asarray(V1, dtype=np.float64)
    V2 = np.asarray(V2, dtype=np.float64)
    W1, S1 = _batch_submatrices(info1, batch)
    W2, S2 = _batch_submatrices(info2, batch)
    v1, d1 = _graph_mse(V1, W1, S1, include_diagonal)
    v2, d2 = _graph_mse(V2, W2, S2, include_diagonal)
    return v1 + v2, d1, d2


def cross_semantic_loss(V1, V2, info1, info2, batch, include_diagonal=True):
    """Match each view's code similarity against the other view's graph."""
    V1 = np.asarray(V1, dtype=np.float64)
    V2 = np.asarray(V2, dtype=np.float64)
    W1, S1 = _batch_submatrices(info1, batch)
    W2, S2 = _batch_submatrices(info2, batch)
    v21, d2 = _graph_mse(V2, W1, S1, include_diagonal)
    v12, d1 = _graph_mse(V1, W2, S2, include_diagonal)
    return v21 + v12, d1, d2


def _normalize_rows(V, view):
    norms = np.linalg.norm(V, axis=1)
    zero = norms == 0
    if zero.any():
        raise ZeroCodeRow(int(np.nonzero(zero)[0][0]), view)
    return V / norms[:, None], norms


def contrastive_loss(V1, V2, tau=0.5):
    """Temperature-scaled contrastive loss over cosine similarities.

    For each item the positive is its other view; the 2(M-1) codes of the
    remaining items (both views) form the normalizer, which excludes the
    positive pair itself. Returns (value, dV1, dV2) with exact gradients
    through the cosine normalization.
    """
    if tau <= 0:
        raise ValueError("tau must be > 0")
    V1 = np.asarray(V1, dtype=np.float64)
    V2 = np.asarray(V2, dtype=np.float64)
    if V1.shape != V2.shape:
        raise ShapeMismatch(f"views disagree: {V1.shape} vs {V2.shape}")
    M = V1.shape[0]
    if M < 2:
        raise BatchTooSmall("contrastive loss needs batch size >= 2")
    A, n1 = _normalize_rows(V1, view=1)
    B, n2 = _normalize_rows(V2, view=2)

    S11 = A @ A.T
    S12 = A @ B.T
    S22 = B @ B.T
    E11 = np.exp(S11 / tau)
    E12 = np.exp(S12 / tau)
    E21 = E12.T.copy()
    E22 = np.exp(S22 / tau)
    np.fill_diagonal(E11, 0.0)
    np.fill_diagonal(E22, 0.0)
    E12z = E12.copy()
    np.fill_diagonal(E12z, 0.0)
    np.fill_diagonal(E21, 0.0)
    Z1 = E11.sum(axis=1) + E12z.sum(axis=1)
    Z2 = E21.sum(axis=1) + E22.sum(axis=1)
    pos = np.diag(S12)
    value = float(-(1.0 / (2 * M)) * (2 * pos / tau - np.log(Z1) - np.log(Z2)).sum())

    # gradients with respect to the similarity matrices
    coef = 1.0 / (2 * M * tau)
    G11 = coef * E11 / Z1[:, None]
    G12 = coef * E12z / Z1[:, None]
    G21 = coef * E21 / Z2[:, None]
    G22 = coef * E22 / Z2[:, None]
    np.fill_diagonal(G12, -1.0 / (M * tau))

    dA = (G11 + G11.T) @ A + G12 @ B + G21.T @ B
    dB = (G22 + G22.T) @ B + G21 @ A + G12.T @ A

    # chain through the row normalization a_i = v_i / ||v_i||
    dV1 = (dA - ((dA * A).sum(axis=1, keepdims=True)) * A) / n1[:, None]
    dV2 = (dB - ((dB * B).sum(axis=1, keepdims=True)) * B) / n2[:, None]
    return value, dV1, dV2


def total_loss(V1, V2, info1, info2, batch, eta=0.3, tau=0.5,
               use_semantic_consistency=True, use_contrastive=True,
               include_diagonal=True):
    """Combined objective with ablation switches.

    With semantic consistency off, only view 1's parallel term survives and
    the cross term is dropped (info2 may be None). With the contrastive term
    off, cc is reported as 0 and contributes nothing.
    """
    V1 = np.asarray(V1, dtype=np.float64)
    V2 = np.asarray(V2, dtype=np.float64)
    if use_semantic_consistency:
        psc, p1, p2 = parallel_semantic_loss(V1, V2, info1, info2, batch,
                                             include_diagonal)
        csc, c1, c2 = cross_semantic_loss(V1, V2, info1, info2, batch,
                                          include_diagonal)
        dV1 = p1 + c1
        dV2 = p2 + c2
    else:
        W1, S1 = _batch_submatrices(info1, batch)
        psc, dV1 = _graph_mse(V1, W1, S1, include_diagonal)
        csc = 0.0
        dV2 = np.zeros_like(V2)
    if use_contrastive:
        cc, k1, k2 = contrastive_loss(V1, V2, tau)
        dV1 = dV1 + eta * k1
        dV2 = dV2 + eta * k2
    else:
        cc = 0.0
    breakdown = LossBreakdown(psc, csc, cc, psc + csc + eta * cc, eta, tau)
    return breakdown, dV1, dV2
