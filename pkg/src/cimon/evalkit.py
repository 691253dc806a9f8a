"""Hamming-retrieval evaluation: ranking, MAP@R, interpolated PR curve,
top-N precision, query-perturbation robustness, and per-bit balance.

Conventions pinned for reproducibility:

* ranking ties break by ascending database index (stable sort);
* AP normalizes by min(R, number of relevant items in the database), so a
  query fully retrievable within R can reach AP = 1;
* queries with no relevant database item score AP = 0 and stay in the mean;
* relevance means sharing at least one label.

Report files: PR and top-N points go to two-column CSV (``recall,precision``
and ``n,precision``), flip histograms to ``changed_bits,count`` CSV, scalar
summaries to a sorted-key JSON file.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from . import hashnet
from .errors import CodeLengthMismatch, EmptyDatabase, GridOutOfRange
from .ingest import AugmentConfig, LabelVector, perturb_features


@dataclass
class EvalConfig:
    r: int | None = None          # MAP cutoff; None means database size
    topn_grid: tuple = ()
    seed: int = 0


@dataclass
class EvalReport:
    map: float
    pr_points: list
    topn_points: list
    per_query_ap: list


@dataclass
class RobustnessReport:
    changed_bits_histogram: np.ndarray   # counts per flip count 0..L
    map_before: float
    map_after: float
    bit_balance: np.ndarray              # per-bit probability of +1
    flip_counts: np.ndarray = field(repr=False, default=None)


def hamming_distances(queries, database) -> np.ndarray:
    """Pairwise Hamming distances between {-1,+1} code matrices.

    Uses the exact identity Hamming = (L - <q, b>) / 2 in integer arithmetic.
    """
    queries = np.asarray(queries)
    database = np.asarray(database)
    if queries.shape[1] != database.shape[1]:
        raise CodeLengthMismatch(
            f"queries have L={queries.shape[1]}, database has L={database.shape[1]}"
        )
    length = queries.shape[1]
    dots = queries.astype(np.int32) @ database.astype(np.int32).T
    return (length - dots) // 2


def hamming_rank(queries, database) -> np.ndarray:
    """Per query, database indices by ascending distance, ties by index."""
    dist = hamming_distances(queries, database)
    return np.argsort(dist, axis=1, kind="stable")


def relevance_matrix(query_labels: LabelVector, db_labels: LabelVector):
    width = 1 + max(
        max(max(s) for s in query_labels.labels),
        max(max(s) for s in db_labels.labels),
    )
    q = query_labels.indicator(width).astype(np.int64)
    d = db_labels.indicator(width).astype(np.int64)
    return (q @ d.T) > 0


def mean_average_precision(ranked, query_labels, db_labels, r):
    """MAP over queries plus the per-query AP list.

    AP = (1 / min(R, total relevant)) * sum over relevant ranks k <= R of
    (relevant in top k) / k, accumulated in ascending rank order.
    """
    ranked = np.asarray(ranked)
    if ranked.ndim != 2 or ranked.shape[1] == 0:
        raise EmptyDatabase("ranked lists are empty")
    if r < 1:
        raise ValueError("r must be >= 1")
    rel = relevance_matrix(query_labels, db_labels)
    aps = []
    for qi in range(ranked.shape[0]):
        rel_ranked = rel[qi][ranked[qi]]
        total_rel = int(rel[qi].sum())
        if total_rel == 0:
            aps.append(0.0)
            continue
        top = rel_ranked[:r]
        cum = np.cumsum(top)
        ap = 0.0
        for k in np.nonzero(top)[0]:
            ap += cum[k] / (k + 1)
        aps.append(float(ap / min(r, total_rel)))
    return sum(aps) / len(aps), aps


def pr_curve(ranked, query_labels, db_labels, levels=101):
    """Max-interpolated precision at evenly spaced recall levels, averaged
    over queries. Zero-relevant queries contribute zero precision."""
    ranked = np.asarray(ranked)
    rel = relevance_matrix(query_labels, db_labels)
    recall_levels = np.linspace(0.0, 1.0, levels)
    acc = np.zeros(levels)
    n_db = ranked.shape[1]
    ranks = np.arange(1, n_db + 1)
    for qi in range(ranked.shape[0]):
        rel_ranked = rel[qi][ranked[qi]]
        total_rel = int(rel[qi].sum())
        if total_rel == 0:
            continue
        cum = np.cumsum(rel_ranked)
        precision = cum / ranks
        recall = cum / total_rel
        interp = np.maximum.accumulate(precision[::-1])[::-1]
        idx = np.searchsorted(recall, recall_levels, side="left")
        acc += interp[np.minimum(idx, n_db - 1)]
    acc /= ranked.shape[0]
    return list(zip(recall_levels.tolist(), acc.tolist()))


def topn_precision(ranked, query_labels, db_labels, grid):
    """Mean fraction of relevant items within the top N, per grid value."""
    ranked = np.asarray(ranked)
    n_db = ranked.shape[1]
    for n_top in grid:
        if not 1 <= n_top <= n_db:
            raise GridOutOfRange(f"top-N value {n_top} outside [1, {n_db}]")
    rel = relevance_matrix(query_labels, db_labels)
    points = []
    for n_top in grid:
        hits = np.array([
            rel[qi][ranked[qi][:n_top]].sum() for qi in range(ranked.shape[0])
        ])
        points.append((int(n_top), float(np.mean(hits / n_top))))
    return points


def evaluate(query_codes, db_codes, query_labels, db_labels,
             cfg: EvalConfig) -> EvalReport:
    """Rank once, then compute MAP, the PR curve, and top-N precisions."""
    db_codes = np.asarray(db_codes)
    if db_codes.shape[0] == 0:
        raise EmptyDatabase("database has no codes")
    ranked = hamming_rank(query_codes, db_codes)
    r = cfg.r if cfg.r is not None else db_codes.shape[0]
    mean_ap, per_query = mean_average_precision(ranked, query_labels, db_labels, r)
    pr = pr_curve(ranked, query_labels, db_labels)
    topn = topn_precision(ranked, query_labels, db_labels, cfg.topn_grid)
    return EvalReport(mean_ap, pr, topn, per_query)


def bit_balance(codes) -> np.ndarray:
    """Per-bit fraction of +1 entries across all items."""
    codes = np.asarray(codes)
    if codes.shape[0] < 1:
        raise ValueError("need at least one code")
    return (codes > 0).mean(axis=0)


def robustness_eval(model, query_features, db_codes, query_labels, db_labels,
                    noise: AugmentConfig, cfg: EvalConfig) -> RobustnessReport:
    """Encode queries, perturb their features, re-encode, and compare.

    Produces the per-query changed-bit histogram, MAP before/after the
    perturbation, and the database per-bit balance.
    """
    db_codes = np.asarray(db_codes)
    codes_before = hashnet.encode(model, query_features)
    perturbed = perturb_features(query_features, noise)
    codes_after = hashnet.encode(model, perturbed)
    length = codes_before.shape[1]
    flips = (codes_before != codes_after).sum(axis=1)
    hist = np.bincount(flips, minlength=length + 1)
    r = cfg.r if cfg.r is not None else db_codes.shape[0]
    map_before, _ = mean_average_precision(
        hamming_rank(codes_before, db_codes), query_labels, db_labels, r)
    map_after, _ = mean_average_precision(
        hamming_rank(codes_after, db_codes), query_labels, db_labels, r)
    return RobustnessReport(hist, map_before, map_after,
                            bit_balance(db_codes), flips)


def _fmt(value):
    if isinstance(value, float):
        return repr(float(value))  # numpy scalars included
    return str(value)


def write_points_csv(path, header, rows):
    """Two-plus-column CSV with deterministic float formatting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_histogram_csv(path, counts):
    write_points_csv(path, ("changed_bits", "count"),
                     list(enumerate(int(c) for c in counts)))


def write_summary_json(path, summary: dict):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
