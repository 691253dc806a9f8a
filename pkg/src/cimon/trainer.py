"""End-to-end training: per-view semantic mining before the loop, then
minibatch SGD over the combined consistency objective, with ablation switches
that degrade the pipeline variant by variant.

Ablation ladder (cumulative):

* M1 - raw pseudo-graph, unit weights, single view, no contrastive term;
* M2 - adds spectral refinement of the graph;
* M3 - adds confidence weights;
* M4 - adds two-view semantic consistency (parallel + cross);
* M5 - adds the contrastive term (the full method).

Training never sees labels; evaluation-only label data stays in `evalkit`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import evalkit, hashnet, losses, simgraph
from .errors import NonFiniteActivation, NonFiniteLoss
from .ingest import FeatureViewPair, LabelVector


@dataclass
class TrainConfig:
    t: float = 0.1
    k_clusters: int = 70
    eta: float = 0.3
    tau: float = 0.5
    learning_rate: float = 0.001
    momentum: float = 0.9
    batch_size: int = 24
    epochs: int = 100
    seed: int = 0
    code_length: int = 16
    hidden_dims: tuple = (512,)
    use_refinement: bool = True
    use_confidence: bool = True
    use_semantic_consistency: bool = True
    use_contrastive: bool = True
    include_diagonal: bool = True
    early_stop: bool = False
    early_stop_tol: float = 1e-5
    early_stop_patience: int = 10

    def validate(self):
        if not 0.0 < self.t < 2.0:
            raise ValueError("t must be in (0, 2)")
        if self.k_clusters < 2:
            raise ValueError("k_clusters must be >= 2")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if self.tau <= 0:
            raise ValueError("tau must be > 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must be in [0, 1)")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.code_length < 1:
            raise ValueError("code_length must be >= 1")


@dataclass
class TrainReport:
    history: list = field(default_factory=list)   # per-epoch LossBreakdown
    wall_time: float = 0.0
    semantic_builds: int = 0
    config: TrainConfig | None = None


ABLATION_VARIANTS = (
    ("M1", dict(use_refinement=False, use_confidence=False,
                use_semantic_consistency=False, use_contrastive=False)),
    ("M2", dict(use_refinement=True, use_confidence=False,
                use_semantic_consistency=False, use_contrastive=False)),
    ("M3", dict(use_refinement=True, use_confidence=True,
                use_semantic_consistency=False, use_contrastive=False)),
    ("M4", dict(use_refinement=True, use_confidence=True,
                use_semantic_consistency=True, use_contrastive=False)),
    ("M5", dict(use_refinement=True, use_confidence=True,
                use_semantic_consistency=True, use_contrastive=True)),
)


def build_semantic_info(F, cfg: TrainConfig, seed) -> simgraph.SemanticInfo:
    """Mining pass honoring the ablation switches.

    Refinement off keeps the raw +-1 pseudo-graph; confidence off replaces
    the weights with all-ones.
    """
    D = simgraph.cosine_distances(F)
    S = simgraph.build_pseudo_graph(D, cfg.t)
    if cfg.use_refinement:
        clusters = simgraph.spectral_cluster(F, cfg.k_clusters, seed)
        s_hat = simgraph.refine_graph(S, clusters)
    else:
        clusters = np.zeros(F.shape[0], dtype=np.int64)
        s_hat = S
    fit = simgraph.fit_half_gaussians(D)
    if cfg.use_confidence:
        W = simgraph.confidence_weights(D, s_hat, cfg.t, fit)
    else:
        W = np.ones_like(D)
    return simgraph.SemanticInfo(s_hat, W, fit, clusters, cfg.k_clusters, cfg.t)


def _epoch_batches(perm, batch_size):
    """Full batches of an epoch-level shuffle; a short tail is dropped."""
    n_batches = len(perm) // batch_size
    return [perm[k * batch_size : (k + 1) * batch_size] for k in range(n_batches)]


def train(views: FeatureViewPair, cfg: TrainConfig, encode_features=None):
    """Train the hashing head on a fixed pair of views.

    Returns (model, codes, report). Database codes come from view 1 unless
    ``encode_features`` overrides the matrix to binarize (e.g. the un-noised
    base the views were augmented from).
    """
    cfg.validate()
    n = views.n
    if n < cfg.batch_size:
        raise ValueError(f"need n >= batch_size, got n={n}, batch_size={cfg.batch_size}")
    seeds = np.random.SeedSequence(cfg.seed).spawn(4)
    start = time.perf_counter()

    F1 = views.view1.astype(np.float64)
    F2 = views.view2.astype(np.float64)
    info1 = build_semantic_info(F1, cfg, seeds[0])
    builds = 1
    if cfg.use_semantic_consistency:
        info2 = build_semantic_info(F2, cfg, seeds[1])
        builds += 1
    else:
        info2 = None

    model = hashnet.init_model(views.d, cfg.hidden_dims, cfg.code_length, seeds[2])
    state = hashnet.init_optim(model, cfg.learning_rate, cfg.momentum)
    shuffle_rng = np.random.default_rng(seeds[3])

    history = []
    best_total = np.inf
    stale_epochs = 0
    for epoch in range(cfg.epochs):
        sums = np.zeros(3)  # psc, csc, cc
        batches = _epoch_batches(shuffle_rng.permutation(n), cfg.batch_size)
        for b_idx, batch in enumerate(batches):
            try:
                V1, cache1 = hashnet.forward_relaxed(model, F1[batch])
                V2, cache2 = hashnet.forward_relaxed(model, F2[batch])
            except NonFiniteActivation as exc:
                raise NonFiniteLoss(epoch, b_idx) from exc
            bd, dV1, dV2 = losses.total_loss(
                V1, V2, info1, info2, batch,
                eta=cfg.eta, tau=cfg.tau,
                use_semantic_consistency=cfg.use_semantic_consistency,
                use_contrastive=cfg.use_contrastive,
                include_diagonal=cfg.include_diagonal,
            )
            if not np.isfinite(bd.total):
                raise NonFiniteLoss(epoch, b_idx)
            gw1, gb1 = hashnet.backward(model, cache1, dV1)
            gw2, gb2 = hashnet.backward(model, cache2, dV2)
            grads = ([a + b for a, b in zip(gw1, gw2)],
                     [a + b for a, b in zip(gb1, gb2)])
            hashnet.sgd_momentum_step(model, state, grads)
            sums += (bd.psc, bd.csc, bd.cc)
        psc, csc, cc = (float(v) for v in sums / max(len(batches), 1))
        history.append(losses.LossBreakdown(
            psc, csc, cc, psc + csc + cfg.eta * cc, cfg.eta, cfg.tau))
        if cfg.early_stop:
            total = history[-1].total
            if total < best_total - cfg.early_stop_tol:
                best_total = total
                stale_epochs = 0
            else:
                stale_epochs += 1
                if stale_epochs >= cfg.early_stop_patience:
                    break

    target = views.view1 if encode_features is None else encode_features
    codes = hashnet.encode(model, target)
    report = TrainReport(history, time.perf_counter() - start, builds, cfg)
    return model, codes, report


def ablation_suite(views: FeatureViewPair, labels: LabelVector,
                   base_cfg: TrainConfig, code_lengths=None, r=None):
    """Train and score the five cumulative variants.

    Retrieval is self-retrieval over the training items: every item queries
    the full database, relevance is sharing at least one label, and the
    ranking cutoff defaults to the database size. Returns one row dict per
    (variant, code length) with the variant flags echoed verbatim.
    """
    if labels.n != views.n:
        raise ValueError("labels and views disagree on n")
    if code_lengths is None:
        code_lengths = (base_cfg.code_length,)
    rows = []
    for length in code_lengths:
        for name, flags in ABLATION_VARIANTS:
            cfg = replace(base_cfg, code_length=length, **flags)
            _, codes, _ = train(views, cfg)
            ranked = evalkit.hamming_rank(codes, codes)
            mean_ap, _ = evalkit.mean_average_precision(
                ranked, labels, labels, r if r is not None else views.n)
            rows.append({
                "variant": name,
                "use_refinement": flags["use_refinement"],
                "use_confidence": flags["use_confidence"],
                "use_semantic_consistency": flags["use_semantic_consistency"],
                "use_contrastive": flags["use_contrastive"],
                "code_length": length,
                "map": mean_ap,
            })
    return rows
