"""Dataset IO, feature-space augmentation, and synthetic data generation.

Binary formats are little-endian throughout:

* feature file: magic ``CIMF`` | u32 version (=1) | u64 n | u64 d |
  u32 view count (1 or 2) | per view, n*d float32 row-major | n u64 ids.
* label file: magic ``CIML`` | u64 n | per item, u32 count followed by
  ``count`` u32 label ids.

A single-view feature file stores an un-augmented base matrix; the loader
duplicates it into both views so every caller sees the same two-view shape.
Labels live in their own file so the training path never touches them.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateAugmentation,
    MalformedHeader,
    NonFiniteValue,
    ShapeMismatch,
    ZeroRow,
)

FEATURE_MAGIC = b"CIMF"
LABEL_MAGIC = b"CIML"
FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sIQQI")
_MAX_REDRAWS = 16


@dataclass
class FeatureViewPair:
    """Two equally shaped float32 feature views plus per-item integer ids."""

    view1: np.ndarray
    view2: np.ndarray
    ids: np.ndarray

    @property
    def n(self) -> int:
        return self.view1.shape[0]

    @property
    def d(self) -> int:
        return self.view1.shape[1]


@dataclass
class LabelVector:
    """Per-item label sets (multi-label allowed), evaluation-only."""

    labels: tuple

    @property
    def n(self) -> int:
        return len(self.labels)

    def indicator(self, width=None) -> np.ndarray:
        """Dense 0/1 matrix with one column per label id in [0, width)."""
        if width is None:
            width = 1 + max(max(s) for s in self.labels)
        mat = np.zeros((self.n, width), dtype=np.uint8)
        for i, s in enumerate(self.labels):
            for lab in s:
                mat[i, lab] = 1
        return mat


@dataclass
class AugmentConfig:
    """Feature-space augmentation: additive Gaussian noise then coordinate dropout."""

    noise_sigma: float = 0.0
    dropout_rate: float = 0.0
    seed: int = 0

    def validate(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")


def validate_view(mat: np.ndarray, view=None):
    """Raise NonFiniteValue/ZeroRow naming the first offending row."""
    bad = ~np.isfinite(mat)
    if bad.any():
        raise NonFiniteValue(int(np.nonzero(bad.any(axis=1))[0][0]), view)
    zero = ~mat.any(axis=1)
    if zero.any():
        raise ZeroRow(int(np.nonzero(zero)[0][0]), view)


def validate_pair(pair: FeatureViewPair):
    if pair.view1.ndim != 2 or pair.view1.shape != pair.view2.shape:
        raise ShapeMismatch(
            f"views disagree: {pair.view1.shape} vs {pair.view2.shape}"
        )
    n, d = pair.view1.shape
    if n < 2 or d < 1:
        raise ShapeMismatch(f"need n >= 2 and d >= 1, got n={n}, d={d}")
    if pair.ids.shape != (n,):
        raise ShapeMismatch(f"ids length {pair.ids.shape} does not match n={n}")
    if len(np.unique(pair.ids)) != n:
        raise MalformedHeader("item ids are not unique")
    validate_view(pair.view1, view=1)
    validate_view(pair.view2, view=2)


def write_feature_views(path, view1, view2=None, ids=None):
    """Write a 1-view (base) or 2-view feature file; validates before writing."""
    view1 = np.ascontiguousarray(view1, dtype="<f4")
    views = [view1]
    if view2 is not None:
        view2 = np.ascontiguousarray(view2, dtype="<f4")
        views.append(view2)
    n, d = view1.shape
    if ids is None:
        ids = np.arange(n, dtype="<u8")
    ids = np.ascontiguousarray(ids, dtype="<u8")
    pair = FeatureViewPair(view1, view2 if view2 is not None else view1, ids)
    validate_pair(pair)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FEATURE_MAGIC, FORMAT_VERSION, n, d, len(views)))
        for v in views:
            fh.write(v.tobytes())
        fh.write(ids.tobytes())


def peek_view_count(path) -> int:
    """View count from a feature file's header without loading the payload."""
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
    if len(head) < _HEADER.size:
        raise MalformedHeader(f"file shorter than header ({len(head)} bytes)")
    magic, version, _, _, nviews = _HEADER.unpack(head)
    if magic != FEATURE_MAGIC:
        raise MalformedHeader(f"bad magic {magic!r}, expected {FEATURE_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise MalformedHeader(f"unsupported format version {version}")
    if nviews not in (1, 2):
        raise MalformedHeader(f"view count must be 1 or 2, got {nviews}")
    return nviews


def load_feature_views(path) -> FeatureViewPair:
    """Load and validate a feature file; a 1-view file yields identical views."""
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise MalformedHeader(f"file shorter than header ({len(data)} bytes)")
    magic, version, n, d, nviews = _HEADER.unpack_from(data, 0)
    if magic != FEATURE_MAGIC:
        raise MalformedHeader(f"bad magic {magic!r}, expected {FEATURE_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise MalformedHeader(f"unsupported format version {version}")
    if nviews not in (1, 2):
        raise MalformedHeader(f"view count must be 1 or 2, got {nviews}")
    if n < 2 or d < 1:
        raise ShapeMismatch(f"need n >= 2 and d >= 1, got n={n}, d={d}")

    offset = _HEADER.size
    views = []
    for v in range(nviews):
        nbytes = n * d * 4
        if len(data) < offset + nbytes:
            have = (len(data) - offset) // (d * 4)
            raise ShapeMismatch(
                f"view {v + 1} truncated: header promises {n} rows, found {have}"
            )
        arr = np.frombuffer(data, dtype="<f4", count=n * d, offset=offset)
        views.append(arr.reshape(n, d).copy())
        offset += nbytes
    if len(data) < offset + n * 8:
        have = (len(data) - offset) // 8
        raise ShapeMismatch(f"ids truncated: header promises {n}, found {have}")
    ids = np.frombuffer(data, dtype="<u8", count=n, offset=offset).copy()
    offset += n * 8
    if len(data) != offset:
        raise ShapeMismatch(f"{len(data) - offset} trailing bytes after payload")

    view2 = views[1] if nviews == 2 else views[0].copy()
    pair = FeatureViewPair(views[0], view2, ids)
    validate_pair(pair)
    return pair


def write_labels(path, labels: LabelVector):
    chunks = [LABEL_MAGIC, struct.pack("<Q", labels.n)]
    for i, s in enumerate(labels.labels):
        if not s:
            raise MalformedHeader(f"empty label set at item {i}")
        ids = sorted(int(x) for x in s)
        if ids[0] < 0:
            raise MalformedHeader(f"negative label id at item {i}")
        chunks.append(struct.pack(f"<I{len(ids)}I", len(ids), *ids))
    Path(path).write_bytes(b"".join(chunks))


def load_labels(path) -> LabelVector:
    data = Path(path).read_bytes()
    if len(data) < 12:
        raise MalformedHeader(f"file shorter than header ({len(data)} bytes)")
    magic, n = struct.unpack_from("<4sQ", data, 0)
    if magic != LABEL_MAGIC:
        raise MalformedHeader(f"bad magic {magic!r}, expected {LABEL_MAGIC!r}")
    offset = 12
    labels = []
    for i in range(n):
        if len(data) < offset + 4:
            raise ShapeMismatch(f"label record {i} truncated")
        (count,) = struct.unpack_from("<I", data, offset)
        offset += 4
        if count == 0:
            raise MalformedHeader(f"empty label set at item {i}")
        if len(data) < offset + 4 * count:
            raise ShapeMismatch(f"label record {i} truncated")
        ids = struct.unpack_from(f"<{count}I", data, offset)
        offset += 4 * count
        labels.append(frozenset(ids))
    if len(data) != offset:
        raise ShapeMismatch(f"{len(data) - offset} trailing bytes after payload")
    return LabelVector(tuple(labels))


def _perturb(base64, sigma, rate, rng):
    """One noisy copy of ``base64`` (float64 in, float32 out), no zero rows."""
    n, d = base64.shape
    out = base64.copy()
    if sigma > 0:
        out = out + rng.normal(0.0, sigma, size=(n, d))
    if rate > 0:
        out[rng.random(size=(n, d)) < rate] = 0.0
    out32 = out.astype(np.float32)
    for i in np.nonzero(~out32.any(axis=1))[0]:
        for _ in range(_MAX_REDRAWS):
            row = base64[i].copy()
            if sigma > 0:
                row = row + rng.normal(0.0, sigma, size=d)
            if rate > 0:
                row[rng.random(size=d) < rate] = 0.0
            row32 = row.astype(np.float32)
            if row32.any():
                out32[i] = row32
                break
        else:
            raise DegenerateAugmentation(int(i))
    return out32


def perturb_features(base: np.ndarray, cfg: AugmentConfig) -> np.ndarray:
    """Single perturbed copy of ``base`` (used for robustness probes)."""
    cfg.validate()
    base = np.asarray(base)
    validate_view(base)
    return _perturb(base.astype(np.float64), cfg.noise_sigma, cfg.dropout_rate,
                    np.random.default_rng(cfg.seed))


def augment_features(base: np.ndarray, cfg: AugmentConfig,
                     ids=None) -> FeatureViewPair:
    """Two independently augmented views of ``base``, deterministic per seed.

    Each view is base + Gaussian noise (std ``noise_sigma``) followed by
    coordinate dropout at ``dropout_rate``. Rows that end up all-zero are
    re-drawn up to 16 times, then DegenerateAugmentation is raised.
    """
    cfg.validate()
    base = np.asarray(base)
    validate_view(base)
    rng = np.random.default_rng(cfg.seed)
    base64 = base.astype(np.float64)
    view1 = _perturb(base64, cfg.noise_sigma, cfg.dropout_rate, rng)
    view2 = _perturb(base64, cfg.noise_sigma, cfg.dropout_rate, rng)
    if ids is None:
        ids = np.arange(base.shape[0], dtype=np.uint64)
    pair = FeatureViewPair(view1, view2, np.asarray(ids, dtype=np.uint64))
    validate_pair(pair)
    return pair


def make_synthetic(k_clusters: int, per_cluster: int, d: int,
                   separation: float, seed=0):
    """Gaussian blobs around centers on a sphere of radius ``separation``.

    Returns (FeatureViewPair with identical views, LabelVector of cluster ids).
    """
    if k_clusters < 2:
        raise ValueError("k_clusters must be >= 2")
    if per_cluster < 2:
        raise ValueError("per_cluster must be >= 2")
    if d < 1:
        raise ValueError("d must be >= 1")
    if separation < 0:
        raise ValueError("separation must be >= 0")
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(k_clusters, d))
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    centers = separation * dirs / norms
    assignments = np.repeat(np.arange(k_clusters), per_cluster)
    n = k_clusters * per_cluster
    base = (centers[assignments] + rng.normal(size=(n, d))).astype(np.float32)
    ids = np.arange(n, dtype=np.uint64)
    pair = FeatureViewPair(base, base.copy(), ids)
    validate_pair(pair)
    labels = LabelVector(tuple(frozenset({int(c)}) for c in assignments))
    return pair, labels
