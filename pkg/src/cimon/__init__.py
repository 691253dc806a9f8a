"""Unsupervised hash-code learning from mined similarity graphs.

Pipeline: feature ingestion and augmentation -> similarity mining
(pseudo-graph, spectral refinement, confidence weights) -> consistency
training of a small hashing head -> Hamming-space retrieval evaluation
and robustness analysis.
"""

__version__ = "0.1.0"

from . import evalkit, hashnet, ingest, losses, simgraph, trainer  # noqa: F401,E402
