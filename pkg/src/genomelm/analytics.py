"""Classification metrics and embedding analysis.

The embedding side uses L1-normalized k-mer composition profiles as the
model-free default; embeddings from an external model arrive through the
bridge's embed op and are treated identically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    ConstantInput,
    EmptyInput,
    SequenceTooShort,
    SingleCluster,
)
from .design import kmer_counts


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("confusion counts must be non-negative")


def mcc(cc: ConfusionCounts) -> float:
    """Matthews correlation coefficient; 0 when any denominator factor is 0."""
    num = cc.tp * cc.tn - cc.fp * cc.fn
    factors = [
        cc.tp + cc.fp,
        cc.tp + cc.fn,
        cc.tn + cc.fp,
        cc.tn + cc.fn,
    ]
    if any(f == 0 for f in factors):
        return 0.0
    return num / math.sqrt(math.prod(factors))


def weighted_f1(confusion_matrix: Sequence[Sequence[int]]) -> float:
    """Support-weighted mean of per-class F1. Rows are true classes,
    columns predictions. Classes with precision+recall == 0 score 0."""
    m = np.asarray(confusion_matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("confusion matrix must be square")
    total = m.sum()
    if total == 0:
        raise EmptyInput("empty confusion matrix")
    score = 0.0
    for i in range(m.shape[0]):
        support = m[i].sum()
        if support == 0:
            continue
        tp = m[i, i]
        col = m[:, i].sum()
        precision = tp / col if col else 0.0
        recall = tp / support
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall > 0
            else 0.0
        )
        score += (support / total) * f1
    return score


def pearson_r(x: Sequence[float], y: Sequence[float]) -> float:
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if len(xa) != len(ya) or len(xa) < 2:
        raise ValueError("need two equal-length vectors with n >= 2")
    xc = xa - xa.mean()
    yc = ya - ya.mean()
    denom = math.sqrt((xc @ xc) * (yc @ yc))
    if denom == 0:
        raise ConstantInput("correlation undefined for a constant input")
    return float((xc @ yc) / denom)


# --- embeddings --------------------------------------------------------------

@dataclass
class EmbeddingSet:
    vectors: np.ndarray  # n x d
    labels: list[str]

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=float)
        if self.vectors.ndim != 2:
            raise ValueError("vectors must be an n x d matrix")
        if len(self.labels) != self.vectors.shape[0]:
            raise ValueError("one label per row required")
        if not np.isfinite(self.vectors).all():
            raise ValueError("embedding entries must be finite")


def profile_embedding(bases: str, k: int) -> np.ndarray:
    """L1-normalized k-mer frequency vector of length 4^k."""
    if "N" in bases:
        raise ValueError("profile embeddings require N-free sequences")
    if len(bases) < k:
        raise SequenceTooShort(f"sequence of {len(bases)} nt shorter than k={k}")
    counts = kmer_counts(bases, k)
    return counts / counts.sum()


@dataclass
class PcaResult:
    coords: np.ndarray  # n x dims
    explained_variance: list[float]
    degenerate_dims: int  # trailing components zero-filled for rank-deficient data


def pca_project(embeddings: EmbeddingSet, dims: int = 2) -> PcaResult:
    """Principal-component projection by power iteration with deflation.

    Components converge when successive estimates have cosine similarity
    above 1 - 1e-10 (or after 10,000 iterations). Each component's sign is
    fixed so its largest-magnitude entry is positive. Rank-deficient data
    yields zero-filled trailing dimensions, reported rather than fatal.
    """
    X = embeddings.vectors
    n = X.shape[0]
    if n < dims:
        raise ValueError(f"need at least {dims} points, got {n}")
    Xc = X - X.mean(axis=0)
    cov = (Xc.T @ Xc) / (n - 1) if n > 1 else np.zeros((X.shape[1],) * 2)

    components = []
    variances = []
    degenerate = 0
    rng = np.random.default_rng(0)
    work = cov.copy()
    for _ in range(dims):
        eigval, vec = _power_iteration(work, rng)
        if eigval <= 1e-12:
            degenerate += 1
            components.append(np.zeros(X.shape[1]))
            variances.append(0.0)
            continue
        # deterministic sign: largest-magnitude entry positive
        pivot = int(np.argmax(np.abs(vec)))
        if vec[pivot] < 0:
            vec = -vec
        components.append(vec)
        variances.append(float(eigval))
        work = work - eigval * np.outer(vec, vec)

    coords = Xc @ np.stack(components, axis=1)
    return PcaResult(coords=coords, explained_variance=variances, degenerate_dims=degenerate)


def _power_iteration(matrix: np.ndarray, rng, tol: float = 1e-10, max_iter: int = 10_000):
    d = matrix.shape[0]
    v = rng.normal(size=d)
    v /= np.linalg.norm(v)
    eigval = 0.0
    for _ in range(max_iter):
        w = matrix @ v
        norm = np.linalg.norm(w)
        if norm <= 1e-300:
            return 0.0, v
        w /= norm
        if abs(w @ v) > 1 - tol:
            v = w
            eigval = float(v @ matrix @ v)
            break
        v = w
    else:
        eigval = float(v @ matrix @ v)
    return eigval, v


def silhouette(embeddings: EmbeddingSet, metric: str = "euclidean") -> float:
    """Mean silhouette (b - a) / max(a, b); singleton clusters score 0."""
    labels = embeddings.labels
    unique = sorted(set(labels))
    if len(unique) < 2:
        raise SingleCluster("silhouette needs at least two labels")
    X = embeddings.vectors
    if metric == "euclidean":
        sq = (X**2).sum(axis=1)
        d2 = sq[:, None] + sq[None, :] - 2 * (X @ X.T)
        dist = np.sqrt(np.clip(d2, 0, None))
    elif metric == "cosine":
        norms = np.linalg.norm(X, axis=1)
        dist = 1 - (X @ X.T) / np.outer(norms, norms)
        np.fill_diagonal(dist, 0)
    else:
        raise ValueError(f"unknown metric {metric!r}")

    label_arr = np.asarray(labels)
    scores = []
    for i in range(len(labels)):
        same = label_arr == label_arr[i]
        n_same = int(same.sum())
        if n_same == 1:
            scores.append(0.0)
            continue
        a = dist[i][same].sum() / (n_same - 1)
        b = min(
            dist[i][label_arr == other].mean()
            for other in unique
            if other != label_arr[i]
        )
        scores.append((b - a) / max(a, b) if max(a, b) > 0 else 0.0)
    return float(np.mean(scores))


# --- export ------------------------------------------------------------------

def embeddings_to_tsv(ids: Sequence[str], embeddings: EmbeddingSet) -> str:
    d = embeddings.vectors.shape[1]
    lines = ["#id\tlabel\t" + "\t".join(f"v_{i + 1}" for i in range(d))]
    for seq_id, label, row in zip(ids, embeddings.labels, embeddings.vectors):
        lines.append(f"{seq_id}\t{label}\t" + "\t".join(f"{v:.6g}" for v in row))
    return "\n".join(lines) + "\n"


def projection_to_tsv(ids: Sequence[str], labels: Sequence[str], coords: np.ndarray) -> str:
    lines = ["#id\tlabel\tx\ty"]
    for seq_id, label, (x, y) in zip(ids, labels, coords):
        lines.append(f"{seq_id}\t{label}\t{x:.6g}\t{y:.6g}")
    return "\n".join(lines) + "\n"
