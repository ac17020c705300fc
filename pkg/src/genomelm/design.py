"""Regulatory-element design loop: activity quantile labels, prefix-token
dataset construction, a k-mer ridge activity predictor, predictor-guided
selection, and per-base contribution scores."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np

from .errors import (
    PoolTooSmall,
    SingularSystem,
    TooFewSamples,
    UnknownPrefixToken,
)
from .seqcore import NucleotideSequence
from .tokenizer import _DIGIT_LUT, BASES, KmerTokenizer

PREFIX_BY_LABEL = {"high": "<high>", "mid": "<mid>", "low": "<low>"}


@dataclass(frozen=True)
class ActivityRecord:
    sequence: NucleotideSequence
    activity: float  # log2 fold-change units
    promoter_class: str = "Dev"  # Dev | Hk

    def __post_init__(self):
        if not math.isfinite(self.activity):
            raise ValueError("activity must be finite")
        if self.promoter_class not in ("Dev", "Hk"):
            raise ValueError(f"unknown promoter class {self.promoter_class!r}")


class ActivityPredictor(Protocol):
    def predict(self, sequence: str) -> float: ...


def quantile_labels(activities: Sequence[float]) -> list[str]:
    """Partition into low / mid / high at the 25th and 75th percentiles
    (linear interpolation). Values exactly at a threshold fall into the
    middle band, so an all-equal input is labeled entirely mid."""
    if len(activities) < 4:
        raise TooFewSamples(f"need at least 4 activities, got {len(activities)}")
    a = np.asarray(activities, dtype=float)
    q25, q75 = np.percentile(a, [25, 75])
    labels = []
    for x in a:
        if x < q25:
            labels.append("low")
        elif x > q75:
            labels.append("high")
        else:
            labels.append("mid")
    return labels


def build_prefix_dataset(
    records: Sequence[ActivityRecord],
    labels: Sequence[str],
    tokenizer: KmerTokenizer,
) -> list[list[int]]:
    """Token streams [BOS, <label>, tokens(seq), EOS], one per record."""
    vocab = tokenizer.vocab
    out = []
    for record, label in zip(records, labels):
        prefix = PREFIX_BY_LABEL.get(label)
        if prefix is None:
            raise UnknownPrefixToken(f"no prefix token for label {label!r}")
        try:
            prefix_id = vocab.id_of(prefix)
        except KeyError:
            raise UnknownPrefixToken(f"{prefix!r} not in vocabulary")
        body = tokenizer.encode(record.sequence.bases)
        out.append([vocab.bos, prefix_id, *body, vocab.eos])
    return out


# --- k-mer ridge predictor ---------------------------------------------------

def kmer_counts(bases: str, k: int) -> np.ndarray:
    """Count vector over the 4^k k-mers in lexicographic order; windows
    containing N are skipped."""
    n_windows = len(bases) - k + 1
    if n_windows <= 0:
        return np.zeros(4**k)
    digits = _DIGIT_LUT[np.frombuffer(bases.encode("ascii"), dtype=np.uint8)]
    windows = np.lib.stride_tricks.sliding_window_view(digits, k).astype(np.int64)
    ok = (windows != 255).all(axis=1)
    powers = 4 ** np.arange(k - 1, -1, -1, dtype=np.int64)
    ranks = windows[ok] @ powers
    return np.bincount(ranks, minlength=4**k).astype(float)


@dataclass
class KmerRidgePredictor:
    """Affine model over k-mer counts: predict = w . counts + b."""

    k: int
    weights: np.ndarray  # length 4^k
    intercept: float
    l2: float

    def predict(self, sequence: str) -> float:
        return float(kmer_counts(sequence, self.k) @ self.weights + self.intercept)


def fit_kmer_ridge(
    records: Sequence[ActivityRecord], k: int = 5, l2: float = 1.0
) -> KmerRidgePredictor:
    """Regularized least squares via the normal equations. The intercept
    is unpenalized (features and targets are mean-centered for the solve)."""
    if len(records) < 2:
        raise TooFewSamples(f"need at least 2 records, got {len(records)}")
    if l2 < 0:
        raise ValueError(f"l2 strength must be >= 0, got {l2}")
    X = np.stack([kmer_counts(r.sequence.bases, k) for r in records])
    y = np.asarray([r.activity for r in records], dtype=float)
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    yc = y - y_mean
    gram = Xc.T @ Xc + l2 * np.eye(X.shape[1])
    try:
        w = np.linalg.solve(gram, Xc.T @ yc)
    except np.linalg.LinAlgError:
        raise SingularSystem("normal equations are singular; use l2 > 0")
    if l2 == 0 and np.linalg.matrix_rank(gram) < gram.shape[0]:
        raise SingularSystem("normal equations are singular; use l2 > 0")
    return KmerRidgePredictor(
        k=k, weights=w, intercept=float(y_mean - x_mean @ w), l2=l2
    )


# --- selection ---------------------------------------------------------------

@dataclass
class SelectionPlan:
    top: int = 0
    bottom: int = 0
    random: int = 0
    seed: int = 0


@dataclass
class SelectionReport:
    top: list[str]
    bottom: list[str]
    random: list[str]
    scores: dict[str, float]


def rank_and_select(
    predictor: ActivityPredictor,
    candidates: Sequence[str],
    plan: SelectionPlan,
) -> SelectionReport:
    """Deterministic predictor-guided selection: highest-scoring `top`,
    lowest-scoring `bottom`, and a seeded random draw from the remainder.
    Score ties break by lexicographic sequence order."""
    pool = list(dict.fromkeys(candidates))  # dedup, keep first occurrence
    needed = plan.top + plan.bottom + plan.random
    if needed > len(pool):
        raise PoolTooSmall(f"plan needs {needed} sequences, pool has {len(pool)}")
    scores = {seq: predictor.predict(seq) for seq in pool}
    by_score = sorted(pool, key=lambda s: (-scores[s], s))
    top = by_score[: plan.top]
    bottom_sorted = sorted(pool, key=lambda s: (scores[s], s))
    bottom = [s for s in bottom_sorted if s not in set(top)][: plan.bottom]
    taken = set(top) | set(bottom)
    rest = [s for s in sorted(pool) if s not in taken]
    rng = random.Random(plan.seed)
    rand = rng.sample(rest, plan.random) if plan.random else []
    return SelectionReport(top=top, bottom=bottom, random=rand, scores=scores)


# --- contribution scores ------------------------------------------------------

def contribution_scores(
    predictor: ActivityPredictor, sequence: str
) -> list[Optional[float]]:
    """Per-position score: predicted activity of the sequence minus the
    mean over the three single-base substitutions at that position.
    Positions holding N are emitted as None."""
    if not sequence:
        raise ValueError("sequence must be non-empty")
    base_score = predictor.predict(sequence)
    out: list[Optional[float]] = []
    for i, original in enumerate(sequence):
        if original == "N":
            out.append(None)
            continue
        alternatives = [b for b in BASES if b != original]
        mutated_mean = sum(
            predictor.predict(sequence[:i] + b + sequence[i + 1 :])
            for b in alternatives
        ) / len(alternatives)
        out.append(base_score - mutated_mean)
    return out


def save_predictor(predictor: KmerRidgePredictor, path) -> None:
    import json

    with open(path, "w") as fh:
        json.dump(
            {
                "k": predictor.k,
                "weights": predictor.weights.tolist(),
                "intercept": predictor.intercept,
                "l2": predictor.l2,
            },
            fh,
        )


def load_predictor(path) -> KmerRidgePredictor:
    import json

    with open(path) as fh:
        obj = json.load(fh)
    return KmerRidgePredictor(
        k=obj["k"],
        weights=np.asarray(obj["weights"], dtype=float),
        intercept=obj["intercept"],
        l2=obj["l2"],
    )


# --- DeepSTARR-style file i/o -------------------------------------------------

def read_activity_tsv(path, head: str = "dev") -> list[ActivityRecord]:
    """TSV columns: sequence, dev_activity, hk_activity[, split]."""
    if head not in ("dev", "hk"):
        raise ValueError(f"head must be 'dev' or 'hk', got {head!r}")
    col = 1 if head == "dev" else 2
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            cols = line.split("\t")
            records.append(
                ActivityRecord(
                    sequence=NucleotideSequence(cols[0].upper()),
                    activity=float(cols[col]),
                    promoter_class="Dev" if head == "dev" else "Hk",
                )
            )
    return records


def contributions_to_tsv(sequence: str, scores: Sequence[Optional[float]]) -> str:
    lines = ["#pos\tbase\tcontribution"]
    for i, (base, c) in enumerate(zip(sequence, scores), start=1):
        lines.append(f"{i}\t{base}\t{'NA' if c is None else f'{c:.6g}'}")
    return "\n".join(lines) + "\n"
