"""Autoregressive decoding: temperature + nucleus sampling, greedy mode,
conditioning prefixes, and a sequential-decoding adapter for masked models.

Randomness comes from a self-contained xoshiro256** stream seeded through
SplitMix64, so draws are identical across platforms and processes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Protocol, Sequence

import numpy as np

from .errors import ContextOverflow, UnknownPrefixToken
from .lm import CausalLm, TokenDistribution
from .tokenizer import KmerTokenizer

_MASK64 = (1 << 64) - 1


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256:
    """xoshiro256** with SplitMix64 seeding."""

    def __init__(self, seed: int):
        self.s = []
        z = seed & _MASK64
        for _ in range(4):
            z = (z + 0x9E3779B97F4A7C15) & _MASK64
            w = z
            w = ((w ^ (w >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
            w = ((w ^ (w >> 27)) * 0x94D049BB133111EB) & _MASK64
            self.s.append(w ^ (w >> 31))

    def next_u64(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s[1] << 17) & _MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self) -> float:
        """Uniform in [0,1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))


def job_rng(seed: int, job_index: int = 0) -> Xoshiro256:
    """One independent stream per generation job."""
    return Xoshiro256((seed * 0x9E3779B97F4A7C15 + job_index + 1) & _MASK64)


@dataclass
class SamplerConfig:
    temperature: float = 1.0
    nucleus_p: float = 1.0
    max_new_tokens: int = 32
    seed: int = 0
    mode: str = "sample"  # or "greedy"
    context_budget: Optional[int] = None  # max prompt+generated ids fed to the model

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if not 0 < self.nucleus_p <= 1:
            raise ValueError(f"nucleus P must be in (0,1], got {self.nucleus_p}")
        if self.mode not in ("sample", "greedy"):
            raise ValueError(f"unknown mode {self.mode!r}")


def _select(dist: TokenDistribution, cfg: SamplerConfig, rng: Xoshiro256,
            banned: Sequence[int]) -> int:
    probs = dist.probs.copy()
    for b in banned:
        probs[b] = 0.0
    total = probs.sum()
    if total <= 0:
        raise ValueError("all candidate tokens are masked out")
    probs /= total

    if cfg.mode == "greedy":
        return int(np.argmax(probs))  # argmax ties resolve to the lowest id

    if cfg.temperature != 1.0:
        with np.errstate(divide="ignore"):
            logits = np.where(probs > 0, np.log(probs), -np.inf) / cfg.temperature
        logits -= logits.max()
        probs = np.exp(logits)
        probs[dist.probs <= 0] = 0.0
        for b in banned:
            probs[b] = 0.0
        probs /= probs.sum()

    # nucleus: probability-sorted prefix with cumulative mass >= P,
    # equal probabilities admitted lower id first
    order = np.lexsort((np.arange(len(probs)), -probs))
    cum = np.cumsum(probs[order])
    cut = int(np.searchsorted(cum, cfg.nucleus_p - 1e-12)) + 1
    kept = order[:cut]
    kept_probs = probs[kept]
    kept_probs /= kept_probs.sum()

    u = rng.uniform()
    acc = 0.0
    for token_id, p in zip(kept, kept_probs):
        acc += p
        if u < acc:
            return int(token_id)
    return int(kept[-1])


def generate(
    lm: CausalLm,
    prompt_ids: Sequence[int],
    cfg: SamplerConfig,
    job_index: int = 0,
    stop_at_eos: bool = True,
) -> list[int]:
    """Decode up to max_new_tokens ids after the prompt.

    Special tokens other than EOS are masked out of the candidate set.
    Deterministic given (lm, prompt, cfg, job_index).
    """
    vocab = lm.vocabulary()
    if cfg.context_budget is not None and len(prompt_ids) > cfg.context_budget:
        raise ContextOverflow(
            f"prompt of {len(prompt_ids)} ids exceeds budget {cfg.context_budget}"
        )
    banned = [i for i in range(vocab.n_base, len(vocab)) if i != vocab.eos]
    rng = job_rng(cfg.seed, job_index)
    context = list(prompt_ids)
    out: list[int] = []
    for _ in range(cfg.max_new_tokens):
        if cfg.context_budget is not None and len(context) > cfg.context_budget:
            context = context[-cfg.context_budget :]
        token = _select(lm.next_distribution(context), cfg, rng, banned)
        if stop_at_eos and token == vocab.eos:
            break
        out.append(token)
        context.append(token)
    return out


@dataclass
class ConditionedBatch:
    sequences: list[str]  # decoded nucleotide strings
    duplicates_filtered: int
    exhausted: bool  # true when dedup left fewer sequences than requested


def conditioned_generate(
    lm: CausalLm,
    tokenizer: KmerTokenizer,
    prefix_token: str,
    cfg: SamplerConfig,
    n_sequences: int = 1,
    seed_context: Sequence[int] = (),
    dedup_against: Optional[set[str]] = None,
    max_attempts_factor: int = 4,
) -> ConditionedBatch:
    """Generate nucleotide sequences primed with [BOS, prefix]+seed_context.

    With dedup_against, exact-string duplicates are discarded and extra
    attempts are made up to max_attempts_factor * n_sequences.
    """
    vocab = lm.vocabulary()
    try:
        prefix_id = vocab.prefix_id(prefix_token)
    except KeyError:
        raise UnknownPrefixToken(f"prefix token {prefix_token!r} not in vocabulary")
    if not vocab.is_special(prefix_id):
        raise UnknownPrefixToken(f"{prefix_token!r} is not a special token")
    prompt = [vocab.bos, prefix_id, *seed_context]

    seen = set(dedup_against or ())
    sequences: list[str] = []
    filtered = 0
    attempts = 0
    budget = n_sequences if dedup_against is None else n_sequences * max_attempts_factor
    while len(sequences) < n_sequences and attempts < budget:
        ids = generate(lm, prompt, cfg, job_index=attempts)
        bases = tokenizer.decode(ids)
        attempts += 1
        if dedup_against is not None and bases in seen:
            filtered += 1
            continue
        seen.add(bases)
        sequences.append(bases)
    return ConditionedBatch(
        sequences=sequences,
        duplicates_filtered=filtered,
        exhausted=len(sequences) < n_sequences,
    )


class MaskedLm(Protocol):
    """Masked model: distribution at the single masked position."""

    def distribution_at_mask(self, ids_with_single_mask: Sequence[int]) -> TokenDistribution: ...

    def vocabulary(self): ...


class CausalAsMaskedLm:
    """Mask-at-end adapter: a causal LM viewed as a masked model."""

    def __init__(self, lm: CausalLm):
        self._lm = lm

    def vocabulary(self):
        return self._lm.vocabulary()

    def distribution_at_mask(self, ids_with_single_mask: Sequence[int]) -> TokenDistribution:
        mask_id = self._lm.vocabulary().mask
        positions = [i for i, t in enumerate(ids_with_single_mask) if t == mask_id]
        if len(positions) != 1:
            raise ValueError(f"expected exactly one mask token, found {len(positions)}")
        return self._lm.next_distribution(ids_with_single_mask[: positions[0]])


def mlm_sequential_decode(
    mlm: MaskedLm,
    prompt_ids: Sequence[int],
    n_steps: int,
    cfg: SamplerConfig,
    job_index: int = 0,
) -> list[int]:
    """Append a mask, query it, commit the selection; repeat n_steps times."""
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    vocab = mlm.vocabulary()
    if cfg.context_budget is not None and len(prompt_ids) > cfg.context_budget:
        raise ContextOverflow(
            f"prompt of {len(prompt_ids)} ids exceeds budget {cfg.context_budget}"
        )
    banned = [i for i in range(vocab.n_base, len(vocab)) if i != vocab.eos]
    rng = job_rng(cfg.seed, job_index)
    context = list(prompt_ids)
    out: list[int] = []
    for _ in range(n_steps):
        dist = mlm.distribution_at_mask(context + [vocab.mask])
        token = _select(dist, cfg, rng, banned)
        if token == vocab.eos:
            break
        out.append(token)
        context.append(token)
    return out
