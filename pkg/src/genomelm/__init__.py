"""Genomic language-modeling toolkit: corpus curation, k-mer/BPE
tokenization, autoregressive generation, sequence-recovery benchmarking,
variant effect scoring, and regulatory-element design utilities around a
pluggable causal-LM interface."""

__version__ = "0.1.0"
