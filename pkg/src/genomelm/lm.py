"""Causal language-model contract, an interpolated Markov reference model,
and a JSON-lines bridge to external models.

All log probabilities are base-e.
"""
from __future__ import annotations

import json
import math
import socket
import subprocess
import select
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import (
    BadSmoothing,
    BridgeTimeout,
    EmptyCorpus,
    PeerUnavailable,
    ProtocolViolation,
    UnknownTokenId,
)
from .tokenizer import Vocabulary

_SUM_TOL = 1e-9


@dataclass(frozen=True)
class TokenDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        if (p < 0).any():
            raise ValueError("negative probability")
        if abs(p.sum() - 1.0) > _SUM_TOL:
            raise ValueError(f"probabilities sum to {p.sum()}, not 1")

    def __len__(self) -> int:
        return len(self.probs)


@runtime_checkable
class CausalLm(Protocol):
    """Anything that maps a token-id context to a next-token distribution."""

    def next_distribution(self, context: Sequence[int]) -> TokenDistribution: ...

    def vocabulary(self) -> Vocabulary: ...


class UniformLm:
    """Uniform next-token model; the random-guessing baseline."""

    def __init__(self, vocab: Vocabulary):
        self._vocab = vocab
        self._dist = TokenDistribution(np.full(len(vocab), 1.0 / len(vocab)))

    def next_distribution(self, context: Sequence[int]) -> TokenDistribution:
        return self._dist

    def vocabulary(self) -> Vocabulary:
        return self._vocab


class MarkovLm:
    """Order-n count model: lambda-weighted mixture of add-alpha estimates.

    Per order o in 0..n the estimate for token t given the last o context
    ids c is (count(c,t) + alpha) / (count(c,*) + alpha*|V|); the emitted
    distribution is sum_o lambda_o * estimate_o, strictly positive.
    """

    FORMAT_VERSION = 1

    def __init__(self, vocab: Vocabulary, order: int, alpha: float, lambdas: Sequence[float]):
        if order < 0:
            raise BadSmoothing(f"order must be >= 0, got {order}")
        if alpha <= 0:
            raise BadSmoothing(f"alpha must be > 0, got {alpha}")
        lambdas = [float(x) for x in lambdas]
        if len(lambdas) != order + 1:
            raise BadSmoothing(f"need {order + 1} interpolation weights, got {len(lambdas)}")
        if any(x < 0 for x in lambdas) or abs(sum(lambdas) - 1.0) > 1e-9:
            raise BadSmoothing("interpolation weights must be a simplex")
        self._vocab = vocab
        self.order = order
        self.alpha = alpha
        self.lambdas = lambdas
        # counts[o][context tuple of length o] -> {token_id: count}
        self.counts: list[dict[tuple, dict[int, int]]] = [
            {} for _ in range(order + 1)
        ]

    def vocabulary(self) -> Vocabulary:
        return self._vocab

    def observe(self, ids: Sequence[int]) -> None:
        V = len(self._vocab)
        for t in ids:
            if not 0 <= t < V:
                raise UnknownTokenId(f"token id {t} outside vocabulary of size {V}")
        for pos, token in enumerate(ids):
            for o in range(self.order + 1):
                if pos < o:
                    continue
                ctx = tuple(ids[pos - o : pos])
                table = self.counts[o].setdefault(ctx, {})
                table[token] = table.get(token, 0) + 1

    def next_distribution(self, context: Sequence[int]) -> TokenDistribution:
        V = len(self._vocab)
        for t in context:
            if not 0 <= t < V:
                raise UnknownTokenId(f"token id {t} outside vocabulary of size {V}")
        probs = np.zeros(V)
        for o, lam in enumerate(self.lambdas):
            if lam == 0.0:
                continue
            ctx = tuple(context[-o:]) if o else ()
            table = self.counts[o].get(ctx, {})
            total = sum(table.values())
            denom = total + self.alpha * V
            est = np.full(V, self.alpha / denom)
            for token, c in table.items():
                est[token] = (c + self.alpha) / denom
            probs += lam * est
        return TokenDistribution(probs / probs.sum())

    # --- persistence: JSON header line, then one JSON line per context -------

    def save(self, path) -> None:
        header = {
            "format_version": self.FORMAT_VERSION,
            "vocab_hash": self._vocab.content_hash(),
            "vocab": {"tokens": list(self._vocab.tokens), "n_base": self._vocab.n_base},
            "order": self.order,
            "alpha": self.alpha,
            "lambdas": self.lambdas,
        }
        with open(path, "w") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for o in range(self.order + 1):
                for ctx in sorted(self.counts[o]):
                    table = self.counts[o][ctx]
                    row = {
                        "o": o,
                        "ctx": list(ctx),
                        "counts": {str(t): c for t, c in sorted(table.items())},
                    }
                    fh.write(json.dumps(row, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "MarkovLm":
        with open(path) as fh:
            header = json.loads(fh.readline())
            if header.get("format_version") != cls.FORMAT_VERSION:
                raise ValueError(f"unsupported model format: {header.get('format_version')}")
            vocab = Vocabulary(
                tokens=tuple(header["vocab"]["tokens"]), n_base=header["vocab"]["n_base"]
            )
            model = cls(vocab, header["order"], header["alpha"], header["lambdas"])
            for line in fh:
                row = json.loads(line)
                model.counts[row["o"]][tuple(row["ctx"])] = {
                    int(t): c for t, c in row["counts"].items()
                }
        return model


def train_markov(
    corpus: Sequence[Sequence[int]],
    vocab: Vocabulary,
    order: int,
    alpha: float = 0.1,
    lambdas: Optional[Sequence[float]] = None,
) -> MarkovLm:
    """Accumulate counts for all orders 0..order over token-id sequences.

    Default interpolation weights put most mass on the highest order:
    lambda_o proportional to 2^o.
    """
    seqs = [list(s) for s in corpus if len(s)]
    if not seqs:
        raise EmptyCorpus("Markov training corpus is empty")
    if lambdas is None:
        raw = [2.0**o for o in range(order + 1)]
        lambdas = [x / sum(raw) for x in raw]
    model = MarkovLm(vocab, order, alpha, lambdas)
    for ids in seqs:
        model.observe(ids)
    return model


def sequence_logprob(model: CausalLm, ids: Sequence[int]) -> float:
    if not len(ids):
        raise ValueError("cannot score an empty id sequence")
    total = 0.0
    for pos in range(len(ids)):
        dist = model.next_distribution(ids[:pos])
        total += math.log(dist.probs[ids[pos]])
    return total


# --- bridge ------------------------------------------------------------------

class BridgeModel:
    """CausalLm over a JSON-lines peer (subprocess stdio or TCP).

    Requests: {"op":"next","context":[ids]} -> {"probs":[...]} or
    {"top":[[id,logprob],...],"rest_mass":r}; {"op":"embed","context":[...]}
    -> {"vec":[...]}; {"op":"vocab"} -> {"tokens":[...]}.
    """

    def __init__(self, peer: "_Peer", timeout: float = 30.0):
        self._peer = peer
        self.timeout = timeout
        reply = self._call({"op": "vocab"})
        tokens = reply.get("tokens")
        if not isinstance(tokens, list) or not tokens:
            raise ProtocolViolation("vocab reply missing token list")
        n_special = sum(1 for t in tokens if t.startswith("<"))
        self._vocab = Vocabulary(tokens=tuple(tokens), n_base=len(tokens) - n_special)

    def vocabulary(self) -> Vocabulary:
        return self._vocab

    def next_distribution(self, context: Sequence[int]) -> TokenDistribution:
        reply = self._call({"op": "next", "context": list(context)})
        V = len(self._vocab)
        if "probs" in reply:
            probs = np.asarray(reply["probs"], dtype=float)
            if probs.shape != (V,):
                raise ProtocolViolation(
                    f"probs length {probs.size} != vocabulary size {V}"
                )
        elif "top" in reply:
            probs = np.zeros(V)
            rest = float(reply.get("rest_mass", 0.0))
            ids = []
            for token_id, logprob in reply["top"]:
                if not 0 <= token_id < V:
                    raise ProtocolViolation(f"top entry id {token_id} out of range")
                probs[token_id] = math.exp(logprob)
                ids.append(token_id)
            others = V - len(ids)
            if others:
                probs[probs == 0.0] = rest / others
        else:
            raise ProtocolViolation("next reply has neither 'probs' nor 'top'")
        if (probs < 0).any() or abs(probs.sum() - 1.0) > 1e-6:
            raise ProtocolViolation(f"probabilities sum to {probs.sum()}")
        return TokenDistribution(probs / probs.sum())

    def embed(self, context: Sequence[int]) -> np.ndarray:
        reply = self._call({"op": "embed", "context": list(context)})
        if "vec" not in reply:
            raise ProtocolViolation("embed reply missing 'vec'")
        return np.asarray(reply["vec"], dtype=float)

    def _call(self, request: dict) -> dict:
        line = self._peer.roundtrip(json.dumps(request), self.timeout)
        try:
            reply = json.loads(line)
        except json.JSONDecodeError:
            raise ProtocolViolation(f"unparsable reply: {line[:200]!r}")
        if not isinstance(reply, dict):
            raise ProtocolViolation("reply is not a JSON object")
        if "error" in reply:
            raise ProtocolViolation(f"peer error: {reply['error']}")
        return reply

    def close(self) -> None:
        self._peer.close()


class _SubprocessPeer:
    def __init__(self, argv: list[str]):
        try:
            self.proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise PeerUnavailable(str(exc))

    def roundtrip(self, line: str, timeout: float) -> str:
        if self.proc.poll() is not None:
            raise PeerUnavailable("bridge peer exited")
        self.proc.stdin.write(line + "\n")
        self.proc.stdin.flush()
        ready, _, _ = select.select([self.proc.stdout], [], [], timeout)
        if not ready:
            raise BridgeTimeout(f"no reply within {timeout}s")
        reply = self.proc.stdout.readline()
        if not reply:
            raise PeerUnavailable("bridge peer closed its stdout")
        return reply

    def close(self) -> None:
        if self.proc.poll() is None:
            self.proc.terminate()


class _TcpPeer:
    def __init__(self, host: str, port: int):
        try:
            self.sock = socket.create_connection((host, port), timeout=10.0)
        except OSError as exc:
            raise PeerUnavailable(str(exc))
        self.reader = self.sock.makefile("r")

    def roundtrip(self, line: str, timeout: float) -> str:
        self.sock.settimeout(timeout)
        try:
            self.sock.sendall((line + "\n").encode())
            reply = self.reader.readline()
        except socket.timeout:
            raise BridgeTimeout(f"no reply within {timeout}s")
        except OSError as exc:
            raise PeerUnavailable(str(exc))
        if not reply:
            raise PeerUnavailable("bridge peer closed the connection")
        return reply

    def close(self) -> None:
        self.sock.close()


def bridge_model(target: str, timeout: float = 30.0) -> BridgeModel:
    """Connect to a bridge peer.

    `host:port` opens a TCP stream; anything else is run as a command
    line speaking the protocol on stdio.
    """
    host, sep, port = target.rpartition(":")
    if sep and host and port.isdigit() and "/" not in host and " " not in host:
        return BridgeModel(_TcpPeer(host, int(port)), timeout=timeout)
    return BridgeModel(_SubprocessPeer(target.split()), timeout=timeout)
