"""Greedy and beam-search decoding.

Both searches are written against a ``step_fn(prefixes) -> log-probs`` callable
so they can run over the transformer or over hand-built toy distributions.
Prefixes start with BOS; returned token lists exclude BOS and keep a final
EOS when one was produced.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import numerics as nx
from .corpus import BOS_ID, EOS_ID
from .model import ContextualEmbeddings, Transformer

StepFn = Callable[[list[list[int]]], np.ndarray]


@dataclass
class Hypothesis:
    tokens: list[int]
    logprob: float = 0.0
    finished: bool = False

    def score(self, alpha: float) -> float:
        n = len(self.tokens) - 1
        if alpha == 0 or n == 0:
            return self.logprob
        return self.logprob / (n ** alpha)

    @property
    def output(self) -> list[int]:
        return self.tokens[1:]


def default_max_len(src_len: int, factor: float = 1.5, offset: int = 10) -> int:
    return max(1, int(factor * src_len + offset))


def model_step_fn(
    model: Transformer, src_ids: Sequence[int], sid: str | None = None,
    contextual: ContextualEmbeddings | None = None,
) -> StepFn:
    """Encode ``src_ids`` once; the returned callable scores next tokens."""
    src = np.asarray([list(src_ids)], dtype=np.int64)
    mask = np.ones_like(src, dtype=bool)
    model.training = False
    with nx.no_grad():
        x, mem_mask = model.embed_source(src, mask, [sid] if sid is not None else None, contextual)
        memory = model.encode(x, mem_mask)

    def step(prefixes: list[list[int]]) -> np.ndarray:
        tgt = np.asarray(prefixes, dtype=np.int64)
        n = tgt.shape[0]
        mem = nx.Tensor(np.broadcast_to(memory.data, (n,) + memory.shape[1:]))
        with nx.no_grad():
            logits, _ = model.decode(tgt, mem, np.broadcast_to(mem_mask, (n, mem_mask.shape[1])))
            logp = nx.log_softmax(nx.Tensor(logits.data[:, -1, :].astype(np.float64)))
        return logp.data

    return step


def greedy_search(step_fn: StepFn, max_len: int) -> Hypothesis:
    hyp = Hypothesis([BOS_ID])
    for _ in range(max_len):
        row = step_fn([hyp.tokens])[0]
        tok = int(np.argmax(row))  # lowest id wins ties
        hyp = Hypothesis(hyp.tokens + [tok], hyp.logprob + float(row[tok]), tok == EOS_ID)
        if hyp.finished:
            break
    return hyp


def beam_search(step_fn: StepFn, beam_size: int, max_len: int, alpha: float = 0.0) -> Hypothesis:
    if beam_size < 1:
        raise ValueError("beam_size must be >= 1")
    live = [Hypothesis([BOS_ID])]
    finished: list[Hypothesis] = []
    for _ in range(max_len):
        logp = step_fn([h.tokens for h in live])
        cands = []
        for i, h in enumerate(live):
            row = logp[i]
            top = np.argsort(-row, kind="stable")[:beam_size]
            for tok in top:
                cands.append(Hypothesis(h.tokens + [int(tok)], h.logprob + float(row[tok]), int(tok) == EOS_ID))
        # stable sort keeps (parent rank, token id) order among equal scores
        cands.sort(key=lambda h: -h.score(alpha))
        live = []
        for h in cands[:beam_size]:
            (finished if h.finished else live).append(h)
        if not live or len(finished) >= beam_size:
            break
        if alpha == 0 and finished:
            # log-probs only fall as hypotheses grow
            if max(f.logprob for f in finished) >= max(h.logprob for h in live):
                break
    pool = finished or live
    return max(pool, key=lambda h: h.score(alpha))


def greedy_decode(model: Transformer, src_ids: Sequence[int], max_len: int | None = None, **kw) -> list[int]:
    max_len = max_len or default_max_len(len(src_ids))
    return greedy_search(model_step_fn(model, src_ids, **kw), max_len).output


def beam_decode(
    model: Transformer, src_ids: Sequence[int], beam_size: int = 5, max_len: int | None = None,
    alpha: float = 0.0, **kw,
) -> list[int]:
    max_len = max_len or default_max_len(len(src_ids))
    return beam_search(model_step_fn(model, src_ids, **kw), beam_size, max_len, alpha).output


def sequence_logprob(step_fn: StepFn, tokens: Sequence[int]) -> float:
    """Re-score ``tokens`` (without BOS) one prefix at a time."""
    total = 0.0
    prefix = [BOS_ID]
    for tok in tokens:
        total += float(step_fn([prefix])[0][tok])
        prefix = prefix + [int(tok)]
    return total
