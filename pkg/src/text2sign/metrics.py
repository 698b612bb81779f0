"""Corpus BLEU-1..4, ROUGE-L F1 and gloss -> HamNoSys conversion.

BLEU follows the original corpus formulation: clipped n-gram counts summed
over the corpus, uniform weights, brevity penalty, no smoothing.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Sequence

from .corpus import SEPARATOR, UNK, SignDictionary, strip_gloss_variants


class MetricError(ValueError):
    pass


def _check(hyps, refs) -> None:
    if len(hyps) != len(refs):
        raise MetricError(f"{len(hyps)} hypotheses vs {len(refs)} references")
    if not hyps:
        raise MetricError("empty corpus")


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def ngram_precisions(hyps, refs, max_n: int = 4) -> list[Fraction]:
    matched = [0] * max_n
    total = [0] * max_n
    for h, r in zip(hyps, refs):
        for n in range(1, max_n + 1):
            hc, rc = _ngrams(h, n), _ngrams(r, n)
            matched[n - 1] += sum(min(c, rc[g]) for g, c in hc.items())
            total[n - 1] += max(len(h) - n + 1, 0)
    return [Fraction(m, t) if t else Fraction(0) for m, t in zip(matched, total)]


def brevity_penalty(hyp_len: int, ref_len: int) -> float:
    if hyp_len == 0:
        return 0.0
    return min(1.0, math.exp(1.0 - ref_len / hyp_len))


def bleu(hyps: Sequence[Sequence[str]], refs: Sequence[Sequence[str]], max_n: int = 4) -> list[float]:
    """BLEU-1..``max_n`` on a 0-100 scale."""
    _check(hyps, refs)
    p = ngram_precisions(hyps, refs, max_n)
    bp = brevity_penalty(sum(map(len, hyps)), sum(map(len, refs)))
    scores = []
    for k in range(1, max_n + 1):
        prod = math.prod(p[:k])
        if prod == 0:
            scores.append(0.0)
        else:
            scores.append(100.0 * bp * float(prod) ** (1.0 / k))
    return scores


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l_f1(hyps: Sequence[Sequence[str]], refs: Sequence[Sequence[str]]) -> float:
    _check(hyps, refs)
    total = 0.0
    for h, r in zip(hyps, refs):
        lcs = lcs_length(h, r)
        p = lcs / len(h) if h else 0.0
        rec = lcs / len(r) if r else 0.0
        total += 2 * p * rec / (p + rec) if p + rec else 0.0
    return 100.0 * total / len(hyps)


@dataclass
class ScoreReport:
    bleu1: float
    bleu2: float
    bleu3: float
    bleu4: float
    rouge: float
    sentences: int
    hyp_length: int
    ref_length: int
    length_ratio: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


def score(hyps: Sequence[Sequence[str]], refs: Sequence[Sequence[str]]) -> ScoreReport:
    b = bleu(hyps, refs)
    hl, rl = sum(map(len, hyps)), sum(map(len, refs))
    return ScoreReport(
        bleu1=b[0], bleu2=b[1], bleu3=b[2], bleu4=b[3],
        rouge=rouge_l_f1(hyps, refs),
        sentences=len(hyps), hyp_length=hl, ref_length=rl,
        length_ratio=hl / rl if rl else 0.0,
    )


def format_table(rows: dict[str, ScoreReport]) -> str:
    """Plain-text table, one row per split: BLEU-4..1 then ROUGE."""
    head = f"{'split':<8}{'BLEU-4':>9}{'BLEU-3':>9}{'BLEU-2':>9}{'BLEU-1':>9}{'ROUGE':>9}"
    lines = [head, "-" * len(head)]
    for name, r in rows.items():
        lines.append(
            f"{name:<8}{r.bleu4:>9.2f}{r.bleu3:>9.2f}{r.bleu2:>9.2f}{r.bleu1:>9.2f}{r.rouge:>9.2f}"
        )
    return "\n".join(lines) + "\n"


def gloss_to_hamnosys(glosses: Sequence[str], dictionary: SignDictionary) -> tuple[list[str], int]:
    """Replace each gloss by its HamNoSys symbols, ``|`` between signs.

    Returns the symbol sequence and how many glosses were missing from the
    dictionary (each of those becomes a single UNK symbol).
    """
    out: list[str] = []
    missing = 0
    for i, g in enumerate(glosses):
        if i:
            out.append(SEPARATOR)
        entry = dictionary.lookup(strip_gloss_variants(g))
        if entry is None:
            missing += 1
            out.append(UNK)
        else:
            out.extend(entry[0])
    return out, missing
