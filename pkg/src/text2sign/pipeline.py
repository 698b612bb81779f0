"""Task-level glue: sample -> text per side, tokens -> ids, hand-shape alignment."""
from __future__ import annotations

from typing import Sequence

from .corpus import (
    SEPARATOR,
    EncodedSample,
    ParallelSample,
    SignDictionary,
    Vocabulary,
    parse_hamnosys,
    split_segments,
    strip_gloss_variants,
)
from .model import hand_targets_for
from .tokenizers import CONT, EOW, SPACE, TokenizerModel, normalize, word_starts

TASKS = ("t2g", "t2h")


def source_text(sample: ParallelSample) -> str:
    return normalize(sample.source_text)


def target_text(sample: ParallelSample, task: str) -> str:
    """Gloss line (variants stripped) or HamNoSys line with spaced separators."""
    if task == "t2g":
        if sample.gloss is None:
            raise ValueError(f"sample {sample.sid}: no gloss column")
        return " ".join(strip_gloss_variants(g) for g in sample.gloss)
    if sample.hamnosys is None:
        raise ValueError(f"sample {sample.sid}: no hamnosys column")
    return f" {SEPARATOR} ".join("".join(seg) for seg in split_segments(sample.hamnosys))


def scoring_tokens(line: str, task: str) -> list[str]:
    """Glosses split on whitespace; HamNoSys split into symbols, separators kept."""
    return line.split() if task == "t2g" else parse_hamnosys(line)


def target_segments(tokenizer: TokenizerModel, tokens: Sequence[str], task: str) -> list[int]:
    """Sign index per target token; -1 marks separators and explicit spaces."""
    if task == "t2g":
        return word_starts(tokenizer, tokens)
    out = []
    seg = 0
    for t in tokens:
        surface = t[: -len(EOW)] if t.endswith(EOW) else t
        if surface.startswith(CONT):
            surface = surface[len(CONT):]
        if surface == SEPARATOR:
            out.append(-1)
            seg += 1
        elif t == SPACE:
            out.append(-1)
        else:
            out.append(seg)
    return out


def handshapes_for(sample: ParallelSample, dictionary: SignDictionary | None) -> list[str] | None:
    if sample.handshapes is not None:
        return sample.handshapes
    if dictionary is None or sample.gloss is None:
        return None
    out = []
    for g in sample.gloss:
        entry = dictionary.lookup(g)
        if entry is None:
            return None
        out.append(entry[1])
    return out


def encode_sample(
    sample: ParallelSample,
    task: str,
    src_tok: TokenizerModel,
    tgt_tok: TokenizerModel,
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    hand_vocab: Vocabulary | None = None,
    dictionary: SignDictionary | None = None,
) -> EncodedSample:
    src_tokens = src_tok.encode(source_text(sample))
    tgt_tokens = tgt_tok.encode(target_text(sample, task))
    hand = None
    hands = handshapes_for(sample, dictionary) if hand_vocab is not None else None
    if hands is not None:
        segs = target_segments(tgt_tok, tgt_tokens, task)
        hand = hand_targets_for(segs, hand_vocab.encode(hands))
    return EncodedSample(src_vocab.encode(src_tokens), tgt_vocab.encode(tgt_tokens), hand, sample.sid)
