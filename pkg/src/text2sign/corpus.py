"""Parallel corpus ingestion, the gloss dictionary, vocabularies and batching.

Corpus files are UTF-8 TSV, one sample per line. The column layout is
declared by the caller, e.g. ``("text", "gloss", "hamnosys", "handshape")``.
HamNoSys strings are raw code points with ``|`` separating signs; gloss and
hand-shape columns are space separated.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

SEPARATOR = "|"
PAD, BOS, EOS, UNK = "<pad>", "<s>", "</s>", "<unk>"
SPECIALS = (PAD, BOS, EOS, UNK)
PAD_ID, BOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3

COLUMNS = ("text", "gloss", "hamnosys", "handshape")

_VARIANT = re.compile(r"^(.*?\D)\d+$")


class CorpusError(ValueError):
    pass


@dataclass
class ParallelSample:
    source_text: str
    gloss: list[str] | None = None
    hamnosys: list[str] | None = None
    handshapes: list[str] | None = None
    sid: str = ""

    def __post_init__(self):
        if not self.source_text.strip():
            raise CorpusError("empty source text")
        if self.gloss is not None and self.handshapes is not None and len(self.gloss) != len(self.handshapes):
            raise CorpusError(
                f"{len(self.handshapes)} hand shapes for {len(self.gloss)} glosses"
            )

    def hamnosys_segments(self) -> list[list[str]]:
        return split_segments(self.hamnosys or [])


def split_segments(symbols: Sequence[str]) -> list[list[str]]:
    segments: list[list[str]] = [[]]
    for s in symbols:
        if s == SEPARATOR:
            segments.append([])
        else:
            segments[-1].append(s)
    return segments if symbols else []


def parse_hamnosys(text: str) -> list[str]:
    """Split a HamNoSys string into code points, dropping whitespace."""
    return [ch for ch in text if not ch.isspace()]


def join_segments(segments: Iterable[Sequence[str]]) -> list[str]:
    out: list[str] = []
    for i, seg in enumerate(segments):
        if i:
            out.append(SEPARATOR)
        out.extend(seg)
    return out


def strip_gloss_variants(gloss: str) -> str:
    """Drop a trailing run of digits (``HAUS2`` -> ``HAUS``); all-digit tokens survive."""
    m = _VARIANT.match(gloss)
    return m.group(1) if m else gloss


def _read_lines(path) -> list[str]:
    raw = Path(path).read_bytes()
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusError(f"{path}: invalid UTF-8 at byte {exc.start}") from exc
    return text.splitlines()


def load_corpus(path, columns: Sequence[str] = ("text", "gloss")) -> list[ParallelSample]:
    columns = tuple(columns)
    unknown = [c for c in columns if c not in COLUMNS]
    if unknown or "text" not in columns:
        raise CorpusError(f"bad column spec {columns}; choose from {COLUMNS} and include 'text'")
    samples = []
    dropped = 0
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != len(columns):
            raise CorpusError(f"{path}:{lineno}: expected {len(columns)} fields, found {len(fields)}")
        row = dict(zip(columns, fields))
        gloss = row["gloss"].split() if "gloss" in row else None
        ham = parse_hamnosys(row["hamnosys"]) if "hamnosys" in row else None
        hands = row["handshape"].split() if "handshape" in row else None
        try:
            sample = ParallelSample(row["text"].strip(), gloss, ham, hands, sid=str(len(samples) + dropped))
        except CorpusError as exc:
            raise CorpusError(f"{path}:{lineno}: {exc}") from None
        if gloss is not None and ham is not None and len(sample.hamnosys_segments()) != len(gloss):
            log.warning(
                "%s:%d: %d HamNoSys segments for %d glosses, sample dropped",
                path, lineno, len(sample.hamnosys_segments()), len(gloss),
            )
            dropped += 1
            continue
        samples.append(sample)
    if dropped:
        log.warning("%s: dropped %d misaligned samples", path, dropped)
    return samples


@dataclass
class SignDictionary:
    entries: dict[str, tuple[list[str], str]] = field(default_factory=dict)

    def __contains__(self, gloss: str) -> bool:
        return strip_gloss_variants(gloss) in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, gloss: str) -> tuple[list[str], str] | None:
        return self.entries.get(strip_gloss_variants(gloss))


def load_dictionary(path) -> SignDictionary:
    entries: dict[str, tuple[list[str], str]] = {}
    for lineno, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3 or not all(f.strip() for f in fields):
            raise CorpusError(f"{path}:{lineno}: expected gloss, hamnosys, handshape")
        gloss, ham, hand = (f.strip() for f in fields)
        key = strip_gloss_variants(gloss)
        symbols = parse_hamnosys(ham)
        if key in entries:
            log.warning("%s:%d: duplicate gloss %r, keeping the later entry", path, lineno, key)
        entries[key] = (symbols, hand)
    return SignDictionary(entries)


class Vocabulary:
    """Dense token <-> id map; ids 0..3 are PAD, BOS, EOS, UNK."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: list[str] = list(SPECIALS)
        self.stoi: dict[str, int] = {t: i for i, t in enumerate(self.itos)}
        for t in tokens:
            if t in self.stoi:
                raise ValueError(f"duplicate vocabulary token {t!r}")
            self.stoi[t] = len(self.itos)
            self.itos.append(t)

    def __len__(self) -> int:
        return len(self.itos)

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def id_of(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)

    def token_of(self, i: int) -> str:
        return self.itos[i]

    def encode(self, tokens: Iterable[str]) -> list[int]:
        return [self.stoi.get(t, UNK_ID) for t in tokens]

    def decode(self, ids: Iterable[int], strip_specials: bool = True) -> list[str]:
        out = []
        for i in ids:
            i = int(i)
            if strip_specials and i < len(SPECIALS):
                if i == EOS_ID:
                    break
                if i != UNK_ID:
                    continue
            out.append(self.itos[i])
        return out

    def to_json(self) -> list[str]:
        return self.itos[len(SPECIALS):]

    @classmethod
    def from_json(cls, tokens: list[str]) -> "Vocabulary":
        return cls(tokens)


def build_vocabulary(sequences: Iterable[Sequence[str]]) -> Vocabulary:
    counts: dict[str, int] = {}
    for seq in sequences:
        for tok in seq:
            counts[tok] = counts.get(tok, 0) + 1
    for s in SPECIALS:
        counts.pop(s, None)
    ordered = sorted(counts, key=lambda t: (-counts[t], t))
    return Vocabulary(ordered)


@dataclass
class EncodedSample:
    src: list[int]
    tgt: list[int]
    hand: list[int] | None = None
    sid: str = ""


@dataclass
class Batch:
    src: np.ndarray          # (B, S) int
    src_mask: np.ndarray     # (B, S) bool, True on real tokens
    tgt_in: np.ndarray       # (B, T) BOS + target
    tgt_out: np.ndarray      # (B, T) target + EOS
    tgt_mask: np.ndarray     # (B, T) bool
    hand_out: np.ndarray | None
    sids: list[str]

    @property
    def size(self) -> int:
        return self.src.shape[0]


def _pad(rows: Sequence[Sequence[int]], width: int) -> np.ndarray:
    out = np.full((len(rows), width), PAD_ID, dtype=np.int64)
    for i, r in enumerate(rows):
        out[i, : len(r)] = r
    return out


def collate(samples: Sequence[EncodedSample]) -> Batch:
    src_w = max(len(s.src) for s in samples)
    tgt_w = max(len(s.tgt) for s in samples) + 1
    src = _pad([s.src for s in samples], src_w)
    tgt_in = _pad([[BOS_ID] + s.tgt for s in samples], tgt_w)
    tgt_out = _pad([s.tgt + [EOS_ID] for s in samples], tgt_w)
    hand = None
    if all(s.hand is not None for s in samples):
        # EOS position carries no hand-shape label
        hand = _pad([list(s.hand) + [PAD_ID] for s in samples], tgt_w)
    return Batch(
        src=src,
        src_mask=src != PAD_ID,
        tgt_in=tgt_in,
        tgt_out=tgt_out,
        tgt_mask=tgt_out != PAD_ID,
        hand_out=hand,
        sids=[s.sid for s in samples],
    )


def make_batches(samples: Sequence[EncodedSample], batch_size: int, seed: int | None = 0) -> list[Batch]:
    """Shuffle with ``seed`` (None keeps input order), group, right-pad."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    order = np.arange(len(samples))
    if seed is not None:
        order = np.random.Generator(np.random.PCG64(seed)).permutation(len(samples))
    return [
        collate([samples[i] for i in order[k : k + batch_size]])
        for k in range(0, len(samples), batch_size)
    ]
