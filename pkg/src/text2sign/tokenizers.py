"""Word, character, BPE and WordPiece tokenisation.

Only whitespace collapsing is applied as normalisation. Reserved strings:
the BPE end-of-word marker ``</w>`` must not occur inside input words.
"""
from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

KINDS = ("word", "char", "bpe", "wordpiece")
EOW = "</w>"
SPACE = "\u2423"
CONT = "##"
WP_UNK = "[UNK]"


class TokenizerError(ValueError):
    pass


@dataclass
class TokenizerModel:
    kind: str
    merges: list[tuple[str, str]] = field(default_factory=list)
    vocab: list[str] = field(default_factory=list)
    markers: dict[str, str] = field(
        default_factory=lambda: {"eow": EOW, "space": SPACE, "continuation": CONT, "unk": WP_UNK}
    )

    def __post_init__(self):
        if self.kind not in KINDS:
            raise TokenizerError(f"unknown tokenizer kind {self.kind!r}")
        self.merges = [tuple(m) for m in self.merges]
        self._ranks = {pair: i for i, pair in enumerate(self.merges)}
        self._vocab_set = frozenset(self.vocab)
        self._cache: dict[str, tuple[str, ...]] = {}

    def encode(self, text: str) -> list[str]:
        if self.kind == "word":
            return tokenize_word(text)
        if self.kind == "char":
            return tokenize_char(text)
        if self.kind == "bpe":
            return bpe_encode(self, text)
        return wordpiece_encode(self, text)

    def decode(self, tokens: Sequence[str]) -> str:
        return detokenize(self, tokens)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "merges": [list(m) for m in self.merges],
            "vocab": list(self.vocab),
            "markers": dict(self.markers),
        }

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


def normalize(text: str) -> str:
    return " ".join(text.split())


def tokenize_word(text: str) -> list[str]:
    return text.split()


def tokenize_char(text: str) -> list[str]:
    # A literal ␣ in the input becomes the two-symbol token "␣␣", which a
    # single code point can never collide with.
    return [SPACE if ch == " " else (SPACE * 2 if ch == SPACE else ch) for ch in text]


def _word_symbols(word: str) -> list[str]:
    syms = list(word)
    syms[-1] += EOW
    return syms


def _pairs(symbols: Sequence[str]):
    return zip(symbols, symbols[1:])


def _merge_word(symbols: list[str], pair: tuple[str, str]) -> list[str]:
    left, right = pair
    out = []
    i = 0
    n = len(symbols)
    while i < n:
        if i + 1 < n and symbols[i] == left and symbols[i + 1] == right:
            out.append(left + right)
            i += 2
        else:
            out.append(symbols[i])
            i += 1
    return out


def bpe_train(corpus: Iterable[Sequence[str]], vocab_size: int, min_frequency: int = 2) -> TokenizerModel:
    """Learn BPE merges from word-tokenised sentences.

    Pair counts are kept incrementally: when a pair is merged only the words
    containing it are re-counted. The most frequent pair wins, ties go to the
    lexicographically smallest pair. Training stops once the vocabulary
    (base symbols plus merged tokens) reaches ``vocab_size`` or the best pair
    occurs fewer than ``min_frequency`` times.
    """
    word_freq = Counter(w for sent in corpus for w in sent)
    words = [_word_symbols(w) for w in word_freq]
    freqs = [word_freq[w] for w in word_freq]
    vocab = {s for syms in words for s in syms}
    if vocab_size < len(vocab):
        raise TokenizerError(f"vocab_size {vocab_size} is below the {len(vocab)} base symbols")

    pair_counts: Counter = Counter()
    where: dict[tuple[str, str], set[int]] = {}
    for idx, syms in enumerate(words):
        for p in _pairs(syms):
            pair_counts[p] += freqs[idx]
            where.setdefault(p, set()).add(idx)

    merges: list[tuple[str, str]] = []
    while len(vocab) < vocab_size and pair_counts:
        best = min(pair_counts.items(), key=lambda kv: (-kv[1], kv[0]))
        pair, count = best
        if count < min_frequency:
            break
        merges.append(pair)
        vocab.add(pair[0] + pair[1])
        for idx in sorted(where.get(pair, ())):
            old = words[idx]
            new = _merge_word(old, pair)
            if new == old:
                continue
            f = freqs[idx]
            for p in _pairs(old):
                pair_counts[p] -= f
                if pair_counts[p] <= 0:
                    del pair_counts[p]
                where[p].discard(idx)
            for p in _pairs(new):
                pair_counts[p] += f
                where.setdefault(p, set()).add(idx)
            words[idx] = new
    return TokenizerModel("bpe", merges=merges)


def _bpe_word(model: TokenizerModel, word: str) -> tuple[str, ...]:
    cached = model._cache.get(word)
    if cached is not None:
        return cached
    symbols = _word_symbols(word)
    ranks = model._ranks
    # Replays the merge list in order: each round applies the earliest merge
    # not yet passed that is present, so skipped merges are never revisited.
    floor = 0
    while len(symbols) > 1:
        candidates = [ranks[p] for p in _pairs(symbols) if p in ranks and ranks[p] >= floor]
        if not candidates:
            break
        r = min(candidates)
        symbols = _merge_word(symbols, model.merges[r])
        floor = r + 1
    result = tuple(symbols)
    model._cache[word] = result
    return result


def bpe_encode(model: TokenizerModel, text: str) -> list[str]:
    if model.kind != "bpe":
        raise TokenizerError(f"bpe_encode needs a bpe model, got {model.kind}")
    out: list[str] = []
    for word in text.split():
        out.extend(_bpe_word(model, word))
    return out


def wordpiece_encode(model: TokenizerModel, text: str, max_chars: int = 100) -> list[str]:
    if model.kind != "wordpiece":
        raise TokenizerError(f"wordpiece_encode needs a wordpiece model, got {model.kind}")
    vocab = model._vocab_set
    out: list[str] = []
    for word in text.split():
        if len(word) > max_chars:
            out.append(WP_UNK)
            continue
        pieces = []
        start = 0
        while start < len(word):
            end = len(word)
            piece = None
            while end > start:
                cand = word[start:end] if start == 0 else CONT + word[start:end]
                if cand in vocab:
                    piece = cand
                    break
                end -= 1
            if piece is None:
                pieces = [WP_UNK]
                break
            pieces.append(piece)
            start = end
        out.extend(pieces)
    return out


def build_wordpiece(vocab: Iterable[str], corpus: Iterable[str] = ()) -> TokenizerModel:
    """WordPiece model from a fixed vocabulary, topped up with every single
    character (initial and ``##`` form) seen in ``corpus``."""
    tokens = list(dict.fromkeys(vocab))
    have = set(tokens)
    chars = sorted({ch for line in corpus for ch in line if not ch.isspace()})
    for ch in chars:
        for t in (ch, CONT + ch):
            if t not in have:
                have.add(t)
                tokens.append(t)
    return TokenizerModel("wordpiece", vocab=tokens)


def load_wordpiece_vocab(path) -> list[str]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [ln.strip() for ln in lines if ln.strip()]


def detokenize(model: TokenizerModel, tokens: Sequence[str]) -> str:
    kind = model.kind
    if kind == "word":
        return " ".join(tokens)
    if kind == "char":
        return "".join(" " if t == SPACE else (SPACE if t == SPACE * 2 else t) for t in tokens)
    if kind == "bpe":
        text = "".join(t[: -len(EOW)] + " " if t.endswith(EOW) else t for t in tokens)
        return text.rstrip(" ")
    words: list[str] = []
    for t in tokens:
        if t.startswith(CONT) and words:
            words[-1] += t[len(CONT):]
        else:
            words.append(t)
    return " ".join(words)


def word_starts(model: TokenizerModel, tokens: Sequence[str]) -> list[int]:
    """Per token: index of the whitespace word it belongs to, or -1 for an
    explicit space token (char kind)."""
    out = []
    w = 0
    prev_closed = False
    for i, t in enumerate(tokens):
        if model.kind == "word":
            out.append(i)
        elif model.kind == "char":
            if t == SPACE:
                out.append(-1)
                w += 1
            else:
                out.append(w)
        elif model.kind == "bpe":
            if prev_closed:
                w += 1
            out.append(w)
            prev_closed = t.endswith(EOW)
        else:
            if i and not t.startswith(CONT):
                w += 1
            out.append(w)
    return out


def save_tokenizer(model: TokenizerModel, path) -> None:
    Path(path).write_text(
        json.dumps(model.to_dict(), ensure_ascii=False, indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def load_tokenizer(path) -> TokenizerModel:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return TokenizerModel(
        kind=data["kind"],
        merges=[tuple(m) for m in data.get("merges", [])],
        vocab=list(data.get("vocab", [])),
        **({"markers": dict(data["markers"])} if data.get("markers") else {}),
    )
