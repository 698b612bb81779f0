"""Rule-generated toy corpus for running the whole pipeline without licensed data.

A tiny invented spoken language is rendered into gloss order (time first,
verb last, adjectives after nouns, determiners dropped, negation final) and
each gloss carries a fixed HamNoSys-like symbol string whose first symbol is
its hand shape. Some glosses carry variant numbers, as in real corpora.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .corpus import SEPARATOR

CONSONANTS = "bdfgklmnprstvz"
VOWELS = "aeiou"
HANDSHAPES = [chr(0xE000 + i) for i in range(6)]
MOTION = [chr(0xE010 + i) for i in range(40)]
COLUMNS = ("text", "gloss", "hamnosys", "handshape")


def _pseudo_word(rng: np.random.Generator, used: set[str]) -> str:
    while True:
        n = int(rng.integers(2, 4))
        w = "".join(CONSONANTS[rng.integers(len(CONSONANTS))] + VOWELS[rng.integers(len(VOWELS))] for _ in range(n))
        if w not in used:
            used.add(w)
            return w


def build_lexicon(seed: int = 0) -> dict:
    rng = np.random.Generator(np.random.PCG64(seed))
    used: set[str] = set()
    dets = ["der", "die", "das"]
    used.update(dets + ["nicht"])
    lex = {
        "nouns": [(_pseudo_word(rng, used), dets[int(rng.integers(3))]) for _ in range(12)],
        "verbs": [_pseudo_word(rng, used) for _ in range(8)],
        "adjs": [_pseudo_word(rng, used) for _ in range(6)],
        "times": [_pseudo_word(rng, used) for _ in range(3)],
    }
    glosses = {}
    for kind in ("nouns", "verbs", "adjs", "times"):
        for item in lex[kind]:
            stem = item[0] if kind == "nouns" else item
            gloss = stem.upper()
            if rng.random() < 0.3:
                gloss += str(int(rng.integers(1, 4)))
            glosses[stem] = gloss
    glosses["nicht"] = "NICHT"
    signs = {}
    for stem, gloss in glosses.items():
        hand = HANDSHAPES[int(rng.integers(len(HANDSHAPES)))]
        body = [MOTION[int(i)] for i in rng.integers(len(MOTION), size=int(rng.integers(2, 5)))]
        signs[stem] = (gloss, [hand] + body, hand)
    lex["signs"] = signs
    return lex


def _sentence(rng: np.random.Generator, lex: dict) -> tuple[str, list[str]]:
    def noun_phrase():
        noun, det = lex["nouns"][int(rng.integers(len(lex["nouns"])))]
        words, stems = [det], [noun]
        if rng.random() < 0.35:
            adj = lex["adjs"][int(rng.integers(len(lex["adjs"])))]
            words.append(adj + ("e" if rng.random() < 0.5 else "en"))
            stems.append(adj)
        words.append(noun + ("n" if rng.random() < 0.3 else ""))
        return words, stems

    text: list[str] = []
    gloss_stems: list[str] = []
    if rng.random() < 0.3:
        t = lex["times"][int(rng.integers(len(lex["times"])))]
        text.append(t)
        gloss_stems.append(t)
    subj_words, subj = noun_phrase()
    verb = lex["verbs"][int(rng.integers(len(lex["verbs"])))]
    text += subj_words + [verb + ("t" if rng.random() < 0.6 else "en")]
    gloss_stems += subj
    neg = rng.random() < 0.25
    if neg:
        text.append("nicht")
    if rng.random() < 0.6:
        obj_words, obj = noun_phrase()
        text += obj_words
        gloss_stems += obj
    gloss_stems.append(verb)
    if neg:
        gloss_stems.append("nicht")
    return " ".join(text), gloss_stems


def make_toy_corpus(seed: int = 0, n_train: int = 200, n_dev: int = 50, n_test: int = 50) -> dict[str, str]:
    """Return TSV file contents keyed by ``train``, ``dev``, ``test`` and ``dictionary``."""
    lex = build_lexicon(seed)
    rng = np.random.Generator(np.random.PCG64([seed, 7]))
    files = {}
    seen: set[str] = set()
    for split, n in (("train", n_train), ("dev", n_dev), ("test", n_test)):
        rows = []
        while len(rows) < n:
            text, stems = _sentence(rng, lex)
            if text in seen:
                continue
            seen.add(text)
            signs = [lex["signs"][s] for s in stems]
            ham = SEPARATOR.join("".join(sym) for _, sym, _ in signs)
            rows.append("\t".join([
                text,
                " ".join(g for g, _, _ in signs),
                ham,
                " ".join(h for _, _, h in signs),
            ]))
        files[split] = "\n".join(rows) + "\n"
    files["dictionary"] = "".join(
        f"{gloss}\t{''.join(sym)}\t{hand}\n" for gloss, sym, hand in lex["signs"].values()
    )
    return files


def write_toy_corpus(directory, seed: int = 0) -> dict[str, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {}
    for name, content in make_toy_corpus(seed).items():
        path = directory / f"{name}.tsv"
        path.write_text(content, encoding="utf-8")
        paths[name] = path
    return paths
