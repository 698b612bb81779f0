"""Independent reference implementations used only by the tests."""
from __future__ import annotations

import itertools
from collections import Counter

import numpy as np

EOW = "</w>"


def brute_force_bpe(corpus, vocab_size, min_frequency=2):
    """BPE that rebuilds every word's pair counts from scratch each round."""
    freq = Counter(w for sent in corpus for w in sent)
    words = {w: [*w[:-1], w[-1] + EOW] for w in freq}
    vocab = set(s for syms in words.values() for s in syms)
    merges = []
    while len(vocab) < vocab_size:
        counts = Counter()
        for w, syms in words.items():
            for i in range(len(syms) - 1):
                counts[(syms[i], syms[i + 1])] += freq[w]
        if not counts:
            break
        top = max(counts.values())
        if top < min_frequency:
            break
        pair = sorted(p for p, c in counts.items() if c == top)[0]
        merges.append(pair)
        vocab.add(pair[0] + pair[1])
        for w, syms in words.items():
            out, i = [], 0
            while i < len(syms):
                if i + 1 < len(syms) and (syms[i], syms[i + 1]) == pair:
                    out.append(syms[i] + syms[i + 1])
                    i += 2
                else:
                    out.append(syms[i])
                    i += 1
            words[w] = out
    return merges


def numeric_grad(f, x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central finite differences of scalar ``f()`` w.r.t. array ``x`` (mutated in place)."""
    g = np.zeros_like(x, dtype=np.float64)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        old = x[idx]
        x[idx] = old + h
        fp = f()
        x[idx] = old - h
        fm = f()
        x[idx] = old
        g[idx] = (fp - fm) / (2 * h)
    return g


def max_rel_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-6)
    return float(np.max(np.abs(analytic - numeric) / denom))


def exhaustive_best(step_fn, vocab: int, max_len: int, eos: int, bos: int = 1):
    """Highest log-probability sequence by enumerating every continuation.

    Finished sequences (first EOS at the end, length <= max_len) take
    priority; without any, the best length-``max_len`` sequence is returned.
    """
    best_fin, best_open = None, None
    for length in range(1, max_len + 1):
        for seq in itertools.product(range(vocab), repeat=length):
            if eos in seq[:-1]:
                continue
            finished = seq[-1] == eos
            if not finished and length < max_len:
                continue
            lp = 0.0
            prefix = [bos]
            for tok in seq:
                lp += float(step_fn([prefix])[0][tok])
                prefix = prefix + [tok]
            if finished and (best_fin is None or lp > best_fin[0]):
                best_fin = (lp, list(seq))
            if not finished and (best_open is None or lp > best_open[0]):
                best_open = (lp, list(seq))
    return (best_fin or best_open)[1], (best_fin or best_open)[0]


def table_model(rng: np.random.Generator, vocab: int, max_len: int):
    """Random next-token distribution per exact prefix (a lookup-table 'model')."""
    cache = {}

    def step(prefixes):
        rows = []
        for p in prefixes:
            key = tuple(p)
            if key not in cache:
                logits = rng.normal(size=vocab) * 2.0
                cache[key] = logits - np.log(np.exp(logits).sum())
            rows.append(cache[key])
        return np.stack(rows)

    return step
