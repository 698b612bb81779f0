import math

import numpy as np
import pytest

from text2sign.corpus import BOS_ID, EOS_ID
from text2sign.decode import (
    Hypothesis,
    beam_decode,
    beam_search,
    default_max_len,
    greedy_decode,
    greedy_search,
    model_step_fn,
    sequence_logprob,
)
from text2sign.model import ModelConfig, Transformer

from oracles import exhaustive_best, table_model


def random_tiny_model(seed):
    rng = np.random.default_rng(seed)
    cfg = ModelConfig(src_vocab=8, tgt_vocab=int(rng.integers(4, 9)), emb_dim=8, num_layers=1,
                      num_heads=2, ff_dim=16, dropout=0.0)
    model = Transformer(cfg, seed=seed)
    # spread the output layer so hypotheses actually differ
    model.params["out.w"].data *= 4
    src = rng.integers(4, 8, size=int(rng.integers(1, 5))).tolist()
    return model, src


def dict_step(table, vocab=5, default=None):
    """Step function from a {prefix tuple: {token: prob}} table."""
    default = default or {EOS_ID: 0.97}

    def step(prefixes):
        rows = []
        for p in prefixes:
            probs = np.full(vocab, 1e-6)
            for tok, pr in table.get(tuple(p), default).items():
                probs[tok] = pr
            rows.append(np.log(probs / probs.sum()))
        return np.stack(rows)

    return step


def test_default_max_len():
    assert default_max_len(4) == 16
    assert default_max_len(0) == 10


def test_beam_beats_greedy_on_hand_built_distribution():
    table = {
        (BOS_ID,): {3: 0.6, 4: 0.4},
        (BOS_ID, 3): {2: 1 / 3, 3: 1 / 3, 4: 1 / 3},
        (BOS_ID, 4): {EOS_ID: 0.9, 3: 0.1},
    }
    step = dict_step(table)
    greedy = greedy_search(step, 3)
    beam = beam_search(step, 2, 3)
    assert greedy.output[0] == 3
    assert beam.output == [4, EOS_ID]
    assert beam.logprob > greedy.logprob
    best, lp = exhaustive_best(step, 5, 3, EOS_ID)
    assert beam.output == best and math.isclose(beam.logprob, lp, rel_tol=1e-12)


def test_beam_equals_exhaustive_on_random_tables():
    rng = np.random.default_rng(0)
    for _ in range(50):
        vocab = int(rng.integers(3, 6))
        max_len = int(rng.integers(1, 5))
        step = table_model(rng, vocab, max_len)
        hyp = beam_search(step, vocab**max_len, max_len)
        best, lp = exhaustive_best(step, vocab, max_len, EOS_ID)
        assert hyp.output == best
        assert math.isclose(hyp.logprob, lp, rel_tol=1e-9, abs_tol=1e-12)


def test_beam_one_equals_greedy_on_tables():
    rng = np.random.default_rng(1)
    for _ in range(100):
        step = table_model(rng, int(rng.integers(3, 8)), 6)
        assert beam_search(step, 1, 6).tokens == greedy_search(step, 6).tokens


def test_beam_one_equals_greedy_on_models():
    for seed in range(100):
        model, src = random_tiny_model(seed)
        assert beam_decode(model, src, beam_size=1, alpha=0.0) == greedy_decode(model, src)


def test_returned_logprob_matches_rescoring():
    for seed in range(10):
        model, src = random_tiny_model(seed)
        step = model_step_fn(model, src)
        hyp = beam_search(step, 4, 8)
        assert abs(hyp.logprob - sequence_logprob(step, hyp.output)) < 1e-5


def test_max_len_one_gives_one_token():
    model, src = random_tiny_model(3)
    assert len(greedy_decode(model, src, max_len=1)) == 1
    assert len(beam_decode(model, src, beam_size=3, max_len=1)) == 1


def test_decoding_is_deterministic():
    model, src = random_tiny_model(4)
    assert beam_decode(model, src, 5) == beam_decode(model, src, 5)


def test_ties_prefer_lowest_id():
    step = dict_step({(BOS_ID,): {3: 0.5, 4: 0.5}}, default={EOS_ID: 1.0})
    assert greedy_search(step, 3).output == [3, EOS_ID]
    assert beam_search(step, 2, 3).output == [3, EOS_ID]


def test_alpha_zero_is_raw_logprob():
    h = Hypothesis([BOS_ID, 5, 6, EOS_ID], logprob=-3.0)
    assert h.score(0.0) == -3.0
    assert h.score(1.0) == pytest.approx(-1.0)


def test_finished_hypotheses_not_extended():
    seen = []

    def step(prefixes):
        seen.extend(tuple(p) for p in prefixes)
        return dict_step({(BOS_ID,): {EOS_ID: 0.5, 3: 0.5}})(prefixes)

    beam_search(step, 3, 4)
    assert not any(EOS_ID in p for p in seen)


def test_invalid_beam():
    with pytest.raises(ValueError):
        beam_search(dict_step({}), 0, 3)
