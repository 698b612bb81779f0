import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from text2sign import tokenizers as tk
from text2sign.tokenizers import SPACE, TokenizerModel, bpe_encode, bpe_train, detokenize

from oracles import brute_force_bpe


def test_tokenize_word():
    assert tk.tokenize_word("guten morgen") == ["guten", "morgen"]
    assert tk.tokenize_word("") == []
    assert tk.tokenize_word("a  b") == ["a", "b"]


def test_tokenize_char():
    assert tk.tokenize_char("ab") == ["a", "b"]
    assert tk.tokenize_char("a b") == ["a", SPACE, "b"]
    assert tk.tokenize_char("") == []


def test_char_literal_space_symbol_round_trips():
    model = TokenizerModel("char")
    text = f"a{SPACE}b c"
    assert detokenize(model, model.encode(text)) == text


def test_bpe_first_merge_hand_count():
    # (a,a) occurs 2x in "aaab" + 1x in "aab" = 3; (a, b</w>) occurs 2x
    model = bpe_train([["aaab", "aab"]], vocab_size=100)
    assert model.merges[0] == ("a", "a")
    assert model.merges == brute_force_bpe([["aaab", "aab"]], 100)


def test_bpe_single_pair_with_unit_threshold():
    model = bpe_train([["ab"]], vocab_size=3, min_frequency=1)
    assert model.merges == [("a", "b</w>")]
    assert brute_force_bpe([["ab"]], 3, min_frequency=1) == model.merges


def test_bpe_default_threshold_skips_singleton_pairs():
    assert bpe_train([["ab"]], vocab_size=3).merges == []


def test_bpe_singleton_characters():
    assert bpe_train([["a", "b", "c"]], vocab_size=50).merges == []


def test_bpe_vocab_below_base_symbols():
    with pytest.raises(tk.TokenizerError):
        bpe_train([["abc"]], vocab_size=2)


def test_bpe_encode_examples():
    m = TokenizerModel("bpe", merges=[("a", "a")])
    assert bpe_encode(m, "aaab") == ["aa", "a", "b</w>"]
    assert bpe_encode(TokenizerModel("bpe"), "ab") == ["a", "b</w>"]
    learned = bpe_train([["ab", "ab"]], 10)
    assert bpe_encode(learned, "q") == ["q</w>"]


def test_bpe_detokenize_inverse():
    m = TokenizerModel("bpe", merges=[("a", "a")])
    assert detokenize(m, ["aa", "a", "b</w>"]) == "aaab"


def test_bpe_encode_replays_merge_order():
    # ("ab","c") precedes ("a","b"): a strictly ordered replay never reaches it
    m = TokenizerModel("bpe", merges=[("ab", "c</w>"), ("a", "b")])
    assert bpe_encode(m, "abc") == ["ab", "c</w>"]


def test_low_lowest_lower_segmentation():
    corpus = [["low", "lowest", "lower"]] * 3 + [["newest", "wider"]] * 2
    m = bpe_train(corpus, vocab_size=30)
    assert bpe_encode(m, "lowest")[0].startswith("low")


def random_corpus(rng: random.Random):
    alphabet = "abcdef"[: rng.randint(1, 6)]
    n_words = rng.randint(1, 30)
    words = ["".join(rng.choice(alphabet) for _ in range(rng.randint(1, 6))) for _ in range(n_words)]
    sents, i = [], 0
    while i < len(words):
        k = rng.randint(1, 5)
        sents.append(words[i : i + k])
        i += k
    return sents


def test_bpe_matches_brute_force_oracle():
    rng = random.Random(0)
    for _ in range(50):
        corpus = random_corpus(rng)
        size = rng.randint(6, 40)
        base = len({s for sent in corpus for w in sent for s in [*w[:-1], w[-1] + "</w>"]})
        size = max(size, base)
        assert bpe_train(corpus, size).merges == brute_force_bpe(corpus, size)


def test_bpe_monotone_in_vocab_size():
    rng = random.Random(1)
    for _ in range(30):
        corpus = random_corpus(rng)
        base = len({s for sent in corpus for w in sent for s in [*w[:-1], w[-1] + "</w>"]})
        small = bpe_train(corpus, base + 2).merges
        large = bpe_train(corpus, base + 12).merges
        assert large[: len(small)] == small


words = st.text(alphabet=st.characters(blacklist_categories=("Z", "C")), min_size=1, max_size=8)
normalized = st.lists(words, max_size=8).map(" ".join).filter(lambda s: "</w>" not in s)


@settings(max_examples=200)
@given(normalized)
def test_round_trip_all_kinds(text):
    m = bpe_train([text.split()] * 2, 60)
    for model in (TokenizerModel("word"), TokenizerModel("char"), m):
        assert detokenize(model, model.encode(text)) == text


def test_wordpiece_examples():
    m = TokenizerModel("wordpiece", vocab=["low", "##est", "a"])
    assert tk.wordpiece_encode(m, "lowest") == ["low", "##est"]
    assert tk.wordpiece_encode(m, "a") == ["a"]
    assert tk.wordpiece_encode(m, "ab") == [tk.WP_UNK]
    assert detokenize(m, ["low", "##est"]) == "lowest"


@given(st.lists(st.text(alphabet="xyzw", min_size=1, max_size=7), min_size=1, max_size=6))
def test_wordpiece_total_over_training_characters(ws):
    model = tk.build_wordpiece(["xy", "##zw"], [" ".join(ws)])
    out = model.encode(" ".join(ws))
    assert tk.WP_UNK not in out
    assert detokenize(model, out) == " ".join(ws)


def test_wrong_kind_rejected():
    with pytest.raises(tk.TokenizerError):
        bpe_encode(TokenizerModel("word"), "a")
    with pytest.raises(tk.TokenizerError):
        TokenizerModel("sentencepiece")


@pytest.mark.parametrize("kind", tk.KINDS)
def test_save_load_encodes_identically(tmp_path, kind):
    text = "der hund lauft nicht lowest"
    if kind == "bpe":
        model = bpe_train([text.split()] * 3, 40)
    elif kind == "wordpiece":
        model = tk.build_wordpiece(["der", "##und", "low"], [text])
    else:
        model = TokenizerModel(kind)
    tk.save_tokenizer(model, tmp_path / "t.json")
    back = tk.load_tokenizer(tmp_path / "t.json")
    assert back.encode(text) == model.encode(text)
    assert back.fingerprint() == model.fingerprint()


def test_word_starts():
    bpe = TokenizerModel("bpe", merges=[("a", "b")])
    toks = bpe_encode(bpe, "abc ab")
    assert toks == ["ab", "c</w>", "a", "b</w>"]
    assert tk.word_starts(bpe, toks) == [0, 0, 1, 1]
    char = TokenizerModel("char")
    assert tk.word_starts(char, char.encode("ab c")) == [0, 0, -1, 1]
    wp = TokenizerModel("wordpiece", vocab=["lo", "##w", "a"])
    assert tk.word_starts(wp, ["lo", "##w", "a"]) == [0, 0, 1]
