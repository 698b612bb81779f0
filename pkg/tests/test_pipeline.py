from text2sign import pipeline, toy
from text2sign.corpus import ParallelSample, SignDictionary, load_corpus, load_dictionary
from text2sign.tokenizers import TokenizerModel, bpe_train


def sample():
    return ParallelSample("der hund lauft", ["HUND2", "LAUFEN"], list("ab|cde"), None, "s0")


def test_targets_per_task():
    s = sample()
    assert pipeline.target_text(s, "t2g") == "HUND LAUFEN"
    assert pipeline.target_text(s, "t2h") == "ab | cde"
    assert pipeline.scoring_tokens("ab | cde", "t2h") == list("ab|cde")


def test_t2h_segments_skip_separators():
    tok = TokenizerModel("char")
    tokens = tok.encode("ab | cde")
    segs = pipeline.target_segments(tok, tokens, "t2h")
    assert [t for t, s in zip(tokens, segs) if s == -1] == ["␣", "|", "␣"]
    assert [s for s in segs if s >= 0] == [0, 0, 1, 1, 1]


def test_t2g_bpe_pieces_share_gloss_label():
    tok = bpe_train([["HUND", "LAUFEN"]] * 2, 12)
    tokens = tok.encode("HUND LAUFEN")
    segs = pipeline.target_segments(tok, tokens, "t2g")
    assert segs[0] == 0 and segs[-1] == 1 and segs == sorted(segs)


def test_handshapes_fall_back_to_dictionary():
    d = SignDictionary({"HUND": (["a", "b"], "H1"), "LAUFEN": (["c"], "H2")})
    assert pipeline.handshapes_for(sample(), d) == ["H1", "H2"]
    assert pipeline.handshapes_for(sample(), None) is None


def test_toy_corpus_is_deterministic_and_clean(tmp_path):
    assert toy.make_toy_corpus(3) == toy.make_toy_corpus(3)
    paths = toy.write_toy_corpus(tmp_path, seed=0)
    sizes = {k: len(load_corpus(paths[k], toy.COLUMNS)) for k in ("train", "dev", "test")}
    assert sizes == {"train": 200, "dev": 50, "test": 50}
    d = load_dictionary(paths["dictionary"])
    for s in load_corpus(paths["train"], toy.COLUMNS):
        assert all(g in d for g in s.gloss)
        assert [seg[0] for seg in s.hamnosys_segments()] == s.handshapes
