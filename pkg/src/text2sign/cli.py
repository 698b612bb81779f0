"""Command-line entry point.

    text2sign tokenizer-train | preprocess | train | translate | evaluate
        [--config FILE] [--set key.path=VALUE ...] [--toy] [--out-dir DIR]

Exit status: 0 success, 1 invalid configuration or stale artifacts, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import config as config_mod
from . import corpus, metrics, pipeline, toy
from . import tokenizers as tk
from .config import ConfigError
from .decode import beam_decode, default_max_len
from .model import (
    ModelConfig,
    Transformer,
    load_contextual_embeddings,
    load_static_embeddings,
)
from .train import TrainConfig, train

log = logging.getLogger("text2sign")

SPLITS = ("train", "dev", "test")


class StaleArtifactError(RuntimeError):
    pass


# artifact helpers

def _out(cfg) -> Path:
    return Path(cfg["paths"]["out_dir"])


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def _read_json(path: Path):
    return json.loads(path.read_text(encoding="utf-8"))


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _require(path: Path, hint: str) -> Path:
    if not path.is_file():
        raise ConfigError([f"missing {path}; run `{hint}` first"])
    return path


def artifact_hashes(cfg) -> dict[str, str]:
    out = _out(cfg)
    names = ["tokenizer_source.json", "tokenizer_target.json", "vocab_source.json", "vocab_target.json"]
    if (out / "vocab_hand.json").is_file():
        names.append("vocab_hand.json")
    return {n: _sha256(out / n) for n in names if (out / n).is_file()}


def _load_samples(cfg, split: str) -> list[corpus.ParallelSample]:
    samples = corpus.load_corpus(cfg["paths"][split], cfg["paths"]["columns"])
    for i, s in enumerate(samples):
        s.sid = f"{split}-{i}"
    return samples


def _dictionary(cfg):
    path = cfg["paths"]["dictionary"]
    return corpus.load_dictionary(path) if path else None


def _tokenizers(cfg):
    out = _out(cfg)
    hint = "text2sign tokenizer-train"
    return (
        tk.load_tokenizer(_require(out / "tokenizer_source.json", hint)),
        tk.load_tokenizer(_require(out / "tokenizer_target.json", hint)),
    )


def _vocabs(cfg):
    out = _out(cfg)
    hint = "text2sign preprocess"
    src = corpus.Vocabulary.from_json(_read_json(_require(out / "vocab_source.json", hint)))
    tgt = corpus.Vocabulary.from_json(_read_json(_require(out / "vocab_target.json", hint)))
    hand = None
    if (out / "vocab_hand.json").is_file():
        hand = corpus.Vocabulary.from_json(_read_json(out / "vocab_hand.json"))
    return src, tgt, hand


def _prepare(args, needs=("train",)) -> dict:
    overrides = [config_mod.parse_assignment(a) for a in args.set or []]
    if args.out_dir:
        overrides.append({"paths": {"out_dir": args.out_dir}})
    cfg = config_mod.resolve(args.config, overrides, toy=args.toy)
    if args.toy:
        toy.write_toy_corpus(_out(cfg) / config_mod.TOY_DIR, seed=cfg["seed"])
    config_mod.validate(cfg, needs)
    _out(cfg).mkdir(parents=True, exist_ok=True)
    return cfg


# commands

def cmd_tokenizer_train(cfg) -> dict[str, Path]:
    samples = _load_samples(cfg, "train")
    task = cfg["task"]
    sides = {
        "source": [pipeline.source_text(s) for s in samples],
        "target": [pipeline.target_text(s, task) for s in samples],
    }
    wp_vocab = tk.load_wordpiece_vocab(cfg["paths"]["wordpiece_vocab"]) if cfg["paths"]["wordpiece_vocab"] else None
    written = {}
    for side, texts in sides.items():
        spec = cfg["tokenizer"][side]
        kind = spec["kind"]
        if kind == "bpe":
            model = tk.bpe_train([t.split() for t in texts], spec["vocab_size"])
        elif kind == "wordpiece":
            model = tk.build_wordpiece(wp_vocab, texts)
        else:
            model = tk.TokenizerModel(kind)
        path = _out(cfg) / f"tokenizer_{side}.json"
        tk.save_tokenizer(model, path)
        log.info("%s tokenizer (%s, %d merges) -> %s", side, kind, len(model.merges), path)
        written[side] = path
    return written


def cmd_preprocess(cfg) -> dict[str, Path]:
    out = _out(cfg)
    task = cfg["task"]
    src_tok, tgt_tok = _tokenizers(cfg)
    dictionary = _dictionary(cfg)
    splits = {s: _load_samples(cfg, s) for s in SPLITS if cfg["paths"][s]}
    train_samples = splits["train"]
    src_vocab = corpus.build_vocabulary(src_tok.encode(pipeline.source_text(s)) for s in train_samples)
    tgt_vocab = corpus.build_vocabulary(tgt_tok.encode(pipeline.target_text(s, task)) for s in train_samples)
    hands = [pipeline.handshapes_for(s, dictionary) for s in train_samples]
    hand_vocab = None
    if all(h is not None for h in hands):
        hand_vocab = corpus.build_vocabulary(hands)
    _write_json(out / "vocab_source.json", src_vocab.to_json())
    _write_json(out / "vocab_target.json", tgt_vocab.to_json())
    if hand_vocab is not None:
        _write_json(out / "vocab_hand.json", hand_vocab.to_json())
    elif (out / "vocab_hand.json").exists():
        (out / "vocab_hand.json").unlink()
    written = {}
    for split, samples in splits.items():
        path = out / f"data_{split}.jsonl"
        with open(path, "w", encoding="utf-8") as fh:
            for s in samples:
                e = pipeline.encode_sample(s, task, src_tok, tgt_tok, src_vocab, tgt_vocab, hand_vocab, dictionary)
                fh.write(json.dumps({"sid": e.sid, "src": e.src, "tgt": e.tgt, "hand": e.hand}) + "\n")
        (out / f"source_{split}.txt").write_text(
            "".join(pipeline.source_text(s) + "\n" for s in samples), encoding="utf-8"
        )
        (out / f"reference_{split}.txt").write_text(
            "".join(pipeline.target_text(s, task) + "\n" for s in samples), encoding="utf-8"
        )
        written[split] = path
    log.info("vocab sizes: source %d, target %d, hand %s", len(src_vocab), len(tgt_vocab),
             len(hand_vocab) if hand_vocab else "-")
    return written


def _read_encoded(path: Path) -> list[corpus.EncodedSample]:
    rows = []
    for line in path.read_text(encoding="utf-8").splitlines():
        d = json.loads(line)
        rows.append(corpus.EncodedSample(d["src"], d["tgt"], d["hand"], d["sid"]))
    return rows


def _model_config(cfg, src_vocab, tgt_vocab, hand_vocab, ext_dim: int = 0) -> ModelConfig:
    m = dict(cfg["model"])
    if m["aux_head"] and hand_vocab is None:
        raise ConfigError(["model.aux_head is on but no hand-shape labels were preprocessed"])
    return ModelConfig(
        src_vocab=len(src_vocab), tgt_vocab=len(tgt_vocab),
        hand_vocab=len(hand_vocab) if hand_vocab else 0, ext_dim=ext_dim, **m,
    )


def _contextual(cfg):
    path = cfg["paths"]["contextual_embeddings"]
    if cfg["model"]["embedding_mode"] != "external_contextual" or not path:
        return None
    return load_contextual_embeddings(path)


def cmd_train(cfg) -> Path:
    out = _out(cfg)
    src_vocab, tgt_vocab, hand_vocab = _vocabs(cfg)
    train_rows = _read_encoded(_require(out / "data_train.jsonl", "text2sign preprocess"))
    dev_rows = _read_encoded(out / "data_dev.jsonl") if (out / "data_dev.jsonl").is_file() else []
    static = None
    ext_dim = 0
    contextual = _contextual(cfg)
    if cfg["model"]["embedding_mode"] == "external_static":
        table = load_static_embeddings(cfg["paths"]["static_embeddings"])
        static = table.matrix_for(src_vocab)
        ext_dim = table.dim
    elif contextual is not None:
        ext_dim = contextual.dim
    mcfg = _model_config(cfg, src_vocab, tgt_vocab, hand_vocab, ext_dim)
    if not mcfg.aux_head:
        for r in train_rows + dev_rows:
            r.hand = None
    model = Transformer(mcfg, seed=cfg["seed"], static_table=static)
    t = cfg["training"]
    tcfg = TrainConfig(
        lr=t["lr"], batch_size=t["batch_size"], epochs=t["epochs"],
        max_steps=t["max_steps"], patience=t["patience"], seed=cfg["seed"],
    )
    meta = {"config": cfg, "hashes": artifact_hashes(cfg)}
    log.info("training %d parameters on %d samples", model.num_parameters(), len(train_rows))
    result = train(model, train_rows, tcfg, dev_rows, out, contextual, meta)
    _write_json(out / "loss_log.json", {
        "epochs": result.log, "steps": result.steps, "best_epoch": result.best_epoch,
        "stopped_early": result.stopped_early,
    })
    return out / "loss_log.json"


def _check_hashes(recorded: dict, current: dict, what: str) -> None:
    stale = sorted(k for k in set(recorded) | set(current) if recorded.get(k) != current.get(k))
    if stale:
        raise StaleArtifactError(f"{what} was built with different tokenizer/vocabulary files: {', '.join(stale)}")


def cmd_translate(cfg, checkpoint=None, input_file=None, output=None, split="test") -> Path:
    out = _out(cfg)
    ckpt = Path(checkpoint) if checkpoint else out / f"checkpoint_{cfg['decode']['checkpoint']}.bin"
    _require(ckpt, "text2sign train")
    model, meta = Transformer.load(ckpt)
    hashes = artifact_hashes(cfg)
    _check_hashes(meta.get("hashes", {}), hashes, f"checkpoint {ckpt}")
    src_tok, tgt_tok = _tokenizers(cfg)
    src_vocab, tgt_vocab, _ = _vocabs(cfg)
    contextual = _contextual(cfg)
    inp = Path(input_file) if input_file else _require(out / f"source_{split}.txt", "text2sign preprocess")
    prefix = split if not input_file else "input"
    dec = cfg["decode"]
    lines = inp.read_text(encoding="utf-8").splitlines()
    hyps = []
    for i, line in enumerate(lines):
        ids = src_vocab.encode(src_tok.encode(tk.normalize(line)))
        if not ids:
            hyps.append("")
            continue
        max_len = default_max_len(len(ids), dec["max_len_factor"], int(dec["max_len_offset"]))
        kw = {"sid": f"{prefix}-{i}", "contextual": contextual} if contextual is not None else {}
        best = beam_decode(model, ids, dec["beam_size"], max_len, dec["alpha"], **kw)
        hyps.append(tgt_tok.decode(tgt_vocab.decode(best)))
    target = Path(output) if output else out / f"hyp_{split if not input_file else inp.stem}.txt"
    target.write_text("".join(h + "\n" for h in hyps), encoding="utf-8")
    _write_json(target.with_name(target.name + ".meta.json"), {
        "checkpoint": ckpt.name, "checkpoint_sha256": _sha256(ckpt), "config": cfg, "hashes": hashes,
    })
    log.info("translated %d lines -> %s", len(hyps), target)
    return target


def cmd_evaluate(cfg, hypothesis=None, reference=None, split="test") -> metrics.ScoreReport:
    out = _out(cfg)
    hyp_path = Path(hypothesis) if hypothesis else _require(out / f"hyp_{split}.txt", "text2sign translate")
    ref_path = Path(reference) if reference else _require(out / f"reference_{split}.txt", "text2sign preprocess")
    meta_path = hyp_path.with_name(hyp_path.name + ".meta.json")
    if meta_path.is_file():
        _check_hashes(_read_json(meta_path).get("hashes", {}), artifact_hashes(cfg), f"hypotheses {hyp_path}")
    hyp_lines = hyp_path.read_text(encoding="utf-8").splitlines()
    ref_lines = ref_path.read_text(encoding="utf-8").splitlines()
    task = cfg["task"]
    missing = {"hypothesis": 0, "reference": 0}
    if cfg["evaluation"]["t2g2h"]:
        dictionary = _dictionary(cfg)
        hyps, refs = [], []
        for h, r in zip(hyp_lines, ref_lines):
            hs, mh = metrics.gloss_to_hamnosys(h.split(), dictionary)
            rs, mr = metrics.gloss_to_hamnosys(r.split(), dictionary)
            hyps.append(hs)
            refs.append(rs)
            missing["hypothesis"] += mh
            missing["reference"] += mr
        if len(hyp_lines) != len(ref_lines):
            raise metrics.MetricError(f"{len(hyp_lines)} hypotheses vs {len(ref_lines)} references")
    else:
        hyps = [pipeline.scoring_tokens(h, task) for h in hyp_lines]
        refs = [pipeline.scoring_tokens(r, task) for r in ref_lines]
    report = metrics.score(hyps, refs)
    name = hyp_path.stem
    level = "t2g2h" if cfg["evaluation"]["t2g2h"] else task
    _write_json(out / f"report_{name}.json", {
        "scores": json.loads(report.to_json()),
        "level": level,
        "missing_glosses": missing if cfg["evaluation"]["t2g2h"] else None,
        "hypothesis": hyp_path.name,
        "reference": ref_path.name,
        "config": cfg,
        "hashes": artifact_hashes(cfg),
    })
    (out / f"report_{name}.txt").write_text(metrics.format_table({split: report}), encoding="utf-8")
    log.info("%s BLEU-4 %.2f ROUGE %.2f", level, report.bleu4, report.rouge)
    return report


# argument parsing

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="text2sign", description=__doc__.splitlines()[0] if __doc__ else None)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key, e.g. training.lr=0.001 (repeatable)")
    common.add_argument("--toy", action="store_true", help="generate and use the synthetic toy corpus")
    common.add_argument("--out-dir", help="shortcut for --set paths.out_dir=DIR")
    common.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("tokenizer-train", parents=[common], help="learn source/target tokenizers")
    sub.add_parser("preprocess", parents=[common], help="build vocabularies and encode corpora")
    sub.add_parser("train", parents=[common], help="train the translation model")
    p = sub.add_parser("translate", parents=[common], help="decode a file with beam search")
    p.add_argument("--checkpoint")
    p.add_argument("--input", help="source text file, one sentence per line (default: preprocessed split)")
    p.add_argument("--output")
    p.add_argument("--split", default="test", choices=SPLITS)
    p = sub.add_parser("evaluate", parents=[common], help="score hypotheses against references")
    p.add_argument("--hypothesis")
    p.add_argument("--reference")
    p.add_argument("--split", default="test", choices=SPLITS)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "tokenizer-train":
            cfg = _prepare(args)
            cmd_tokenizer_train(cfg)
        elif args.command == "preprocess":
            cfg = _prepare(args)
            cmd_preprocess(cfg)
        elif args.command == "train":
            cfg = _prepare(args)
            cmd_train(cfg)
        elif args.command == "translate":
            cfg = _prepare(args, needs=())
            cmd_translate(cfg, args.checkpoint, args.input, args.output, args.split)
        else:
            cfg = _prepare(args, needs=())
            report = cmd_evaluate(cfg, args.hypothesis, args.reference, args.split)
            print(metrics.format_table({args.split: report}), end="")
    except (ConfigError, StaleArtifactError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        log.debug("failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
