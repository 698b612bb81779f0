"""Experiment configuration: defaults < --toy preset < JSON file < command-line flags."""
from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any

from .model import EMBEDDING_MODES, FUSIONS
from .pipeline import TASKS
from .tokenizers import KINDS

DEFAULTS: dict[str, Any] = {
    "task": "t2g",
    "seed": 0,
    "paths": {
        "train": None,
        "dev": None,
        "test": None,
        "columns": ["text", "gloss", "hamnosys", "handshape"],
        "dictionary": None,
        "static_embeddings": None,
        "contextual_embeddings": None,
        "wordpiece_vocab": None,
        "out_dir": "runs/default",
    },
    "tokenizer": {
        "source": {"kind": "bpe", "vocab_size": 2250},
        "target": {"kind": "bpe", "vocab_size": 7000},
    },
    "model": {
        "emb_dim": 64,
        "num_layers": 2,
        "num_heads": 2,
        "ff_dim": 256,
        "dropout": 0.2,
        "fusion": "none",
        "fusion_scale": 1.0,
        "hand_loss_scale": 1.0,
        "aux_head": False,
        "embedding_mode": "learned",
    },
    "training": {
        "lr": 1e-4,
        "batch_size": 32,
        "epochs": 100,
        "max_steps": None,
        "patience": 5,
    },
    "decode": {
        "beam_size": 5,
        "alpha": 0.0,
        "max_len_factor": 1.5,
        "max_len_offset": 10,
        "checkpoint": "best",
    },
    "evaluation": {"t2g2h": False},
}

TOY_PRESET: dict[str, Any] = {
    "model": {"emb_dim": 64, "num_layers": 2, "num_heads": 2, "ff_dim": 128, "aux_head": True},
    "training": {"lr": 5e-4, "batch_size": 16, "epochs": 1000, "max_steps": 3000, "patience": 1000},
    "decode": {"checkpoint": "last"},
}

TOY_DIR = "toy_corpus"
FILE_KEYS = ("train", "dev", "test", "dictionary", "static_embeddings", "contextual_embeddings", "wordpiece_vocab")


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid configuration:\n  " + "\n  ".join(problems))


def merge(base: dict, override: dict, problems: list[str] | None = None, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        path = f"{where}{key}"
        if key not in out:
            if problems is not None:
                problems.append(f"unknown key {path!r}")
            continue
        if isinstance(out[key], dict) and key != "columns":
            if not isinstance(value, dict):
                if problems is not None:
                    problems.append(f"{path!r} must be an object")
                continue
            out[key] = merge(out[key], value, problems, path + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_assignment(text: str) -> dict:
    """``a.b.c=value`` -> nested dict; the value is read as JSON when possible."""
    if "=" not in text:
        raise ConfigError([f"override {text!r} is not of the form key.path=value"])
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node: dict = {}
    root = node
    parts = key.strip().split(".")
    for part in parts[:-1]:
        node[part] = {}
        node = node[part]
    node[parts[-1]] = value
    return root


def resolve(config_file=None, overrides: list[dict] = (), toy: bool = False) -> dict:
    problems: list[str] = []
    cfg = copy.deepcopy(DEFAULTS)
    if toy:
        cfg = merge(cfg, TOY_PRESET)
    if config_file is not None:
        try:
            data = json.loads(Path(config_file).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError([f"cannot read config {config_file}: {exc}"]) from None
        if not isinstance(data, dict):
            raise ConfigError([f"{config_file}: top level must be an object"])
        cfg = merge(cfg, data, problems)
    for o in overrides:
        cfg = merge(cfg, o, problems)
    if toy:
        toy_dir = Path(cfg["paths"]["out_dir"]) / TOY_DIR
        for split in ("train", "dev", "test", "dictionary"):
            if cfg["paths"][split] is None:
                cfg["paths"][split] = str(toy_dir / f"{split}.tsv")
        cfg["paths"]["columns"] = ["text", "gloss", "hamnosys", "handshape"]
    if problems:
        raise ConfigError(problems)
    return cfg


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def validate(cfg: dict, needs: tuple[str, ...] = ("train",), check_files: bool = True) -> None:
    """Collect every problem, then raise once."""
    p: list[str] = []
    if cfg["task"] not in TASKS:
        p.append(f"task must be one of {TASKS}, got {cfg['task']!r}")
    if not _is_int(cfg["seed"]):
        p.append("seed must be an integer")
    paths = cfg["paths"]
    cols = paths["columns"]
    if not isinstance(cols, list) or "text" not in cols:
        p.append("paths.columns must be a list containing 'text'")
    elif cfg["task"] == "t2g" and "gloss" not in cols:
        p.append("task t2g needs a 'gloss' column")
    elif cfg["task"] == "t2h" and "hamnosys" not in cols:
        p.append("task t2h needs a 'hamnosys' column")
    for key in needs:
        if not paths.get(key):
            p.append(f"paths.{key} is required for this command")
    if check_files:
        for key in FILE_KEYS:
            val = paths.get(key)
            if val and not Path(val).is_file():
                p.append(f"paths.{key}: file not found: {val}")
    for side in ("source", "target"):
        tok = cfg["tokenizer"][side]
        if tok.get("kind") not in KINDS:
            p.append(f"tokenizer.{side}.kind must be one of {KINDS}")
        if not _is_int(tok.get("vocab_size")) or tok.get("vocab_size", 0) < 1:
            p.append(f"tokenizer.{side}.vocab_size must be a positive integer")
        if tok.get("kind") == "wordpiece" and not paths["wordpiece_vocab"]:
            p.append(f"tokenizer.{side}.kind wordpiece needs paths.wordpiece_vocab")
    m = cfg["model"]
    for key in ("emb_dim", "num_layers", "num_heads", "ff_dim"):
        if not _is_int(m[key]) or m[key] < 1:
            p.append(f"model.{key} must be a positive integer")
    if _is_int(m["emb_dim"]) and _is_int(m["num_heads"]) and m["num_heads"] > 0 and m["emb_dim"] % m["num_heads"]:
        p.append("model.emb_dim must be divisible by model.num_heads")
    if not _is_num(m["dropout"]) or not 0 <= m["dropout"] < 1:
        p.append("model.dropout must lie in [0, 1)")
    if m["fusion"] not in FUSIONS:
        p.append(f"model.fusion must be one of {FUSIONS}")
    for key in ("fusion_scale", "hand_loss_scale"):
        if not _is_num(m[key]) or m[key] < 0:
            p.append(f"model.{key} must be a number >= 0")
    if not isinstance(m["aux_head"], bool):
        p.append("model.aux_head must be true or false")
    if m["embedding_mode"] not in EMBEDDING_MODES:
        p.append(f"model.embedding_mode must be one of {EMBEDDING_MODES}")
    elif m["embedding_mode"] == "external_static" and not paths["static_embeddings"]:
        p.append("embedding_mode external_static needs paths.static_embeddings")
    elif m["embedding_mode"] == "external_contextual" and not paths["contextual_embeddings"]:
        p.append("embedding_mode external_contextual needs paths.contextual_embeddings")
    if m["aux_head"] and "handshape" not in cols and not paths["dictionary"]:
        p.append("model.aux_head needs a 'handshape' column or paths.dictionary")
    t = cfg["training"]
    if not _is_num(t["lr"]) or t["lr"] < 0:
        p.append("training.lr must be a number >= 0")
    for key in ("batch_size", "epochs", "patience"):
        if not _is_int(t[key]) or t[key] < 1:
            p.append(f"training.{key} must be a positive integer")
    if t["max_steps"] is not None and (not _is_int(t["max_steps"]) or t["max_steps"] < 0):
        p.append("training.max_steps must be null or an integer >= 0")
    d = cfg["decode"]
    if not _is_int(d["beam_size"]) or d["beam_size"] < 1:
        p.append("decode.beam_size must be a positive integer")
    for key in ("alpha", "max_len_factor", "max_len_offset"):
        if not _is_num(d[key]) or d[key] < 0:
            p.append(f"decode.{key} must be a number >= 0")
    if d["checkpoint"] not in ("best", "last"):
        p.append("decode.checkpoint must be 'best' or 'last'")
    if not isinstance(cfg["evaluation"]["t2g2h"], bool):
        p.append("evaluation.t2g2h must be true or false")
    elif cfg["evaluation"]["t2g2h"]:
        if not paths["dictionary"]:
            p.append("evaluation.t2g2h needs paths.dictionary")
        if cfg["task"] != "t2g":
            p.append("evaluation.t2g2h applies to task t2g only")
    if p:
        raise ConfigError(p)
