"""Transformer encoder-decoder with sentence-average fusion and a hand-shape head.

Source embeddings come from a learned table, a static word-vector table or
per-sentence contextual vectors. A sentence vector scaled by ``S`` is either
prepended to the source sequence ("con") or added to every position ("add").
An optional second output projection predicts a hand-shape label per decoder
position; its loss is added to the translation loss with weight ``F``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import numerics as nx
from .corpus import PAD_ID, Batch, Vocabulary
from .numerics import Tensor
from .tokenizers import EOW

FUSIONS = ("none", "add", "con")
EMBEDDING_MODES = ("learned", "external_static", "external_contextual")


class ModelError(ValueError):
    pass


@dataclass
class ModelConfig:
    src_vocab: int
    tgt_vocab: int
    emb_dim: int = 64
    num_layers: int = 2
    num_heads: int = 2
    ff_dim: int = 256
    dropout: float = 0.2
    fusion: str = "none"
    fusion_scale: float = 1.0
    hand_loss_scale: float = 1.0
    aux_head: bool = False
    hand_vocab: int = 0
    embedding_mode: str = "learned"
    ext_dim: int = 0

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ModelError("; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if self.emb_dim % self.num_heads:
            out.append(f"emb_dim {self.emb_dim} not divisible by num_heads {self.num_heads}")
        if self.fusion not in FUSIONS:
            out.append(f"fusion must be one of {FUSIONS}")
        if self.embedding_mode not in EMBEDDING_MODES:
            out.append(f"embedding_mode must be one of {EMBEDDING_MODES}")
        if self.fusion_scale < 0:
            out.append("fusion_scale (S) must be >= 0")
        if self.hand_loss_scale < 0:
            out.append("hand_loss_scale (F) must be >= 0")
        if self.aux_head and self.hand_vocab < 1:
            out.append("aux_head needs hand_vocab >= 1")
        if self.embedding_mode != "learned" and self.ext_dim < 1:
            out.append("external embeddings need ext_dim >= 1")
        if not 0.0 <= self.dropout < 1.0:
            out.append("dropout must lie in [0, 1)")
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ModelConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})


# external embeddings

@dataclass
class StaticEmbeddings:
    """word -> vector table (word2vec text format)."""

    vectors: dict[str, np.ndarray]
    dim: int

    def matrix_for(self, vocab: Vocabulary) -> tuple[np.ndarray, np.ndarray]:
        """Rows aligned with ``vocab`` plus a boolean "missing" flag per row."""
        table = np.zeros((len(vocab), self.dim), dtype=np.float64)
        missing = np.ones(len(vocab), dtype=bool)
        for i, tok in enumerate(vocab.itos):
            vec = self.vectors.get(_surface(tok))
            if vec is not None and i != PAD_ID:
                table[i] = vec
                missing[i] = False
        missing[PAD_ID] = False
        return table, missing


def _surface(token: str) -> str:
    return token[: -len(EOW)] if token.endswith(EOW) else token


def load_static_embeddings(path) -> StaticEmbeddings:
    vectors: dict[str, np.ndarray] = {}
    dim = None
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for lineno, line in enumerate(lines, start=1):
        parts = line.split()
        if not parts:
            continue
        if lineno == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
            continue  # word2vec "count dim" header
        word, values = parts[0], parts[1:]
        if dim is None:
            dim = len(values)
        if len(values) != dim or dim == 0:
            raise ModelError(f"{path}:{lineno}: expected {dim} values, found {len(values)}")
        vectors[word] = np.asarray([float(v) for v in values])
    if dim is None:
        raise ModelError(f"{path}: no vectors")
    return StaticEmbeddings(vectors, dim)


@dataclass
class ContextualRecord:
    sentence_vector: np.ndarray
    token_vectors: np.ndarray


@dataclass
class ContextualEmbeddings:
    records: dict[str, ContextualRecord]
    dim: int

    def get(self, sid: str) -> ContextualRecord:
        rec = self.records.get(str(sid))
        if rec is None:
            raise ModelError(f"no contextual embedding for sentence id {sid!r}")
        return rec


def load_contextual_embeddings(path) -> ContextualEmbeddings:
    records: dict[str, ContextualRecord] = {}
    dim = None
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        obj = json.loads(line)
        sent = np.asarray(obj["sentence_vector"], dtype=np.float64)
        toks = np.asarray(obj["token_vectors"], dtype=np.float64).reshape(-1, sent.shape[0])
        if dim is None:
            dim = sent.shape[0]
        if sent.shape != (dim,) or toks.shape[1] != dim:
            raise ModelError(f"{path}:{lineno}: vector width differs from {dim}")
        records[str(obj["id"])] = ContextualRecord(sent, toks)
    if dim is None:
        raise ModelError(f"{path}: no records")
    return ContextualEmbeddings(records, dim)


# building blocks

def positional_encoding(length: int, dim: int, dtype=np.float32) -> np.ndarray:
    pos = np.arange(length)[:, None]
    i = np.arange(0, dim, 2)
    angle = pos / np.power(10000.0, i / dim)
    pe = np.zeros((length, dim))
    pe[:, 0::2] = np.sin(angle)
    pe[:, 1::2] = np.cos(angle)[:, : dim // 2]
    return pe.astype(dtype)


def fuse_sentence_average(emb: Tensor, x_ave: Tensor, mode: str, scale: float) -> Tensor:
    """Fuse a sentence vector into token embeddings.

    ``emb`` is (W, E) or (B, W, E); ``x_ave`` is (E,) or (B, E). "add" adds
    ``scale * x_ave`` to every row, "con" prepends it as an extra row.
    """
    if emb.ndim == 2:
        fused = fuse_sentence_average(emb.reshape(1, *emb.shape), x_ave.reshape(1, -1), mode, scale)
        return fused.reshape(fused.shape[1:])
    if x_ave.shape != (emb.shape[0], emb.shape[2]):
        raise ModelError(f"sentence vector {x_ave.shape} does not match embeddings {emb.shape}")
    sent = (x_ave * scale).reshape(emb.shape[0], 1, emb.shape[2])
    if mode == "add":
        return emb + sent
    if mode == "con":
        return nx.concat([sent, emb], axis=1)
    if mode == "none":
        return emb
    raise ModelError(f"unknown fusion mode {mode!r}")


def multi_head_attention(
    q_in: Tensor, kv_in: Tensor, p: dict[str, Tensor], prefix: str, heads: int, mask: np.ndarray | None
) -> tuple[Tensor, Tensor]:
    """Scaled dot-product attention over ``heads`` heads.

    ``mask`` is boolean, broadcastable to (B, heads, Tq, Tk); False blocks a key.
    Returns the projected output and the attention weights.
    """
    b, tq, e = q_in.shape
    tk = kv_in.shape[1]
    d = e // heads

    def split(x: Tensor, t: int) -> Tensor:
        return x.reshape(b, t, heads, d).transpose(0, 2, 1, 3)

    q = split(q_in @ p[prefix + "wq"] + p[prefix + "bq"], tq)
    k = split(kv_in @ p[prefix + "wk"] + p[prefix + "bk"], tk)
    v = split(kv_in @ p[prefix + "wv"] + p[prefix + "bv"], tk)
    scores = (q @ k.transpose(0, 1, 3, 2)) * (1.0 / math.sqrt(d))
    weights = nx.softmax(scores, axis=-1, mask=mask)
    ctx = (weights @ v).transpose(0, 2, 1, 3).reshape(b, tq, e)
    return ctx @ p[prefix + "wo"] + p[prefix + "bo"], weights


@dataclass
class BatchLoss:
    total: Tensor
    translation: Tensor
    hand: Tensor

    @property
    def values(self) -> tuple[float, float, float]:
        return self.total.item(), self.translation.item(), self.hand.item()


def compute_loss(
    logits: Tensor,
    targets: np.ndarray,
    hand_logits: Tensor | None = None,
    hand_targets: np.ndarray | None = None,
    hand_scale: float = 1.0,
) -> BatchLoss:
    """``total = translation + hand * hand_scale``; PAD targets are ignored."""
    lt = nx.cross_entropy(logits, targets, ignore_index=PAD_ID)
    if hand_logits is None:
        lh = Tensor(np.zeros((), dtype=lt.dtype))
        return BatchLoss(lt, lt, lh)
    if hand_targets is None:
        raise ModelError("auxiliary head is on but no hand-shape targets were given")
    lh = nx.cross_entropy(hand_logits, hand_targets, ignore_index=PAD_ID)
    return BatchLoss(lt + lh * hand_scale, lt, lh)


class Transformer:
    def __init__(
        self,
        config: ModelConfig,
        seed: int = 0,
        dtype=np.float32,
        static_table: tuple[np.ndarray, np.ndarray] | None = None,
    ):
        self.config = config
        self.dtype = np.dtype(dtype)
        self.seed = seed
        self.training = False
        self.rng = nx.make_rng([seed, 2])
        self.params: dict[str, Tensor] = {}
        self.buffers: dict[str, np.ndarray] = {}
        self._init_params(seed)
        if config.embedding_mode == "external_static":
            if static_table is None:
                raise ModelError("external_static mode needs a static embedding table")
            table, missing = static_table
            if table.shape != (config.src_vocab, config.ext_dim):
                raise ModelError(f"static table {table.shape} != ({config.src_vocab}, {config.ext_dim})")
            self.buffers["ext.table"] = table.astype(self.dtype)
            self.buffers["ext.missing"] = missing.astype(self.dtype)

    # parameters

    def _init_params(self, seed: int) -> None:
        c = self.config
        e, f = c.emb_dim, c.ff_dim
        rng = nx.make_rng(seed)
        dt = self.dtype
        p = self.params

        def w(name, shape, r=rng):
            p[name] = nx.xavier_init(shape, r, dtype=dt)

        def z(name, shape):
            p[name] = nx.zeros_init(shape, dtype=dt)

        def ln(prefix):
            p[prefix + "g"] = nx.ones_init((e,), dtype=dt)
            z(prefix + "b", (e,))

        def attn(prefix):
            for m in ("q", "k", "v", "o"):
                w(f"{prefix}w{m}", (e, e))
                z(f"{prefix}b{m}", (e,))

        def ff(prefix):
            w(prefix + "w1", (e, f))
            z(prefix + "b1", (f,))
            w(prefix + "w2", (f, e))
            z(prefix + "b2", (e,))

        if c.embedding_mode == "learned":
            w("src_embed", (c.src_vocab, e))
        else:
            w("ext.proj_w", (c.ext_dim, e))
            z("ext.proj_b", (e,))
            if c.embedding_mode == "external_static":
                # row substituted for words absent from the static table
                p["ext.unk"] = Tensor(rng.uniform(-0.1, 0.1, size=(c.ext_dim,)).astype(dt), requires_grad=True)
        w("tgt_embed", (c.tgt_vocab, e))
        for layer in range(c.num_layers):
            pre = f"enc.{layer}."
            attn(pre + "self.")
            ln(pre + "ln1.")
            ff(pre + "ff.")
            ln(pre + "ln2.")
        for layer in range(c.num_layers):
            pre = f"dec.{layer}."
            attn(pre + "self.")
            ln(pre + "ln1.")
            attn(pre + "cross.")
            ln(pre + "ln2.")
            ff(pre + "ff.")
            ln(pre + "ln3.")
        w("out.w", (e, c.tgt_vocab))
        z("out.b", (c.tgt_vocab,))
        if c.aux_head:
            # separate stream: switching the head on leaves every other init unchanged
            w("hand.w", (e, c.hand_vocab), nx.make_rng([seed, 1]))
            z("hand.b", (c.hand_vocab,))

    def num_parameters(self) -> int:
        return sum(t.data.size for t in self.params.values())

    def _drop(self, x: Tensor) -> Tensor:
        return nx.dropout(x, self.config.dropout, self.training, self.rng)

    # forward pieces

    def token_vectors(
        self, src: np.ndarray, src_mask: np.ndarray, sids: Sequence[str] | None = None,
        contextual: ContextualEmbeddings | None = None,
    ) -> tuple[Tensor, Tensor | None]:
        """Per-token source vectors (B, W, E) before positions, and the
        contextual sentence vector (B, E) when one is supplied by the table."""
        c, p = self.config, self.params
        if c.embedding_mode == "learned":
            return nx.embedding(p["src_embed"], src) * math.sqrt(c.emb_dim), None
        if c.embedding_mode == "external_static":
            raw = nx.embedding(Tensor(self.buffers["ext.table"]), src)
            missing = Tensor(self.buffers["ext.missing"][src][..., None])
            raw = raw + missing * p["ext.unk"]
            return raw @ p["ext.proj_w"] + p["ext.proj_b"], None
        if contextual is None or sids is None:
            raise ModelError("contextual mode needs the contextual table and sentence ids")
        b, w = src.shape
        toks = np.zeros((b, w, c.ext_dim), dtype=self.dtype)
        sents = np.zeros((b, c.ext_dim), dtype=self.dtype)
        for i, sid in enumerate(sids):
            rec = contextual.get(sid)
            n = int(src_mask[i].sum())
            if rec.token_vectors.shape[0] != n:
                raise ModelError(
                    f"sentence {sid!r}: {rec.token_vectors.shape[0]} contextual vectors for {n} source tokens"
                )
            toks[i, :n] = rec.token_vectors
            sents[i] = rec.sentence_vector
        proj_w, proj_b = p["ext.proj_w"], p["ext.proj_b"]
        return Tensor(toks) @ proj_w + proj_b, Tensor(sents) @ proj_w + proj_b

    def embed_source(
        self, src: np.ndarray, src_mask: np.ndarray, sids: Sequence[str] | None = None,
        contextual: ContextualEmbeddings | None = None,
    ) -> tuple[Tensor, np.ndarray]:
        c = self.config
        tok, sent = self.token_vectors(src, src_mask, sids, contextual)
        mask = src_mask
        if c.fusion != "none":
            if sent is None:
                weights = src_mask.astype(self.dtype)
                weights = weights / np.maximum(weights.sum(axis=1, keepdims=True), 1.0)
                sent = (tok * Tensor(weights[..., None])).sum(axis=1)
            tok = fuse_sentence_average(tok, sent, c.fusion, c.fusion_scale)
            if c.fusion == "con":
                mask = np.concatenate([np.ones((src.shape[0], 1), dtype=bool), src_mask], axis=1)
        x = tok + Tensor(positional_encoding(tok.shape[1], c.emb_dim, self.dtype))
        return self._drop(x), mask

    def encode(self, x: Tensor, mask: np.ndarray, attention: list | None = None) -> Tensor:
        c, p = self.config, self.params
        key_mask = mask[:, None, None, :]
        for layer in range(c.num_layers):
            pre = f"enc.{layer}."
            a, wts = multi_head_attention(x, x, p, pre + "self.", c.num_heads, key_mask)
            if attention is not None:
                attention.append(wts.data)
            x = nx.layer_norm(x + self._drop(a), p[pre + "ln1.g"], p[pre + "ln1.b"])
            x = nx.layer_norm(x + self._drop(self._ff(x, pre + "ff.")), p[pre + "ln2.g"], p[pre + "ln2.b"])
        return x

    def _ff(self, x: Tensor, pre: str) -> Tensor:
        p = self.params
        h = nx.relu(x @ p[pre + "w1"] + p[pre + "b1"])
        return self._drop(h) @ p[pre + "w2"] + p[pre + "b2"]

    def decode(
        self, tgt_in: np.ndarray, memory: Tensor, src_mask: np.ndarray
    ) -> tuple[Tensor, Tensor | None]:
        """Teacher-forced decoder pass: translation logits (B, T, V) and,
        with the auxiliary head, hand-shape logits (B, T, V_hand)."""
        c, p = self.config, self.params
        t = tgt_in.shape[1]
        x = nx.embedding(p["tgt_embed"], tgt_in) * math.sqrt(c.emb_dim)
        x = self._drop(x + Tensor(positional_encoding(t, c.emb_dim, self.dtype)))
        causal = np.tril(np.ones((t, t), dtype=bool))
        self_mask = causal[None, None] & (tgt_in != PAD_ID)[:, None, None, :]
        cross_mask = src_mask[:, None, None, :]
        for layer in range(c.num_layers):
            pre = f"dec.{layer}."
            a, _ = multi_head_attention(x, x, p, pre + "self.", c.num_heads, self_mask)
            x = nx.layer_norm(x + self._drop(a), p[pre + "ln1.g"], p[pre + "ln1.b"])
            a, _ = multi_head_attention(x, memory, p, pre + "cross.", c.num_heads, cross_mask)
            x = nx.layer_norm(x + self._drop(a), p[pre + "ln2.g"], p[pre + "ln2.b"])
            x = nx.layer_norm(x + self._drop(self._ff(x, pre + "ff.")), p[pre + "ln3.g"], p[pre + "ln3.b"])
        logits = x @ p["out.w"] + p["out.b"]
        hand = x @ p["hand.w"] + p["hand.b"] if c.aux_head else None
        return logits, hand

    def forward(self, batch: Batch, contextual: ContextualEmbeddings | None = None):
        x, mask = self.embed_source(batch.src, batch.src_mask, batch.sids, contextual)
        memory = self.encode(x, mask)
        return self.decode(batch.tgt_in, memory, mask)

    def loss(self, batch: Batch, contextual: ContextualEmbeddings | None = None) -> BatchLoss:
        logits, hand = self.forward(batch, contextual)
        return compute_loss(logits, batch.tgt_out, hand, batch.hand_out, self.config.hand_loss_scale)

    # persistence

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {k: t.data for k, t in self.params.items()}
        out.update({"buffer:" + k: v for k, v in self.buffers.items()})
        return out

    def save(self, path, meta: dict | None = None) -> None:
        meta = dict(meta or {})
        meta["model_config"] = asdict(self.config)
        meta["seed"] = self.seed
        nx.save_arrays(path, self.state_arrays(), meta)

    @classmethod
    def load(cls, path, dtype=np.float32) -> tuple["Transformer", dict]:
        arrays, meta = nx.load_arrays(path)
        config = ModelConfig.from_dict(meta["model_config"])
        static = None
        if config.embedding_mode == "external_static":
            static = (arrays["buffer:ext.table"], arrays["buffer:ext.missing"].astype(bool))
        model = cls(config, seed=meta.get("seed", 0), dtype=dtype, static_table=static)
        for name, t in model.params.items():
            if name not in arrays or arrays[name].shape != t.shape:
                raise ModelError(f"{path}: checkpoint lacks parameter {name} {t.shape}")
            t.data = arrays[name].astype(dtype)
        return model, meta


def hand_targets_for(segment_ids: Sequence[int], hand_ids: Sequence[int]) -> list[int]:
    """Broadcast per-sign hand-shape ids over decoder positions.

    ``segment_ids[i]`` is the sign index of target token ``i`` (-1 for
    separators and explicit spaces, which receive the ignore label).
    """
    out = []
    for s in segment_ids:
        out.append(hand_ids[s] if 0 <= s < len(hand_ids) else PAD_ID)
    return out


__all__ = [
    "BatchLoss",
    "ContextualEmbeddings",
    "ModelConfig",
    "StaticEmbeddings",
    "Transformer",
    "compute_loss",
    "fuse_sentence_average",
    "hand_targets_for",
    "load_contextual_embeddings",
    "load_static_embeddings",
    "multi_head_attention",
    "positional_encoding",
]
