"""Decoder-only transformer over the combined vocabulary.

The rgb and flow variants share every line of this file; they differ only
in VocabLayout, sequence design, and supervision mask.
"""

import numpy as np

from .. import tensor as T
from ..errors import ContextError, VocabularyError
from ..sequence import VocabLayout, causal_mask
from ..tensor import Tensor
from ..util import read_json, write_json
from .config import ModelConfig


def init_params(cfg: ModelConfig, layout: VocabLayout, rng: np.random.Generator) -> dict:
    d = cfg.embed_dim
    v = layout.total_size
    std = 0.02

    def normal(shape, scale=std):
        return Tensor.param((rng.standard_normal(shape) * scale).astype(np.float32))

    def zeros(shape):
        return Tensor.param(np.zeros(shape, dtype=np.float32))

    def ones(shape):
        return Tensor.param(np.ones(shape, dtype=np.float32))

    p = {"tok_emb": normal((v, d)), "pos_emb": normal((cfg.context_len, d))}
    resid_scale = std / np.sqrt(2 * cfg.layers)
    for i in range(cfg.layers):
        pre = f"layer{i}"
        p[f"{pre}.ln1.g"] = ones(d)
        p[f"{pre}.ln1.b"] = zeros(d)
        p[f"{pre}.wq"] = normal((d, d))
        p[f"{pre}.wk"] = normal((d, d))
        p[f"{pre}.wv"] = normal((d, d))
        p[f"{pre}.attn_out"] = normal((d, d), resid_scale)
        p[f"{pre}.attn_out.b"] = zeros(d)
        p[f"{pre}.ln2.g"] = ones(d)
        p[f"{pre}.ln2.b"] = zeros(d)
        p[f"{pre}.fc"] = normal((d, 4 * d))
        p[f"{pre}.fc.b"] = zeros(4 * d)
        p[f"{pre}.proj"] = normal((4 * d, d), resid_scale)
        p[f"{pre}.proj.b"] = zeros(d)
    p["ln_f.g"] = ones(d)
    p["ln_f.b"] = zeros(d)
    p["head"] = normal((d, v), 0.01)
    p["head.b"] = zeros(v)
    return p


class SequenceModel:
    def __init__(self, cfg: ModelConfig, layout: VocabLayout,
                 params: dict | None = None, seed: int = 0):
        from .config import worst_case_sequence_len

        worst = worst_case_sequence_len(layout, cfg.variant)
        if cfg.context_len < worst:
            raise ContextError(
                f"context_len {cfg.context_len} below worst-case sequence length {worst}"
            )
        self.cfg = cfg
        self.layout = layout
        if params is None:
            params = init_params(cfg, layout, np.random.default_rng(seed))
        self.params = params

    def forward(self, tokens: np.ndarray, train_rng: np.random.Generator | None = None) -> Tensor:
        """(B, T) int tokens -> (B, T, V) logits; strictly causal."""
        tokens = np.asarray(tokens)
        if tokens.ndim == 1:
            tokens = tokens[None]
        b, t = tokens.shape
        cfg, p = self.cfg, self.params
        if t > cfg.context_len:
            raise ContextError(f"sequence length {t} exceeds context {cfg.context_len}")
        if tokens.size and (tokens.min() < 0 or tokens.max() >= self.layout.total_size):
            raise VocabularyError(
                f"token outside combined vocabulary [0, {self.layout.total_size})"
            )
        d = cfg.embed_dim
        nh = cfg.heads
        hd = d // nh
        blocked = ~causal_mask(t)

        x = T.add(
            T.embedding_lookup(p["tok_emb"], tokens),
            T.embedding_lookup(p["pos_emb"], np.broadcast_to(np.arange(t), (b, t))),
        )
        for i in range(cfg.layers):
            pre = f"layer{i}"
            h = T.layer_norm(x, p[f"{pre}.ln1.g"], p[f"{pre}.ln1.b"])
            q = T.permute(T.reshape(T.matmul(h, p[f"{pre}.wq"]), (b, t, nh, hd)), (0, 2, 1, 3))
            k = T.permute(T.reshape(T.matmul(h, p[f"{pre}.wk"]), (b, t, nh, hd)), (0, 2, 1, 3))
            v = T.permute(T.reshape(T.matmul(h, p[f"{pre}.wv"]), (b, t, nh, hd)), (0, 2, 1, 3))
            scores = T.mul(T.matmul(q, T.permute(k, (0, 1, 3, 2))), 1.0 / np.sqrt(hd))
            scores = T.masked_fill(scores, blocked, -1e9)
            att = T.softmax(scores)
            if cfg.dropout > 0 and train_rng is not None:
                att = T.dropout(att, cfg.dropout, train_rng)
            ctx = T.reshape(T.permute(T.matmul(att, v), (0, 2, 1, 3)), (b, t, d))
            ctx = T.add(T.matmul(ctx, p[f"{pre}.attn_out"]), p[f"{pre}.attn_out.b"])
            x = T.add(x, ctx)

            h = T.layer_norm(x, p[f"{pre}.ln2.g"], p[f"{pre}.ln2.b"])
            h = T.gelu(T.add(T.matmul(h, p[f"{pre}.fc"]), p[f"{pre}.fc.b"]))
            h = T.add(T.matmul(h, p[f"{pre}.proj"]), p[f"{pre}.proj.b"])
            if cfg.dropout > 0 and train_rng is not None:
                h = T.dropout(h, cfg.dropout, train_rng)
            x = T.add(x, h)

        x = T.layer_norm(x, p["ln_f.g"], p["ln_f.b"])
        return T.add(T.matmul(x, p["head"]), p["head.b"])

    # -- persistence ----------------------------------------------------------

    def save(self, ckpt_path) -> None:
        from ..tensor import save_params

        save_params(ckpt_path, self.params)
        write_json(str(ckpt_path) + ".json",
                   {"model": self.cfg.to_dict(), "layout": self.layout.to_dict()})

    @classmethod
    def load(cls, ckpt_path) -> "SequenceModel":
        from ..tensor import load_params_into

        sidecar = read_json(str(ckpt_path) + ".json")
        cfg = ModelConfig.from_dict(sidecar["model"])
        layout = VocabLayout.from_dict(sidecar["layout"])
        model = cls(cfg, layout)
        load_params_into(ckpt_path, model.params)
        return model
