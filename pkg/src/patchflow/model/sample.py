"""Frozen-weights samplers with an O(n)-per-step key/value cache.

The numpy inference path mirrors the training forward exactly (tested:
greedy decoding equals argmax over the full training-path logits).
Pointers are supplied by the schedule, never predicted; contents are drawn
from the variant's content range only.
"""

import numpy as np
from scipy.special import erf

from ..errors import ContractError, CoverageError
from ..sequence import CondBlock, VocabLayout, decode_schedule, validate_order
from ..util import rng_stream
from .train import build_flow_sequence, build_rgb_sequence, content_range_bias
from .transformer import SequenceModel

_INV_SQRT2 = 0.7071067811865476


def _gelu(x):
    return x * 0.5 * (1.0 + erf(x * _INV_SQRT2))


def _ln(x, g, b, eps=1e-5):
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    return (x - mu) / np.sqrt(var + eps) * g + b


class _CacheState:
    """Per-layer K/V caches of shape (B, H, T, hd), plus the cursor."""

    def __init__(self, n_layers):
        self.k = [None] * n_layers
        self.v = [None] * n_layers
        self.t = 0

    def clone(self) -> "_CacheState":
        c = _CacheState(len(self.k))
        c.k = [None if a is None else a.copy() for a in self.k]
        c.v = [None if a is None else a.copy() for a in self.v]
        c.t = self.t
        return c


class CachedSampler:
    def __init__(self, model: SequenceModel):
        self.cfg = model.cfg
        self.layout = model.layout
        self.w = {k: p.data for k, p in model.params.items()}

    def _attend(self, q, kc, vc, blocked=None):
        # q: (B, H, Tq, hd); kc/vc: (B, H, Tk, hd)
        scores = q @ kc.swapaxes(-1, -2) / np.sqrt(q.shape[-1])
        if blocked is not None:
            scores = np.where(blocked, -1e9, scores)
        scores -= scores.max(axis=-1, keepdims=True)
        e = np.exp(scores)
        att = e / e.sum(axis=-1, keepdims=True)
        return att @ vc

    def _block(self, x, i, state: _CacheState, causal: bool):
        w = self.w
        b, tq, d = x.shape
        nh = self.cfg.heads
        hd = d // nh
        pre = f"layer{i}"
        h = _ln(x, w[f"{pre}.ln1.g"], w[f"{pre}.ln1.b"])
        q = (h @ w[f"{pre}.wq"]).reshape(b, tq, nh, hd).transpose(0, 2, 1, 3)
        k = (h @ w[f"{pre}.wk"]).reshape(b, tq, nh, hd).transpose(0, 2, 1, 3)
        v = (h @ w[f"{pre}.wv"]).reshape(b, tq, nh, hd).transpose(0, 2, 1, 3)
        if state.k[i] is None:
            state.k[i] = k
            state.v[i] = v
        else:
            state.k[i] = np.concatenate([state.k[i], k], axis=2)
            state.v[i] = np.concatenate([state.v[i], v], axis=2)
        blocked = None
        if causal and tq > 1:
            tk = state.k[i].shape[2]
            blocked = ~np.tril(np.ones((tq, tk), dtype=bool), k=tk - tq)
        ctx = self._attend(q, state.k[i], state.v[i], blocked)
        ctx = ctx.transpose(0, 2, 1, 3).reshape(b, tq, d)
        x = x + ctx @ w[f"{pre}.attn_out"] + w[f"{pre}.attn_out.b"]
        h = _ln(x, w[f"{pre}.ln2.g"], w[f"{pre}.ln2.b"])
        x = x + _gelu(h @ w[f"{pre}.fc"] + w[f"{pre}.fc.b"]) @ w[f"{pre}.proj"] + w[f"{pre}.proj.b"]
        return x

    def _run(self, tokens: np.ndarray, state: _CacheState) -> np.ndarray:
        """Append tokens (B, T) to the cache; return last-position logits (B, V)."""
        w = self.w
        b, tq = tokens.shape
        if state.t + tq > self.cfg.context_len:
            raise ContractError(
                f"cache length {state.t + tq} exceeds context {self.cfg.context_len}"
            )
        pos = np.arange(state.t, state.t + tq)
        x = w["tok_emb"][tokens] + w["pos_emb"][pos][None]
        for i in range(self.cfg.layers):
            x = self._block(x, i, state, causal=True)
        state.t += tq
        last = _ln(x[:, -1], w["ln_f.g"], w["ln_f.b"])
        return last @ w["head"] + w["head.b"]

    def prefill(self, tokens: np.ndarray) -> tuple:
        state = _CacheState(self.cfg.layers)
        logits = self._run(np.asarray(tokens), state)
        return state, logits

    def step(self, state: _CacheState, token_per_row: np.ndarray) -> np.ndarray:
        return self._run(np.asarray(token_per_row).reshape(-1, 1), state)


def _draw(logits_row: np.ndarray, lo: int, hi: int, temperature: float,
          top_k: int, rng: np.random.Generator) -> int:
    """Sample a content code (already offset-free) from one row's logits."""
    z = logits_row[lo:hi].astype(np.float64)
    if temperature <= 0.0:
        return int(np.argmax(z))
    z = z / temperature
    if top_k and top_k < len(z):
        keep = np.argpartition(z, -top_k)[-top_k:]
        masked = np.full_like(z, -np.inf)
        masked[keep] = z[keep]
        z = masked
    z -= z.max()
    p = np.exp(z)
    p /= p.sum()
    return int(rng.choice(len(p), p=p))


def _sample_grids(model: SequenceModel, prefix_tokens: np.ndarray, target_kind: str,
                  policy: str, seed: int, temperature: float, top_k: int):
    layout = model.layout
    perm, groups = decode_schedule((layout.grid_h, layout.grid_w), policy, seed=seed)
    validate_order(perm, layout.n_positions)
    if len(perm) != layout.n_positions:
        raise CoverageError(
            f"schedule covers {len(perm)} of {layout.n_positions} positions"
        )
    if groups is None:
        groups = [np.array([p]) for p in perm]

    b = prefix_tokens.shape[0]
    lo, hi = layout.content_range(target_kind)
    sampler = CachedSampler(model)
    state, _ = sampler.prefill(prefix_tokens)
    rngs = [rng_stream(seed, "sample-row", i) for i in range(b)]
    grids = np.zeros((b, layout.n_positions), dtype=np.int64)

    for group in groups:
        if len(group) == 1:
            pos = int(group[0])
            logits = sampler.step(state, np.full(b, layout.pointer_token(pos)))
            codes = [_draw(logits[r], lo, hi, temperature, top_k, rngs[r]) for r in range(b)]
            grids[:, pos] = codes
            content = np.array([lo + c for c in codes])
            sampler.step(state, content)
        else:
            # parallel decode: every member is predicted from the group-start
            # state, then all pairs are committed to the real cache
            base = state.clone()
            group_codes = {}
            for pos in group:
                tmp = base.clone()
                logits = sampler.step(tmp, np.full(b, layout.pointer_token(int(pos))))
                group_codes[int(pos)] = [
                    _draw(logits[r], lo, hi, temperature, top_k, rngs[r]) for r in range(b)
                ]
            for pos in group:
                codes = group_codes[int(pos)]
                grids[:, int(pos)] = codes
                sampler.step(state, np.full(b, layout.pointer_token(int(pos))))
                sampler.step(state, np.array([lo + c for c in codes]))

    return grids.reshape(b, layout.grid_h, layout.grid_w).astype(np.uint32)


def _prefix_batch(seqs) -> np.ndarray:
    return np.stack([s.tokens[: s.conditioning_len] for s in seqs])


def sample_rgb(model: SequenceModel, rgb_grids: np.ndarray, flow_grids: np.ndarray,
               policy: str = "random", seed: int = 0, temperature: float = 0.0,
               top_k: int = 64) -> np.ndarray:
    """Predict next-frame rgb token grids for a batch of (frame, flow) pairs."""
    if model.cfg.variant != "rgb":
        raise ContractError("sample_rgb requires an rgb-variant model")
    single = rgb_grids.ndim == 2
    if single:
        rgb_grids, flow_grids = rgb_grids[None], flow_grids[None]
    layout = model.layout
    dummy = np.zeros((layout.grid_h, layout.grid_w), dtype=np.int64)
    seqs = [
        build_rgb_sequence(layout, rgb_grids[i], flow_grids[i], dummy,
                           np.arange(layout.n_positions), 1.0)
        for i in range(len(rgb_grids))
    ]
    out = _sample_grids(model, _prefix_batch(seqs), "rgb", policy, seed, temperature, top_k)
    return out[0] if single else out


def sample_flow(model: SequenceModel, rgb_grids: np.ndarray, pose_bins,
                policy: str = "random", seed: int = 0, temperature: float = 0.0,
                top_k: int = 64) -> np.ndarray:
    """Predict flow token grids from a frame (and optional pose conditioning)."""
    if model.cfg.variant != "flow":
        raise ContractError("sample_flow requires a flow-variant model")
    single = rgb_grids.ndim == 2
    if single:
        rgb_grids = rgb_grids[None]
        pose_bins = [pose_bins]
    layout = model.layout
    dummy = np.zeros((layout.grid_h, layout.grid_w), dtype=np.int64)
    seqs = [
        build_flow_sequence(layout, rgb_grids[i], pose_bins[i], dummy,
                            np.arange(layout.n_positions), 1.0)
        for i in range(len(rgb_grids))
    ]
    out = _sample_grids(model, _prefix_batch(seqs), "flow", policy, seed, temperature, top_k)
    return out[0] if single else out
