"""Differentiable kernels: exactly the set the tokenizer and transformer need.

Shapes are checked strictly; the only broadcast anywhere is bias-add
(a trailing-axis vector added to an N-d tensor). Everything else requires
an explicit reshape from the caller.
"""

import numpy as np
from numpy.lib.stride_tricks import as_strided
from scipy.special import erf

from ..errors import ShapeError, VocabularyError
from .core import Tensor, check_same_dtype, make_node

_INV_SQRT2 = 0.7071067811865476
_INV_SQRT_2PI = 0.3989422804014327


def _as_tensor(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.data.dtype))


# -- elementwise -----------------------------------------------------------


def add(a: Tensor, b) -> Tensor:
    """Elementwise add; also accepts a 1-D bias broadcast over the last axis."""
    b = _as_tensor(b, a)
    check_same_dtype(a, b)
    bias_add = b.data.ndim == 1 and a.data.ndim > 1
    if bias_add:
        if a.data.shape[-1] != b.data.shape[0]:
            raise ShapeError(
                f"bias length {b.data.shape[0]} does not match last axis {a.data.shape[-1]}"
            )
    elif a.data.shape != b.data.shape and b.data.size != 1:
        raise ShapeError(f"add shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = a.data + b.data

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g)
        if b.requires_grad:
            if bias_add:
                b.accumulate_grad(g.reshape(-1, g.shape[-1]).sum(axis=0), own=True)
            elif b.data.size == 1 and a.data.size != 1:
                b.accumulate_grad(g.sum().reshape(b.data.shape), own=True)
            else:
                b.accumulate_grad(g)

    return make_node(out, (a, b), backward)


def mul(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, a)
    check_same_dtype(a, b)
    if a.data.shape != b.data.shape and b.data.size != 1 and a.data.size != 1:
        raise ShapeError(f"mul shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = a.data * b.data

    def backward(g):
        if a.requires_grad:
            ga = g * b.data
            if a.data.size == 1 and ga.size != 1:
                ga = ga.sum().reshape(a.data.shape)
            a.accumulate_grad(ga, own=True)
        if b.requires_grad:
            gb = g * a.data
            if b.data.size == 1 and gb.size != 1:
                gb = gb.sum().reshape(b.data.shape)
            b.accumulate_grad(gb, own=True)

    return make_node(out, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    return mul(a, -1.0)


def sub(a: Tensor, b) -> Tensor:
    return add(a, neg(_as_tensor(b, a)))


def square(a: Tensor) -> Tensor:
    return mul(a, a)


def gelu(a: Tensor) -> Tensor:
    """Exact (erf-based) GELU."""
    x = a.data
    cdf = 0.5 * (1.0 + erf(x * _INV_SQRT2))
    out = x * cdf

    def backward(g):
        if a.requires_grad:
            pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
            a.accumulate_grad(g * (cdf + x * pdf), own=True)

    return make_node(out, (a,), backward)


def dropout(a: Tensor, p: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; identity when p == 0."""
    if p <= 0.0:
        return a
    keep = (rng.random(a.data.shape) >= p).astype(a.data.dtype) / (1.0 - p)
    out = a.data * keep

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g * keep, own=True)

    return make_node(out, (a,), backward)


# -- shape manipulation ------------------------------------------------------


def reshape(a: Tensor, shape) -> Tensor:
    out = a.data.reshape(shape)
    old = a.data.shape

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g.reshape(old), own=True)

    return make_node(out, (a,), backward)


def permute(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    out = np.ascontiguousarray(a.data.transpose(axes))

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(np.ascontiguousarray(g.transpose(inv)), own=True)

    return make_node(out, (a,), backward)


def concat(tensors, axis: int) -> Tensor:
    check_same_dtype(*tensors)
    out = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            if t.requires_grad:
                t.accumulate_grad(piece, own=True)

    return make_node(out, tuple(tensors), backward)


def reduce_sum(a: Tensor) -> Tensor:
    out = a.data.sum().reshape(())

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(np.full(a.data.shape, g, dtype=a.data.dtype), own=True)

    return make_node(out, (a,), backward)


def reduce_mean(a: Tensor) -> Tensor:
    n = a.data.size
    out = (a.data.sum() / n).reshape(())

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(np.full(a.data.shape, g / n, dtype=a.data.dtype), own=True)

    return make_node(out, (a,), backward)


def mse(a: Tensor, b: Tensor) -> Tensor:
    """Mean squared error; the tokenizer's entire loss."""
    return reduce_mean(square(sub(a, b)))


# -- linear algebra ----------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """a @ b for 2-D weights (a: [..., K], b: [K, N]) or equal-rank batched."""
    check_same_dtype(a, b)
    ad, bd = a.data, b.data
    if bd.ndim == 2:
        if ad.shape[-1] != bd.shape[0]:
            raise ShapeError(
                f"matmul inner axis mismatch: {ad.shape[-1]} vs {bd.shape[0]}"
            )
    elif ad.ndim == bd.ndim:
        if ad.shape[:-2] != bd.shape[:-2] or ad.shape[-1] != bd.shape[-2]:
            raise ShapeError(f"batched matmul mismatch: {ad.shape} vs {bd.shape}")
    else:
        raise ShapeError(f"unsupported matmul ranks: {ad.ndim} and {bd.ndim}")
    out = ad @ bd

    def backward(g):
        if a.requires_grad:
            a.accumulate_grad(g @ bd.swapaxes(-1, -2), own=True)
        if b.requires_grad:
            if bd.ndim == 2:
                b.accumulate_grad(ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, g.shape[-1]), own=True)
            else:
                b.accumulate_grad(ad.swapaxes(-1, -2) @ g, own=True)

    return make_node(out, (a, b), backward)


# -- normalization / attention pieces ---------------------------------------


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    check_same_dtype(x, gamma, beta)
    d = x.data.shape[-1]
    if gamma.data.shape != (d,) or beta.data.shape != (d,):
        raise ShapeError(f"layer_norm affine params must have shape ({d},)")
    mean = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean) * inv_std
    out = xhat * gamma.data + beta.data

    def backward(g):
        if gamma.requires_grad:
            gamma.accumulate_grad((g * xhat).reshape(-1, d).sum(axis=0), own=True)
        if beta.requires_grad:
            beta.accumulate_grad(g.reshape(-1, d).sum(axis=0), own=True)
        if x.requires_grad:
            gy = g * gamma.data
            m1 = gy.mean(axis=-1, keepdims=True)
            m2 = (gy * xhat).mean(axis=-1, keepdims=True)
            x.accumulate_grad(inv_std * (gy - m1 - xhat * m2), own=True)

    return make_node(out, (x, gamma, beta), backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        if x.requires_grad:
            dot = (g * out).sum(axis=axis, keepdims=True)
            x.accumulate_grad(out * (g - dot), own=True)

    return make_node(out, (x,), backward)


def masked_fill(x: Tensor, mask: np.ndarray, value: float) -> Tensor:
    """Set x[..., i, j] = value where mask[i, j] is True.

    The boolean mask covers the trailing two axes and is applied identically
    across all leading axes (the attention-mask case).
    """
    if mask.shape != x.data.shape[-2:]:
        raise ShapeError(
            f"mask shape {mask.shape} must match trailing axes {x.data.shape[-2:]}"
        )
    out = np.where(mask, x.data.dtype.type(value), x.data)

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(np.where(mask, 0.0, g).astype(x.data.dtype), own=True)

    return make_node(out, (x,), backward)


# -- lookups and losses ------------------------------------------------------


def embedding_lookup(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row gather: table[V, D] indexed by integer ids of any shape."""
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise VocabularyError("embedding ids must be integers")
    v = table.data.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= v):
        bad = int(ids.ravel()[np.argmax((ids < 0) | (ids >= v))])
        raise VocabularyError(f"embedding id {bad} outside [0, {v})")
    out = table.data[ids]

    def backward(g):
        if table.requires_grad:
            acc = np.zeros_like(table.data)
            np.add.at(acc, ids.reshape(-1), g.reshape(-1, table.data.shape[1]))
            table.accumulate_grad(acc, own=True)

    return make_node(out, (table,), backward)


def cross_entropy(logits: Tensor, targets: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mask-weighted mean negative log-likelihood.

    Positions with mask weight 0 contribute nothing; an all-zero mask yields
    a zero loss with zero gradients.
    """
    targets = np.asarray(targets)
    mask = np.asarray(mask, dtype=logits.data.dtype)
    n, v = logits.data.shape[-2], logits.data.shape[-1]
    flat = logits.data.reshape(-1, v)
    t = targets.reshape(-1)
    w = mask.reshape(-1)
    if t.shape[0] != flat.shape[0] or w.shape[0] != flat.shape[0]:
        raise ShapeError(
            f"targets/mask length {t.shape[0]}/{w.shape[0]} != positions {flat.shape[0]}"
        )
    if np.any(w < 0):
        raise ShapeError("mask weights must be >= 0")
    if t.size and (t.min() < 0 or t.max() >= v):
        bad = int(t[np.argmax((t < 0) | (t >= v))])
        raise VocabularyError(f"target index {bad} outside vocabulary [0, {v})")
    total = w.sum()
    if total == 0.0:
        return make_node(np.zeros((), dtype=logits.data.dtype), (logits,), lambda g: None)

    zmax = flat.max(axis=1, keepdims=True)
    z = flat - zmax
    lse = np.log(np.exp(z).sum(axis=1)) + zmax[:, 0]
    nll = lse - flat[np.arange(flat.shape[0]), t]
    out = ((nll * w).sum() / total).reshape(())

    def backward(g):
        if logits.requires_grad:
            p = np.exp(z)
            p /= p.sum(axis=1, keepdims=True)
            p[np.arange(flat.shape[0]), t] -= 1.0
            p *= (w / total)[:, None] * g
            logits.accumulate_grad(p.reshape(logits.data.shape), own=True)

    return make_node(out, (logits,), backward)


def straight_through(x: Tensor, quantized: Tensor) -> Tensor:
    """Forward returns `quantized`; backward passes gradients to `x` unchanged."""
    if x.data.shape != quantized.data.shape:
        raise ShapeError(
            f"straight_through shape mismatch: {x.data.shape} vs {quantized.data.shape}"
        )

    def backward(g):
        if x.requires_grad:
            x.accumulate_grad(g, own=True)

    return make_node(quantized.data.copy(), (x,), backward)


# -- convolution -------------------------------------------------------------


def conv2d_nhwc(x: Tensor, weight: Tensor, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation in channels-last layout: [B,H,W,C] x [k,k,C,O].

    This is the workhorse: channels-last keeps every matmul operand
    contiguous, and a 1x1 stride-1 conv degenerates to a single GEMM.
    """
    check_same_dtype(x, weight)
    xd, wd = x.data, weight.data
    if xd.ndim != 4:
        raise ShapeError(f"conv2d input must be 4-D [B,H,W,C], got rank {xd.ndim}")
    if wd.ndim != 4:
        raise ShapeError(f"conv2d weight must be 4-D [k,k,C,O], got rank {wd.ndim}")
    b_, h, w, c = xd.shape
    kh, kw, cw, o = wd.shape
    if cw != c:
        raise ShapeError(f"conv2d channel axis mismatch: input C={c}, weight C={cw}")
    if kh != kw:
        raise ShapeError(f"conv2d requires square kernels, got {kh}x{kw}")
    if bias is not None:
        check_same_dtype(x, bias)
        if bias.data.shape != (o,):
            raise ShapeError(f"conv2d bias must have shape ({o},)")
    k = kh
    hp, wp = h + 2 * padding, w + 2 * padding
    if (hp - k) % stride or (wp - k) % stride:
        axis = "H" if (hp - k) % stride else "W"
        raise ShapeError(
            f"conv2d axis {axis}: padded extent minus kernel not divisible by stride {stride}"
        )
    ho, wo = (hp - k) // stride + 1, (wp - k) // stride + 1

    if k == 1 and stride == 1 and padding == 0:
        w2 = wd.reshape(c, o)
        out = xd @ w2
        if bias is not None:
            out += bias.data

        def backward_1x1(g):
            if bias is not None and bias.requires_grad:
                bias.accumulate_grad(g.reshape(-1, o).sum(axis=0), own=True)
            if weight.requires_grad:
                gw = xd.reshape(-1, c).T @ g.reshape(-1, o)
                weight.accumulate_grad(gw.reshape(1, 1, c, o), own=True)
            if x.requires_grad:
                x.accumulate_grad(g @ w2.T, own=True)

        parents = (x, weight) if bias is None else (x, weight, bias)
        return make_node(out, parents, backward_1x1)

    xp = np.pad(xd, ((0, 0), (padding, padding), (padding, padding), (0, 0))) if padding else xd
    sb, sh, sw, sc = xp.strides
    win = as_strided(
        xp,
        shape=(b_, ho, wo, k, k, c),
        strides=(sb, sh * stride, sw * stride, sh, sw, sc),
    )
    cols = win.reshape(b_ * ho * wo, k * k * c)  # one gather copy
    w2 = wd.reshape(k * k * c, o)
    out = (cols @ w2).reshape(b_, ho, wo, o)
    if bias is not None:
        out += bias.data

    def backward(g):
        g2 = g.reshape(b_ * ho * wo, o)
        if bias is not None and bias.requires_grad:
            bias.accumulate_grad(g2.sum(axis=0), own=True)
        if weight.requires_grad:
            weight.accumulate_grad((cols.T @ g2).reshape(k, k, c, o), own=True)
        if x.requires_grad:
            gcols = (g2 @ w2.T).reshape(b_, ho, wo, k, k, c)
            gx = np.zeros((b_, hp, wp, c), dtype=xd.dtype)
            # col2im: k*k strided slice-adds, each hitting disjoint positions
            for di in range(k):
                for dj in range(k):
                    gx[:, di : di + stride * ho : stride, dj : dj + stride * wo : stride, :] += gcols[
                        :, :, :, di, dj, :
                    ]
            if padding:
                gx = gx[:, padding : padding + h, padding : padding + w, :]
            x.accumulate_grad(np.ascontiguousarray(gx), own=True)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return make_node(out, parents, backward)


def conv2d(x: Tensor, weight: Tensor, bias=None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation of NCHW input with [O,C,k,k] weights."""
    if x.data.ndim != 4:
        raise ShapeError(f"conv2d input must be 4-D [B,C,H,W], got rank {x.data.ndim}")
    if weight.data.ndim != 4:
        raise ShapeError(f"conv2d weight must be 4-D [O,C,k,k], got rank {weight.data.ndim}")
    x_last = permute(x, (0, 2, 3, 1))
    w_last = permute(weight, (2, 3, 1, 0))
    out = conv2d_nhwc(x_last, w_last, bias=bias, stride=stride, padding=padding)
    return permute(out, (0, 3, 1, 2))
