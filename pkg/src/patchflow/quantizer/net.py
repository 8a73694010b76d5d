"""Patch-local convolutional autoencoder with an LFQ bottleneck.

Encoder: one downsampling block (kernel == stride == patch size) followed by
1x1 blocks, so each token is a pure function of its own patch. Decoder:
unpatchify to pixel resolution, then 3x3 blocks (one ring of context per
block) and a linear output head. Everything runs channels-last.
"""

import numpy as np

from .. import tensor as T
from ..errors import GeometryError, VocabularyError
from ..tensor import Tensor
from ..tensor.ops import conv2d_nhwc
from .config import PatchTokenizerConfig
from .lfq import codes_to_signs, lfq_signs, signs_to_codes


def _conv_init(rng, k, in_c, out_c, scale=1.0):
    fan_in = in_c * k * k
    return (rng.standard_normal((k, k, in_c, out_c)) * scale / np.sqrt(fan_in)).astype(np.float32)


def init_params(cfg: PatchTokenizerConfig, rng: np.random.Generator) -> dict:
    p = {}
    ce, cd = cfg.encoder_channels, cfg.decoder_channels
    ps = cfg.patch_size

    def block(prefix, in_c, out_c, k):
        p[f"{prefix}.conv1.w"] = Tensor.param(_conv_init(rng, k, in_c, out_c))
        p[f"{prefix}.conv1.b"] = Tensor.param(np.zeros(out_c, dtype=np.float32))
        p[f"{prefix}.norm.g"] = Tensor.param(np.ones(out_c, dtype=np.float32))
        p[f"{prefix}.norm.b"] = Tensor.param(np.zeros(out_c, dtype=np.float32))
        # residual branch starts at zero so every block is the identity at init
        p[f"{prefix}.conv2.w"] = Tensor.param(np.zeros((1, 1, out_c, out_c), dtype=np.float32))
        p[f"{prefix}.conv2.b"] = Tensor.param(np.zeros(out_c, dtype=np.float32))
        if in_c != out_c or k != 1:
            p[f"{prefix}.skip.w"] = Tensor.param(_conv_init(rng, k, in_c, out_c))

    block("enc.0", cfg.input_channels, ce, ps)
    for i in range(1, cfg.encoder_blocks):
        block(f"enc.{i}", ce, ce, 1)
    p["enc.head.w"] = Tensor.param(_conv_init(rng, 1, ce, cfg.bits))
    p["enc.head.b"] = Tensor.param(np.zeros(cfg.bits, dtype=np.float32))

    p["dec.embed.w"] = Tensor.param(_conv_init(rng, 1, cfg.bits, cd * ps * ps))
    p["dec.embed.b"] = Tensor.param(np.zeros(cd * ps * ps, dtype=np.float32))
    for i in range(cfg.decoder_blocks):
        block(f"dec.{i}", cd, cd, 3)
    # small head keeps the initial reconstruction near the data midpoint
    p["dec.head.w"] = Tensor.param(_conv_init(rng, 1, cd, cfg.input_channels, scale=0.1))
    p["dec.head.b"] = Tensor.param(np.zeros(cfg.input_channels, dtype=np.float32))
    return p


def _depth_to_space(x: Tensor, p: int) -> Tensor:
    b, h, w, cpp = x.shape
    c = cpp // (p * p)
    y = T.reshape(x, (b, h, w, p, p, c))
    y = T.permute(y, (0, 1, 3, 2, 4, 5))
    return T.reshape(y, (b, h * p, w * p, c))


class PatchTokenizer:
    """Encode images (or flow fields) to token grids and back."""

    def __init__(self, cfg: PatchTokenizerConfig, params: dict | None = None, seed: int = 0):
        self.cfg = cfg
        if params is None:
            params = init_params(cfg, np.random.default_rng(seed))
        self.params = params

    # -- normalization ---------------------------------------------------------

    def normalize(self, raw: np.ndarray) -> np.ndarray:
        """Map raw inputs (rgb in [0,1] or flow in pixels) to the net's domain."""
        if self.cfg.is_flow:
            return np.clip(raw / self.cfg.flow_divisor, -1.0, 1.0).astype(np.float32)
        return (raw.astype(np.float32) * 2.0 - 1.0)

    def denormalize(self, out: np.ndarray) -> np.ndarray:
        if self.cfg.is_flow:
            return out * self.cfg.flow_divisor
        return np.clip((out + 1.0) * 0.5, 0.0, 1.0)

    # -- autodiff paths ----------------------------------------------------------

    def _block(self, x: Tensor, prefix: str, stride: int, padding: int) -> Tensor:
        p = self.params
        y = conv2d_nhwc(x, p[f"{prefix}.conv1.w"], bias=p[f"{prefix}.conv1.b"],
                        stride=stride, padding=padding)
        y = T.layer_norm(y, p[f"{prefix}.norm.g"], p[f"{prefix}.norm.b"])
        y = T.gelu(y)
        y = conv2d_nhwc(y, p[f"{prefix}.conv2.w"], bias=p[f"{prefix}.conv2.b"])
        if f"{prefix}.skip.w" in p:
            skip = conv2d_nhwc(x, p[f"{prefix}.skip.w"], stride=stride, padding=padding)
        else:
            skip = x
        return T.add(y, skip)

    def encode_latent(self, images: Tensor) -> Tensor:
        """[B, H, W, C] normalized input -> [B, grid_h, grid_w, bits] latent."""
        cfg = self.cfg
        b, h, w, c = images.shape
        if h != cfg.image_h or w != cfg.image_w:
            raise GeometryError(
                f"input {h}x{w} does not match configured {cfg.image_h}x{cfg.image_w}"
            )
        x = self._block(images, "enc.0", cfg.patch_size, 0)
        for i in range(1, cfg.encoder_blocks):
            x = self._block(x, f"enc.{i}", 1, 0)
        return conv2d_nhwc(x, self.params["enc.head.w"], bias=self.params["enc.head.b"])

    def decode_signs(self, signs: Tensor) -> Tensor:
        """[B, gh, gw, bits] sign tensor -> [B, H, W, C] in the normalized domain."""
        cfg = self.cfg
        x = conv2d_nhwc(signs, self.params["dec.embed.w"], bias=self.params["dec.embed.b"])
        x = _depth_to_space(x, cfg.patch_size)
        for i in range(cfg.decoder_blocks):
            x = self._block(x, f"dec.{i}", 1, 1)
        return conv2d_nhwc(x, self.params["dec.head.w"], bias=self.params["dec.head.b"])

    def reconstruct(self, images: Tensor) -> tuple[Tensor, np.ndarray]:
        """Training forward pass: returns reconstruction and code grid."""
        latent = self.encode_latent(images)
        signs = lfq_signs(latent.data)
        quantized = T.straight_through(latent, Tensor(signs))
        codes = signs_to_codes(signs, channel_axis=-1)
        return self.decode_signs(quantized), codes

    # -- frozen-weights API -----------------------------------------------------

    def encode(self, raw: np.ndarray) -> np.ndarray:
        """Raw H,W,C (or B,H,W,C) array -> uint32 token grid(s)."""
        single = raw.ndim == 3
        if single:
            raw = raw[None]
        if raw.shape[3] != self.cfg.input_channels:
            raise GeometryError(
                f"expected {self.cfg.input_channels} channels, got {raw.shape[3]}"
            )
        if not np.all(np.isfinite(raw)):
            raise GeometryError("non-finite values in tokenizer input")
        with T.no_grad():
            latent = self.encode_latent(Tensor(self.normalize(raw)))
        codes = signs_to_codes(lfq_signs(latent.data), channel_axis=-1)
        return codes[0] if single else codes

    def decode(self, tokens: np.ndarray) -> np.ndarray:
        """Token grid(s) -> raw H,W,C array (rgb in [0,1] / flow in pixels)."""
        single = tokens.ndim == 2
        if single:
            tokens = tokens[None]
        if tokens.shape[1:] != (self.cfg.grid_h, self.cfg.grid_w):
            raise GeometryError(
                f"token grid {tokens.shape[1:]} does not match configured "
                f"{(self.cfg.grid_h, self.cfg.grid_w)}"
            )
        if tokens.size and int(tokens.max()) >= self.cfg.codebook_size:
            raise VocabularyError(
                f"token {int(tokens.max())} outside [0, {self.cfg.codebook_size})"
            )
        signs = codes_to_signs(tokens, self.cfg.bits)  # (B, gh, gw, bits)
        with T.no_grad():
            out = self.decode_signs(Tensor(signs))
        raw = self.denormalize(out.data)
        return raw[0] if single else raw

    def reconstruct_raw(self, raw: np.ndarray) -> np.ndarray:
        """decode(encode(x)) convenience."""
        return self.decode(self.encode(raw))

    # -- persistence ----------------------------------------------------------

    def save(self, ckpt_path) -> None:
        from ..tensor import save_params

        save_params(ckpt_path, self.params)
        self.cfg.save_sidecar(str(ckpt_path) + ".json")

    @classmethod
    def load(cls, ckpt_path) -> "PatchTokenizer":
        from ..tensor import load_params_into

        cfg = PatchTokenizerConfig.load_sidecar(str(ckpt_path) + ".json")
        tok = cls(cfg)
        load_params_into(ckpt_path, tok.params)
        return tok
