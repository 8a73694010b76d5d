"""Lookup-free quantization: the sign pattern of the latent IS the code.

Bit i of a code index is set iff latent channel i is non-negative (the
zero-latent tie goes to +1 so that sign pattern <-> index stays a bijection).
"""

import numpy as np

from ..errors import VocabularyError


def lfq_signs(latent: np.ndarray) -> np.ndarray:
    """Elementwise sign with sign(0) := +1, same dtype as input."""
    return np.where(latent >= 0, 1.0, -1.0).astype(latent.dtype)


def signs_to_codes(signs: np.ndarray, channel_axis: int = -1) -> np.ndarray:
    """Pack a {-1,+1} channel axis into uint32 code indices."""
    bits_ax = np.moveaxis(signs, channel_axis, -1)
    nbits = bits_ax.shape[-1]
    if nbits > 24:
        raise VocabularyError(f"too many latent channels to pack: {nbits}")
    weights = (1 << np.arange(nbits, dtype=np.uint32))
    return ((bits_ax > 0).astype(np.uint32) @ weights).astype(np.uint32)


def codes_to_signs(codes: np.ndarray, bits: int, dtype=np.float32) -> np.ndarray:
    """Unpack code indices into a trailing {-1,+1} channel axis."""
    codes = np.asarray(codes)
    if codes.size and int(codes.max()) >= (1 << bits):
        raise VocabularyError(f"code {int(codes.max())} outside [0, {1 << bits})")
    shifts = np.arange(bits, dtype=np.uint32)
    bit_vals = (codes[..., None] >> shifts) & 1
    return (bit_vals.astype(dtype) * 2.0 - 1.0).astype(dtype)


def lfq_quantize(latent: np.ndarray, channel_axis: int = -1):
    """(signs, code indices) for a latent with the given channel axis."""
    signs = lfq_signs(latent)
    return signs, signs_to_codes(signs, channel_axis=channel_axis)
