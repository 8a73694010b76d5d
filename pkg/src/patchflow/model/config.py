"""Transformer configuration and camera-pose discretization."""

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ConfigError
from ..geometry import RigidTransform
from ..sequence import VocabLayout
from ..util import read_json, write_json


@dataclass
class ModelConfig:
    variant: str  # rgb | flow
    layers: int = 6
    heads: int = 8
    embed_dim: int = 256
    context_len: int = 320
    dropout: float = 0.0
    pos_encoding: str = "learned"  # pointers already carry spatial position
    version: int = 1

    def __post_init__(self):
        if self.variant not in ("rgb", "flow"):
            raise ConfigError(f"variant must be rgb or flow, got {self.variant!r}")
        if self.embed_dim % self.heads:
            raise ConfigError(f"embed_dim {self.embed_dim} not divisible by heads {self.heads}")
        if self.pos_encoding != "learned":
            raise ConfigError("only learned positional encoding is implemented")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


def worst_case_sequence_len(layout: VocabLayout, variant: str) -> int:
    n = layout.n_positions
    if variant == "rgb":
        # begin_frame + rgb + begin_flow + flow + begin_target + pairs
        return 3 + 2 * n + 2 * n
    return 2 + n + layout.pose_axes + 2 * n


def toy_model_config(variant: str, layout: VocabLayout) -> ModelConfig:
    """6L/8H/256d preset (the documented toy default)."""
    return ModelConfig(variant=variant, layers=6, heads=8, embed_dim=256,
                       context_len=worst_case_sequence_len(layout, variant))


def mini_model_config(variant: str, layout: VocabLayout) -> ModelConfig:
    """Smaller preset for single-core training runs."""
    return ModelConfig(variant=variant, layers=4, heads=4, embed_dim=192,
                       context_len=worst_case_sequence_len(layout, variant))


@dataclass
class PoseBinning:
    """Uniform discretization of a 6-DoF relative pose into 6 bin indices."""

    bins: int = 64
    rot_range: float = float(np.deg2rad(30.0))  # radians, symmetric
    trans_range: float = 1.0  # scene units, symmetric

    def _quantize(self, x: float, half_range: float) -> int:
        w = 2 * half_range / self.bins
        i = int(np.floor((x + half_range) / w))
        return int(np.clip(i, 0, self.bins - 1))

    def _dequantize(self, i: int, half_range: float) -> float:
        w = 2 * half_range / self.bins
        return -half_range + (i + 0.5) * w

    def encode(self, delta: RigidTransform) -> np.ndarray:
        """Rotation (intrinsic XYZ euler) then translation, 6 bins total."""
        R = delta.R
        ry = float(np.arcsin(np.clip(R[0, 2], -1.0, 1.0)))
        rx = float(np.arctan2(-R[1, 2], R[2, 2]))
        rz = float(np.arctan2(-R[0, 1], R[0, 0]))
        vals = [rx, ry, rz] + list(delta.t)
        halves = [self.rot_range] * 3 + [self.trans_range] * 3
        return np.array([self._quantize(v, h) for v, h in zip(vals, halves)], dtype=np.int64)

    def decode(self, bins: np.ndarray) -> RigidTransform:
        halves = [self.rot_range] * 3 + [self.trans_range] * 3
        vals = [self._dequantize(int(b), h) for b, h in zip(bins, halves)]
        return RigidTransform.from_euler(rx=vals[0], ry=vals[1], rz=vals[2], t=vals[3:])

    def to_dict(self) -> dict:
        return {"bins": self.bins, "rot_range": self.rot_range, "trans_range": self.trans_range}

    @classmethod
    def from_dict(cls, d: dict) -> "PoseBinning":
        return cls(**d)
