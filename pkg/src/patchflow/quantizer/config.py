"""Tokenizer configuration and named presets."""

from dataclasses import asdict, dataclass, field

from ..errors import ConfigError
from ..util import read_json, write_json


@dataclass
class PatchTokenizerConfig:
    """Geometry and capacity of one patch tokenizer.

    The encoder's first block has kernel == stride == patch_size (this is
    what makes tokens patch-local); all later encoder blocks are 1x1. The
    decoder runs at pixel resolution with 3x3 blocks, so it may mix
    information across a bounded ring of neighboring pixels.
    """

    patch_size: int = 4
    grid_h: int = 8
    grid_w: int = 8
    bits: int = 10
    input_channels: int = 3
    encoder_blocks: int = 3
    decoder_blocks: int = 6
    encoder_channels: int = 32
    decoder_channels: int = 32
    flow_divisor: float = 0.0  # filled in for flow configs; unused for rgb
    version: int = 1

    def __post_init__(self):
        if self.input_channels not in (2, 3):
            raise ConfigError(f"input_channels must be 2 (flow) or 3 (rgb), got {self.input_channels}")
        if self.bits < 1 or self.bits > 24:
            raise ConfigError(f"bits must be in [1, 24], got {self.bits}")
        if self.encoder_blocks < 1 or self.decoder_blocks < 0:
            raise ConfigError("block counts must be positive")
        if self.is_flow and self.flow_divisor == 0.0:
            # half-image width keeps normalized displacements in [-1, 1]
            self.flow_divisor = self.patch_size * self.grid_w * 0.5

    @property
    def is_flow(self) -> bool:
        return self.input_channels == 2

    @property
    def image_h(self) -> int:
        return self.grid_h * self.patch_size

    @property
    def image_w(self) -> int:
        return self.grid_w * self.patch_size

    @property
    def codebook_size(self) -> int:
        return 1 << self.bits

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PatchTokenizerConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown tokenizer config keys: {sorted(unknown)}")
        return cls(**d)

    def save_sidecar(self, path) -> None:
        write_json(path, self.to_dict())

    @classmethod
    def load_sidecar(cls, path) -> "PatchTokenizerConfig":
        return cls.from_dict(read_json(path))


# Full-scale presets mirror the published geometry; they are declarable but
# not trainable at desk scale.
def rgb_full() -> PatchTokenizerConfig:
    return PatchTokenizerConfig(patch_size=4, grid_h=64, grid_w=64, bits=16,
                                input_channels=3, encoder_channels=128, decoder_channels=128)


def flow_full() -> PatchTokenizerConfig:
    return PatchTokenizerConfig(patch_size=4, grid_h=64, grid_w=64, bits=15,
                                input_channels=2, encoder_channels=128, decoder_channels=128)


def rgb_toy(grid: int = 8, bits: int = 10) -> PatchTokenizerConfig:
    return PatchTokenizerConfig(patch_size=4, grid_h=grid, grid_w=grid, bits=bits, input_channels=3)


def flow_toy(grid: int = 8, bits: int = 10) -> PatchTokenizerConfig:
    return PatchTokenizerConfig(patch_size=4, grid_h=grid, grid_w=grid, bits=bits, input_channels=2)


PRESETS = {
    "rgb_full": rgb_full,
    "flow_full": flow_full,
    "rgb_toy": rgb_toy,
    "flow_toy": flow_toy,
}
