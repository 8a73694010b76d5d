"""Pointer-content serialization of token grids into 1-D streams.

A target grid becomes alternating (pointer, content) pairs in an arbitrary
visit order, after conditioning blocks laid out in fixed raster order.
Supervision weights live alongside the tokens; conditioning positions always
carry weight zero.

Combined vocabulary layout (contiguous, dense):

    [rgb content | flow content | pointers | pose bins (6 axes) | controls]
"""

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AlternationError,
    ConfigError,
    ContractError,
    DataError,
    PermutationError,
    VocabularyError,
)
from .util import config_hash

CONTROL_NAMES = ("begin_frame", "begin_flow", "begin_target", "pad")


@dataclass(frozen=True)
class VocabLayout:
    rgb_bits: int
    flow_bits: int
    grid_h: int
    grid_w: int
    pose_bins: int = 64
    pose_axes: int = 6

    @property
    def n_positions(self) -> int:
        return self.grid_h * self.grid_w

    @property
    def rgb_start(self) -> int:
        return 0

    @property
    def flow_start(self) -> int:
        return 1 << self.rgb_bits

    @property
    def pointer_start(self) -> int:
        return self.flow_start + (1 << self.flow_bits)

    @property
    def pose_start(self) -> int:
        return self.pointer_start + self.n_positions

    @property
    def control_start(self) -> int:
        return self.pose_start + self.pose_axes * self.pose_bins

    @property
    def total_size(self) -> int:
        return self.control_start + len(CONTROL_NAMES)

    # -- token constructors ----------------------------------------------------

    def rgb_token(self, code: int) -> int:
        if not 0 <= code < (1 << self.rgb_bits):
            raise VocabularyError(f"rgb code {code} outside [0, {1 << self.rgb_bits})")
        return self.rgb_start + int(code)

    def flow_token(self, code: int) -> int:
        if not 0 <= code < (1 << self.flow_bits):
            raise VocabularyError(f"flow code {code} outside [0, {1 << self.flow_bits})")
        return self.flow_start + int(code)

    def pointer_token(self, position: int) -> int:
        if not 0 <= position < self.n_positions:
            raise VocabularyError(f"grid position {position} outside [0, {self.n_positions})")
        return self.pointer_start + int(position)

    def pose_token(self, axis: int, bin_index: int) -> int:
        if not 0 <= axis < self.pose_axes:
            raise VocabularyError(f"pose axis {axis} outside [0, {self.pose_axes})")
        if not 0 <= bin_index < self.pose_bins:
            raise VocabularyError(f"pose bin {bin_index} outside [0, {self.pose_bins})")
        return self.pose_start + axis * self.pose_bins + int(bin_index)

    def control_token(self, name: str) -> int:
        return self.control_start + CONTROL_NAMES.index(name)

    def content_range(self, kind: str):
        """Half-open token range carrying content codes of the given kind."""
        if kind == "rgb":
            return (self.rgb_start, self.flow_start)
        if kind == "flow":
            return (self.flow_start, self.pointer_start)
        raise ConfigError(f"no content range for kind {kind!r}")

    def describe(self, token: int):
        """Inverse mapping: token id -> (kind, payload)."""
        t = int(token)
        if t < 0 or t >= self.total_size:
            raise VocabularyError(f"token {t} outside combined vocabulary [0, {self.total_size})")
        if t < self.flow_start:
            return ("rgb", t - self.rgb_start)
        if t < self.pointer_start:
            return ("flow", t - self.flow_start)
        if t < self.pose_start:
            return ("pointer", t - self.pointer_start)
        if t < self.control_start:
            rel = t - self.pose_start
            return ("pose", (rel // self.pose_bins, rel % self.pose_bins))
        return ("control", CONTROL_NAMES[t - self.control_start])

    def to_dict(self) -> dict:
        return {
            "rgb_bits": self.rgb_bits,
            "flow_bits": self.flow_bits,
            "grid_h": self.grid_h,
            "grid_w": self.grid_w,
            "pose_bins": self.pose_bins,
            "pose_axes": self.pose_axes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VocabLayout":
        return cls(**d)

    def layout_hash(self) -> str:
        return config_hash(self.to_dict())


@dataclass
class CondBlock:
    """One conditioning block: an rgb/flow grid or a vector of pose bins."""

    kind: str  # rgb | flow | pose | pose_pad
    tokens: np.ndarray | None = None  # (gh, gw) codes, or (axes,) bins for pose


@dataclass
class LrasSequence:
    tokens: np.ndarray  # (T,) int64 combined-vocabulary ids
    mask: np.ndarray  # (T,) float32 supervision weights
    layout: VocabLayout
    order: np.ndarray | None = None  # target visit order (grid positions)
    conditioning_len: int = 0  # positions strictly before the first target pair
    target_kind: str = "rgb"

    def __len__(self):
        return len(self.tokens)


def _conditioning_tokens(conditioning, layout: VocabLayout):
    out = []
    for block in conditioning:
        if block.kind in ("rgb", "flow"):
            grid = np.asarray(block.tokens)
            if grid.shape != (layout.grid_h, layout.grid_w):
                raise ContractError(
                    f"conditioning grid {grid.shape} does not match layout "
                    f"{(layout.grid_h, layout.grid_w)}"
                )
            marker = "begin_frame" if block.kind == "rgb" else "begin_flow"
            out.append(layout.control_token(marker))
            to_token = layout.rgb_token if block.kind == "rgb" else layout.flow_token
            out.extend(to_token(c) for c in grid.reshape(-1))
        elif block.kind == "pose":
            bins = np.asarray(block.tokens)
            if bins.shape != (layout.pose_axes,):
                raise ContractError(f"pose block needs {layout.pose_axes} bins, got {bins.shape}")
            out.extend(layout.pose_token(a, b) for a, b in enumerate(bins))
        elif block.kind == "pose_pad":
            out.extend([layout.control_token("pad")] * layout.pose_axes)
        else:
            raise ConfigError(f"unknown conditioning block kind {block.kind!r}")
    return out


def validate_order(order: np.ndarray, n_positions: int) -> np.ndarray:
    order = np.asarray(order, dtype=np.int64)
    if order.ndim != 1:
        raise PermutationError(f"order must be 1-D, got shape {order.shape}")
    if order.size:
        if order.min() < 0 or order.max() >= n_positions:
            raise PermutationError(
                f"order contains position outside [0, {n_positions})"
            )
    if len(np.unique(order)) != len(order):
        raise PermutationError("duplicate position in decode order")
    return order


def serialize(
    conditioning,
    target: np.ndarray,
    order: np.ndarray,
    layout: VocabLayout,
    subset_fraction: float = 1.0,
    target_kind: str = "rgb",
    supervise_pointers: bool = False,
) -> LrasSequence:
    """[controls][conditioning blocks][(pointer, content) pairs].

    Only the first ceil(subset_fraction * len(order)) positions of `order`
    are serialized; supervision weight 1 goes to target content tokens (and
    optionally their pointers), nothing else.
    """
    if not 0.0 < subset_fraction <= 1.0:
        raise ContractError(f"subset_fraction must be in (0, 1], got {subset_fraction}")
    order = validate_order(order, layout.n_positions)
    if len(order) != layout.n_positions:
        raise PermutationError(
            f"order visits {len(order)} of {layout.n_positions} positions; "
            "serialize requires a full permutation"
        )
    target = np.asarray(target)
    if target.shape != (layout.grid_h, layout.grid_w):
        raise ContractError(
            f"target grid {target.shape} does not match layout {(layout.grid_h, layout.grid_w)}"
        )
    to_token = layout.rgb_token if target_kind == "rgb" else layout.flow_token

    tokens = _conditioning_tokens(conditioning, layout)
    tokens.append(layout.control_token("begin_target"))
    cond_len = len(tokens)

    n_keep = int(np.ceil(subset_fraction * len(order)))
    flat = target.reshape(-1)
    mask = [0.0] * cond_len
    for pos in order[:n_keep]:
        tokens.append(layout.pointer_token(int(pos)))
        mask.append(1.0 if supervise_pointers else 0.0)
        tokens.append(to_token(int(flat[pos])))
        mask.append(1.0)

    return LrasSequence(
        tokens=np.array(tokens, dtype=np.int64),
        mask=np.array(mask, dtype=np.float32),
        layout=layout,
        order=order[:n_keep].copy(),
        conditioning_len=cond_len,
        target_kind=target_kind,
    )


def deserialize(seq: LrasSequence):
    """Recover the visited part of the target grid.

    Returns (grid, coverage): grid holds content codes at visited positions
    (zero elsewhere), coverage marks which positions were visited.
    """
    layout = seq.layout
    tokens = np.asarray(seq.tokens)
    begin = layout.control_token("begin_target")
    starts = np.flatnonzero(tokens == begin)
    if len(starts) != 1:
        raise AlternationError(
            f"sequence must contain exactly one begin-target token, found {len(starts)}"
        )
    body = tokens[starts[0] + 1 :]
    if len(body) % 2 != 0:
        raise AlternationError("target block ends with a dangling token (pointer without content)")

    lo, hi = layout.content_range(seq.target_kind)
    grid = np.zeros(layout.n_positions, dtype=np.int64)
    coverage = np.zeros(layout.n_positions, dtype=bool)
    for i in range(0, len(body), 2):
        ptr, content = int(body[i]), int(body[i + 1])
        kind, payload = layout.describe(ptr)
        if kind != "pointer":
            if kind == "control":
                raise AlternationError(f"expected pointer at pair {i // 2}, got control token")
            raise AlternationError(f"expected pointer at pair {i // 2}, got {kind} token")
        ckind, _ = layout.describe(content)
        if ckind == "pointer":
            raise AlternationError(f"pointer followed by pointer at pair {i // 2}")
        if not lo <= content < hi:
            raise VocabularyError(
                f"content token {content} outside expected {seq.target_kind} range [{lo}, {hi})"
            )
        if coverage[payload]:
            raise PermutationError(f"grid position {payload} visited twice")
        grid[payload] = content - lo
        coverage[payload] = True

    shape = (layout.grid_h, layout.grid_w)
    return grid.reshape(shape), coverage.reshape(shape)


def decode_schedule(grid_shape, policy: str, seed: int = 0):
    """Deterministic decode order; returns (permutation, groups).

    Policies: random | raster | center-out | parallel-stripes(k). Groups is
    None for serial policies; parallel-stripes yields k row-band groups
    decoded group-by-group (members of a group are predicted in parallel).
    """
    gh, gw = grid_shape
    n = gh * gw
    if policy == "raster":
        perm = np.arange(n, dtype=np.int64)
        groups = None
    elif policy == "random":
        rng = np.random.default_rng(seed)
        perm = rng.permutation(n).astype(np.int64)
        groups = None
    elif policy == "center-out":
        rows, cols = np.divmod(np.arange(n), gw)
        d2 = (rows - (gh - 1) / 2.0) ** 2 + (cols - (gw - 1) / 2.0) ** 2
        perm = np.lexsort((np.arange(n), d2)).astype(np.int64)
        groups = None
    elif policy.startswith("parallel-stripes(") and policy.endswith(")"):
        k = int(policy[len("parallel-stripes(") : -1])
        if not 1 <= k <= gh:
            raise ConfigError(f"stripe count {k} must be in [1, {gh}]")
        bands = np.array_split(np.arange(gh), k)
        groups = [
            np.concatenate([np.arange(r * gw, (r + 1) * gw) for r in band]).astype(np.int64)
            for band in bands
        ]
        perm = np.concatenate(groups)
    else:
        raise ConfigError(f"unknown schedule policy {policy!r}")
    return perm, groups


def causal_mask(length: int) -> np.ndarray:
    """Visibility matrix: position t sees positions <= t."""
    return np.tril(np.ones((length, length), dtype=bool))


# -- binary records ------------------------------------------------------------

_RECORD_MAGIC = b"LRASSEQ1"


def save_sequence(path, seq: LrasSequence) -> None:
    h = bytes.fromhex(seq.layout.layout_hash())
    with open(path, "wb") as f:
        f.write(_RECORD_MAGIC)
        f.write(h)
        f.write(struct.pack("<I", len(seq.tokens)))
        f.write(np.ascontiguousarray(seq.tokens, dtype="<u4").tobytes())
        f.write(np.ascontiguousarray(seq.mask, dtype="<f4").tobytes())


def load_sequence(path, layout: VocabLayout, target_kind: str = "rgb") -> LrasSequence:
    with open(path, "rb") as f:
        if f.read(8) != _RECORD_MAGIC:
            raise DataError(f"{path}: bad sequence record magic")
        stored = f.read(8).hex()
        if stored != layout.layout_hash():
            raise DataError(
                f"{path}: layout hash {stored} does not match expected {layout.layout_hash()}"
            )
        (n,) = struct.unpack("<I", f.read(4))
        tokens = np.frombuffer(f.read(4 * n), dtype="<u4").astype(np.int64)
        mask = np.frombuffer(f.read(4 * n), dtype="<f4").astype(np.float32)
        if len(tokens) != n or len(mask) != n:
            raise DataError(f"{path}: truncated sequence record")
        if f.read(1):
            raise DataError(f"{path}: trailing bytes in sequence record")
    begin = layout.control_token("begin_target")
    starts = np.flatnonzero(tokens == begin)
    cond_len = int(starts[0]) + 1 if len(starts) else len(tokens)
    return LrasSequence(tokens=tokens, mask=mask, layout=layout,
                        conditioning_len=cond_len, target_kind=target_kind)
