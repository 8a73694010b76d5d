"""Dense per-pixel fields: flow, depth, segment masks, bilinear resampling."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import GeometryError, ShapeError


@dataclass
class FlowField:
    """Per-pixel displacement in pixels, (du, dv), with a validity mask."""

    flow: np.ndarray  # (H, W, 2) float
    valid: np.ndarray = None  # (H, W) bool

    def __post_init__(self):
        self.flow = np.asarray(self.flow, dtype=np.float64)
        if self.flow.ndim != 3 or self.flow.shape[2] != 2:
            raise ShapeError(f"flow must be (H, W, 2), got {self.flow.shape}")
        if self.valid is None:
            self.valid = np.ones(self.flow.shape[:2], dtype=bool)
        else:
            self.valid = np.asarray(self.valid, dtype=bool)
        if self.valid.shape != self.flow.shape[:2]:
            raise ShapeError(
                f"flow mask {self.valid.shape} does not match field {self.flow.shape[:2]}"
            )
        if not np.all(np.isfinite(self.flow[self.valid])):
            raise GeometryError("non-finite flow on valid pixels")

    @property
    def shape(self):
        return self.flow.shape[:2]

    def magnitude(self) -> np.ndarray:
        return np.linalg.norm(self.flow, axis=-1)

    @classmethod
    def zero(cls, height: int, width: int) -> "FlowField":
        return cls(np.zeros((height, width, 2)))


@dataclass
class DepthMap:
    """Positive depths in scene units with a validity mask."""

    values: np.ndarray  # (H, W) float
    valid: np.ndarray = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ShapeError(f"depth must be 2-D, got {self.values.shape}")
        finite_pos = np.isfinite(self.values) & (self.values > 0)
        if self.valid is None:
            self.valid = finite_pos
        else:
            self.valid = np.asarray(self.valid, dtype=bool) & finite_pos
        if self.valid.shape != self.values.shape:
            raise ShapeError(
                f"depth mask {self.valid.shape} does not match map {self.values.shape}"
            )

    @property
    def shape(self):
        return self.values.shape


def bilinear_sample(src: np.ndarray, uv: np.ndarray):
    """Sample src (H, W[, C]) at continuous (u, v); returns (values, inside).

    Points outside the valid interpolation square are masked out and return 0.
    """
    src = np.asarray(src, dtype=np.float64)
    h, w = src.shape[:2]
    u = uv[..., 0]
    v = uv[..., 1]
    inside = (u >= 0) & (u <= w - 1) & (v >= 0) & (v <= h - 1)
    uc = np.clip(u, 0, w - 1)
    vc = np.clip(v, 0, h - 1)
    u0 = np.floor(uc).astype(np.int64)
    v0 = np.floor(vc).astype(np.int64)
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    fu = uc - u0
    fv = vc - v0
    if src.ndim == 3:
        fu = fu[..., None]
        fv = fv[..., None]
    out = (
        src[v0, u0] * (1 - fu) * (1 - fv)
        + src[v0, u1] * fu * (1 - fv)
        + src[v1, u0] * (1 - fu) * fv
        + src[v1, u1] * fu * fv
    )
    zero_mask = inside if src.ndim == 2 else inside[..., None]
    return np.where(zero_mask, out, 0.0), inside


def warp_by_flow(src: np.ndarray, field: FlowField):
    """Pull-back warp: result(p) = src(p + flow(p)); returns (values, mask)."""
    from .camera import pixel_grid

    h, w = field.shape
    u, v = pixel_grid(w, h)
    uv = np.stack([u + field.flow[..., 0], v + field.flow[..., 1]], axis=-1)
    values, inside = bilinear_sample(src, uv)
    return values, inside & field.valid


def edit_adherence(pred_mask: np.ndarray, gt_mask: np.ndarray) -> float:
    """Intersection over union of two boolean masks; both empty counts as 1."""
    pred_mask = np.asarray(pred_mask, dtype=bool)
    gt_mask = np.asarray(gt_mask, dtype=bool)
    if pred_mask.shape != gt_mask.shape:
        raise ShapeError(f"mask shapes differ: {pred_mask.shape} vs {gt_mask.shape}")
    union = np.logical_or(pred_mask, gt_mask).sum()
    if union == 0:
        return 1.0
    inter = np.logical_and(pred_mask, gt_mask).sum()
    return float(inter) / float(union)
