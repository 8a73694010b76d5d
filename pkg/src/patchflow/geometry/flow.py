"""Flow-field construction for camera moves, object edits, and removal.

Flow is always defined on the source frame's pixels: flow(p) is where the
content at p goes. No z-buffering or splatting happens here; occlusion
resolution is the generative model's job downstream.
"""

import warnings

import numpy as np

from ..errors import GeometryError
from .camera import CameraIntrinsics, RigidTransform, pixel_grid, project, unproject
from .fields import DepthMap, FlowField, bilinear_sample


def _flow_from_points(points, base_points, valid, K: CameraIntrinsics) -> FlowField:
    """Flow = project(points) - project(base_points).

    Differencing two identically computed projections makes the zero-motion
    case bitwise zero instead of accumulating unproject/project roundoff.
    """
    uv_new, in_front = project(points, K)
    uv_base, _ = project(base_points, K)
    h, w = valid.shape
    inside = (
        (uv_new[..., 0] >= 0)
        & (uv_new[..., 0] <= w - 1)
        & (uv_new[..., 1] >= 0)
        & (uv_new[..., 1] <= h - 1)
    )
    ok = valid & in_front & inside
    flow = np.where(ok[..., None], uv_new - uv_base, 0.0)
    return FlowField(flow, ok)


def camera_flow(depth: DepthMap, K: CameraIntrinsics, delta: RigidTransform) -> FlowField:
    """Flow induced by a camera pose change (camera-to-world convention).

    Scene points move by delta's inverse in camera coordinates; an identity
    transform yields an exactly zero field.
    """
    pts, valid = unproject(depth.values, K, depth.valid)
    inv = delta.inverse()
    moved = pts @ inv.R.T + inv.t
    return _flow_from_points(moved, pts, valid, K)


def object_flow(
    depth: DepthMap,
    K: CameraIntrinsics,
    transform: RigidTransform,
    mask: np.ndarray,
    pivot: np.ndarray | None = None,
) -> FlowField:
    """Rigid-motion flow on masked pixels; background is exactly zero and valid.

    Rotation pivots about the centroid of the masked points unless an
    explicit pivot (3-vector, camera frame) is given.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != depth.shape:
        raise GeometryError(f"mask {mask.shape} does not match depth {depth.shape}")
    h, w = depth.shape
    if not mask.any():
        warnings.warn("object_flow: empty mask, returning zero field", stacklevel=2)
        return FlowField.zero(h, w)

    pts, valid = unproject(depth.values, K, depth.valid)
    sel = mask & valid
    if pivot is None:
        if not sel.any():
            warnings.warn("object_flow: no valid depth under mask, returning zero field", stacklevel=2)
            return FlowField.zero(h, w)
        pivot = pts[sel].mean(axis=0)
    pivot = np.asarray(pivot, dtype=np.float64).reshape(3)

    moved = (pts - pivot) @ transform.R.T + pivot + transform.t
    fg = _flow_from_points(moved, pts, sel, K)
    flow = np.where(mask[..., None], fg.flow, 0.0)
    ok = np.where(mask, fg.valid, True)
    return FlowField(flow, ok)


def removal_flow(mask: np.ndarray, magnitude: float, direction=(1.0, 1.0)) -> FlowField:
    """Uniform high-magnitude displacement on the mask (drives object removal)."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    d = np.asarray(direction, dtype=np.float64)
    norm = np.linalg.norm(d)
    if norm == 0:
        raise GeometryError("removal direction must be nonzero")
    d = d / norm * float(magnitude)
    flow = np.zeros((h, w, 2))
    flow[mask] = d
    return FlowField(flow)


def compose_camera_flows(first: FlowField, second: FlowField) -> FlowField:
    """Warp-compose two source-anchored flows: f(p) = f1(p) + f2(p + f1(p))."""
    from .camera import pixel_grid

    h, w = first.shape
    u, v = pixel_grid(w, h)
    target = np.stack([u + first.flow[..., 0], v + first.flow[..., 1]], axis=-1)
    f2_at, inside = bilinear_sample(second.flow, target)
    valid2, _ = bilinear_sample(second.valid.astype(np.float64), target)
    ok = first.valid & inside & (valid2 > 0.999)
    return FlowField(np.where(ok[..., None], first.flow + f2_at, 0.0), ok)
