"""Analytic layered-plane scene renderer with exact ground truth.

Scenes are fronto-parallel textured planes (an infinite background plus
sprite cutouts) viewed by a moving pinhole camera; sprites may carry their
own rigid motion. Textures are procedural value noise evaluated exactly at
any continuous coordinate, so rendered frames, depth maps, flow fields and
masks are all mutually consistent to floating-point precision.

Brightness falls off with camera distance (a depth cue), which is what
makes appearance -> flow -> depth learnable for the toy flow model.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..geometry import CameraIntrinsics, DepthMap, FlowField, RigidTransform

_MIX1 = np.uint64(0x9E3779B97F4A7C15)
_MIX2 = np.uint64(0xC2B2AE3D27D4EB4F)
_MIX3 = np.uint64(0xFF51AFD7ED558CCD)


def _lattice_hash(ix: np.ndarray, iy: np.ndarray, seed: int) -> np.ndarray:
    """Deterministic uniform [0,1) value per integer lattice point."""
    with np.errstate(over="ignore"):
        h = ix.astype(np.int64).astype(np.uint64) * _MIX1
        h ^= iy.astype(np.int64).astype(np.uint64) * _MIX2
        h ^= np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        h ^= h >> np.uint64(33)
        h *= _MIX3
        h ^= h >> np.uint64(29)
    return (h & np.uint64(0xFFFFFF)).astype(np.float64) / float(1 << 24)


def value_noise(x: np.ndarray, y: np.ndarray, seed: int, octaves: int = 3) -> np.ndarray:
    """Multi-octave bilinear value noise, continuous in (x, y), range [0,1]."""
    out = np.zeros_like(np.asarray(x, dtype=np.float64))
    total = 0.0
    for o in range(octaves):
        f = float(1 << o)
        w = 1.0 / f
        xs = np.asarray(x, dtype=np.float64) * f
        ys = np.asarray(y, dtype=np.float64) * f
        x0 = np.floor(xs)
        y0 = np.floor(ys)
        fx = xs - x0
        fy = ys - y0
        oseed = seed * 1013 + o
        v00 = _lattice_hash(x0, y0, oseed)
        v10 = _lattice_hash(x0 + 1, y0, oseed)
        v01 = _lattice_hash(x0, y0 + 1, oseed)
        v11 = _lattice_hash(x0 + 1, y0 + 1, oseed)
        out += w * ((v00 * (1 - fx) + v10 * fx) * (1 - fy) + (v01 * (1 - fx) + v11 * fx) * fy)
        total += w
    return out / total


@dataclass
class LayerSpec:
    depth: float
    kind: str = "background"  # background | sprite
    shape: str = "rect"  # rect | ellipse (sprites only)
    center: tuple = (0.0, 0.0)  # world units on the canonical plane
    half_size: tuple = (0.5, 0.5)
    base_color: tuple = (0.8, 0.8, 0.8)
    texture_seed: int = 0
    texture_scale: float = 0.35  # world units per noise cell
    octaves: int = 3
    contrast: float = 0.8
    motion: dict | None = None  # per-step rigid motion (object edits)

    def __post_init__(self):
        if self.kind not in ("background", "sprite"):
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        if self.shape not in ("rect", "ellipse"):
            raise ConfigError(f"unknown layer shape {self.shape!r}")
        if self.depth <= 0:
            raise ConfigError(f"layer depth must be positive, got {self.depth}")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in
             ("depth", "kind", "shape", "base_color", "texture_seed",
              "texture_scale", "octaves", "contrast")}
        d["center"] = list(self.center)
        d["half_size"] = list(self.half_size)
        d["base_color"] = list(self.base_color)
        d["motion"] = self.motion
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        d = dict(d)
        for key in ("center", "half_size", "base_color"):
            if key in d and d[key] is not None:
                d[key] = tuple(d[key])
        return cls(**d)

    def step_motion(self) -> RigidTransform:
        """Per-frame rigid motion about the sprite center, identity if none."""
        if self.motion is None:
            return RigidTransform.identity()
        m = self.motion
        step = RigidTransform.from_euler(
            rx=m.get("rx", 0.0), ry=m.get("ry", 0.0), rz=m.get("rz", 0.0),
            t=m.get("t", [0.0, 0.0, 0.0]),
        )
        pivot = np.array([self.center[0], self.center[1], self.depth])
        t_eff = pivot - step.R @ pivot + step.t
        return RigidTransform(step.R, t_eff)


@dataclass
class SceneSpec:
    size: int = 32
    focal: float = 32.0
    n_frames: int = 2
    layers: list = field(default_factory=list)
    camera_motion: dict | None = None  # per-step {rx, ry, rz, t}
    depth_shading: bool = True
    shading_gain: float = 0.14
    seed: int = 0
    version: int = 1

    def __post_init__(self):
        if not self.layers:
            return
        if not any(l.kind == "background" for l in self.layers):
            raise ConfigError("scene needs at least one background layer")
        depths = [l.depth for l in self.layers]
        if min(depths) <= 0:
            raise ConfigError("layer depths must be positive")

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics.simple(self.size, self.focal)

    def camera_step(self) -> RigidTransform:
        if self.camera_motion is None:
            return RigidTransform.identity()
        m = self.camera_motion
        return RigidTransform.from_euler(
            rx=m.get("rx", 0.0), ry=m.get("ry", 0.0), rz=m.get("rz", 0.0),
            t=m.get("t", [0.0, 0.0, 0.0]),
        )

    def to_dict(self) -> dict:
        return {
            "size": self.size,
            "focal": self.focal,
            "n_frames": self.n_frames,
            "layers": [l.to_dict() for l in self.layers],
            "camera_motion": self.camera_motion,
            "depth_shading": self.depth_shading,
            "shading_gain": self.shading_gain,
            "seed": self.seed,
            "version": self.version,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        known = {"size", "focal", "n_frames", "layers", "camera_motion",
                 "depth_shading", "shading_gain", "seed", "version"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown scene spec keys: {sorted(unknown)}")
        d = dict(d)
        d["layers"] = [LayerSpec.from_dict(l) for l in d.get("layers", [])]
        return cls(**d)


@dataclass
class SyntheticScene:
    spec: SceneSpec
    intrinsics: CameraIntrinsics
    frames: list  # (H, W, 3) float in [0,1]
    depths: list  # DepthMap per frame (camera frame)
    flows: list  # FlowField, frame t -> t+1
    masks: list  # per frame: {layer_index: bool (H, W)} for sprite layers
    camera_poses: list  # camera-to-world RigidTransform per frame

    def camera_delta(self, t: int = 0) -> RigidTransform:
        """Relative camera pose change t -> t+1 in camera-t coordinates."""
        return self.camera_poses[t].inverse().compose(self.camera_poses[t + 1])


def _layer_pose(layer: LayerSpec, t: int) -> RigidTransform:
    pose = RigidTransform.identity()
    step = layer.step_motion()
    for _ in range(t):
        pose = step.compose(pose)
    return pose


def _shade(color: np.ndarray, z: np.ndarray, spec: SceneSpec) -> np.ndarray:
    if not spec.depth_shading:
        return color
    factor = np.clip(1.15 - spec.shading_gain * z, 0.12, 1.0)
    return color * factor[..., None]


def _layer_color(layer: LayerSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    tex = value_noise(x / layer.texture_scale, y / layer.texture_scale,
                      layer.texture_seed, octaves=layer.octaves)
    lum = 0.5 + layer.contrast * (tex - 0.5)
    return np.asarray(layer.base_color)[None, None, :] * lum[..., None]


def render_scene(spec: SceneSpec) -> SyntheticScene:
    """Render all frames with exact depth, flow, and per-sprite masks."""
    K = spec.intrinsics()
    size = spec.size
    cam_step = spec.camera_step()
    poses = [RigidTransform.identity()]
    for _ in range(spec.n_frames - 1):
        poses.append(poses[-1].compose(cam_step))

    u, v = np.meshgrid(np.arange(size, dtype=np.float64), np.arange(size, dtype=np.float64))
    dirs_cam = np.stack([(u - K.cx) / K.fx, (v - K.cy) / K.fy, np.ones_like(u)], axis=-1)
    layers = spec.layers
    nl = len(layers)

    frames, depths, flows, masks = [], [], [], []
    # per frame bookkeeping for flow: world point and winning layer
    world_pts = []
    winners = []

    for t in range(spec.n_frames):
        pose = poses[t]
        origin = pose.t
        dirs = dirs_cam @ pose.R.T

        s_all = np.full((nl, size, size), np.inf)
        covered = np.zeros((nl, size, size), dtype=bool)
        canon_x = np.zeros((nl, size, size))
        canon_y = np.zeros((nl, size, size))

        for li, layer in enumerate(layers):
            M = _layer_pose(layer, t)
            # canonical plane z = depth mapped by M; normal and support point
            n = M.R @ np.array([0.0, 0.0, 1.0])
            p0 = M.apply(np.array([0.0, 0.0, layer.depth]))
            denom = dirs @ n
            num = (p0 - origin) @ n
            with np.errstate(divide="ignore", invalid="ignore"):
                s = np.where(np.abs(denom) > 1e-12, num / denom, np.inf)
            hit = s > 1e-9
            w_pts = origin + s[..., None] * dirs
            canon = (w_pts - M.t) @ M.R  # M^-1(w): R^T (w - t)
            cx_, cy_ = canon[..., 0], canon[..., 1]
            if layer.kind == "sprite":
                dx = cx_ - layer.center[0]
                dy = cy_ - layer.center[1]
                hx, hy = layer.half_size
                if layer.shape == "rect":
                    inside = (np.abs(dx) <= hx) & (np.abs(dy) <= hy)
                else:
                    inside = (dx / hx) ** 2 + (dy / hy) ** 2 <= 1.0
            else:
                inside = np.ones_like(hit)
            ok = hit & inside
            covered[li] = ok
            s_all[li] = np.where(ok, s, np.inf)
            canon_x[li] = cx_
            canon_y[li] = cy_

        if not covered.any(axis=0).all():
            raise ConfigError("scene leaves uncovered pixels; background must span the view")
        winner = np.argmin(s_all, axis=0)
        s_win = np.take_along_axis(s_all, winner[None], axis=0)[0]
        w_world = origin + s_win[..., None] * dirs
        z_cam = (pose.inverse().apply(w_world))[..., 2]

        img = np.zeros((size, size, 3))
        frame_masks = {}
        for li, layer in enumerate(layers):
            sel = winner == li
            if layer.kind == "sprite":
                frame_masks[li] = sel
            if not sel.any():
                continue
            col = _layer_color(layer, canon_x[li], canon_y[li])
            img[sel] = col[sel]
        img = np.clip(_shade(img, z_cam, spec), 0.0, 1.0)

        frames.append(img)
        depths.append(DepthMap(z_cam.copy()))
        masks.append(frame_masks)
        world_pts.append(w_world)
        winners.append(winner)

    for t in range(spec.n_frames - 1):
        pose_next = poses[t + 1]
        flow = np.zeros((size, size, 2))
        valid = np.zeros((size, size), dtype=bool)
        for li, layer in enumerate(layers):
            sel = winners[t] == li
            if not sel.any():
                continue
            M_t = _layer_pose(layer, t)
            M_n = _layer_pose(layer, t + 1)
            w = world_pts[t][sel]
            canon = (w - M_t.t) @ M_t.R
            w_next = M_n.apply(canon)
            p_cam = pose_next.inverse().apply(w_next)
            z = p_cam[:, 2]
            ok = z > 1e-9
            uv_new = np.stack(
                [K.fx * p_cam[:, 0] / np.where(ok, z, 1.0) + K.cx,
                 K.fy * p_cam[:, 1] / np.where(ok, z, 1.0) + K.cy], axis=-1)
            base = np.stack([u[sel], v[sel]], axis=-1)
            inside = (
                (uv_new[:, 0] >= 0) & (uv_new[:, 0] <= size - 1)
                & (uv_new[:, 1] >= 0) & (uv_new[:, 1] <= size - 1)
            )
            okf = ok & inside
            f = np.where(okf[:, None], uv_new - base, 0.0)
            flow[sel] = f
            valid[sel] = okf
        flows.append(FlowField(flow, valid))

    return SyntheticScene(spec, K, frames, depths, flows, masks, poses)
