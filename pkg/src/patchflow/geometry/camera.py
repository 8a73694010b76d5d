"""Pinhole camera model and rigid transforms.

Convention: a RigidTransform used as a camera motion is the camera-to-world
pose change (where the camera went). The induced scene motion observed in
camera coordinates is its inverse. Worked example: a camera trucking right
by d (t = [d, 0, 0]) makes every scene point slide left by d in camera
coordinates, so image content flows in -u.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import GeometryError, NumericError

Z_EPS = 1e-6  # frustum floor, scene units


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise GeometryError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            warnings.warn("principal point outside the image", stacklevel=2)

    @classmethod
    def simple(cls, size: int, focal: float | None = None) -> "CameraIntrinsics":
        """Square image with the principal point at the center."""
        f = focal if focal is not None else float(size)
        c = (size - 1) / 2.0
        return cls(fx=f, fy=f, cx=c, cy=c, width=size, height=size)

    def to_dict(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height}

    @classmethod
    def from_dict(cls, d: dict) -> "CameraIntrinsics":
        return cls(**d)


class RigidTransform:
    """Rotation + translation in scene units; R is validated orthonormal."""

    __slots__ = ("R", "t")

    def __init__(self, R=None, t=None, check: bool = True):
        self.R = np.eye(3) if R is None else np.asarray(R, dtype=np.float64)
        self.t = np.zeros(3) if t is None else np.asarray(t, dtype=np.float64).reshape(3)
        if check:
            self.validate()

    def validate(self) -> None:
        err = np.abs(self.R.T @ self.R - np.eye(3)).max()
        if err > 1e-9:
            raise NumericError(f"rotation not orthonormal: |R^T R - I| = {err:.3e}")
        det = np.linalg.det(self.R)
        if abs(det - 1.0) > 1e-9:
            raise NumericError(f"rotation determinant {det:.12f} != +1")

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls()

    @classmethod
    def from_translation(cls, t) -> "RigidTransform":
        return cls(np.eye(3), t)

    @classmethod
    def from_euler(cls, rx: float = 0.0, ry: float = 0.0, rz: float = 0.0, t=None) -> "RigidTransform":
        """Intrinsic XYZ Euler rotation (radians) plus translation."""
        cx_, sx = np.cos(rx), np.sin(rx)
        cy_, sy = np.cos(ry), np.sin(ry)
        cz, sz = np.cos(rz), np.sin(rz)
        Rx = np.array([[1, 0, 0], [0, cx_, -sx], [0, sx, cx_]])
        Ry = np.array([[cy_, 0, sy], [0, 1, 0], [-sy, 0, cy_]])
        Rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
        return cls(Rx @ Ry @ Rz, np.zeros(3) if t is None else t)

    @classmethod
    def random(cls, rng: np.random.Generator, max_angle: float = np.pi, max_translation: float = 1.0) -> "RigidTransform":
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(-max_angle, max_angle)
        K = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
        R = np.eye(3) + np.sin(angle) * K + (1 - np.cos(angle)) * (K @ K)
        t = rng.uniform(-max_translation, max_translation, size=3)
        return cls(R, t)

    def inverse(self) -> "RigidTransform":
        return RigidTransform(self.R.T, -self.R.T @ self.t, check=False)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self after other: (self ∘ other)(x) = self(other(x))."""
        return RigidTransform(self.R @ other.R, self.R @ other.t + self.t, check=False)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform points of shape (..., 3)."""
        return points @ self.R.T + self.t

    def scaled_translation(self, s: float) -> "RigidTransform":
        return RigidTransform(self.R, self.t * s, check=False)

    def to_dict(self) -> dict:
        return {"R": self.R.tolist(), "t": self.t.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "RigidTransform":
        return cls(np.array(d["R"]), np.array(d["t"]))

    def __repr__(self):
        return f"RigidTransform(t={np.round(self.t, 4).tolist()})"


def pixel_grid(width: int, height: int):
    """(u, v) coordinate arrays of shape (H, W)."""
    u, v = np.meshgrid(np.arange(width, dtype=np.float64),
                       np.arange(height, dtype=np.float64))
    return u, v


def unproject(depth: np.ndarray, K: CameraIntrinsics, valid: np.ndarray | None = None):
    """Depth map -> camera-frame point cloud (H, W, 3) plus validity mask."""
    depth = np.asarray(depth, dtype=np.float64)
    h, w = depth.shape
    if (w, h) != (K.width, K.height):
        raise GeometryError(f"depth {w}x{h} does not match intrinsics {K.width}x{K.height}")
    if valid is None:
        valid = np.isfinite(depth) & (depth > 0)
    else:
        valid = valid & np.isfinite(depth) & (depth > 0)
    u, v = pixel_grid(w, h)
    d = np.where(valid, depth, 1.0)
    pts = np.stack([(u - K.cx) / K.fx * d, (v - K.cy) / K.fy * d, d], axis=-1)
    return pts, valid


def project(points: np.ndarray, K: CameraIntrinsics):
    """Points (..., 3) -> continuous pixel coordinates (..., 2) + in-front mask."""
    pts = np.asarray(points, dtype=np.float64)
    z = pts[..., 2]
    in_front = z > Z_EPS
    zs = np.where(in_front, z, 1.0)
    uv = np.stack([K.fx * pts[..., 0] / zs + K.cx,
                   K.fy * pts[..., 1] / zs + K.cy], axis=-1)
    return uv, in_front
