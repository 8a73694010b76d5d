"""Random scene families for training corpora and benchmarks.

Every sampler is a pure function of (family, seed, size): the same arguments
always produce the same spec.
"""

import numpy as np

from ..errors import ConfigError
from ..util import rng_stream
from .scene import LayerSpec, SceneSpec

FAMILIES = ("nvs", "depth", "edit", "static", "probe", "flowtrain")

_PALETTE = np.array([
    [0.90, 0.45, 0.35],
    [0.40, 0.75, 0.45],
    [0.40, 0.55, 0.90],
    [0.90, 0.80, 0.35],
    [0.75, 0.45, 0.85],
    [0.45, 0.85, 0.85],
    [0.85, 0.60, 0.40],
    [0.70, 0.70, 0.75],
])


def _background(rng, size) -> LayerSpec:
    return LayerSpec(
        depth=float(rng.uniform(3.5, 6.0)),
        kind="background",
        base_color=tuple(_PALETTE[rng.integers(len(_PALETTE))] * rng.uniform(0.8, 1.0)),
        texture_seed=int(rng.integers(1 << 30)),
        texture_scale=float(rng.uniform(0.5, 1.0)),
        contrast=float(rng.uniform(0.5, 0.9)),
    )


def _sprite(rng, depth_range=(1.6, 3.2), motion=None) -> LayerSpec:
    d = float(rng.uniform(*depth_range))
    # keep the sprite comfortably inside the view frustum (half-view ~ d/2)
    span = 0.30 * d
    return LayerSpec(
        depth=d,
        kind="sprite",
        shape="rect" if rng.random() < 0.5 else "ellipse",
        center=(float(rng.uniform(-span, span)), float(rng.uniform(-span, span))),
        half_size=(float(rng.uniform(0.12, 0.32)) * d, float(rng.uniform(0.12, 0.32)) * d),
        base_color=tuple(_PALETTE[rng.integers(len(_PALETTE))] * rng.uniform(0.8, 1.0)),
        texture_seed=int(rng.integers(1 << 30)),
        texture_scale=float(rng.uniform(0.3, 0.6)),
        contrast=float(rng.uniform(0.5, 0.9)),
        motion=motion,
    )


def _camera_motion(rng, focal: float, ref_depth: float) -> dict:
    """In-plane moves dominate; magnitudes give a few pixels of flow."""
    kind = rng.choice(["truck", "pedestal", "diag", "dolly", "roll"],
                      p=[0.3, 0.3, 0.2, 0.1, 0.1])
    px = float(rng.uniform(2.0, 9.0)) * float(rng.choice([-1.0, 1.0]))
    delta = px * ref_depth / focal
    if kind == "truck":
        return {"t": [delta, 0.0, 0.0]}
    if kind == "pedestal":
        return {"t": [0.0, delta, 0.0]}
    if kind == "diag":
        return {"t": [delta * 0.7071, delta * 0.7071, 0.0]}
    if kind == "dolly":
        return {"t": [0.0, 0.0, float(rng.uniform(0.1, 0.3)) * float(rng.choice([-1.0, 1.0]))]}
    return {"rz": float(np.deg2rad(rng.uniform(2.0, 5.0))) * float(rng.choice([-1.0, 1.0]))}


def sample_scene_spec(family: str, seed: int, size: int = 32) -> SceneSpec:
    if family not in FAMILIES:
        raise ConfigError(f"unknown scene family {family!r}; choose from {FAMILIES}")
    rng = rng_stream(seed, "scene", family)
    focal = float(size)
    bg = _background(rng, size)
    layers = [bg]

    if family == "probe":
        # single-octave, large-cell texture: bilinear warp of the render is
        # exact inside a noise cell, which the self-consistency test exploits
        bg.texture_scale = 10.0 * bg.depth / focal
        bg.octaves = 1
        return SceneSpec(size=size, focal=focal, n_frames=2, layers=[bg],
                         camera_motion={"t": [0.04 * bg.depth, 0.0, 0.0]}, seed=seed)

    if family == "static":
        for _ in range(int(rng.integers(1, 3))):
            layers.append(_sprite(rng))
        return SceneSpec(size=size, focal=focal, n_frames=1, layers=layers, seed=seed)

    if family == "nvs":
        for _ in range(int(rng.integers(1, 3))):
            layers.append(_sprite(rng))
        motion = _camera_motion(rng, focal, bg.depth)
        return SceneSpec(size=size, focal=focal, n_frames=2, layers=layers,
                         camera_motion=motion, seed=seed)

    if family == "depth":
        for _ in range(int(rng.integers(1, 4))):
            layers.append(_sprite(rng, depth_range=(1.4, 3.2)))
        px = float(rng.uniform(2.5, 5.0))
        delta = px * bg.depth / focal
        # camera up (y points down): scene content flows downward
        return SceneSpec(size=size, focal=focal, n_frames=2, layers=layers,
                         camera_motion={"t": [0.0, -delta, 0.0]}, seed=seed)

    if family == "flowtrain":
        # like depth scenes, but the in-plane translation direction varies so
        # the flow model learns the pose-token conditioning, and magnitudes
        # stay inside the pose binning range
        for _ in range(int(rng.integers(1, 4))):
            layers.append(_sprite(rng, depth_range=(1.4, 3.2)))
        px = float(rng.uniform(2.0, 5.0))
        delta = px * bg.depth / focal
        angle = float(rng.uniform(0, 2 * np.pi))
        t = [delta * np.cos(angle), delta * np.sin(angle), 0.0]
        return SceneSpec(size=size, focal=focal, n_frames=2, layers=layers,
                         camera_motion={"t": t}, seed=seed)

    # edit: static camera, exactly one moving sprite
    angle = float(np.deg2rad(rng.uniform(-22.0, 22.0)))
    d = float(rng.uniform(1.8, 2.8))
    shift_px = rng.uniform(3.0, 8.0, size=2) * rng.choice([-1.0, 1.0], size=2)
    t_world = [float(shift_px[0] * d / focal), float(shift_px[1] * d / focal),
               float(rng.uniform(-0.15, 0.25))]
    moving = _sprite(rng, depth_range=(d, d), motion={"rz": angle, "t": t_world})
    layers.append(moving)
    if rng.random() < 0.4:
        layers.append(_sprite(rng, depth_range=(2.9, 3.4)))
    return SceneSpec(size=size, focal=focal, n_frames=2, layers=layers, seed=seed)


def moving_layer_index(spec: SceneSpec) -> int:
    for i, layer in enumerate(spec.layers):
        if layer.motion is not None:
            return i
    raise ConfigError("scene has no moving layer")
