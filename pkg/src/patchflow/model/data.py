"""Tokenized training corpora for the two sequence models."""

import numpy as np

from ..bench.families import sample_scene_spec
from ..bench.scene import render_scene
from ..geometry import RigidTransform
from ..util import rng_stream
from .config import PoseBinning


def rgb_model_pairs(n_scenes: int, seed: int, tok_rgb, tok_flow, size: int = 32) -> dict:
    """(input frame, conditioning flow, target frame) token grids.

    Mix: camera-motion scenes, object-edit scenes, and zero-flow identity
    pairs (these teach the model that flow 0 means copy).
    """
    rng = rng_stream(seed, "rgb-pairs")
    frames0, frames1, flows = [], [], []
    for i in range(n_scenes):
        kind = i % 4
        s = int(rng.integers(1 << 31))
        if kind <= 1:
            scene = render_scene(sample_scene_spec("nvs", s, size=size))
            frames0.append(scene.frames[0])
            frames1.append(scene.frames[1])
            flows.append(scene.flows[0].flow)
        elif kind == 2:
            scene = render_scene(sample_scene_spec("edit", s, size=size))
            frames0.append(scene.frames[0])
            frames1.append(scene.frames[1])
            flows.append(scene.flows[0].flow)
        else:
            scene = render_scene(sample_scene_spec("static", s, size=size))
            frames0.append(scene.frames[0])
            frames1.append(scene.frames[0])
            flows.append(np.zeros((size, size, 2)))
    return {
        "rgb": tok_rgb.encode(np.stack(frames0).astype(np.float32)),
        "flow": tok_flow.encode(np.stack(flows).astype(np.float32)),
        "target": tok_rgb.encode(np.stack(frames1).astype(np.float32)),
    }


def flow_model_pairs(n_scenes: int, seed: int, tok_rgb, tok_flow,
                     binning: PoseBinning | None = None, size: int = 32) -> dict:
    """(input frame, camera pose bins, target flow) token grids."""
    if binning is None:
        binning = PoseBinning()
    rng = rng_stream(seed, "flow-pairs")
    frames, poses, flows = [], [], []
    for i in range(n_scenes):
        s = int(rng.integers(1 << 31))
        if i % 6 == 5:
            # zero camera motion -> zero flow (anchors the pose conditioning)
            scene = render_scene(sample_scene_spec("static", s, size=size))
            frames.append(scene.frames[0])
            poses.append(binning.encode(RigidTransform.identity()))
            flows.append(np.zeros((size, size, 2)))
            continue
        family = "depth" if i % 3 == 0 else "flowtrain"
        scene = render_scene(sample_scene_spec(family, s, size=size))
        frames.append(scene.frames[0])
        poses.append(binning.encode(scene.camera_delta(0)))
        flows.append(scene.flows[0].flow)
    return {
        "rgb": tok_rgb.encode(np.stack(frames).astype(np.float32)),
        "pose": np.stack(poses),
        "target": tok_flow.encode(np.stack(flows).astype(np.float32)),
    }
