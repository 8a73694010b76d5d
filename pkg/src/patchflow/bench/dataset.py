"""Training corpora and the on-disk scene cache.

Cache layout (one directory per scene):
    scenes/<hash>/spec.json
    scenes/<hash>/frame_0000.png
    scenes/<hash>/depth_0000.f32 (+ .json)
    scenes/<hash>/flow_0000.flo
    scenes/<hash>/mask_<layer>_0000.png
"""

from pathlib import Path

import numpy as np

from ..geometry import (
    object_flow,
    removal_flow,
    write_depth_raw,
    write_flo,
    write_image_png,
    write_mask_png,
)
from ..util import config_hash, rng_stream, write_json
from .families import moving_layer_index, sample_scene_spec
from .scene import SceneSpec, SyntheticScene, render_scene


def tokenizer_frames(n_scenes: int, seed: int, size: int = 32) -> np.ndarray:
    """RGB corpus: all frames from a mix of static and moving scenes."""
    rng = rng_stream(seed, "tokenizer-frames")
    frames = []
    for i in range(n_scenes):
        family = ["static", "nvs", "depth", "edit"][i % 4]
        spec = sample_scene_spec(family, int(rng.integers(1 << 31)), size=size)
        scene = render_scene(spec)
        frames.extend(scene.frames)
    return np.stack(frames).astype(np.float32)


def tokenizer_flows(n_scenes: int, seed: int, size: int = 32) -> np.ndarray:
    """Flow corpus covering every conditioning the pipelines produce:
    camera flows, masked object flows (zero background), removal flows,
    and exact zero fields.
    """
    rng = rng_stream(seed, "tokenizer-flows")
    flows = []
    for i in range(n_scenes):
        kind = i % 8
        scene_seed = int(rng.integers(1 << 31))
        if kind < 4:
            spec = sample_scene_spec("nvs" if kind % 2 else "depth", scene_seed, size=size)
            scene = render_scene(spec)
            flows.append(scene.flows[0].flow)
        elif kind < 6:
            spec = sample_scene_spec("edit", scene_seed, size=size)
            scene = render_scene(spec)
            flows.append(scene.flows[0].flow)
        elif kind == 6:
            spec = sample_scene_spec("static", scene_seed, size=size)
            scene = render_scene(spec)
            mask = next(iter(scene.masks[0].values())) if scene.masks[0] else np.zeros((size, size), bool)
            mag = float(rng.uniform(0.5, 1.5)) * size
            direction = rng.standard_normal(2)
            flows.append(removal_flow(mask, mag, direction).flow)
        else:
            flows.append(np.zeros((size, size, 2)))
    return np.stack(flows).astype(np.float32)


def scene_dir_name(spec: SceneSpec) -> str:
    return config_hash(spec.to_dict())


def save_scene(root, scene: SyntheticScene) -> Path:
    out = Path(root) / scene_dir_name(scene.spec)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "spec.json", scene.spec.to_dict())
    for t, frame in enumerate(scene.frames):
        write_image_png(out / f"frame_{t:04d}.png", frame)
        write_depth_raw(out / f"depth_{t:04d}.f32", scene.depths[t])
        for li, mask in scene.masks[t].items():
            write_mask_png(out / f"mask_{li}_{t:04d}.png", mask)
    for t, flow in enumerate(scene.flows):
        write_flo(out / f"flow_{t:04d}.flo", flow)
    return out


def load_scene(path) -> SyntheticScene:
    """Re-render from the cached spec (rendering is exact and deterministic)."""
    from ..util import read_json

    spec = SceneSpec.from_dict(read_json(Path(path) / "spec.json"))
    return render_scene(spec)
