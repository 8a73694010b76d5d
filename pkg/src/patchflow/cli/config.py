"""Declarative run configuration.

One nested defaults tree records every knob; user config files and dotted
--set overrides merge onto it. Unknown keys anywhere are errors.
"""

import copy
import json
import os

import numpy as np

from ..errors import ConfigError
from ..geometry import RigidTransform
from ..util import config_hash, read_json

DEFAULTS = {
    "version": 1,
    "seed": 0,
    "size": 32,
    "grid": 8,
    "runs_dir": None,  # artifact cache root; None -> $PATCHFLOW_RUNS or ./runs
    "out_dir": None,  # run output; None -> <runs>/cli/<command>-<config hash>
    "scene": {
        "family": "nvs",
        "scene_seed": 0,
        "n_scenes": 8,
    },
    "sampling": {
        "policy": "raster",
        "temperature": 0.0,
        "top_k": 64,
    },
    "camera": {
        "preset": "truck",  # truck | pedestal-up | dolly | orbit | explicit
        "amount": 0.1,  # scene units (or radians for orbit)
        "rx": 0.0,
        "ry": 0.0,
        "rz": 0.0,
        "t": [0.0, 0.0, 0.0],
    },
    "edit": {
        "rz_deg": 0.0,
        "t": [0.0, 0.0, 0.0],
        "mask_path": None,  # external mask overrides the scene's sprite mask
    },
    "removal": {
        "magnitude": 48.0,
        "dilate": 2,
    },
    "depth": {
        "n_seeds": 5,
        "delta": 0.3,
        "temperature": 0.8,
        "oracle_flow": False,
        "aggregation": "median",
    },
    "eval": {
        "n_scenes": 100,
        "depth_source": "gt",
        "zero_motion": False,
        "n_depth_seeds": 5,
    },
}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key: {where}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, where)
        elif isinstance(base[key], dict) != isinstance(value, dict):
            raise ConfigError(f"config key {where} must be a {'section' if isinstance(base[key], dict) else 'value'}")
        else:
            out[key] = value
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(config: dict, dotted: str) -> dict:
    if "=" not in dotted:
        raise ConfigError(f"override {dotted!r} must look like section.key=value")
    path, raw = dotted.split("=", 1)
    keys = path.strip().split(".")
    node = {}
    leaf = node
    for k in keys[:-1]:
        leaf[k] = {}
        leaf = leaf[k]
    leaf[keys[-1]] = _parse_value(raw)
    return _merge(config, node)


def load_run_config(config_path=None, overrides=()) -> dict:
    config = copy.deepcopy(DEFAULTS)
    if config_path:
        user = read_json(config_path)
        config = _merge(config, user)
    for o in overrides:
        config = apply_override(config, o)
    return config


def resolve_out_dir(config: dict, command: str) -> str:
    if config["out_dir"]:
        return config["out_dir"]
    base = os.environ.get("PATCHFLOW_OUT")
    if base is None:
        runs = config["runs_dir"] or os.environ.get("PATCHFLOW_RUNS", "runs")
        base = os.path.join(runs, "cli")
    return os.path.join(base, f"{command}-{config_hash(config)[:10]}")


def camera_transform(cam: dict) -> RigidTransform:
    """Named presets or explicit 6-DoF."""
    preset = cam["preset"]
    a = float(cam["amount"])
    if preset == "truck":
        return RigidTransform.from_translation([a, 0.0, 0.0])
    if preset == "pedestal-up":
        return RigidTransform.from_translation([0.0, -a, 0.0])
    if preset == "dolly":
        return RigidTransform.from_translation([0.0, 0.0, a])
    if preset == "orbit":
        # yaw about the camera's y axis while translating to keep the look-at
        return RigidTransform.from_euler(ry=a, t=cam["t"])
    if preset == "explicit":
        return RigidTransform.from_euler(rx=cam["rx"], ry=cam["ry"], rz=cam["rz"], t=cam["t"])
    raise ConfigError(f"unknown camera preset {preset!r}")


def parse_camera_shorthand(text: str) -> dict:
    """Forms like "yaw=10deg,tx=0.1" -> explicit camera dict."""
    out = {"preset": "explicit", "rx": 0.0, "ry": 0.0, "rz": 0.0, "t": [0.0, 0.0, 0.0], "amount": 0.0}
    names = {"pitch": "rx", "yaw": "ry", "roll": "rz"}
    taxis = {"tx": 0, "ty": 1, "tz": 2}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"camera term {part!r} must look like name=value")
        name, raw = part.split("=", 1)
        name = name.strip().lower()
        raw = raw.strip()
        if raw.endswith("deg"):
            value = float(np.deg2rad(float(raw[:-3])))
        elif raw.endswith("rad"):
            value = float(raw[:-3])
        else:
            value = float(raw)
        if name in names:
            out[names[name]] = value
        elif name in taxis:
            out["t"][taxis[name]] = value
        else:
            raise ConfigError(f"unknown camera term {name!r}")
    return out
