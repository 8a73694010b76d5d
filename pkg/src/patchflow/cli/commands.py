"""Subcommand implementations. Every run writes its artifacts plus a
manifest (resolved config, seeds, artifact and checkpoint hashes) under one
run directory, so a run is reproducible from the manifest alone.
"""

import time
from pathlib import Path

import numpy as np

from .. import recipes
from ..bench import (
    EvalReport,
    background_plate,
    estimate_object_mask,
    extract_depth,
    render_scene,
    run_depth_eval,
    run_edit_eval,
    run_nvs_eval,
    sample_scene_spec,
    save_scene,
)
from ..bench.metrics import depth_metrics, psnr
from ..errors import ConfigError, DataError
from ..geometry import (
    FlowField,
    camera_flow,
    depth_from_flow,
    object_flow,
    removal_flow,
    write_depth_raw,
    write_flo,
    write_image_png,
    write_mask_png,
)
from ..model import PoseBinning, sample_rgb
from ..quantizer import save_token_grid
from ..util import config_hash, file_hash, rng_stream, write_json
from .config import camera_transform, parse_camera_shorthand, resolve_out_dir
from .log import get_logger, log_record

logger = get_logger("patchflow.cli")


class Run:
    """Collects artifacts and writes the manifest."""

    def __init__(self, command: str, config: dict):
        self.command = command
        self.config = config
        self.out_dir = Path(resolve_out_dir(config, command))
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.artifacts = {}
        self.checkpoints = {}
        self.extra = {}
        self.t0 = time.time()

    def register(self, path) -> Path:
        path = Path(path)
        self.artifacts[str(path.relative_to(self.out_dir))] = file_hash(path)
        return path

    def register_checkpoint(self, name: str, path) -> None:
        self.checkpoints[name] = file_hash(path)

    def finish(self) -> dict:
        manifest = {
            "command": self.command,
            "config": self.config,
            "config_hash": config_hash(self.config),
            "seed": self.config["seed"],
            "artifacts": self.artifacts,
            "checkpoints": self.checkpoints,
            "runtime_s": round(time.time() - self.t0, 3),
            **self.extra,
        }
        write_json(self.out_dir / "manifest.json", manifest)
        log_record(logger, f"{self.command} finished", out_dir=str(self.out_dir))
        return manifest


def _artifacts(config: dict, need=("tok_rgb", "tok_flow", "model_rgb", "model_flow"),
               train_missing: bool = False) -> dict:
    """Load trained artifacts; missing checkpoints are a configuration error
    unless training was explicitly requested."""
    runs = config["runs_dir"]
    out = {}
    loaders = {
        "tok_rgb": recipes.ensure_rgb_tokenizer,
        "tok_flow": recipes.ensure_flow_tokenizer,
        "model_rgb": recipes.ensure_rgb_model,
        "model_flow": recipes.ensure_flow_model,
    }
    paths = {
        "tok_rgb": recipes.runs_root(runs) / "tok_rgb" / "tokenizer.ckpt",
        "tok_flow": recipes.runs_root(runs) / "tok_flow" / "tokenizer.ckpt",
        "model_rgb": recipes.runs_root(runs) / "model_rgb" / "model.ckpt",
        "model_flow": recipes.runs_root(runs) / "model_flow" / "model.ckpt",
    }
    for name in need:
        if not paths[name].exists() and not train_missing:
            raise ConfigError(
                f"missing checkpoint {paths[name]}; run `patchflow train-tokenizer` / "
                f"`patchflow train-model` first (or pass --train-missing)"
            )
        out[name] = loaders[name](runs, log_fn=lambda r: log_record(logger, "train", **r))
        out[f"{name}_path"] = paths[name]
    return out


def _zero_flow_fast_path(flow_grid: np.ndarray, field: FlowField, rgb_grid: np.ndarray):
    """An exactly-zero conditioning flow is an identity edit: the prediction
    is the input grid itself, no sampling needed."""
    if np.all(field.flow == 0.0):
        return rgb_grid.copy()
    return None


def cmd_gen_data(config: dict) -> int:
    run = Run("gen-data", config)
    rng = rng_stream(config["seed"], "gen-data")
    family = config["scene"]["family"]
    dirs = []
    for _ in range(config["scene"]["n_scenes"]):
        spec = sample_scene_spec(family, int(rng.integers(1 << 31)), size=config["size"])
        scene = render_scene(spec)
        out = save_scene(run.out_dir / "scenes", scene)
        dirs.append(out.name)
        for f in sorted(out.iterdir()):
            run.register(f)
    run.extra["scene_dirs"] = dirs
    run.finish()
    return 0


def cmd_train_tokenizer(config: dict, which: str) -> int:
    run = Run(f"train-tokenizer-{which}", config)
    ensure = recipes.ensure_rgb_tokenizer if which == "rgb" else recipes.ensure_flow_tokenizer
    ensure(config["runs_dir"], log_fn=lambda r: log_record(logger, "train", **r))
    name = "tok_rgb" if which == "rgb" else "tok_flow"
    ckpt = recipes.runs_root(config["runs_dir"]) / name / "tokenizer.ckpt"
    run.register_checkpoint(name, ckpt)
    run.finish()
    return 0


def cmd_train_model(config: dict, which: str) -> int:
    run = Run(f"train-model-{which}", config)
    ensure = recipes.ensure_rgb_model if which == "rgb" else recipes.ensure_flow_model
    ensure(config["runs_dir"], log_fn=lambda r: log_record(logger, "train", **r))
    name = "model_rgb" if which == "rgb" else "model_flow"
    ckpt = recipes.runs_root(config["runs_dir"]) / name / "model.ckpt"
    run.register_checkpoint(name, ckpt)
    run.finish()
    return 0


def _scene_and_grids(config, art):
    spec = sample_scene_spec(config["scene"]["family"], config["scene"]["scene_seed"],
                             size=config["size"])
    scene = render_scene(spec)
    rgb_grid = art["tok_rgb"].encode(scene.frames[0])
    return scene, rgb_grid


def _generate(run, config, art, scene, rgb_grid, field: FlowField):
    """Shared tail of nvs/edit/remove: condition, sample, decode, save."""
    tok_rgb, tok_flow = art["tok_rgb"], art["tok_flow"]
    flow_grid = tok_flow.encode(field.flow.astype(np.float32))
    fast = _zero_flow_fast_path(flow_grid, field, rgb_grid)
    if fast is not None:
        pred_grid = fast
        run.extra["zero_flow_fast_path"] = True
    else:
        s = config["sampling"]
        pred_grid = sample_rgb(art["model_rgb"], rgb_grid, flow_grid,
                               policy=s["policy"], seed=config["seed"],
                               temperature=s["temperature"], top_k=s["top_k"])
    pred = tok_rgb.decode(pred_grid)

    write_image_png(run.out_dir / "input.png", scene.frames[0])
    write_flo(run.out_dir / "flow.flo", field)
    save_token_grid(run.out_dir / "pred.grid", pred_grid)
    write_image_png(run.out_dir / "pred.png", pred)
    for name in ("input.png", "flow.flo", "pred.grid", "pred.png"):
        run.register(run.out_dir / name)
    run.extra["flow_stats"] = {
        "mean_px": float(np.mean(field.magnitude()[field.valid])) if field.valid.any() else 0.0,
        "max_px": float(field.magnitude().max()),
        "valid_fraction": float(field.valid.mean()),
    }
    run.extra["token_stats"] = {
        "unique": int(len(np.unique(pred_grid))),
        "min": int(pred_grid.min()),
        "max": int(pred_grid.max()),
    }
    for name in ("tok_rgb", "tok_flow", "model_rgb"):
        run.register_checkpoint(name, art[f"{name}_path"])
    return pred_grid, pred


def cmd_nvs(config: dict, camera_arg: str | None) -> int:
    run = Run("nvs", config)
    art = _artifacts(config, need=("tok_rgb", "tok_flow", "model_rgb"))
    cam = dict(config["camera"])
    if camera_arg:
        cam = parse_camera_shorthand(camera_arg)
        run.config = dict(config, camera=cam)
    scene, rgb_grid = _scene_and_grids(config, art)
    delta = camera_transform(cam)
    field = camera_flow(scene.depths[0], scene.intrinsics, delta)
    _generate(run, run.config if camera_arg else config, art, scene, rgb_grid, field)
    run.finish()
    return 0


def _object_mask(config, scene):
    mask_path = config["edit"]["mask_path"]
    if mask_path:
        from ..geometry import read_mask_png

        return read_mask_png(mask_path)
    sprite_masks = scene.masks[0]
    if not sprite_masks:
        raise DataError("scene has no sprite layer; supply edit.mask_path")
    return sprite_masks[sorted(sprite_masks)[0]]


def cmd_edit(config: dict) -> int:
    run = Run("edit", config)
    art = _artifacts(config, need=("tok_rgb", "tok_flow", "model_rgb"))
    scene, rgb_grid = _scene_and_grids(config, art)
    mask = _object_mask(config, scene)
    e = config["edit"]
    from ..geometry import RigidTransform

    transform = RigidTransform.from_euler(rz=float(np.deg2rad(e["rz_deg"])), t=e["t"])
    field = object_flow(scene.depths[0], scene.intrinsics, transform, mask)
    write_mask_png(run.out_dir / "mask.png", mask)
    run.register(run.out_dir / "mask.png")
    _generate(run, config, art, scene, rgb_grid, field)
    run.finish()
    return 0


def cmd_remove(config: dict) -> int:
    run = Run("remove", config)
    art = _artifacts(config, need=("tok_rgb", "tok_flow", "model_rgb"))
    scene, rgb_grid = _scene_and_grids(config, art)
    mask = _object_mask(config, scene)
    field = removal_flow(mask, config["removal"]["magnitude"])
    pred_grid, _ = _generate(run, config, art, scene, rgb_grid, field)

    # background token stability outside the dilated mask
    patch = art["tok_rgb"].cfg.patch_size
    gh, gw = pred_grid.shape
    d = config["removal"]["dilate"]
    coarse = mask.reshape(gh, patch, gw, patch).any(axis=(1, 3))
    from scipy.ndimage import binary_dilation

    dilated = binary_dilation(coarse, iterations=d) if d > 0 else coarse
    outside = ~dilated
    stability = float((pred_grid[outside] == rgb_grid[outside]).mean()) if outside.any() else 1.0
    run.extra["background_token_stability"] = stability
    write_mask_png(run.out_dir / "mask.png", mask)
    run.register(run.out_dir / "mask.png")
    run.finish()
    return 0


def cmd_depth(config: dict) -> int:
    run = Run("depth", config)
    d = config["depth"]
    scene = render_scene(sample_scene_spec(config["scene"]["family"],
                                           config["scene"]["scene_seed"], size=config["size"]))
    if d["oracle_flow"]:
        pred = depth_from_flow([scene.flows[0]], aggregation=d["aggregation"])
        art = {}
    else:
        art = _artifacts(config, need=("tok_rgb", "tok_flow", "model_flow"))
        rgb_grid = art["tok_rgb"].encode(scene.frames[0])
        pred = extract_depth(art["model_flow"], art["tok_flow"], rgb_grid, PoseBinning(),
                             n_seeds=d["n_seeds"], seed=config["seed"],
                             temperature=d["temperature"], aggregation=d["aggregation"])
        for name in ("tok_rgb", "tok_flow", "model_flow"):
            run.register_checkpoint(name, art[f"{name}_path"])
    write_depth_raw(run.out_dir / "depth.f32", pred)
    write_image_png(run.out_dir / "input.png", scene.frames[0])
    run.register(run.out_dir / "depth.f32")
    run.register(run.out_dir / "input.png")
    run.extra["metrics_vs_gt"] = depth_metrics(pred, scene.depths[0], median_align=True)
    run.finish()
    return 0


def cmd_eval(config: dict, task: str) -> int:
    run = Run(f"eval-{task}", config)
    ev = config["eval"]
    seeds = [int(s) for s in
             rng_stream(config["seed"], "eval", task).integers(1 << 31, size=ev["n_scenes"])]
    if task == "nvs":
        need = ("tok_rgb", "tok_flow", "model_rgb") if ev["depth_source"] == "gt" else (
            "tok_rgb", "tok_flow", "model_rgb", "model_flow")
        art = _artifacts(config, need=need)
        report = run_nvs_eval(art["model_rgb"], art["tok_rgb"], art["tok_flow"], seeds,
                              depth_source=ev["depth_source"],
                              flow_model=art.get("model_flow"),
                              seed=config["seed"], n_depth_seeds=ev["n_depth_seeds"],
                              size=config["size"], zero_motion=ev["zero_motion"])
    elif task == "edit":
        art = _artifacts(config, need=("tok_rgb", "tok_flow", "model_rgb"))
        report = run_edit_eval(art["model_rgb"], art["tok_rgb"], art["tok_flow"], seeds,
                               seed=config["seed"], size=config["size"])
    elif task == "depth":
        if config["depth"]["oracle_flow"]:
            art = {}
            report = run_depth_eval(None, None, None, seeds, oracle_flow=True,
                                    seed=config["seed"], size=config["size"])
        else:
            art = _artifacts(config, need=("tok_rgb", "tok_flow", "model_flow"))
            report = run_depth_eval(art["model_flow"], art["tok_rgb"], art["tok_flow"], seeds,
                                    n_seeds=config["depth"]["n_seeds"],
                                    seed=config["seed"], size=config["size"])
    else:
        raise ConfigError(f"unknown eval task {task!r}")
    report.save(run.out_dir / "report.json")
    (run.out_dir / "report.txt").write_text(report.text_table() + "\n")
    run.register(run.out_dir / "report.json")
    run.register(run.out_dir / "report.txt")
    for name, value in art.items():
        if name.endswith("_path"):
            run.register_checkpoint(name[: -len("_path")], value)
    run.extra["aggregates"] = report.aggregates
    run.extra["report_hash"] = report.report_hash()
    run.finish()
    print(report.text_table())
    return 0


def cmd_inspect(path: str) -> int:
    """Round-trip verify a binary artifact and print its header."""
    import tempfile

    from ..quantizer.grids import load_token_grid, save_token_grid as save_grid
    from ..tensor import load_arrays, save_arrays
    from ..geometry import read_flo, write_flo as wflo

    p = Path(path)
    if not p.exists():
        raise DataError(f"no such file: {p}")
    head = p.read_bytes()[:8]
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        if head == b"LRASCKPT":
            arrays = load_arrays(p)
            save_arrays(tmp / "x", arrays)
            ok = (tmp / "x").read_bytes() == p.read_bytes()
            print(f"checkpoint: {len(arrays)} tensors, round-trip {'ok' if ok else 'MISMATCH'}")
            for name, arr in list(arrays.items())[:10]:
                print(f"  {name}: {arr.dtype} {list(arr.shape)}")
            if len(arrays) > 10:
                print(f"  ... and {len(arrays) - 10} more")
        elif p.suffix == ".flo":
            field = read_flo(p)
            wflo(tmp / "x.flo", field)
            ok = (tmp / "x.flo").read_bytes() == p.read_bytes()
            print(f".flo: {field.shape[1]}x{field.shape[0]}, round-trip {'ok' if ok else 'MISMATCH'}")
        elif p.suffix == ".grid":
            grid = load_token_grid(p)
            save_grid(tmp / "x.grid", grid)
            ok = (tmp / "x.grid").read_bytes() == p.read_bytes()
            print(f"token grid: {grid.shape[0]}x{grid.shape[1]}, max code {int(grid.max())}, "
                  f"round-trip {'ok' if ok else 'MISMATCH'}")
        else:
            raise DataError(f"unrecognized artifact (magic {head!r}, suffix {p.suffix})")
        if not ok:
            raise DataError(f"{p}: binary round trip mismatch")
    return 0
