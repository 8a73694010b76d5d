from .dataset import load_scene, save_scene, tokenizer_flows, tokenizer_frames
from .evals import (
    annotate_edit_case,
    background_plate,
    estimate_object_mask,
    extract_depth,
    pedestal_up_pose,
    run_depth_eval,
    run_edit_eval,
    run_nvs_eval,
)
from .families import FAMILIES, moving_layer_index, sample_scene_spec
from .metrics import depth_metrics, psnr, ssim
from .report import EvalReport, print_report
from .scene import LayerSpec, SceneSpec, SyntheticScene, render_scene, value_noise

__all__ = [
    "load_scene",
    "save_scene",
    "tokenizer_flows",
    "tokenizer_frames",
    "annotate_edit_case",
    "background_plate",
    "estimate_object_mask",
    "extract_depth",
    "pedestal_up_pose",
    "run_depth_eval",
    "run_edit_eval",
    "run_nvs_eval",
    "FAMILIES",
    "moving_layer_index",
    "sample_scene_spec",
    "depth_metrics",
    "psnr",
    "ssim",
    "EvalReport",
    "print_report",
    "LayerSpec",
    "SceneSpec",
    "SyntheticScene",
    "render_scene",
    "value_noise",
]
