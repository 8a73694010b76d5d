from .camera import CameraIntrinsics, RigidTransform, Z_EPS, pixel_grid, project, unproject
from .depth import D_EPS, depth_from_flow
from .fields import DepthMap, FlowField, bilinear_sample, edit_adherence, warp_by_flow
from .fit import align_scale, fit_rigid
from .flow import camera_flow, compose_camera_flows, object_flow, removal_flow
from .io import (
    read_correspondences,
    read_depth_png,
    read_depth_raw,
    read_flo,
    read_image_png,
    read_mask_png,
    write_correspondences,
    write_depth_png,
    write_depth_raw,
    write_flo,
    write_image_png,
    write_mask_png,
)

__all__ = [
    "CameraIntrinsics",
    "RigidTransform",
    "Z_EPS",
    "pixel_grid",
    "project",
    "unproject",
    "D_EPS",
    "depth_from_flow",
    "DepthMap",
    "FlowField",
    "bilinear_sample",
    "edit_adherence",
    "warp_by_flow",
    "align_scale",
    "fit_rigid",
    "camera_flow",
    "compose_camera_flows",
    "object_flow",
    "removal_flow",
    "read_correspondences",
    "read_depth_png",
    "read_depth_raw",
    "read_flo",
    "read_image_png",
    "read_mask_png",
    "write_correspondences",
    "write_depth_png",
    "write_depth_raw",
    "write_flo",
    "write_image_png",
    "write_mask_png",
]
