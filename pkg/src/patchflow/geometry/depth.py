"""Depth from flow magnitude: disparity = |flow| under in-plane camera
translation, inverted and normalized to median 1 (depth is scale-free here).
"""

import warnings

import numpy as np

from ..errors import DegenerateDisparityError
from .fields import DepthMap, FlowField

D_EPS = 1e-3  # disparity floor in pixels before inversion


def depth_from_flow(flows, aggregation: str = "median", min_valid_fraction: float = 0.05) -> DepthMap:
    """Aggregate per-seed flow magnitudes into a scale-normalized depth map.

    `flows` is a FlowField or a list of them (one per sampling seed).
    """
    if isinstance(flows, FlowField):
        flows = [flows]
    if aggregation not in ("median", "mean"):
        from ..errors import ConfigError

        raise ConfigError(f"unknown aggregation {aggregation!r}")
    mags = np.stack([f.magnitude() for f in flows], axis=0)
    valid = np.stack([f.valid for f in flows], axis=0)
    mags = np.where(valid, mags, np.nan)
    with np.errstate(invalid="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)  # all-NaN pixels
        if aggregation == "median":
            disparity = np.nanmedian(mags, axis=0)
        else:
            disparity = np.nanmean(mags, axis=0)
    ok = np.isfinite(disparity)
    if not ok.any() or np.nanmax(disparity) <= D_EPS:
        raise DegenerateDisparityError(
            "all-zero (or fully invalid) flow; cannot invert disparity into depth"
        )
    ok = ok & (disparity > D_EPS)
    if ok.mean() < min_valid_fraction:
        raise DegenerateDisparityError(
            f"disparity above floor on only {ok.mean():.2%} of pixels"
        )
    depth = np.where(ok, 1.0 / np.maximum(disparity, D_EPS), np.nan)
    med = np.median(depth[ok])
    depth = np.where(ok, depth / med, 1.0)
    return DepthMap(depth, ok)
