"""Image and depth quality metrics (PSNR, SSIM, AbsRel/Log10/delta1)."""

import math

import numpy as np

from ..errors import DataError, ShapeError
from ..geometry import DepthMap

PSNR_CAP_DB = 99.0


def psnr(a: np.ndarray, b: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; identical inputs report the 99 dB cap."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"psnr shape mismatch: {a.shape} vs {b.shape}")
    if peak <= 0:
        raise ShapeError(f"peak must be positive, got {peak}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(peak * peak / mse))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    x = np.arange(size) - half
    g = np.exp(-(x**2) / (2 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def _window_view(x: np.ndarray, size: int) -> np.ndarray:
    from numpy.lib.stride_tricks import sliding_window_view

    return sliding_window_view(x, (size, size))


def ssim(a: np.ndarray, b: np.ndarray, window: int = 11, k1: float = 0.01,
         k2: float = 0.03, peak: float = 1.0, sigma: float = 1.5) -> float:
    """Mean structural similarity over valid gaussian-weighted windows.

    Channels are scored independently and averaged.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"ssim shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[..., None]
        b = b[..., None]
    h, w, c = a.shape
    if h < window or w < window:
        raise ShapeError(f"image {h}x{w} smaller than ssim window {window}")
    kern = _gaussian_window(window, sigma)
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2
    scores = []
    for ch in range(c):
        x = a[..., ch]
        y = b[..., ch]
        wx = _window_view(x, window)
        wy = _window_view(y, window)
        mu_x = np.einsum("ijkl,kl->ij", wx, kern)
        mu_y = np.einsum("ijkl,kl->ij", wy, kern)
        xx = np.einsum("ijkl,kl->ij", wx * wx, kern)
        yy = np.einsum("ijkl,kl->ij", wy * wy, kern)
        xy = np.einsum("ijkl,kl->ij", wx * wy, kern)
        var_x = xx - mu_x**2
        var_y = yy - mu_y**2
        cov = xy - mu_x * mu_y
        s = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / (
            (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
        )
        scores.append(s.mean())
    return float(np.mean(scores))


def depth_metrics(pred: DepthMap, gt: DepthMap, median_align: bool = True) -> dict:
    """AbsRel, Log10, and delta1 (ratio threshold 1.25) on the valid overlap."""
    if pred.shape != gt.shape:
        raise ShapeError(f"depth shape mismatch: {pred.shape} vs {gt.shape}")
    both = pred.valid & gt.valid
    n = int(both.sum())
    if n < 100:
        raise DataError(f"only {n} valid overlapping pixels; need >= 100")
    p = pred.values[both].astype(np.float64)
    g = gt.values[both].astype(np.float64)
    if median_align:
        p = p * (np.median(g) / np.median(p))
    ratio = np.maximum(p / g, g / p)
    return {
        "AbsRel": float(np.mean(np.abs(p - g) / g)),
        "Log10": float(np.mean(np.abs(np.log10(p) - np.log10(g)))),
        "delta1": float(np.mean(ratio < 1.25)),
        "n_pixels": n,
    }
