"""Least-squares rigid fitting (Kabsch) and flow-matched scale alignment."""

import numpy as np

from ..errors import GeometryError, RankError
from .camera import CameraIntrinsics, RigidTransform
from .fields import DepthMap, FlowField


def fit_rigid(points_a: np.ndarray, points_b: np.ndarray) -> RigidTransform:
    """Best-fit R, t minimizing sum ||R a_i + t - b_i||^2.

    Centroid subtraction + SVD of the cross-covariance, with the reflection
    corrected so det(R) = +1. Exact on noiseless rigid correspondences.
    """
    a = np.asarray(points_a, dtype=np.float64)
    b = np.asarray(points_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[1] != 3:
        raise GeometryError(f"expected matching (N, 3) point sets, got {a.shape} and {b.shape}")
    n = a.shape[0]
    if n < 3:
        raise RankError(f"need at least 3 correspondences, got {n}")

    ca = a.mean(axis=0)
    cb = b.mean(axis=0)
    a0 = a - ca
    b0 = b - cb
    # collinear points leave a rotation axis unconstrained
    sv_a = np.linalg.svd(a0, compute_uv=False)
    if sv_a[1] < 1e-9 * max(sv_a[0], 1.0):
        raise RankError("source points are collinear (rank < 2); rotation underdetermined")

    H = a0.T @ b0
    U, _, Vt = np.linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T))
    D = np.diag([1.0, 1.0, d])
    R = Vt.T @ D @ U.T
    t = cb - R @ ca
    return RigidTransform(R, t)


def _scale_objective(depth: DepthMap, K: CameraIntrinsics, direction: RigidTransform,
                     observed: FlowField):
    """Returns f(s): mean flow discrepancy over pixels valid in both fields."""
    from .flow import camera_flow

    def objective(s: float) -> float:
        pred = camera_flow(depth, K, direction.scaled_translation(s))
        both = pred.valid & observed.valid
        if not both.any():
            return np.inf
        diff = pred.flow[both] - observed.flow[both]
        return float(np.mean(np.linalg.norm(diff, axis=-1)))

    return objective


_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _golden_section(f, lo: float, hi: float, rel_tol: float) -> float:
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = f(x1), f(x2)
    while (hi - lo) > rel_tol:
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - _GOLDEN * (hi - lo)
            f1 = f(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + _GOLDEN * (hi - lo)
            f2 = f(x2)
    return 0.5 * (lo + hi)


def align_scale(
    observed_flow: FlowField,
    depth: DepthMap,
    K: CameraIntrinsics,
    direction: RigidTransform,
    s_min: float = 1e-2,
    s_max: float = 1e2,
    rel_tol: float = 1e-4,
) -> dict:
    """Scale s* such that camera_flow(depth, K, s * direction) matches the
    observed flow, searched over log-scale by golden section.

    Returns {"scale", "objective", "degenerate", "method"}. A bracket
    failure (non-unimodal objective) falls back to a dense 200-point
    log-spaced grid plus local refinement.
    """
    h, w = observed_flow.shape
    frac_valid = observed_flow.valid.mean()
    if frac_valid < 0.01:
        raise GeometryError(
            f"observed flow valid on {frac_valid:.2%} of pixels; need >= 1%"
        )
    f_of_s = _scale_objective(depth, K, direction, observed_flow)
    f = lambda logs: f_of_s(float(np.exp(logs)))
    lo, hi = np.log(s_min), np.log(s_max)

    # verify unimodal bracket: some interior sample should beat both edges
    probes = np.linspace(lo, hi, 13)
    vals = [f(x) for x in probes]
    interior_best = min(vals[1:-1])
    method = "golden"
    if not (interior_best <= vals[0] and interior_best <= vals[-1]):
        method = "grid"
        grid = np.linspace(lo, hi, 200)
        gvals = [f(x) for x in grid]
        i = int(np.argmin(gvals))
        lo = grid[max(0, i - 1)]
        hi = grid[min(len(grid) - 1, i + 1)]
    else:
        i = 1 + int(np.argmin(vals[1:-1]))
        lo = probes[i - 1]
        hi = probes[i + 1]

    best_log = _golden_section(f, lo, hi, rel_tol)
    s_star = float(np.exp(best_log))
    degenerate = s_star <= s_min * (1 + 10 * rel_tol)
    return {
        "scale": s_star,
        "objective": f_of_s(s_star),
        "degenerate": bool(degenerate),
        "method": method,
    }
