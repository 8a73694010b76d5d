"""File formats: Middlebury .flo, depth as 16-bit PNG or raw f32 + JSON,
8-bit PNG masks, and correspondence-annotation JSON.
"""

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from ..errors import DataError
from ..util import read_json, write_json
from .fields import DepthMap, FlowField

FLO_MAGIC = 202021.25


def write_flo(path, field: FlowField) -> None:
    """Middlebury .flo; invalid pixels are stored as their (zero) flow values."""
    h, w = field.shape
    with open(path, "wb") as f:
        f.write(struct.pack("<f", FLO_MAGIC))
        f.write(struct.pack("<ii", w, h))
        f.write(np.ascontiguousarray(field.flow, dtype="<f4").tobytes())


def read_flo(path) -> FlowField:
    with open(path, "rb") as f:
        (magic,) = struct.unpack("<f", f.read(4))
        if magic != np.float32(FLO_MAGIC):
            raise DataError(f"{path}: bad .flo magic {magic!r}")
        w, h = struct.unpack("<ii", f.read(8))
        if w <= 0 or h <= 0 or w * h > 1 << 28:
            raise DataError(f"{path}: implausible .flo dimensions {w}x{h}")
        buf = f.read(8 * w * h)
        if len(buf) != 8 * w * h:
            raise DataError(f"{path}: truncated .flo payload")
        if f.read(1):
            raise DataError(f"{path}: trailing bytes in .flo file")
    flow = np.frombuffer(buf, dtype="<f4").reshape(h, w, 2).astype(np.float64)
    return FlowField(flow)


def write_depth_png(path, depth: DepthMap, divisor: float = 1e-3) -> None:
    """16-bit PNG with fixed-point values depth/divisor; 0 marks invalid."""
    q = np.where(depth.valid, np.round(depth.values / divisor), 0.0)
    if q.max() > 65535:
        raise DataError(
            f"depth/divisor exceeds 16-bit range (max {q.max():.0f}); increase divisor"
        )
    img = Image.fromarray(q.astype(np.uint16))
    img.save(path)
    write_json(str(path) + ".json", {"divisor": divisor, "format": "u16-fixed-point"})


def read_depth_png(path) -> DepthMap:
    meta = read_json(str(path) + ".json")
    arr = np.asarray(Image.open(path), dtype=np.float64)
    valid = arr > 0
    return DepthMap(np.where(valid, arr * meta["divisor"], 1.0), valid)


def write_depth_raw(path, depth: DepthMap) -> None:
    """Raw little-endian f32 with a JSON sidecar; invalid pixels become NaN."""
    values = np.where(depth.valid, depth.values, np.nan).astype("<f4")
    with open(path, "wb") as f:
        f.write(values.tobytes())
    h, w = depth.shape
    write_json(str(path) + ".json", {"height": h, "width": w, "dtype": "f32-le"})


def read_depth_raw(path) -> DepthMap:
    meta = read_json(str(path) + ".json")
    h, w = meta["height"], meta["width"]
    buf = Path(path).read_bytes()
    if len(buf) != 4 * h * w:
        raise DataError(f"{path}: expected {4*h*w} bytes, got {len(buf)}")
    values = np.frombuffer(buf, dtype="<f4").reshape(h, w).astype(np.float64)
    valid = np.isfinite(values) & (values > 0)
    return DepthMap(np.where(valid, values, 1.0), valid)


def write_mask_png(path, mask: np.ndarray) -> None:
    Image.fromarray((np.asarray(mask, dtype=bool) * 255).astype(np.uint8)).save(path)


def read_mask_png(path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("L")) > 0


def write_image_png(path, image: np.ndarray) -> None:
    """RGB float [0,1] -> 8-bit PNG."""
    arr = np.clip(np.asarray(image) * 255.0 + 0.5, 0, 255).astype(np.uint8)
    Image.fromarray(arr).save(path)


def read_image_png(path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("RGB"), dtype=np.float64) / 255.0


def write_correspondences(path, pairs) -> None:
    """Annotation format: list of {uv_a, uv_b, depth_a, depth_b} records."""
    records = []
    for p in pairs:
        records.append(
            {
                "uv_a": [float(p["uv_a"][0]), float(p["uv_a"][1])],
                "uv_b": [float(p["uv_b"][0]), float(p["uv_b"][1])],
                "depth_a": float(p["depth_a"]),
                "depth_b": float(p["depth_b"]),
            }
        )
    write_json(path, records)


def read_correspondences(path):
    records = read_json(path)
    if not isinstance(records, list) or len(records) < 4:
        raise DataError(f"{path}: need at least 4 correspondence records")
    for r in records:
        for key in ("uv_a", "uv_b", "depth_a", "depth_b"):
            if key not in r:
                raise DataError(f"{path}: correspondence record missing {key}")
    return records
