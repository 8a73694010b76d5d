"""Binary checkpoint format.

Layout: magic "LRASCKPT", version u32, entry count u32, then per tensor:
name length u32, utf-8 name, dtype tag u8, rank u32, extents u64 each, raw
little-endian data. Round-trips bit-exactly.
"""

import struct

import numpy as np

from ..errors import DataError

MAGIC = b"LRASCKPT"
VERSION = 1

_DTYPE_TAGS = {
    np.dtype("<f4"): 0,
    np.dtype("<f8"): 1,
    np.dtype("<u4"): 2,
    np.dtype("<i8"): 3,
}
_TAG_DTYPES = {v: k for k, v in _DTYPE_TAGS.items()}


def save_arrays(path, arrays) -> None:
    """Write a name -> ndarray mapping; iteration order is preserved."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(arrays)))
        for name, arr in arrays.items():
            arr = np.asarray(arr)
            le = arr.dtype.newbyteorder("<")
            if le not in _DTYPE_TAGS:
                raise DataError(f"unsupported checkpoint dtype {arr.dtype} for {name}")
            # ascontiguousarray would promote rank-0 to rank-1; keep the shape
            data = np.ascontiguousarray(arr).astype(le, copy=False).reshape(arr.shape)
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<BI", _DTYPE_TAGS[le], arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            f.write(data.tobytes())


def load_arrays(path):
    with open(path, "rb") as f:
        if f.read(8) != MAGIC:
            raise DataError(f"{path}: bad checkpoint magic")
        version, count = struct.unpack("<II", f.read(8))
        if version != VERSION:
            raise DataError(f"{path}: unsupported checkpoint version {version}")
        arrays = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<I", f.read(4))
            name = f.read(name_len).decode("utf-8")
            tag, rank = struct.unpack("<BI", f.read(5))
            if tag not in _TAG_DTYPES:
                raise DataError(f"{path}: unknown dtype tag {tag} for {name}")
            shape = struct.unpack(f"<{rank}Q", f.read(8 * rank))
            dtype = _TAG_DTYPES[tag]
            n = int(np.prod(shape, dtype=np.int64)) if rank else 1
            buf = f.read(n * dtype.itemsize)
            if len(buf) != n * dtype.itemsize:
                raise DataError(f"{path}: truncated data for {name}")
            arrays[name] = np.frombuffer(buf, dtype=dtype).reshape(shape).copy()
        trailing = f.read(1)
        if trailing:
            raise DataError(f"{path}: trailing bytes after last tensor")
    return arrays


def save_params(path, params) -> None:
    """Checkpoint a name -> Tensor dict (data only, no gradients)."""
    save_arrays(path, {k: p.data for k, p in params.items()})


def load_params_into(path, params) -> None:
    arrays = load_arrays(path)
    missing = set(params) - set(arrays)
    extra = set(arrays) - set(params)
    if missing or extra:
        raise DataError(
            f"{path}: parameter set mismatch (missing={sorted(missing)}, extra={sorted(extra)})"
        )
    for k, p in params.items():
        if arrays[k].shape != p.data.shape:
            raise DataError(f"{path}: shape mismatch for {k}")
        p.data = arrays[k].astype(p.data.dtype, copy=True)
