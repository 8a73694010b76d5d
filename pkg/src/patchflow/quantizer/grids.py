"""Token grid binary serialization: 8-byte header (grid_h, grid_w as u32 LE),
then row-major u32 code indices.
"""

import struct

import numpy as np

from ..errors import DataError, VocabularyError


def save_token_grid(path, grid: np.ndarray) -> None:
    grid = np.asarray(grid)
    if grid.ndim != 2:
        raise DataError(f"token grid must be 2-D, got rank {grid.ndim}")
    with open(path, "wb") as f:
        f.write(struct.pack("<II", grid.shape[0], grid.shape[1]))
        f.write(np.ascontiguousarray(grid, dtype="<u4").tobytes())


def load_token_grid(path, codebook_size: int | None = None) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.read(8)
        if len(header) != 8:
            raise DataError(f"{path}: truncated token grid header")
        gh, gw = struct.unpack("<II", header)
        buf = f.read(4 * gh * gw)
        if len(buf) != 4 * gh * gw:
            raise DataError(f"{path}: truncated token grid payload")
        if f.read(1):
            raise DataError(f"{path}: trailing bytes in token grid file")
    grid = np.frombuffer(buf, dtype="<u4").reshape(gh, gw).astype(np.uint32)
    if codebook_size is not None and grid.size and int(grid.max()) >= codebook_size:
        raise VocabularyError(f"{path}: token {int(grid.max())} outside [0, {codebook_size})")
    return grid
