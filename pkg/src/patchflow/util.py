"""Small shared helpers: seeded RNG streams, stable hashing, JSON io."""

import hashlib
import json
from pathlib import Path

import numpy as np


def stream_seed(root_seed: int, *names) -> int:
    """Derive a child seed from a root seed and a path of stream names.

    Stable across processes and platforms (unlike hash()).
    """
    h = hashlib.sha256()
    h.update(str(int(root_seed)).encode())
    for name in names:
        h.update(b"/")
        h.update(str(name).encode())
    return int.from_bytes(h.digest()[:8], "little")


def rng_stream(root_seed: int, *names) -> np.random.Generator:
    return np.random.default_rng(stream_seed(root_seed, *names))


def config_hash(obj) -> str:
    """Stable short hash of a JSON-serializable config."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def file_hash(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path, obj) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def read_json(path):
    with open(path) as f:
        return json.load(f)
