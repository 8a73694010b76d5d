"""Pinned desk-scale training recipes and the shared artifact cache.

Every trained artifact the evaluation pipelines need is produced by one of
these functions, always with the same frozen hyperparameters, into
<runs>/acceptance/. Tests and the CLI both go through here, so a cache
built by either is reusable by the other. Recipes re-train only when their
artifact is missing.
"""

import os
from pathlib import Path

from .quantizer import PatchTokenizer, flow_toy, rgb_toy, train_tokenizer
from .util import rng_stream

GRID = 8
IMAGE_SIZE = 32
RGB_BITS = 10
FLOW_BITS = 10

RGB_TOKENIZER = {
    "corpus_scenes": 600,
    "corpus_seed": 1001,
    "eval_scenes": 40,
    "eval_seed": 9001,
    "steps": 20000,
    "batch_size": 8,
    "lr": 1e-3,
    "warmup_steps": 300,
    "seed": 11,
}

FLOW_TOKENIZER = {
    "corpus_fields": 800,
    "corpus_seed": 2001,
    "steps": 8000,
    "batch_size": 8,
    "lr": 1e-3,
    "warmup_steps": 300,
    "seed": 12,
}

RGB_MODEL = {
    "corpus_scenes": 1600,
    "corpus_seed": 3001,
    "eval_scenes": 64,
    "eval_seed": 9101,
    "steps": 4000,
    "batch_size": 8,
    "lr": 6e-4,
    "warmup_steps": 200,
    "seed": 21,
}

FLOW_MODEL = {
    "corpus_scenes": 1200,
    "corpus_seed": 4001,
    "eval_scenes": 64,
    "eval_seed": 9201,
    "steps": 3000,
    "batch_size": 8,
    "lr": 6e-4,
    "warmup_steps": 200,
    "seed": 22,
}


def runs_root(override=None) -> Path:
    if override is not None:
        return Path(override)
    return Path(os.environ.get("PATCHFLOW_RUNS", "runs")) / "acceptance"


def ensure_rgb_tokenizer(runs=None, log_fn=None) -> PatchTokenizer:
    root = runs_root(runs) / "tok_rgb"
    ckpt = root / "tokenizer.ckpt"
    if not ckpt.exists():
        from .bench.dataset import tokenizer_frames

        r = RGB_TOKENIZER
        frames = tokenizer_frames(r["corpus_scenes"], seed=r["corpus_seed"], size=IMAGE_SIZE)
        eval_frames = tokenizer_frames(r["eval_scenes"], seed=r["eval_seed"], size=IMAGE_SIZE)
        train_tokenizer(
            frames,
            rgb_toy(grid=GRID, bits=RGB_BITS),
            steps=r["steps"],
            out_dir=root,
            batch_size=r["batch_size"],
            seed=r["seed"],
            lr=r["lr"],
            warmup_steps=r["warmup_steps"],
            eval_frames=eval_frames,
            log_fn=log_fn,
        )
    return PatchTokenizer.load(ckpt)


def ensure_flow_tokenizer(runs=None, log_fn=None) -> PatchTokenizer:
    root = runs_root(runs) / "tok_flow"
    ckpt = root / "tokenizer.ckpt"
    if not ckpt.exists():
        from .bench.dataset import tokenizer_flows

        r = FLOW_TOKENIZER
        fields = tokenizer_flows(r["corpus_fields"], seed=r["corpus_seed"], size=IMAGE_SIZE)
        split = max(32, len(fields) // 10)
        train_tokenizer(
            fields[split:],
            flow_toy(grid=GRID, bits=FLOW_BITS),
            steps=r["steps"],
            out_dir=root,
            batch_size=r["batch_size"],
            seed=r["seed"],
            lr=r["lr"],
            warmup_steps=r["warmup_steps"],
            eval_frames=fields[:split],
            log_fn=log_fn,
        )
    return PatchTokenizer.load(ckpt)


def acceptance_layout():
    from .sequence import VocabLayout

    return VocabLayout(rgb_bits=RGB_BITS, flow_bits=FLOW_BITS, grid_h=GRID, grid_w=GRID)


def ensure_rgb_model(runs=None, log_fn=None):
    from .model import SequenceModel, mini_model_config
    from .model.data import rgb_model_pairs
    from .model.loop import train_sequence_model

    root = runs_root(runs) / "model_rgb"
    ckpt = root / "model.ckpt"
    if not ckpt.exists():
        tok_rgb = ensure_rgb_tokenizer(runs, log_fn=log_fn)
        tok_flow = ensure_flow_tokenizer(runs, log_fn=log_fn)
        r = RGB_MODEL
        layout = acceptance_layout()
        pairs = rgb_model_pairs(r["corpus_scenes"], r["corpus_seed"], tok_rgb, tok_flow, size=IMAGE_SIZE)
        eval_pairs = rgb_model_pairs(r["eval_scenes"], r["eval_seed"], tok_rgb, tok_flow, size=IMAGE_SIZE)
        train_sequence_model(
            pairs, "rgb", layout, mini_model_config("rgb", layout),
            steps=r["steps"], out_dir=root, batch_size=r["batch_size"],
            seed=r["seed"], lr=r["lr"], warmup_steps=r["warmup_steps"],
            eval_pairs=eval_pairs, log_fn=log_fn,
        )
    return SequenceModel.load(ckpt)


def ensure_flow_model(runs=None, log_fn=None):
    from .model import SequenceModel, mini_model_config
    from .model.data import flow_model_pairs
    from .model.loop import train_sequence_model

    root = runs_root(runs) / "model_flow"
    ckpt = root / "model.ckpt"
    if not ckpt.exists():
        tok_rgb = ensure_rgb_tokenizer(runs, log_fn=log_fn)
        tok_flow = ensure_flow_tokenizer(runs, log_fn=log_fn)
        r = FLOW_MODEL
        layout = acceptance_layout()
        pairs = flow_model_pairs(r["corpus_scenes"], r["corpus_seed"], tok_rgb, tok_flow, size=IMAGE_SIZE)
        eval_pairs = flow_model_pairs(r["eval_scenes"], r["eval_seed"], tok_rgb, tok_flow, size=IMAGE_SIZE)
        train_sequence_model(
            pairs, "flow", layout, mini_model_config("flow", layout),
            steps=r["steps"], out_dir=root, batch_size=r["batch_size"],
            seed=r["seed"], lr=r["lr"], warmup_steps=r["warmup_steps"],
            eval_pairs=eval_pairs, log_fn=log_fn,
        )
    return SequenceModel.load(ckpt)


def ensure_all(runs=None, log_fn=None) -> dict:
    """Train (or load) every artifact the evaluation pipelines need."""
    return {
        "tok_rgb": ensure_rgb_tokenizer(runs, log_fn=log_fn),
        "tok_flow": ensure_flow_tokenizer(runs, log_fn=log_fn),
        "model_rgb": ensure_rgb_model(runs, log_fn=log_fn),
        "model_flow": ensure_flow_model(runs, log_fn=log_fn),
    }
