"""Tokenizer training: Adam on an L2 reconstruction loss, nothing else."""

import json
import math
import time
from pathlib import Path

import numpy as np

from .. import tensor as T
from ..errors import NumericError
from ..tensor import Adam, Tensor
from ..util import rng_stream, write_json
from .config import PatchTokenizerConfig
from .net import PatchTokenizer

# The loss is exactly one term; tests assert this decomposition stays honest.
LOSS_TERMS = ("l2_reconstruction",)


def _loss_terms(tok: PatchTokenizer, batch_raw: np.ndarray) -> dict:
    """Reconstruction loss in the raw target domain (pixels for rgb)."""
    x = Tensor(tok.normalize(batch_raw))
    recon, _ = tok.reconstruct(x)
    if tok.cfg.is_flow:
        target = x  # normalized flow domain
        pred = recon
    else:
        # compare in [0,1] pixel space: recon_px = (out+1)/2
        pred = T.mul(T.add(recon, 1.0), 0.5)
        target = Tensor(batch_raw.astype(np.float32))
    return {"l2_reconstruction": T.mse(pred, target)}


def evaluate(tok: PatchTokenizer, frames: np.ndarray, max_frames: int = 64) -> dict:
    """Reconstruction quality and code idempotence on held-out frames."""
    frames = frames[:max_frames]
    codes = tok.encode(frames)
    recon = tok.decode(codes)
    err = recon - frames
    mse = float(np.mean(err * err))
    out = {"eval_mse": mse}
    if not tok.cfg.is_flow:
        out["eval_psnr"] = 99.0 if mse == 0 else float(10.0 * math.log10(1.0 / mse))
    else:
        out["eval_px_rmse"] = float(np.sqrt(mse))
    recodes = tok.encode(recon)
    out["code_idempotence"] = float(np.mean(codes == recodes))
    return out


def train_tokenizer(
    frames: np.ndarray,
    cfg: PatchTokenizerConfig,
    steps: int,
    out_dir,
    batch_size: int = 16,
    seed: int = 0,
    lr: float = 3e-4,
    warmup_steps: int = 200,
    eval_interval: int = 1000,
    eval_frames: np.ndarray | None = None,
    log_fn=None,
) -> Path:
    """Train on an (N, H, W, C) array of raw frames; returns the checkpoint path.

    Deterministic for a fixed seed. A NaN loss aborts with a diagnostic dump
    of the last batch's statistics.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tok = PatchTokenizer(cfg, seed=rng_stream(seed, "tokenizer-init").integers(1 << 31))
    opt = Adam(tok.params, lr=lr, warmup_steps=warmup_steps)
    batch_rng = rng_stream(seed, "tokenizer-batches")
    if eval_frames is None:
        eval_frames = frames[: min(64, len(frames))]

    metrics_path = out_dir / "metrics.jsonl"
    t0 = time.time()
    with open(metrics_path, "w") as mf:
        for step in range(steps):
            idx = batch_rng.choice(len(frames), size=min(batch_size, len(frames)), replace=False)
            batch = frames[idx]
            terms = _loss_terms(tok, batch)
            assert tuple(terms) == LOSS_TERMS
            loss = terms["l2_reconstruction"]
            value = loss.item()
            if not math.isfinite(value):
                dump = {
                    "step": step,
                    "loss": value,
                    "batch_min": float(batch.min()),
                    "batch_max": float(batch.max()),
                    "batch_mean": float(batch.mean()),
                    "batch_indices": idx.tolist(),
                }
                write_json(out_dir / "nan_dump.json", dump)
                raise NumericError(f"non-finite tokenizer loss at step {step}; dump written")
            opt.zero_grad()
            loss.backward()
            opt.step()

            is_eval = step % eval_interval == 0 or step == steps - 1
            record = {"step": step, "loss": value}
            if is_eval:
                record.update(evaluate(tok, eval_frames))
                record["elapsed_s"] = round(time.time() - t0, 2)
                if log_fn:
                    log_fn(record)
            mf.write(json.dumps(record) + "\n")

    ckpt = out_dir / "tokenizer.ckpt"
    tok.save(ckpt)
    return ckpt
