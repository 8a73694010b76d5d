"""Training loop for the sequence models."""

import json
import math
import time
from pathlib import Path

import numpy as np

from ..errors import NumericError
from ..sequence import VocabLayout
from ..tensor import Adam
from ..util import rng_stream, write_json
from .config import ModelConfig
from .train import batch_arrays, build_flow_sequence, build_rgb_sequence, content_range_bias, sequence_loss, train_step
from .transformer import SequenceModel


def _build_batch(pairs, idx, layout, variant, rng, subset_fraction):
    seqs = []
    for i in idx:
        order = rng.permutation(layout.n_positions)
        if variant == "rgb":
            seqs.append(build_rgb_sequence(layout, pairs["rgb"][i], pairs["flow"][i],
                                           pairs["target"][i], order, subset_fraction))
        else:
            seqs.append(build_flow_sequence(layout, pairs["rgb"][i], pairs["pose"][i],
                                            pairs["target"][i], order, subset_fraction))
    return seqs


def teacher_forced_accuracy(model: SequenceModel, pairs, idx) -> float:
    """Fraction of supervised content tokens the model ranks first."""
    layout = model.layout
    seqs = _build_batch(pairs, idx, layout, model.cfg.variant,
                        np.random.default_rng(0), 1.0)
    tokens, mask = batch_arrays(seqs)
    from .. import tensor as T

    with T.no_grad():
        logits = model.forward(tokens[:, :-1])
    bias = content_range_bias(layout, model.cfg.variant)
    z = logits.data + bias
    pred = z.argmax(axis=-1)
    labels = tokens[:, 1:]
    sel = mask[:, 1:] > 0
    return float((pred[sel] == labels[sel]).mean())


def train_sequence_model(
    pairs: dict,
    variant: str,
    layout: VocabLayout,
    cfg: ModelConfig,
    steps: int,
    out_dir,
    batch_size: int = 8,
    seed: int = 0,
    lr: float = 6e-4,
    warmup_steps: int = 200,
    eval_interval: int = 500,
    eval_pairs: dict | None = None,
    subset_fraction_range=(0.25, 1.0),
    log_fn=None,
) -> Path:
    """Train on tokenized pairs with fresh random orders every step."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    model = SequenceModel(cfg, layout, seed=rng_stream(seed, "model-init").integers(1 << 31))
    opt = Adam(model.params, lr=lr, warmup_steps=warmup_steps)
    rng = rng_stream(seed, "model-batches")
    n = len(pairs["target"])

    t0 = time.time()
    with open(out_dir / "metrics.jsonl", "w") as mf:
        for step in range(steps):
            idx = rng.choice(n, size=min(batch_size, n), replace=False)
            frac = float(rng.uniform(*subset_fraction_range))
            seqs = _build_batch(pairs, idx, layout, variant, rng, frac)
            loss = train_step(model, seqs, opt)
            if not math.isfinite(loss):
                write_json(out_dir / "nan_dump.json",
                           {"step": step, "loss": loss, "indices": idx.tolist()})
                raise NumericError(f"non-finite model loss at step {step}; dump written")
            record = {"step": step, "loss": loss, "subset_fraction": round(frac, 3)}
            if step % eval_interval == 0 or step == steps - 1:
                if eval_pairs is not None:
                    k = min(32, len(eval_pairs["target"]))
                    record["eval_token_accuracy"] = teacher_forced_accuracy(
                        model, eval_pairs, np.arange(k))
                record["elapsed_s"] = round(time.time() - t0, 2)
                if log_fn:
                    log_fn(record)
            mf.write(json.dumps(record) + "\n")

    ckpt = out_dir / "model.ckpt"
    model.save(ckpt)
    return ckpt
