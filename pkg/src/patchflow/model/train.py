"""Sequence builders and the masked next-token training step."""

import numpy as np

from .. import tensor as T
from ..errors import ContractError
from ..sequence import CondBlock, LrasSequence, VocabLayout, serialize
from ..tensor import Adam, Tensor
from .transformer import SequenceModel


def build_rgb_sequence(layout: VocabLayout, rgb_grid, flow_grid, target_grid,
                       order, subset_fraction: float = 1.0) -> LrasSequence:
    """[frame | flow | target rgb] with supervision on target content only."""
    return serialize(
        [CondBlock("rgb", rgb_grid), CondBlock("flow", flow_grid)],
        target_grid, order, layout,
        subset_fraction=subset_fraction, target_kind="rgb",
    )


def build_flow_sequence(layout: VocabLayout, rgb_grid, pose_bins, target_grid,
                        order, subset_fraction: float = 1.0) -> LrasSequence:
    """[frame | pose (or pad) | target flow], supervision on flow content."""
    pose_block = CondBlock("pose", pose_bins) if pose_bins is not None else CondBlock("pose_pad")
    return serialize(
        [CondBlock("rgb", rgb_grid), pose_block],
        target_grid, order, layout,
        subset_fraction=subset_fraction, target_kind="flow",
    )


def content_range_bias(layout: VocabLayout, kind: str) -> np.ndarray:
    """Additive logits bias confining prediction to one content range."""
    lo, hi = layout.content_range(kind)
    bias = np.full(layout.total_size, -1e9, dtype=np.float32)
    bias[lo:hi] = 0.0
    return bias


def validate_training_sequences(seqs, variant: str) -> None:
    for i, seq in enumerate(seqs):
        if seq.target_kind != variant:
            raise ContractError(
                f"sequence {i} targets {seq.target_kind!r} but the model variant is {variant!r}"
            )
        if seq.mask[: seq.conditioning_len].any():
            raise ContractError(f"sequence {i} supervises conditioning positions")
        lo, hi = seq.layout.content_range(variant)
        supervised = seq.tokens[seq.mask > 0]
        if supervised.size and (supervised.min() < lo or supervised.max() >= hi):
            raise ContractError(
                f"sequence {i} supervises tokens outside the {variant} content range"
            )


def batch_arrays(seqs):
    lengths = {len(s) for s in seqs}
    if len(lengths) != 1:
        raise ContractError(f"batch mixes sequence lengths {sorted(lengths)}")
    tokens = np.stack([s.tokens for s in seqs])
    mask = np.stack([s.mask for s in seqs])
    return tokens, mask


def sequence_loss(model: SequenceModel, tokens: np.ndarray, mask: np.ndarray,
                  train_rng=None) -> Tensor:
    """Masked next-token NLL restricted to the variant's content range."""
    logits = model.forward(tokens[:, :-1], train_rng=train_rng)
    bias = Tensor(content_range_bias(model.layout, model.cfg.variant))
    logits = T.add(logits, bias)
    return T.cross_entropy(logits, tokens[:, 1:], mask[:, 1:])


def train_step(model: SequenceModel, seqs, opt: Adam, train_rng=None) -> float:
    """One optimizer step on a batch of LrasSequences; returns the loss."""
    validate_training_sequences(seqs, model.cfg.variant)
    tokens, mask = batch_arrays(seqs)
    loss = sequence_loss(model, tokens, mask, train_rng=train_rng)
    opt.zero_grad()
    loss.backward()
    opt.step()
    return loss.item()
