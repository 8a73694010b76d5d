from .config import ModelConfig, PoseBinning, mini_model_config, toy_model_config, worst_case_sequence_len
from .sample import CachedSampler, sample_flow, sample_rgb
from .train import (
    batch_arrays,
    build_flow_sequence,
    build_rgb_sequence,
    content_range_bias,
    sequence_loss,
    train_step,
    validate_training_sequences,
)
from .transformer import SequenceModel, init_params

__all__ = [
    "ModelConfig",
    "PoseBinning",
    "mini_model_config",
    "toy_model_config",
    "worst_case_sequence_len",
    "CachedSampler",
    "sample_flow",
    "sample_rgb",
    "batch_arrays",
    "build_flow_sequence",
    "build_rgb_sequence",
    "content_range_bias",
    "sequence_loss",
    "train_step",
    "validate_training_sequences",
    "SequenceModel",
    "init_params",
]
