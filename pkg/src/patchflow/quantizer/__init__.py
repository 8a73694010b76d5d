from .config import PatchTokenizerConfig, PRESETS, flow_full, flow_toy, rgb_full, rgb_toy
from .grids import load_token_grid, save_token_grid
from .lfq import codes_to_signs, lfq_quantize, lfq_signs, signs_to_codes
from .net import PatchTokenizer
from .train import LOSS_TERMS, evaluate, train_tokenizer

__all__ = [
    "PatchTokenizerConfig",
    "PRESETS",
    "flow_full",
    "flow_toy",
    "rgb_full",
    "rgb_toy",
    "load_token_grid",
    "save_token_grid",
    "codes_to_signs",
    "lfq_quantize",
    "lfq_signs",
    "signs_to_codes",
    "PatchTokenizer",
    "LOSS_TERMS",
    "evaluate",
    "train_tokenizer",
]
