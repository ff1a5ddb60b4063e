"""EASL: emotion-aware text-to-pose sequence generation.

A desk-scale encoder-decoder that maps token sequences to pose-keypoint
sequences with per-frame emotion confidences, trained with a three-phase
freeze schedule on a synthetic teacher dataset, plus the metrics and
analysis tooling to verify the whole pipeline end to end on a CPU.
"""

from .autodiff import Tensor, backward, no_grad
from .data import GeneratorConfig, Sample, generate_dataset, load_dataset, save_dataset
from .dese import DeseConfig, encode
from .egsid import EgsidConfig, decode, decode_semantic_only, fuse_memory
from .model import EaslModel, ModelConfig
from .registry import Group, ParamRegistry
from .training import (
    Checkpoint,
    TrainConfig,
    load_checkpoint,
    save_checkpoint,
    set_phase,
    sgd_step,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Tensor",
    "backward",
    "no_grad",
    "GeneratorConfig",
    "Sample",
    "generate_dataset",
    "load_dataset",
    "save_dataset",
    "DeseConfig",
    "encode",
    "EgsidConfig",
    "decode",
    "decode_semantic_only",
    "fuse_memory",
    "EaslModel",
    "ModelConfig",
    "Group",
    "ParamRegistry",
    "Checkpoint",
    "TrainConfig",
    "load_checkpoint",
    "save_checkpoint",
    "set_phase",
    "sgd_step",
    "train",
    "__version__",
]
