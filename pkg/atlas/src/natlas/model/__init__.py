"""Tiny gated-FFN decoder, tap directives, checkpoints, training and planted models."""

from .checkpoint import Checkpoint, checkpoint_from_bytes, load_checkpoint, save_checkpoint
from .config import ModelConfig, expected_shapes
from .directives import DirectiveMode, TapDirective, add, compile_directives, multiply, set_to
from .generate import GenerationSettings, generate
from .plant import PlantLedger, default_plant, load_ledger, plant_model, planted_config, save_ledger
from .train import TrainHyper, init_checkpoint, train_tiny
from .transformer import ActivationTap, ForwardResult, TinyDecoder, forward

__all__ = [
    "ActivationTap",
    "Checkpoint",
    "DirectiveMode",
    "ForwardResult",
    "GenerationSettings",
    "ModelConfig",
    "PlantLedger",
    "TapDirective",
    "TinyDecoder",
    "TrainHyper",
    "add",
    "checkpoint_from_bytes",
    "compile_directives",
    "default_plant",
    "expected_shapes",
    "forward",
    "generate",
    "init_checkpoint",
    "load_checkpoint",
    "load_ledger",
    "multiply",
    "plant_model",
    "planted_config",
    "save_checkpoint",
    "save_ledger",
    "set_to",
    "train_tiny",
]
