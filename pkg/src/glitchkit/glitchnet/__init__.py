from .checkpoint import ModelCheckpoint, load_checkpoint, load_model, save_checkpoint
from .config import GLITCH, LABELS, NORMAL, ModelConfig, TrainConfig, desk_config
from .model import GlitchNet, build_model, predict, predict_logits, preprocess
from .train import TrainResult, train, train_arrays

__all__ = [
    "GLITCH",
    "LABELS",
    "NORMAL",
    "GlitchNet",
    "ModelCheckpoint",
    "ModelConfig",
    "TrainConfig",
    "TrainResult",
    "build_model",
    "desk_config",
    "load_checkpoint",
    "load_model",
    "predict",
    "predict_logits",
    "preprocess",
    "save_checkpoint",
    "train",
    "train_arrays",
]
