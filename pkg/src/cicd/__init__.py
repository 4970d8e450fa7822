"""Dual-view claim verification at desk scale.

A collective-cognition encoder-decoder generates global evidence over all
relevant articles; an individual-cognition pathway screens the most different
articles and extracts local evidence fragments; a shared classifier fuses
both views, trained jointly with a KL inconsistency penalty. The numeric
core is a small float64 tensor engine with taped reverse-mode autodiff.
"""

__version__ = "0.1.0"

from .config import LABEL_PRESETS, MODEL_PRESETS, ModelConfig, load_config
from .data import (ClaimInstance, EncodedBatch, Vocab, build_vocab,
                   encode_batch, load_jsonl, save_jsonl, tokenize)
from .metrics import classification_metrics, evaluate
from .model import DualViewModel, Prediction, classify, inconsistency_loss, total_loss
from .optim import Adam, grad_check
from .params import ParamSet, build_params, load_checkpoint, save_checkpoint
from .synthetic import SyntheticParams, gen_synthetic
from .tensor import Tensor, backward, masked_softmax, no_grad
from .train import TrainResult, split_dev, train_model

__all__ = [
    "Adam", "ClaimInstance", "DualViewModel", "EncodedBatch", "LABEL_PRESETS",
    "MODEL_PRESETS", "ModelConfig", "ParamSet", "Prediction", "SyntheticParams",
    "Tensor", "TrainResult", "Vocab", "backward", "build_params", "build_vocab",
    "classification_metrics", "classify", "encode_batch", "evaluate",
    "gen_synthetic", "grad_check", "inconsistency_loss", "load_checkpoint",
    "load_config", "load_jsonl", "masked_softmax", "no_grad", "save_checkpoint",
    "save_jsonl", "split_dev", "tokenize", "total_loss", "train_model",
]
