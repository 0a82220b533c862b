"""Trainable sequence predictors behind one interface."""

from ..errors import BadConfig
from .base import KINDS, Predictor, PredictorConfig, TrainTrace
from .fcnn import FCNNPredictor
from .recurrent import RecurrentPredictor
from .transformer import TransformerPredictor

__all__ = [
    "KINDS",
    "Predictor",
    "PredictorConfig",
    "TrainTrace",
    "build_predictor",
    "build_transformer",
    "build_recurrent",
    "build_fcnn",
]


def build_predictor(config: PredictorConfig) -> Predictor:
    if config.kind == "transformer":
        return TransformerPredictor(config)
    if config.kind in ("lstm", "gru", "stacked_lstm"):
        return RecurrentPredictor(config)
    if config.kind == "fcnn":
        return FCNNPredictor(config)
    raise BadConfig(f"unknown model kind {config.kind!r}")


def build_transformer(config: PredictorConfig) -> TransformerPredictor:
    return TransformerPredictor(config)


def build_recurrent(config: PredictorConfig) -> RecurrentPredictor:
    return RecurrentPredictor(config)


def build_fcnn(config: PredictorConfig) -> FCNNPredictor:
    return FCNNPredictor(config)
