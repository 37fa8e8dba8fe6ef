from src.train.cascade import train_cascade
from src.train.finetune import fine_tune
from src.train.log import moving_average
from src.train.loop import (
    LoadedModel,
    NonFiniteLossError,
    TrainResult,
    load_checkpoint,
    save_checkpoint,
)
from src.train.pairs import TrainingPair, make_training_pairs
from src.train.recurrent_gan import train_interpolation, train_recurrent_gan

__all__ = [
    "LoadedModel",
    "NonFiniteLossError",
    "TrainResult",
    "TrainingPair",
    "fine_tune",
    "load_checkpoint",
    "make_training_pairs",
    "moving_average",
    "save_checkpoint",
    "train_cascade",
    "train_interpolation",
    "train_recurrent_gan",
]
