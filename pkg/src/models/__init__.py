from src.models.cine import CineSequence, KSpaceArray, SamplingMask
from src.models.config import (
    CascadeArchitecture,
    DegradeMode,
    FeatureNetConfig,
    LossConfig,
    PhantomParams,
    RecurrentArchitecture,
    TrainConfig,
    TrainMode,
)
from src.models.report import MetricReport, TrainLog

__all__ = [
    "CascadeArchitecture",
    "CineSequence",
    "DegradeMode",
    "FeatureNetConfig",
    "KSpaceArray",
    "LossConfig",
    "MetricReport",
    "PhantomParams",
    "RecurrentArchitecture",
    "SamplingMask",
    "TrainConfig",
    "TrainLog",
    "TrainMode",
]
