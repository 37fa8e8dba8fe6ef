"""Training-curve helpers over TrainLog records."""

import logging

import pandas as pd

from src.models.report import TrainLog

logger = logging.getLogger(__name__)


def moving_average(values: list[float], window: int) -> list[float]:
    """Trailing mean over ``window`` values; early entries average what exists so far."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    return pd.Series(values, dtype=float).rolling(window, min_periods=1).mean().tolist()


def epoch_means(log: TrainLog) -> pd.DataFrame:
    """Mean of every logged column per epoch."""
    frame = log.to_frame()
    return frame.drop(columns=["step"]).groupby("epoch").mean()


def log_epoch(log: TrainLog, epoch: int) -> None:
    frame = log.to_frame()
    rows = frame[frame["epoch"] == epoch]
    if rows.empty:
        return
    means = rows[log.columns].mean()
    summary = " ".join(f"{name}={value:.5f}" for name, value in means.items())
    logger.info("Epoch %d (%d steps): %s", epoch, len(rows), summary)
