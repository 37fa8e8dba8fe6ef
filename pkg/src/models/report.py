"""Evaluation and training records."""

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd


@dataclass
class MetricReport:
    """Per-frame SSIM/PSNR plus MEAN±SD aggregates.

    PSNR of an exact match is reported as +inf and counted in
    ``infinite_psnr_frames``; PSNR aggregates run over the finite frames only.
    SD is the population standard deviation.
    """

    ssim: list[float] = field(default_factory=list)
    psnr: list[float] = field(default_factory=list)

    @property
    def ssim_mean(self) -> float:
        return float(np.mean(self.ssim))

    @property
    def ssim_sd(self) -> float:
        return float(np.std(self.ssim))

    @property
    def infinite_psnr_frames(self) -> int:
        return sum(1 for value in self.psnr if math.isinf(value))

    @property
    def psnr_mean(self) -> float:
        finite = [value for value in self.psnr if not math.isinf(value)]
        return float(np.mean(finite)) if finite else math.inf

    @property
    def psnr_sd(self) -> float:
        finite = [value for value in self.psnr if not math.isinf(value)]
        return float(np.std(finite)) if finite else 0.0

    def to_frame(self) -> pd.DataFrame:
        rows: list[dict[str, object]] = [
            {"frame": str(i), "ssim": s, "psnr": p}
            for i, (s, p) in enumerate(zip(self.ssim, self.psnr, strict=True))
        ]
        rows.append({"frame": "mean", "ssim": self.ssim_mean, "psnr": self.psnr_mean})
        rows.append({"frame": "sd", "ssim": self.ssim_sd, "psnr": self.psnr_sd})
        return pd.DataFrame(rows, columns=["frame", "ssim", "psnr"])

    def write_csv(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False, float_format="%.6f")


@dataclass
class TrainLog:
    """Per-iteration training records in (epoch, step) order."""

    columns: list[str]
    records: list[dict[str, float]] = field(default_factory=list)

    def append(self, epoch: int, step: int, **values: float) -> None:
        if self.records:
            last = self.records[-1]
            if (epoch, step) <= (last["epoch"], last["step"]):
                raise ValueError(
                    f"log entry ({epoch}, {step}) does not follow "
                    f"({last['epoch']:.0f}, {last['step']:.0f})"
                )
        missing = set(self.columns) - set(values)
        if missing:
            raise ValueError(f"log entry is missing columns: {sorted(missing)}")
        bad = [name for name, value in values.items() if not math.isfinite(value)]
        if bad:
            raise ValueError(f"non-finite log values for {bad}")
        record: dict[str, float] = {"epoch": epoch, "step": step}
        record.update({name: float(values[name]) for name in self.columns})
        self.records.append(record)

    def column(self, name: str) -> list[float]:
        return [record[name] for record in self.records]

    def __len__(self) -> int:
        return len(self.records)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.records, columns=["epoch", "step", *self.columns])
        return frame.astype({"epoch": int, "step": int})

    def write_csv(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        self.to_frame().to_csv(path, index=False)
