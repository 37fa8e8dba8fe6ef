from src.evaluate.metrics import (
    error_map,
    evaluate,
    neighbor_average,
    neighbor_baseline,
    psnr,
    ssim,
)

__all__ = ["error_map", "evaluate", "neighbor_average", "neighbor_baseline", "psnr", "ssim"]
