from src.data.cine_io import (
    BadMagicError,
    CineFileHeader,
    CineFormatError,
    TruncatedPayloadError,
    VersionMismatchError,
    read_cine,
    write_cine,
)
from src.data.export import export_frames, write_pgm
from src.data.phantom import phantom_dataset, phantom_generate
from src.data.preprocess import erase_region, normalize_crop, paste_region, random_erase_center

__all__ = [
    "BadMagicError",
    "CineFileHeader",
    "CineFormatError",
    "TruncatedPayloadError",
    "VersionMismatchError",
    "erase_region",
    "export_frames",
    "normalize_crop",
    "paste_region",
    "phantom_dataset",
    "phantom_generate",
    "random_erase_center",
    "read_cine",
    "write_cine",
    "write_pgm",
]
