"""
Binary PGM (P5) heatmap export.

Pixel value = round(255 * normalized power). Columns are azimuth bins,
rows are range bins with the far range on the top row.
"""
import logging
from pathlib import Path
from typing import Union

import numpy as np

from deepradar.errors import DataIOError
from deepradar.scene.grid import RadarFrame, normalize_frame

logger = logging.getLogger(__name__)


def pgm_header(n_range: int, n_azimuth: int) -> bytes:
    return f"P5 {n_azimuth} {n_range} 255\n".encode("ascii")


def encode_pgm(frame: RadarFrame) -> bytes:
    values = normalize_frame(frame)[..., 0]
    pixels = np.clip(np.round(255.0 * values.astype(np.float64)), 0, 255).astype(np.uint8)
    return pgm_header(*frame.spec.shape) + pixels[::-1].tobytes(order="C")


def write_pgm(path: Union[str, Path], frame: RadarFrame) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_pgm(frame))
    except OSError as e:
        raise DataIOError(f"cannot write heatmap {path}: {e}") from e
    logger.debug(f"Wrote heatmap {path}")
