"""
Frame-wise train/test split.
"""
import logging
from typing import Tuple

import numpy as np

from deepradar.errors import ConfigError
from deepradar.scene.dataset import Dataset
from deepradar.utils.random_streams import SPLIT, stream

logger = logging.getLogger(__name__)


def split_dataset(dataset: Dataset, fraction: float = 0.9, seed: int = 0) -> Tuple[Dataset, Dataset]:
    """
    Randomly partition frames into train and test subsets.

    Both subsets keep dataset order and the frames' original indices.

    Args:
        dataset: Frames to split (at least 2)
        fraction: Share of frames used for training, in (0, 1)
        seed: Split seed

    Returns:
        (train, test)
    """
    if not 0.0 < fraction < 1.0:
        raise ConfigError(f"split fraction must lie in (0, 1), got {fraction}")
    n = len(dataset)
    if n < 2:
        raise ConfigError(f"cannot split a dataset of {n} frame(s)")
    n_train = min(max(int(round(fraction * n)), 1), n - 1)
    order = stream(seed, SPLIT).permutation(n)
    train = np.sort(order[:n_train])
    test = np.sort(order[n_train:])
    logger.info(f"Split {n} frames into {len(train)} train / {len(test)} test (seed {seed})")
    return dataset.subset(train), dataset.subset(test)
