"""
Fixed-capacity object list encoding.

Row layout: x, y, theta, speed, then a one-hot over
(car, ccr, pellets_bag, metal_frame, unused). Unused rows are zero except
for the unused flag.
"""
import logging
from typing import List, Sequence

import numpy as np

from deepradar.errors import ConfigError, ShapeError
from deepradar.models.scene import ObjectClass, SceneObject

logger = logging.getLogger(__name__)

OBJECT_CAPACITY = 8
POSE_FEATURES = 4
N_CLASSES = len(ObjectClass)
N_FEATURES = POSE_FEATURES + N_CLASSES


def encode_object_list(objects: Sequence[SceneObject], capacity: int = OBJECT_CAPACITY) -> np.ndarray:
    """
    Encode objects into a capacity x 1 x n_features float32 tensor.

    Args:
        objects: Objects in the order they should occupy rows
        capacity: Number of rows

    Returns:
        Encoded object list

    Raises:
        ConfigError: More objects than rows
    """
    if len(objects) > capacity:
        raise ConfigError(f"object list holds {len(objects)} objects but capacity is {capacity}")
    table = np.zeros((capacity, 1, N_FEATURES), dtype=np.float32)
    table[:, 0, POSE_FEATURES + ObjectClass.UNUSED.index] = 1.0
    for row, obj in enumerate(objects):
        if obj.object_class is ObjectClass.UNUSED:
            raise ConfigError("objects of class 'unused' cannot be encoded")
        table[row, 0, :POSE_FEATURES] = (obj.x, obj.y, obj.theta, obj.speed)
        table[row, 0, POSE_FEATURES + ObjectClass.UNUSED.index] = 0.0
        table[row, 0, POSE_FEATURES + obj.object_class.index] = 1.0
    return table


def decode_object_list(table: np.ndarray) -> List[SceneObject]:
    """Decode the used rows of an encoded object list, in row order."""
    table = np.asarray(table)
    if table.ndim != 3 or table.shape[1] != 1 or table.shape[2] != N_FEATURES:
        raise ShapeError(f"object list must be n_objects x 1 x {N_FEATURES}, got {table.shape}")
    classes = list(ObjectClass)
    objects = []
    for row in table[:, 0, :]:
        one_hot = row[POSE_FEATURES:]
        if np.count_nonzero(one_hot == 1.0) != 1 or np.count_nonzero(one_hot) != 1:
            raise ValueError(f"object row has an invalid one-hot class entry: {one_hot.tolist()}")
        object_class = classes[int(np.argmax(one_hot))]
        if object_class is ObjectClass.UNUSED:
            continue
        x, y, theta, speed = (float(v) for v in row[:POSE_FEATURES])
        objects.append(SceneObject(x=x, y=y, theta=theta, speed=speed, object_class=object_class))
    return objects
