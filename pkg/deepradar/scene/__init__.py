"""
Scene rasters, object lists, radar frames and the dataset format.
"""
from deepradar.scene.dataset import Dataset, DatasetBatch, DatasetManifest, read_dataset, write_dataset
from deepradar.scene.grid import (
    RadarFrame,
    SceneRaster,
    denormalize_frame,
    denormalize_power,
    normalize_frame,
    normalize_power,
    rasterize_terrain,
    render_points,
)
from deepradar.scene.heatmap import encode_pgm, write_pgm
from deepradar.scene.objects import N_FEATURES, OBJECT_CAPACITY, decode_object_list, encode_object_list
