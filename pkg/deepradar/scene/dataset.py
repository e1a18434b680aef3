"""
Frame datasets and their binary file format.

Layout (little-endian)::

    b"DRSD"  u32 version  u32 manifest length  manifest JSON (UTF-8, canonical)
    n_frames fixed-stride records, each the f32 blocks
        raster [n_range x n_azimuth x 1], object list [n_objects x 1 x n_features],
        power [n_range x n_azimuth x 1]

Records sit at fixed offsets after the manifest, so a file can be memory-mapped.
"""
import hashlib
import io
import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from deepradar.config import canonical_json
from deepradar.errors import (
    ConfigError,
    DataIOError,
    DatasetHeaderError,
    DatasetVersionError,
    ManifestError,
    ShapeError,
    TruncatedPayloadError,
)
from deepradar.models.scene import PolarGridSpec, SceneObject
from deepradar.scene.grid import RadarFrame, SceneRaster
from deepradar.scene.objects import N_FEATURES, OBJECT_CAPACITY, decode_object_list

logger = logging.getLogger(__name__)

MAGIC = b"DRSD"
VERSION = 1
_PREFIX = struct.Struct("<4sII")


class DatasetManifest(BaseModel):
    """Header of a dataset file."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    n_frames: int = Field(..., ge=0)
    grid: PolarGridSpec
    n_objects: int = OBJECT_CAPACITY
    n_features: int = N_FEATURES
    generator_hash: str = ""
    seed: Optional[int] = None
    # Resolved generator config, echoed for provenance
    generator: Dict[str, Any] = Field(default_factory=dict)
    # Original frame indices when the file holds a subset; None means 0..n-1
    frame_indices: Optional[List[int]] = None

    @property
    def record_floats(self) -> int:
        cells = self.grid.n_range * self.grid.n_azimuth
        return 2 * cells + self.n_objects * self.n_features

    @property
    def record_bytes(self) -> int:
        return 4 * self.record_floats


class DatasetBatch(NamedTuple):
    rasters: np.ndarray
    objects: np.ndarray
    power: np.ndarray
    indices: np.ndarray


class Dataset:
    """
    Ordered frames sharing one grid.

    Arrays are float32: rasters (N, H, W, 1), objects (N, n_objects, 1,
    n_features), power in dB (N, H, W, 1). ``frame_indices`` keeps each
    frame's index in the dataset it was generated as, so per-frame random
    streams survive subsetting.
    """

    def __init__(self, manifest: DatasetManifest, rasters: np.ndarray, objects: np.ndarray, power: np.ndarray,
                 frame_indices: Optional[Sequence[int]] = None):
        self.rasters = np.ascontiguousarray(rasters, dtype=np.float32)
        self.objects = np.ascontiguousarray(objects, dtype=np.float32)
        self.power = np.ascontiguousarray(power, dtype=np.float32)
        n = self.rasters.shape[0]
        grid_shape = manifest.grid.shape + (1,)
        if self.rasters.shape[1:] != grid_shape or self.power.shape[1:] != grid_shape:
            raise ShapeError(f"raster/power shapes {self.rasters.shape}/{self.power.shape} do not match grid {grid_shape}")
        if self.objects.shape[1:] != (manifest.n_objects, 1, manifest.n_features):
            raise ShapeError(f"object list shape {self.objects.shape[1:]} does not match the manifest")
        if self.objects.shape[0] != n or self.power.shape[0] != n:
            raise ShapeError("rasters, object lists and power grids hold different frame counts")
        if manifest.n_frames != n:
            raise ManifestError(f"manifest frame count {manifest.n_frames} does not match {n} stored records")
        if frame_indices is None:
            frame_indices = manifest.frame_indices if manifest.frame_indices is not None else range(n)
        self.frame_indices = np.asarray(list(frame_indices), dtype=np.int64)
        if self.frame_indices.shape != (n,):
            raise ManifestError(f"{len(self.frame_indices)} frame indices for {n} frames")
        self.manifest = manifest

    @property
    def spec(self) -> PolarGridSpec:
        return self.manifest.grid

    def __len__(self) -> int:
        return self.rasters.shape[0]

    def raster(self, i: int) -> SceneRaster:
        return SceneRaster(spec=self.spec, layers=self.rasters[i])

    def frame(self, i: int) -> RadarFrame:
        return RadarFrame(spec=self.spec, power=self.power[i])

    def scene_objects(self, i: int) -> List[SceneObject]:
        return decode_object_list(self.objects[i])

    def batch(self, positions: Sequence[int]) -> DatasetBatch:
        positions = np.asarray(positions, dtype=np.int64)
        return DatasetBatch(self.rasters[positions], self.objects[positions], self.power[positions],
                            self.frame_indices[positions])

    def subset(self, positions: Sequence[int]) -> "Dataset":
        """Frames at the given positions, keeping their original frame indices."""
        positions = np.asarray(positions, dtype=np.int64)
        if positions.size and (positions.min() < 0 or positions.max() >= len(self)):
            raise ConfigError(f"subset positions outside [0, {len(self)})")
        indices = self.frame_indices[positions]
        manifest = self.manifest.model_copy(update={"n_frames": int(positions.size),
                                                    "frame_indices": [int(i) for i in indices]})
        return Dataset(manifest, self.rasters[positions], self.objects[positions], self.power[positions], indices)

    def fingerprint(self) -> str:
        """SHA-256 of the dataset's file encoding."""
        return hashlib.sha256(encode_dataset(self)).hexdigest()


def encode_dataset(dataset: Dataset) -> bytes:
    manifest = dataset.manifest
    if manifest.frame_indices is None and not np.array_equal(dataset.frame_indices, np.arange(len(dataset))):
        manifest = manifest.model_copy(update={"frame_indices": [int(i) for i in dataset.frame_indices]})
    manifest_bytes = canonical_json(manifest.model_dump(mode="json")).encode("utf-8")
    n = len(dataset)
    records = np.concatenate(
        [dataset.rasters.reshape(n, -1), dataset.objects.reshape(n, -1), dataset.power.reshape(n, -1)], axis=1
    ).astype("<f4")
    buf = io.BytesIO()
    buf.write(_PREFIX.pack(MAGIC, VERSION, len(manifest_bytes)))
    buf.write(manifest_bytes)
    buf.write(records.tobytes(order="C"))
    return buf.getvalue()


def decode_dataset(blob: bytes) -> Dataset:
    if len(blob) < _PREFIX.size:
        raise DatasetHeaderError(f"file of {len(blob)} bytes is too short for a dataset header")
    magic, version, manifest_len = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise DatasetHeaderError(f"not a dataset file (magic {magic!r})")
    if version != VERSION:
        raise DatasetVersionError(f"dataset format version {version} is not supported (expected {VERSION})")
    start = _PREFIX.size
    if start + manifest_len > len(blob):
        raise DatasetHeaderError("manifest extends past the end of the file")
    try:
        raw = json.loads(blob[start:start + manifest_len].decode("utf-8"))
        manifest = DatasetManifest.model_validate(raw)
    except (UnicodeDecodeError, ValueError, ValidationError) as e:
        raise DatasetHeaderError(f"undecodable dataset manifest: {e}") from e

    payload = memoryview(blob)[start + manifest_len:]
    stride = manifest.record_bytes
    if len(payload) % stride:
        raise TruncatedPayloadError(
            f"payload of {len(payload)} bytes is not a whole number of {stride}-byte records"
        )
    n = len(payload) // stride
    if n != manifest.n_frames:
        raise ManifestError(f"manifest promises {manifest.n_frames} frames but the file holds {n}")

    records = np.frombuffer(payload, dtype="<f4").reshape(n, manifest.record_floats).astype(np.float32)
    cells = manifest.grid.n_range * manifest.grid.n_azimuth
    obj = manifest.n_objects * manifest.n_features
    grid_shape = manifest.grid.shape + (1,)
    return Dataset(
        manifest,
        records[:, :cells].reshape((n,) + grid_shape),
        records[:, cells:cells + obj].reshape(n, manifest.n_objects, 1, manifest.n_features),
        records[:, cells + obj:].reshape((n,) + grid_shape),
    )


def write_dataset(path: Union[str, Path], dataset: Dataset) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode_dataset(dataset))
    except OSError as e:
        raise DataIOError(f"cannot write dataset {path}: {e}") from e
    logger.info(f"Wrote {len(dataset)} frames to {path}")


def read_dataset(path: Union[str, Path]) -> Dataset:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as e:
        raise DataIOError(f"cannot read dataset {path}: {e}") from e
    dataset = decode_dataset(blob)
    logger.info(f"Read {len(dataset)} frames from {path}")
    return dataset
