"""
Pydantic domain models.
"""
from deepradar.models.architecture import ArchitectureConfig, ModelVariant
from deepradar.models.oracle import ClassSignature, OracleConfig
from deepradar.models.report import ClutterHistograms, ClutterPoint, EvalReport, PiecewiseUniformHist
from deepradar.models.scene import CorridorGeometry, ObjectClass, PolarGridSpec, SceneObject, TARGET_CLASSES
from deepradar.models.training import TrainConfig, TrainLog, TrainLogRecord
