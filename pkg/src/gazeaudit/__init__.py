"""Driver-attention dataset auditing and gaze-prediction benchmarking."""

__version__ = "0.1.0"

from .errors import (
    AnnotationError,
    AuditError,
    DegenerateGeometryError,
    DegenerateMapError,
    FormatError,
    GazeAuditError,
    ManifestError,
    MetricError,
    OsmError,
    ProjectionError,
    RobustFitError,
    SegmentationError,
    ZeroMassError,
)
from .model import (
    AnnotationDoc,
    ContextEvent,
    DatasetManifest,
    Fixation,
    GazeSample,
    SaliencyMap,
    ScenarioWindow,
    Segment,
    SegmentationConfig,
    Span,
    SpeedSeries,
    TelemetrySample,
    VideoEntry,
)

__all__ = [
    "AnnotationDoc",
    "AnnotationError",
    "AuditError",
    "ContextEvent",
    "DatasetManifest",
    "DegenerateGeometryError",
    "DegenerateMapError",
    "Fixation",
    "FormatError",
    "GazeAuditError",
    "GazeSample",
    "ManifestError",
    "MetricError",
    "OsmError",
    "ProjectionError",
    "RobustFitError",
    "SaliencyMap",
    "ScenarioWindow",
    "Segment",
    "SegmentationConfig",
    "SegmentationError",
    "Span",
    "SpeedSeries",
    "TelemetrySample",
    "VideoEntry",
    "ZeroMassError",
    "__version__",
]
