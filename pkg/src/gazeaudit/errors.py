"""Exception hierarchy for the gazeaudit toolkit.

Every domain failure raises a subclass of GazeAuditError so the CLI can
map them to a nonzero exit status without matching on message text.
"""


class GazeAuditError(Exception):
    """Base class for all toolkit errors."""


class ManifestError(GazeAuditError):
    """Dataset manifest is missing, malformed, or references absent files."""


class FormatError(GazeAuditError):
    """A data file violates its declared on-disk format."""


class AnnotationError(GazeAuditError):
    """An annotation document fails validation."""


class SegmentationError(GazeAuditError):
    """Telemetry segmentation received unusable input."""


class DegenerateGeometryError(GazeAuditError):
    """Point configuration does not determine a homography."""


class RobustFitError(GazeAuditError):
    """Robust estimation found no acceptable consensus set."""


class ProjectionError(GazeAuditError):
    """A point maps to infinity under the given homography."""


class ZeroMassError(GazeAuditError):
    """A map with zero total mass cannot be normalized."""


class MetricError(GazeAuditError):
    """Metric inputs are structurally invalid."""


class DegenerateMapError(MetricError):
    """Metric undefined on constant input; excluded from aggregation."""


class OsmError(GazeAuditError):
    """OSM extract is malformed or internally inconsistent."""


class AuditError(GazeAuditError):
    """Dataset audit received unusable input."""
