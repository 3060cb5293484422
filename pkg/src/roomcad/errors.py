"""Exception types raised across the reconstruction pipeline.

Every error carries a short machine-readable ``code`` (e.g. ``"behind-camera"``)
so callers and the CLI can branch on the failure kind without parsing
messages.
"""


class RoomCadError(Exception):
    """Base class. ``code`` is a stable kebab-case identifier."""

    def __init__(self, code, message=None):
        self.code = code
        super().__init__(f"{code}: {message}" if message else code)


class GeometryError(RoomCadError):
    pass


class CalibrationError(RoomCadError):
    pass


class LayoutError(RoomCadError):
    pass


class DetectionError(RoomCadError):
    pass


class CadError(RoomCadError):
    pass


class FeatureError(RoomCadError):
    pass


class PlacementError(RoomCadError):
    pass


class RenderError(RoomCadError):
    pass


class OptimizeError(RoomCadError):
    pass


class MetricError(RoomCadError):
    pass


class SceneFormatError(RoomCadError):
    pass


class StageError(RoomCadError):
    """A pipeline stage failed; ``stage`` names it, ``cause`` is the original."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        code = getattr(cause, "code", type(cause).__name__)
        super().__init__(code, f"stage '{stage}' failed: {cause}")
