"""Single-image room reconstruction with CAD models.

Vanishing-point calibration, cuboid room layout, CAD retrieval and
placement, render-and-match pose refinement, and scene-level metrics.
"""

from .config import Config, load_config
from .errors import RoomCadError, StageError
from .geometry import Camera
from .scene import RoomBox, Scene, SceneObject, WindowPlacement

__version__ = "0.1.0"

__all__ = [
    "Camera",
    "Config",
    "RoomBox",
    "RoomCadError",
    "Scene",
    "SceneObject",
    "StageError",
    "WindowPlacement",
    "load_config",
    "__version__",
]
