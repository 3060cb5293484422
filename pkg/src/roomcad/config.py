"""Pipeline configuration: every tunable default in one place.

A config file is a JSON object whose keys are a subset of the fields below;
unknown keys are rejected so typos do not pass silently.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import RoomCadError


class ConfigError(RoomCadError):
    pass


@dataclass(frozen=True)
class Config:
    # vanishing points
    inlier_angle_deg: float = 3.0
    orthogonality_tol_deg: float = 2.0
    # layout
    rays_per_vp: int = 10
    camera_height: float = 1.6
    # detections
    score_threshold: float = 0.5
    nms_iou: float = 0.3
    # refinement
    refine: bool = True
    budget: int = 250
    rho_begin: float = 0.2
    rho_end: float = 1e-3
    optimizer: str = "cobyla"
    # features
    feature_levels: int = 5
    feature_bins: int = 8
    feature_cell: int = 8
    # evaluation
    voxel_size: float = 0.1
    voxel_near: float = 0.5
    voxel_far: float = 5.5
    map_threshold_max: float = 2.0
    map_threshold_step: float = 0.05

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.type == "int" and (isinstance(v, bool) or not isinstance(v, int)):
                raise ConfigError("bad-config", f"{f.name} must be an integer, got {v!r}")
            if f.type == "float" and (isinstance(v, bool) or not isinstance(v, (int, float))):
                raise ConfigError("bad-config", f"{f.name} must be a number, got {v!r}")
            if f.type == "float":
                object.__setattr__(self, f.name, float(v))
            if f.type == "bool" and not isinstance(v, bool):
                raise ConfigError("bad-config", f"{f.name} must be true or false, got {v!r}")
        if not 0 < self.nms_iou < 1:
            raise ConfigError("bad-config", "nms_iou must lie in (0, 1)")
        if self.camera_height <= 0:
            raise ConfigError("bad-config", "camera_height must be positive")
        if self.optimizer not in ("cobyla", "simplex"):
            raise ConfigError("bad-config", f"unknown optimizer {self.optimizer!r}")

    def with_overrides(self, **kw) -> "Config":
        data = asdict(self)
        for k, v in kw.items():
            if k not in data:
                raise ConfigError("bad-config", f"unknown config key {k!r}")
            data[k] = v
        return Config(**data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def load_config(path=None, **overrides) -> Config:
    cfg = Config()
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("bad-config", f"{path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("bad-config", "config file must hold a JSON object")
        cfg = cfg.with_overrides(**data)
    return cfg.with_overrides(**overrides) if overrides else cfg
