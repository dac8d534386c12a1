"""TOML configuration files and mapping -> config coercion.

A config file may carry [augmenter], [detector] and [metric] tables; every
key maps 1:1 onto the corresponding dataclass field and unknown keys raise
KeyError naming the offender, so typos fail loudly instead of silently
running defaults.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .augment import AugmentationConfig
from .court import DetectorConfig
from .errors import IoFailure, MissingFile

_AUG_FIELDS = {f.name for f in dataclasses.fields(AugmentationConfig)}
_DET_FIELDS = {f.name for f in dataclasses.fields(DetectorConfig)}
_METRIC_FIELDS = {"connectivity", "iou_threshold", "dpr_aggregation", "count_unmatched_in_dpr"}


@dataclass
class MetricConfig:
    connectivity: int = 4
    iou_threshold: float = 0.5
    dpr_aggregation: str = "micro"
    count_unmatched_in_dpr: bool = False

    def __post_init__(self):
        if self.connectivity not in (4, 8):
            raise ValueError(f"connectivity must be 4 or 8, got {self.connectivity}")
        if not 0 < self.iou_threshold <= 1:
            raise ValueError(f"iou_threshold must lie in (0, 1], got {self.iou_threshold}")


@dataclass
class ToolConfig:
    augmentation: AugmentationConfig
    detector: DetectorConfig
    metric: MetricConfig


def _reject_unknown(mapping, allowed, what):
    for key in mapping:
        if key not in allowed:
            raise KeyError(f"unknown {what} config key {key!r}")


def augmentation_config_from_mapping(mapping, base: AugmentationConfig | None = None) -> AugmentationConfig:
    mapping = dict(mapping)
    _reject_unknown(mapping, _AUG_FIELDS, "augmenter")
    for key in ("scale_range", "rotation_range", "output_size"):
        if key in mapping:
            mapping[key] = tuple(mapping[key])
    if "resize_scales" in mapping:
        mapping["resize_scales"] = tuple(tuple(p) for p in mapping["resize_scales"])
    values = dataclasses.asdict(base) if base is not None else {}
    values.update(mapping)
    return AugmentationConfig(**values)


def detector_config_from_mapping(mapping, base: DetectorConfig | None = None) -> DetectorConfig:
    mapping = dict(mapping)
    _reject_unknown(mapping, _DET_FIELDS, "detector")
    values = dataclasses.asdict(base) if base is not None else {}
    values.update(mapping)
    return DetectorConfig(**values)


def metric_config_from_mapping(mapping, base: MetricConfig | None = None) -> MetricConfig:
    mapping = dict(mapping)
    _reject_unknown(mapping, _METRIC_FIELDS, "metric")
    values = dataclasses.asdict(base) if base is not None else {}
    values.update(mapping)
    return MetricConfig(**values)


def load_config(path=None) -> ToolConfig:
    """Read a config file; None gives all defaults."""
    if path is None:
        return ToolConfig(AugmentationConfig(), DetectorConfig(), MetricConfig())
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    try:
        with open(path, "rb") as fh:
            payload = tomllib.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise IoFailure(f"{path}: invalid TOML: {exc}") from exc
    _reject_unknown(payload, {"augmenter", "detector", "metric"}, "top-level")
    return ToolConfig(
        augmentation=augmentation_config_from_mapping(payload.get("augmenter", {})),
        detector=detector_config_from_mapping(payload.get("detector", {})),
        metric=metric_config_from_mapping(payload.get("metric", {})),
    )
