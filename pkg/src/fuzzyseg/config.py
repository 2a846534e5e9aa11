"""Pipeline configuration: defaults < config file < command-line overrides.

The config file is plain ``key = value`` lines (``#`` starts a comment).
Keys are the field names of :class:`PipelineConfig`; list-valued keys take
comma-separated values.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any

from .fuzzify import KernelSpec
from .geometry import GeoTransform
from .losses import LOSS_KINDS
from .model import UNetConfig
from .synth import SceneSpec
from .tiling import TileGrid


@dataclass
class PipelineConfig:
    # paths
    image_dir: str = "images"
    annotation_dir: str = "annotations"
    mask_dir: str = "masks"
    fuzzy_dir: str = "fuzzy"
    prediction_dir: str = "predictions"
    output_dir: str = "out"
    checkpoint: str = ""
    # raster geometry
    origin_x: float = 0.0
    origin_y: float = 0.0
    resolution: float = 0.0025
    # fuzzification
    sigma_px: float = 4.0
    truncation: float = 3.0
    kernel_variant: str = "standard"
    kernel_norm: str = "sum-to-one"
    padding: str = "reflect"
    # tiling
    patch: int = 640
    stride: int = 0
    pad_policy: str = "reflect"
    # model and training
    in_channels: int = 3
    classes: int = 2
    depth: int = 2
    base_channels: int = 8
    head: str = "softmax"
    loss: str = "bce-full"
    target: str = "fuzzy"
    lr: float = 5e-4
    lr_decay: float = 0.97
    batch_size: int = 4
    epochs: int = 10
    max_steps: int = 0
    seed: int = 0
    threshold: float = 0.5
    # synthetic experiment
    scene_size: int = 32
    n_plants: int = 3
    radius_min: float = 2.5
    radius_max: float = 5.0
    n_train: int = 40
    n_test: int = 16
    noise_levels: tuple[float, ...] = (0.0, 4.0)
    radius_error: float = 0.0
    dropout_prob: float = 0.0
    spurious_prob: float = 0.0
    experiment_losses: tuple[str, ...] = ("bce-paper", "bce-full", "mse", "cosine")
    experiment_epochs: int = 15

    def validate(self) -> None:
        self.geo_transform()
        self.kernel_spec()
        self.tile_grid()
        self.unet_config()
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"loss must be one of {', '.join(LOSS_KINDS)}, got {self.loss!r}")
        bad = [k for k in self.experiment_losses if k not in LOSS_KINDS]
        if bad:
            raise ValueError(f"unknown experiment losses: {', '.join(bad)}")
        if self.target not in ("fuzzy", "hard"):
            raise ValueError(f"target must be 'fuzzy' or 'hard', got {self.target!r}")
        if self.padding not in ("zero", "reflect"):
            raise ValueError(f"padding must be 'zero' or 'reflect', got {self.padding!r}")
        if self.patch % 2 ** self.depth:
            raise ValueError(f"patch {self.patch} must be divisible by 2**depth = {2 ** self.depth}")
        if self.epochs < 0 or self.batch_size < 1 or self.max_steps < 0:
            raise ValueError("epochs/max_steps must be >= 0 and batch_size >= 1")
        if self.lr <= 0 or not 0 < self.lr_decay <= 1:
            raise ValueError("lr must be positive and lr_decay in (0, 1]")
        self.scene_spec(0.0)

    def geo_transform(self) -> GeoTransform:
        return GeoTransform(self.origin_x, self.origin_y, self.resolution)

    def kernel_spec(self) -> KernelSpec:
        return KernelSpec(self.sigma_px, self.truncation, self.kernel_variant, self.kernel_norm)

    def tile_grid(self) -> TileGrid:
        return TileGrid(self.patch, self.stride or self.patch, self.pad_policy)

    def unet_config(self) -> UNetConfig:
        return UNetConfig(self.in_channels, self.classes, self.depth, self.base_channels, self.head)

    def scene_spec(self, jitter_px: float, seed: int = 0) -> SceneSpec:
        return SceneSpec(height=self.scene_size, width=self.scene_size, n_plants=self.n_plants,
                         radius_min=self.radius_min, radius_max=self.radius_max,
                         jitter_px=jitter_px, radius_error=self.radius_error,
                         dropout_prob=self.dropout_prob, spurious_prob=self.spurious_prob,
                         seed=seed)

    def checkpoint_path(self) -> Path:
        return Path(self.checkpoint) if self.checkpoint else Path(self.output_dir) / "model.unc"


_FIELD_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _coerce(key: str, raw: Any) -> Any:
    if key not in _FIELD_TYPES:
        raise KeyError(f"unknown config key {key!r}")
    if not isinstance(raw, str):
        return raw
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    if kind == "int":
        return int(raw)
    if kind == "float":
        return float(raw)
    if kind.startswith("tuple[float"):
        return tuple(float(v) for v in raw.split(",") if v.strip())
    if kind.startswith("tuple[str"):
        return tuple(v.strip() for v in raw.split(",") if v.strip())
    return raw


def read_config_file(path: str | Path) -> dict[str, Any]:
    text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    parser.read_string("[fuzzyseg]\n" + text)
    return {key.replace("-", "_"): value for key, value in parser["fuzzyseg"].items()}


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> PipelineConfig:
    values: dict[str, Any] = {}
    if path:
        values.update(read_config_file(path))
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    cfg = PipelineConfig(**{k: _coerce(k, v) for k, v in values.items()})
    cfg.validate()
    return cfg


def dump_config(cfg: PipelineConfig) -> str:
    lines = []
    for key, value in dataclasses.asdict(cfg).items():
        if isinstance(value, (tuple, list)):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
