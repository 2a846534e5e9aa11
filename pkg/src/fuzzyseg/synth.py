"""Seeded synthetic plant scenes with controllable annotation noise.

Scenes are rendered in pixel units: world x equals column position and world
y equals ``height - row`` (see :func:`scene_geotransform`), so annotations
can be rasterized with :mod:`fuzzyseg.geometry` directly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .geometry import GeoTransform, PlantAnnotation


class PlacementError(RuntimeError):
    pass


@dataclass(frozen=True)
class SceneSpec:
    height: int = 32
    width: int = 32
    n_plants: int = 3
    radius_min: float = 2.5
    radius_max: float = 5.0
    plant_color: tuple[float, float, float] = (0.25, 0.55, 0.2)
    plant_color_std: float = 0.05
    background_color: tuple[float, float, float] = (0.55, 0.45, 0.35)
    background_color_std: float = 0.05
    pixel_noise: float = 0.04
    jitter_px: float = 0.0
    radius_error: float = 0.0
    dropout_prob: float = 0.0
    spurious_prob: float = 0.0
    allow_overlap: bool = False
    max_retries: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.height <= 0 or self.width <= 0:
            raise ValueError("scene size must be positive")
        if self.n_plants < 0:
            raise ValueError("n_plants must be >= 0")
        if not 0 < self.radius_min <= self.radius_max:
            raise ValueError("radius range must satisfy 0 < radius_min <= radius_max")
        for name in ("dropout_prob", "spurious_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.jitter_px < 0 or self.radius_error < 0:
            raise ValueError("noise magnitudes must be >= 0")
        if self.radius_error >= 1:
            raise ValueError("radius_error must be < 1 so radii stay positive")


def scene_geotransform(spec: SceneSpec) -> GeoTransform:
    return GeoTransform(origin_x=0.0, origin_y=float(spec.height), resolution=1.0)


def _place(spec: SceneSpec, rng: np.random.Generator) -> list[tuple[float, float, float]]:
    placed: list[tuple[float, float, float]] = []
    retries = 0
    while len(placed) < spec.n_plants:
        r = rng.uniform(spec.radius_min, spec.radius_max)
        x = rng.uniform(r, spec.width - r) if spec.width > 2 * r else spec.width / 2
        y = rng.uniform(r, spec.height - r) if spec.height > 2 * r else spec.height / 2
        if spec.allow_overlap or all((x - px) ** 2 + (y - py) ** 2 > (r + pr) ** 2
                                     for px, py, pr in placed):
            placed.append((x, y, r))
            continue
        retries += 1
        if retries > spec.max_retries:
            raise PlacementError(
                f"could not place {spec.n_plants} plants in {spec.height}x{spec.width} "
                f"after {spec.max_retries} retries")
    return placed


def perturb_annotations(annotations: list[PlantAnnotation], spec: SceneSpec,
                        rng: np.random.Generator) -> list[PlantAnnotation]:
    """Apply position jitter, radius error, dropout and spurious additions."""
    noisy = []
    for ann in annotations:
        dx, dy = rng.normal(0.0, 1.0, size=2) * spec.jitter_px
        scale = 1.0 + rng.uniform(-spec.radius_error, spec.radius_error)
        drop = rng.random() < spec.dropout_prob
        extra = rng.random() < spec.spurious_prob
        sx, sy = rng.uniform(0, spec.width), rng.uniform(0, spec.height)
        sr = rng.uniform(spec.radius_min, spec.radius_max)
        if not drop:
            noisy.append(PlantAnnotation(ann.id, ann.species_id, ann.center_x + dx,
                                         ann.center_y + dy, ann.diameter * scale))
        if extra:
            noisy.append(PlantAnnotation(f"{ann.id}-spurious", ann.species_id, sx, sy, 2 * sr))
    return noisy


def generate_scene(spec: SceneSpec) -> tuple[np.ndarray, list[PlantAnnotation], list[PlantAnnotation]]:
    """Render one scene.

    Returns ``(image, true_annotations, noisy_annotations)`` where the image is
    float64 ``(H, W, 3)`` in [0, 1].
    """
    rng = np.random.default_rng(spec.seed)
    discs = _place(spec, rng)
    h, w = spec.height, spec.width
    xs = np.arange(w) + 0.5
    ys = h - (np.arange(h) + 0.5)
    xx, yy = np.meshgrid(xs, ys)

    bg = np.asarray(spec.background_color) + rng.normal(0, spec.background_color_std, 3)
    image = np.broadcast_to(bg, (h, w, 3)).copy()
    true = []
    for i, (cx, cy, r) in enumerate(discs):
        color = np.asarray(spec.plant_color) + rng.normal(0, spec.plant_color_std, 3)
        d2 = (xx - cx) ** 2 + (yy - cy) ** 2
        inside = d2 <= r * r
        # brighter towards the centre
        shade = 1.0 + 0.25 * (1.0 - np.sqrt(d2[inside]) / r)
        image[inside] = color * shade[:, None]
        true.append(PlantAnnotation(f"p{i}", 1, float(cx), float(cy), float(2 * r)))
    image += rng.normal(0, spec.pixel_noise, size=image.shape)
    image = np.clip(image, 0.0, 1.0)
    noisy = perturb_annotations(true, spec, rng)
    return image, true, noisy


def generate_dataset(spec: SceneSpec, count: int, seed: int) -> list[tuple[np.ndarray, list, list]]:
    """``count`` scenes with independent seeds spawned from ``seed``."""
    seeds = np.random.SeedSequence(seed).generate_state(count, dtype=np.uint64)
    return [generate_scene(replace(spec, seed=int(s))) for s in seeds]

