"""Training loop, batch objective, and whole-image prediction."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..losses import LOSS_KINDS, compute_loss, loss_cosine
from ..tiling import TileGrid, extract_patches, stitch
from .optim import NadamState, nadam_step
from .unet import ParamStore, UNetConfig, backward, forward, init_params

log = logging.getLogger(__name__)


class TrainingDiverged(RuntimeError):
    pass


def make_targets(config: UNetConfig, y) -> np.ndarray:
    """Convert masks or fuzzy rasters ``(N, H, W)`` into ``(N, H, W, out_channels)`` targets.

    Integer masks become one-hot stacks.  Float rasters are foreground
    memberships; with a 2-class softmax the background channel gets the
    complement.  A 4D float array is taken as already stacked.
    """
    y = np.asarray(y)
    k = config.out_channels
    if y.ndim == 4:
        if y.shape[-1] != k:
            raise ValueError(f"target has {y.shape[-1]} channels, model outputs {k}")
        return y.astype(np.float64)
    if np.issubdtype(y.dtype, np.integer) or y.dtype == bool:
        y = y.astype(np.int64)
        if y.min(initial=0) < 0 or y.max(initial=0) >= config.classes:
            raise ValueError("mask values out of class range")
        if k == 1:
            if config.classes != 2:
                raise ValueError("sigmoid head supports binary masks only")
            return y[..., None].astype(np.float64)
        return np.eye(k)[y]
    y = y.astype(np.float64)
    if k == 1:
        return y[..., None]
    if k != 2:
        raise ValueError("single-channel fuzzy targets need a 2-class or sigmoid model")
    return np.stack([1.0 - y, y], axis=-1)


def objective(kind: str, probs: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Batch loss and ``dloss/dprobs``.

    Cosine is evaluated per sample over the non-background channels and
    averaged over the batch; the other losses average over every element.
    """
    if kind != "cosine":
        return compute_loss(kind, probs, targets)
    n = probs.shape[0]
    fg = slice(1, None) if probs.shape[-1] > 1 else slice(None)
    grad = np.zeros_like(probs)
    total = 0.0
    for i in range(n):
        loss, g = loss_cosine(probs[i, ..., fg], targets[i, ..., fg])
        total += loss / n
        grad[i, ..., fg] = g / n
    return total, grad


def loss_and_grads(config, params, kind, images, targets):
    probs, cache = forward(config, params, images)
    loss, dprobs = objective(kind, probs, targets)
    return loss, backward(config, params, cache, dprobs)


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    init_seq, shuffle_seq = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(init_seq), np.random.default_rng(shuffle_seq)


def seeded_init(config: UNetConfig, seed: int) -> ParamStore:
    """The initial parameters :func:`train` starts from for ``seed``."""
    return init_params(config, _streams(seed)[0])


@dataclass
class TrainResult:
    params: ParamStore
    history: list[float]
    state: NadamState = field(repr=False)
    steps: int = 0


def train(images, targets, config: UNetConfig, loss: str = "bce-full", epochs: int = 10,
          seed: int = 0, batch_size: int = 4, lr: float = 5e-4, lr_decay: float = 0.97,
          max_steps: int | None = None, init: ParamStore | None = None) -> TrainResult:
    """Fit the network with Nadam on ``images`` (N, H, W, B) against ``targets``.

    ``targets`` are hard masks or fuzzy rasters (see :func:`make_targets`).
    Initialisation and shuffling are both derived from ``seed``.  The
    history holds the sample-weighted mean training loss of each epoch.
    """
    if loss not in LOSS_KINDS:
        raise ValueError(f"unknown loss {loss!r}")
    images = np.asarray(images, dtype=np.float64)
    if len(images) == 0:
        raise ValueError("empty training set")
    y = make_targets(config, targets)
    if y.shape[:3] != images.shape[:3]:
        raise ValueError(f"images {images.shape} and targets {y.shape} disagree")

    init_rng, shuffle_rng = _streams(seed)
    params = init.copy() if init is not None else init_params(config, init_rng)
    state = NadamState(lr0=lr, decay=lr_decay)
    history: list[float] = []
    steps = 0
    n = len(images)
    for epoch in range(epochs):
        order = shuffle_rng.permutation(n)
        total = 0.0
        seen = 0
        for start in range(0, n, batch_size):
            if max_steps is not None and steps >= max_steps:
                break
            idx = order[start:start + batch_size]
            value, grads = loss_and_grads(config, params, loss, images[idx], y[idx])
            if not np.isfinite(value):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, step {steps}")
            nadam_step(params, grads, state, epoch)
            total += value * len(idx)
            seen += len(idx)
            steps += 1
        if seen == 0:
            break
        history.append(total / seen)
        log.info("epoch %d loss %.6f lr %.3g", epoch, history[-1], state.lr(epoch))
    return TrainResult(params, history, state, steps)


def predict_image(config: UNetConfig, params: ParamStore, image, patch: int,
                  batch_size: int = 8) -> np.ndarray:
    """Probability map ``(H, W, out_channels)`` for an arbitrarily sized image.

    The image is tiled without overlap (reflect padding at the border) and
    predictions are stitched back and cropped.
    """
    image = np.asarray(image, dtype=np.float64)
    if patch % 2 ** config.depth:
        raise ValueError(f"patch {patch} not divisible by {2 ** config.depth}")
    grid = TileGrid(patch, patch, "reflect")
    tiles = extract_patches(image, grid)
    outputs = []
    for start in range(0, len(tiles), batch_size):
        chunk = tiles[start:start + batch_size]
        probs, _ = forward(config, params, np.stack([t for t, _, _ in chunk]))
        outputs.extend((p, r, c) for p, (_, r, c) in zip(probs, chunk))
    return stitch(outputs, image.shape[0], image.shape[1], patch, patch)
