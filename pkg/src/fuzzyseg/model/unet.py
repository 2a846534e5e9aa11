"""A compact U-Net with hand-written forward and backward passes.

Tensors are NHWC float64.  Per encoder level: two 3x3 conv+ReLU, then 2x2
max-pool.  Per decoder level: nearest-neighbour 2x upsample, a linear 3x3
conv, concatenation with the skip (skip channels first), then two 3x3
conv+ReLU.  A 1x1 conv produces the logits, followed by a softmax over C
classes or a sigmoid on a single channel.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


@dataclass(frozen=True)
class UNetConfig:
    in_channels: int = 3
    classes: int = 2
    depth: int = 2
    base_channels: int = 8
    head: str = "softmax"

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.base_channels < 1 or self.in_channels < 1:
            raise ValueError("channel counts must be >= 1")
        if self.head not in ("softmax", "sigmoid"):
            raise ValueError(f"head must be 'softmax' or 'sigmoid', got {self.head!r}")
        if self.head == "softmax" and self.classes < 2:
            raise ValueError("softmax head needs at least 2 classes")

    @property
    def out_channels(self) -> int:
        return self.classes if self.head == "softmax" else 1

    def width(self, level: int) -> int:
        return self.base_channels * 2 ** level

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "UNetConfig":
        return cls(**{k: data[k] for k in ("in_channels", "classes", "depth",
                                             "base_channels", "head") if k in data})

    def layer_shapes(self) -> dict[str, tuple[int, int, int]]:
        """Ordered ``name -> (out_ch, in_ch, kernel)`` for every conv layer."""
        shapes = {}
        cin = self.in_channels
        for lvl in range(self.depth):
            c = self.width(lvl)
            shapes[f"down{lvl}.conv1"] = (c, cin, 3)
            shapes[f"down{lvl}.conv2"] = (c, c, 3)
            cin = c
        cb = self.width(self.depth)
        shapes["bottleneck.conv1"] = (cb, cin, 3)
        shapes["bottleneck.conv2"] = (cb, cb, 3)
        cin = cb
        for lvl in reversed(range(self.depth)):
            c = self.width(lvl)
            shapes[f"up{lvl}.upconv"] = (c, cin, 3)
            shapes[f"up{lvl}.conv1"] = (c, 2 * c, 3)
            shapes[f"up{lvl}.conv2"] = (c, c, 3)
            cin = c
        shapes["head"] = (self.out_channels, cin, 1)
        return shapes


class ParamStore(dict):
    """Named parameter arrays; ``version`` is bumped whenever they are updated in place."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.version = 0

    def copy(self) -> "ParamStore":
        return ParamStore({k: v.copy() for k, v in self.items()})


def init_params(config: UNetConfig, seed: int | np.random.Generator = 0) -> ParamStore:
    """He-uniform conv kernels, zero biases."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    params = ParamStore()
    for name, (cout, cin, k) in config.layer_shapes().items():
        limit = math.sqrt(6.0 / (cin * k * k))
        params[f"{name}.w"] = rng.uniform(-limit, limit, size=(cout, cin, k, k))
        params[f"{name}.b"] = np.zeros(cout)
    return params


def zero_params(config: UNetConfig) -> ParamStore:
    params = ParamStore()
    for name, (cout, cin, k) in config.layer_shapes().items():
        params[f"{name}.w"] = np.zeros((cout, cin, k, k))
        params[f"{name}.b"] = np.zeros(cout)
    return params


def check_params(config: UNetConfig, params: dict) -> None:
    for name, (cout, cin, k) in config.layer_shapes().items():
        for key, shape in ((f"{name}.w", (cout, cin, k, k)), (f"{name}.b", (cout,))):
            if key not in params:
                raise KeyError(f"missing parameter {key!r}")
            if params[key].shape != shape:
                raise ValueError(f"parameter {key!r} has shape {params[key].shape}, expected {shape}")
            if not np.all(np.isfinite(params[key])):
                raise ValueError(f"parameter {key!r} has non-finite values")


# --- primitive layers -------------------------------------------------------

def _conv(x, w, b):
    n, h, wd, cin = x.shape
    cout, _, k, _ = w.shape
    p = k // 2
    if p:
        x = np.pad(x, ((0, 0), (p, p), (p, p), (0, 0)))
    cols = sliding_window_view(x, (k, k), axis=(1, 2)).reshape(n * h * wd, cin * k * k)
    out = cols @ w.reshape(cout, -1).T + b
    return out.reshape(n, h, wd, cout), cols


def _conv_backward(g, cols, w, in_shape, need_dx=True):
    n, h, wd, cin = in_shape
    cout, _, k, _ = w.shape
    gf = g.reshape(-1, cout)
    dw = (gf.T @ cols).reshape(w.shape)
    db = gf.sum(axis=0)
    if not need_dx:
        return None, dw, db
    dcols = (gf @ w.reshape(cout, -1)).reshape(n, h, wd, cin, k, k)
    p = k // 2
    dxp = np.zeros((n, h + 2 * p, wd + 2 * p, cin))
    for i in range(k):
        for j in range(k):
            dxp[:, i:i + h, j:j + wd, :] += dcols[..., i, j]
    return dxp[:, p:p + h, p:p + wd, :], dw, db


def _maxpool(x):
    n, h, w, c = x.shape
    win = x.reshape(n, h // 2, 2, w // 2, 2, c).transpose(0, 1, 3, 5, 2, 4).reshape(n, h // 2, w // 2, c, 4)
    idx = np.argmax(win, axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return out, idx


def _maxpool_backward(g, idx, in_shape):
    n, h, w, c = in_shape
    dwin = np.zeros(g.shape + (4,))
    np.put_along_axis(dwin, idx[..., None], g[..., None], axis=-1)
    return dwin.reshape(n, h // 2, w // 2, c, 2, 2).transpose(0, 1, 4, 2, 5, 3).reshape(in_shape)


def _upsample(x):
    return x.repeat(2, axis=1).repeat(2, axis=2)


def _upsample_backward(g):
    n, h, w, c = g.shape
    return g.reshape(n, h // 2, 2, w // 2, 2, c).sum(axis=(2, 4))


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


# --- network ----------------------------------------------------------------

def _as_batch(config: UNetConfig, batch) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 3:
        x = x[None]
    if x.ndim != 4 or x.shape[-1] != config.in_channels:
        raise ValueError(f"expected (N, H, W, {config.in_channels}) input, got {x.shape}")
    step = 2 ** config.depth
    if x.shape[1] % step or x.shape[2] % step:
        raise ValueError(f"spatial size {x.shape[1:3]} not divisible by {step}")
    return x


def forward(config: UNetConfig, params: ParamStore, batch) -> tuple[np.ndarray, dict]:
    """Run the network on ``(N, H, W, in_channels)`` images.

    Returns per-pixel probabilities of shape ``(N, H, W, out_channels)`` and
    the activation cache needed by :func:`backward`.
    """
    x = _as_batch(config, batch)
    tape: dict = {"token": (id(params), getattr(params, "version", None)), "input_shape": x.shape}

    def conv(h, name, relu):
        out, cols = _conv(h, params[f"{name}.w"], params[f"{name}.b"])
        tape[name] = (cols, h.shape)
        if relu:
            mask = out > 0
            tape[name + ".relu"] = mask
            out = out * mask
        return out

    h = x
    for lvl in range(config.depth):
        h = conv(h, f"down{lvl}.conv1", True)
        h = conv(h, f"down{lvl}.conv2", True)
        tape[f"skip{lvl}"] = h.shape[-1]
        skip = h
        h, idx = _maxpool(h)
        tape[f"down{lvl}.pool"] = (idx, skip.shape)
        tape[f"skip{lvl}.value"] = skip
    h = conv(h, "bottleneck.conv1", True)
    h = conv(h, "bottleneck.conv2", True)
    for lvl in reversed(range(config.depth)):
        h = conv(_upsample(h), f"up{lvl}.upconv", False)
        h = np.concatenate([tape.pop(f"skip{lvl}.value"), h], axis=-1)
        h = conv(h, f"up{lvl}.conv1", True)
        h = conv(h, f"up{lvl}.conv2", True)
    logits = conv(h, "head", False)
    probs = softmax(logits) if config.head == "softmax" else sigmoid(logits)
    tape["probs"] = probs
    return probs, tape


def backward(config: UNetConfig, params: ParamStore, cache: dict, grad_out) -> dict[str, np.ndarray]:
    """Parameter gradients given ``dloss/dprobs`` for the cached forward pass."""
    if cache.get("token") != (id(params), getattr(params, "version", None)):
        raise ValueError("stale cache: parameters changed since the forward pass")
    probs = cache["probs"]
    g = np.asarray(grad_out, dtype=np.float64)
    if g.shape != probs.shape:
        raise ValueError(f"gradient shape {g.shape} does not match output {probs.shape}")
    if config.head == "softmax":
        g = probs * (g - np.sum(g * probs, axis=-1, keepdims=True))
    else:
        g = g * probs * (1.0 - probs)

    grads: dict[str, np.ndarray] = {}

    def conv_back(g, name, relu, need_dx=True):
        if relu:
            g = g * cache[name + ".relu"]
        cols, in_shape = cache[name]
        dx, grads[f"{name}.w"], grads[f"{name}.b"] = _conv_backward(
            g, cols, params[f"{name}.w"], in_shape, need_dx)
        return dx

    g = conv_back(g, "head", False)
    skip_grads = {}
    for lvl in range(config.depth):
        g = conv_back(g, f"up{lvl}.conv2", True)
        g = conv_back(g, f"up{lvl}.conv1", True)
        c = cache[f"skip{lvl}"]
        skip_grads[lvl] = g[..., :c]
        g = conv_back(g[..., c:], f"up{lvl}.upconv", False)
        g = _upsample_backward(g)
    g = conv_back(g, "bottleneck.conv2", True)
    g = conv_back(g, "bottleneck.conv1", True)
    for lvl in reversed(range(config.depth)):
        idx, in_shape = cache[f"down{lvl}.pool"]
        g = _maxpool_backward(g, idx, in_shape) + skip_grads[lvl]
        g = conv_back(g, f"down{lvl}.conv2", True)
        g = conv_back(g, f"down{lvl}.conv1", True, need_dx=lvl > 0)
    return {k: grads[k] for k in params}


def assign_classes(pred, threshold: float = 0.5) -> np.ndarray:
    """Hard labels from probabilities (..., K).

    K == 1 is a sigmoid output: foreground where ``p >= threshold``.
    Otherwise argmax over channels, ties going to the lower class index.
    """
    pred = np.asarray(pred)
    if pred.shape[-1] == 1:
        if not 0.0 < threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
        return (pred[..., 0] >= threshold).astype(np.uint8)
    return np.argmax(pred, axis=-1).astype(np.uint8)
