import numpy as np


def central_difference(f, x, h=1e-5):
    """Numerical gradient of scalar ``f`` at array ``x`` (x is restored afterwards)."""
    grad = np.zeros_like(x, dtype=np.float64)
    for idx in np.ndindex(x.shape):
        old = x[idx]
        x[idx] = old + h
        plus = f(x)
        x[idx] = old - h
        minus = f(x)
        x[idx] = old
        grad[idx] = (plus - minus) / (2 * h)
    return grad


def relative_error(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    if scale == 0:
        return 0.0
    return float(np.linalg.norm(a - b) / scale)


def model_gradient_error(seed, loss="bce-full", head="softmax", size=8):
    """Worst per-tensor relative error between backprop and central differences.

    Biases are drawn at random so no ReLU sits exactly on its kink, which
    would make the one-sided derivatives disagree.
    """
    from fuzzyseg.model import UNetConfig, init_params, loss_and_grads, make_targets

    config = UNetConfig(in_channels=3, classes=2, depth=1, base_channels=2, head=head)
    rng = np.random.default_rng(seed)
    params = init_params(config, rng)
    for key in params:
        if key.endswith(".b"):
            params[key] = rng.uniform(-0.3, 0.3, size=params[key].shape)
    images = rng.random((2, size, size, 3))
    targets = make_targets(config, rng.random((2, size, size)))
    _, grads = loss_and_grads(config, params, loss, images, targets)
    worst = 0.0
    for key in params:
        numeric = central_difference(
            lambda _: loss_and_grads(config, params, loss, images, targets)[0], params[key])
        worst = max(worst, relative_error(grads[key], numeric))
    return worst
