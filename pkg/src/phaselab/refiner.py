"""Artifact-removal operators for reconstructions.

The learned refiner is a small residual CNN: same-size convolutions with ReLU
between layers (the last layer is linear) and a global skip from input to
output. Images are scaled by 1/255 on the way in::

    refine(x) = clip(x + 255 * net(x / 255), 0, 255)

so a network with all-zero weights is exactly the identity. Training minimizes
the pixel-and-batch mean squared error of the unclipped scaled output with
mini-batch SGD and classical momentum (``v = mu*v - lr*g; w += v``).
"""
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import BadMagicError, MalformedHeaderError, TrainingDivergedError, TruncatedPayloadError

WEIGHTS_MAGIC = b"PRWTS01"
DEFAULT_ARCH = ((16, 3), (16, 3), (16, 3), (16, 3), (1, 3))


@dataclass(frozen=True)
class TrainParams:
    learning_rate: float = 1e-2
    momentum: float = 0.9
    epochs: int = 150
    batch_size: int = 8
    seed: int = 0
    zero_last_layer: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class RefinerWeights:
    """Ordered ``(kernel, bias)`` pairs; kernels are ``(out, in, kh, kw)``."""

    layers: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        layers = []
        prev = 1
        for i, (k, b) in enumerate(self.layers):
            k = np.ascontiguousarray(k, dtype=np.float64)
            b = np.ascontiguousarray(b, dtype=np.float64)
            if k.ndim != 4 or b.shape != (k.shape[0],):
                raise ValueError(f"layer {i}: bad kernel/bias shapes {k.shape}, {b.shape}")
            if k.shape[1] != prev:
                raise ValueError(f"layer {i}: expects {k.shape[1]} input channels, previous layer gives {prev}")
            if not (np.all(np.isfinite(k)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i}: non-finite parameters")
            layers.append((k, b))
            prev = k.shape[0]
        if not layers:
            raise ValueError("a refiner needs at least one layer")
        if prev != 1:
            raise ValueError(f"last layer must have 1 output channel, got {prev}")
        self.layers = layers

    def __call__(self, image):
        return refine(self, image)

    @property
    def n_params(self):
        return sum(k.size + b.size for k, b in self.layers)

    def copy(self):
        return RefinerWeights([(k.copy(), b.copy()) for k, b in self.layers], dict(self.meta))


def _kernel_shapes(arch):
    shapes = []
    prev = 1
    for out, k in arch:
        kh, kw = (k, k) if np.isscalar(k) else k
        shapes.append((out, prev, kh, kw))
        prev = out
    return shapes


def init_weights(arch=DEFAULT_ARCH, seed=0, zero_last=False):
    """Uniform ``[-a, a]`` kernels with ``a = sqrt(1 / fan_in)``, zero biases.

    With ``zero_last`` the final kernel is zeroed (after drawing it, so the
    other layers do not depend on the flag) and the network starts as the
    exact identity.
    """
    rng = np.random.default_rng(seed)
    layers = []
    shapes = _kernel_shapes(arch)
    for i, shape in enumerate(shapes):
        a = math.sqrt(1.0 / (shape[1] * shape[2] * shape[3]))
        kernel = rng.uniform(-a, a, shape)
        if zero_last and i == len(shapes) - 1:
            kernel[...] = 0.0
        layers.append((kernel, np.zeros(shape[0])))
    return RefinerWeights(layers, {"arch": [list(map(int, np.atleast_1d(a))) for a in arch], "init_seed": seed})


def zero_weights(arch=DEFAULT_ARCH):
    layers = [(np.zeros(s), np.zeros(s[0])) for s in _kernel_shapes(arch)]
    return RefinerWeights(layers, {"arch": [list(map(int, np.atleast_1d(a))) for a in arch]})


def _forward(weights, x):
    """Network output for scaled input batch ``x`` (B, 1, H, W) plus activations."""
    acts = [x]
    h = x
    last = len(weights.layers) - 1
    for i, (k, b) in enumerate(weights.layers):
        h = kernels.conv2d_forward(h, k, b)
        if i < last:
            h = np.maximum(h, 0.0)
        acts.append(h)
    return h, acts


def _backward(weights, acts, dout):
    grads = [None] * len(weights.layers)
    g = dout
    for i in range(len(weights.layers) - 1, -1, -1):
        k, _ = weights.layers[i]
        if i < len(weights.layers) - 1:
            g = g * (acts[i + 1] > 0)
        dx, dw, db = kernels.conv2d_backward(acts[i], k, g, need_dx=i > 0)
        grads[i] = (dw, db)
        g = dx
    return grads


def _batch_loss_and_grads(weights, xin, target, need_grads=True):
    net, acts = _forward(weights, xin)
    diff = xin + net - target
    with np.errstate(over="ignore", invalid="ignore"):
        # a diverging run overflows here; train() turns that into an error
        loss = float(np.mean(diff**2))
    if not need_grads:
        return loss, None
    dout = (2.0 / diff.size) * diff
    return loss, _backward(weights, acts, dout)


def _stack(images):
    return np.stack([np.asarray(im, dtype=np.float64) for im in images])[:, None] / 255.0


def refine(weights, image):
    """Apply the residual network to a single ``(n, n)`` image."""
    img = np.asarray(image, dtype=np.float64)
    net, _ = _forward(weights, img[None, None] / 255.0)
    return np.clip(img + 255.0 * net[0, 0], 0.0, 255.0)


def refine_batch(weights, images):
    x = _stack(images)
    net, _ = _forward(weights, x)
    return np.clip(255.0 * (x + net)[:, 0], 0.0, 255.0)


def dataset_loss(weights, dataset, batch_size=32):
    """Mean scaled MSE of the unclipped network output over ``dataset``."""
    total = 0.0
    count = 0
    for i in range(0, len(dataset), batch_size):
        chunk = dataset[i:i + batch_size]
        xin = _stack([d for d, _ in chunk])
        target = _stack([t for _, t in chunk])
        loss, _ = _batch_loss_and_grads(weights, xin, target, need_grads=False)
        total += loss * len(chunk)
        count += len(chunk)
    return total / count


def train(dataset, arch=DEFAULT_ARCH, params=TrainParams(), init=None):
    """Fit a refiner to ``(degraded, truth)`` pairs.

    Parameters
    ----------
    dataset : list of (ndarray, ndarray)
        Same-size image pairs on the [0, 255] scale.
    arch : sequence of (out_channels, kernel_size)
        Ignored when ``init`` is given.
    params : TrainParams
    init : RefinerWeights, optional
        Starting weights; defaults to
        ``init_weights(arch, params.seed, params.zero_last_layer)``.

    Returns
    -------
    weights : RefinerWeights
    loss_log : list of float
        Full-dataset loss before training (entry 0) and after every epoch.
    """
    if not dataset:
        raise ValueError("training set is empty")
    sides = {np.shape(d) for pair in dataset for d in pair}
    if len(sides) != 1:
        raise ValueError(f"training images differ in size: {sorted(sides)}")
    weights = init.copy() if init is not None else init_weights(arch, params.seed, params.zero_last_layer)
    velocity = [(np.zeros_like(k), np.zeros_like(b)) for k, b in weights.layers]
    xs = _stack([d for d, _ in dataset])
    ts = _stack([t for _, t in dataset])
    shuffle = np.random.default_rng(params.seed + 1)
    loss_log = [dataset_loss(weights, dataset)]
    lr, mu = params.learning_rate, params.momentum
    for epoch in range(params.epochs):
        order = shuffle.permutation(len(dataset))
        for start in range(0, len(order), params.batch_size):
            idx = order[start:start + params.batch_size]
            loss, grads = _batch_loss_and_grads(weights, xs[idx], ts[idx])
            if not math.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss at epoch {epoch + 1}")
            new_layers = []
            for i, ((k, b), (dk, dbias)) in enumerate(zip(weights.layers, grads)):
                vk, vb = velocity[i]
                vk = mu * vk - lr * dk
                vb = mu * vb - lr * dbias
                velocity[i] = (vk, vb)
                new_layers.append((k + vk, b + vb))
            weights.layers = new_layers
        epoch_loss = dataset_loss(weights, dataset)
        if not math.isfinite(epoch_loss):
            raise TrainingDivergedError(f"non-finite loss after epoch {epoch + 1}")
        loss_log.append(epoch_loss)
    weights.meta.update(
        n=int(np.shape(dataset[0][0])[0]),
        epochs=params.epochs,
        learning_rate=params.learning_rate,
        momentum=params.momentum,
        batch_size=params.batch_size,
        seed=params.seed,
        final_loss=loss_log[-1],
        zero_last_layer=params.zero_last_layer,
    )
    return weights, loss_log


def analytic_gradient(weights, sample):
    degraded, truth = sample
    _, grads = _batch_loss_and_grads(weights, _stack([degraded]), _stack([truth]))
    return grads


def gradient_check(weights, sample, n_params=50, h=1e-5, seed=0):
    """Max relative error between backprop and central differences.

    ``n_params`` parameters are drawn at random (all of them if fewer exist).
    Parameters whose analytic and numeric gradients are both zero are skipped.
    """
    degraded, truth = sample
    xin, target = _stack([degraded]), _stack([truth])
    grads = analytic_gradient(weights, sample)
    flat = [(li, which) for li in range(len(weights.layers)) for which in (0, 1)]
    sizes = [weights.layers[li][which].size for li, which in flat]
    total = sum(sizes)
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=min(n_params, total), replace=False)
    offsets = np.cumsum([0] + sizes)
    worst = 0.0
    for p in picks:
        slot = int(np.searchsorted(offsets, p, side="right") - 1)
        li, which = flat[slot]
        j = p - offsets[slot]
        analytic = grads[li][which].ravel()[j]
        probe = weights.copy()
        arr = probe.layers[li][which].reshape(-1)
        orig = arr[j]
        arr[j] = orig + h
        lp, _ = _batch_loss_and_grads(probe, xin, target, need_grads=False)
        arr[j] = orig - h
        lm, _ = _batch_loss_and_grads(probe, xin, target, need_grads=False)
        numeric = (lp - lm) / (2 * h)
        scale = max(abs(analytic), abs(numeric))
        if scale == 0:
            continue
        worst = max(worst, abs(analytic - numeric) / scale)
    return worst


def filter_frequency_response(weights, layer_index=0, grid=64):
    """Magnitude responses and low-pass scores of one layer's filters.

    Each output-channel kernel is summed over input channels, zero-padded to
    ``grid x grid`` and transformed. Responses are returned with DC at the
    centre. The low-pass score is the fraction of spectral energy inside the
    centred band of half the grid width in each axis (a quarter of the area).

    Returns
    -------
    responses : list of ndarray, shape (grid, grid)
    scores : ndarray, shape (out_channels,)
    """
    kernel, _ = weights.layers[layer_index]
    q = grid // 4
    lo, hi = grid // 2 - q, grid // 2 + q
    responses, scores = [], []
    for filt in kernel.sum(axis=1):
        padded = np.zeros((grid, grid))
        padded[: filt.shape[0], : filt.shape[1]] = filt
        mag = np.abs(np.fft.fftshift(np.fft.fft2(padded)))
        energy = np.sum(mag**2)
        responses.append(mag)
        scores.append(np.sum(mag[lo:hi, lo:hi] ** 2) / energy if energy > 0 else 0.0)
    return responses, np.array(scores)


def smooth_baseline(image, sigma):
    """Gaussian blur with reflective boundary and radius ``ceil(3 sigma)``."""
    if not sigma > 0:
        raise ValueError("sigma must be > 0")
    img = np.asarray(image, dtype=np.float64)
    return ndimage.gaussian_filter(img, sigma, mode="reflect", radius=int(math.ceil(3 * sigma)))


class GaussianRefiner:
    """Classical smoothing refiner, usable wherever a trained refiner is."""

    def __init__(self, sigma):
        self.sigma = sigma

    def __call__(self, image):
        return smooth_baseline(image, self.sigma)


def identity_refiner(image):
    return np.asarray(image, dtype=np.float64).copy()


def save_weights(weights, path):
    """Binary layout: magic, u32 layer count, per-layer u32 out/in/kh/kw + f64
    kernel + f64 bias, then u32 length and UTF-8 JSON metadata."""
    with open(path, "wb") as fh:
        fh.write(WEIGHTS_MAGIC)
        fh.write(struct.pack("<I", len(weights.layers)))
        for k, b in weights.layers:
            fh.write(struct.pack("<4I", *k.shape))
            fh.write(k.astype("<f8").tobytes())
            fh.write(b.astype("<f8").tobytes())
        blob = json.dumps(weights.meta, sort_keys=True).encode("utf-8")
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)


def load_weights(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[: len(WEIGHTS_MAGIC)] != WEIGHTS_MAGIC:
        raise BadMagicError(f"{path}: not a weights file (magic {raw[:7]!r})")
    pos = len(WEIGHTS_MAGIC)

    def take(nbytes):
        nonlocal pos
        if pos + nbytes > len(raw):
            raise TruncatedPayloadError(f"{path}: truncated at byte {pos}")
        chunk = raw[pos:pos + nbytes]
        pos += nbytes
        return chunk

    (count,) = struct.unpack("<I", take(4))
    layers = []
    for _ in range(count):
        shape = struct.unpack("<4I", take(16))
        k = np.frombuffer(take(8 * int(np.prod(shape))), dtype="<f8").reshape(shape)
        b = np.frombuffer(take(8 * shape[0]), dtype="<f8")
        layers.append((k.astype(np.float64), b.astype(np.float64)))
    (mlen,) = struct.unpack("<I", take(4))
    try:
        meta = json.loads(take(mlen).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedHeaderError(f"{path}: bad metadata blob: {exc}") from exc
    if pos != len(raw):
        raise MalformedHeaderError(f"{path}: {len(raw) - pos} trailing bytes")
    return RefinerWeights(layers, meta)
