"""Pure numpy implementations of the hot kernels.

These mirror ``phaselab._ckernels`` exactly in signature and semantics and
are used whenever the compiled extension is unavailable (or disabled with
``PHASELAB_PURE_PYTHON=1``).
"""
import numpy as np

NAME = "python"


def _windows(xpad, kh, kw, h, w):
    # (B, C, H, W, kh, kw) strided view over the padded input
    b, c = xpad.shape[:2]
    sb, sc, sh, sw = xpad.strides
    return np.lib.stride_tricks.as_strided(
        xpad, (b, c, h, w, kh, kw), (sb, sc, sh, sw, sh, sw), writeable=False
    )


def conv2d_forward(x, weight, bias):
    """Same-size zero-padded 2-D cross-correlation.

    x is (B, C, H, W), weight (O, C, kh, kw) with odd kh, kw, bias (O,).
    Returns (B, O, H, W).
    """
    _, _, h, w = x.shape
    _, _, kh, kw = weight.shape
    ph, pw = kh // 2, kw // 2
    xpad = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    cols = _windows(xpad, kh, kw, h, w)
    out = np.tensordot(cols, weight, axes=([1, 4, 5], [1, 2, 3]))  # (B, H, W, O)
    out = out.transpose(0, 3, 1, 2) + bias[None, :, None, None]
    return np.ascontiguousarray(out)


def conv2d_backward(x, weight, dout, need_dx=True):
    """Gradients of ``conv2d_forward`` with respect to input, weight and bias.

    Returns ``(dx, dw, db)``; ``dx`` is None when ``need_dx`` is false.
    """
    _, _, h, w = x.shape
    _, _, kh, kw = weight.shape
    ph, pw = kh // 2, kw // 2
    xpad = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    cols = _windows(xpad, kh, kw, h, w)
    db = dout.sum(axis=(0, 2, 3))
    dw = np.tensordot(dout, cols, axes=([0, 2, 3], [0, 2, 3]))  # (O, C, kh, kw)
    dx = None
    if need_dx:
        # full correlation of dout with the 180-degree rotated kernel
        dpad = np.pad(dout, ((0, 0), (0, 0), (kh - 1 - ph, ph), (kw - 1 - pw, pw)))
        dcols = _windows(dpad, kh, kw, h, w)
        rot = weight[:, :, ::-1, ::-1]
        dx = np.tensordot(dcols, rot, axes=([1, 4, 5], [0, 2, 3]))  # (B, H, W, C)
        dx = np.ascontiguousarray(dx.transpose(0, 3, 1, 2))
    return dx, np.ascontiguousarray(dw), db


def magnitude_replace(spectrum, magnitude):
    """Return ``magnitude * spectrum / |spectrum|`` with phase 1 where the spectrum is 0."""
    a = np.abs(spectrum)
    nz = a > 0
    phase = np.ones_like(spectrum)
    np.divide(spectrum, a, out=phase, where=nz)
    return magnitude * phase


def constraint_update(x, xp, support, beta, hard):
    """One space-domain HIO (``hard=False``) or ER (``hard=True``) update.

    Pixels outside ``support`` or with ``xp < 0`` receive ``x - beta * xp``
    (HIO) or 0 (ER); all others take ``xp``.
    """
    violate = ~support | (xp < 0)
    if hard:
        return np.where(violate, 0.0, xp)
    return np.where(violate, x - beta * xp, xp)


def half_spectrum_residual(spectrum_half, magnitude):
    """``sum((y - |F|)**2)`` over the full plane, given the rfft2 half plane of a real field."""
    m = magnitude.shape[0]
    h = spectrum_half.shape[1]
    a = np.abs(spectrum_half)
    total = np.sum((magnitude[:, :h] - a) ** 2)
    ncols = m - h
    if ncols > 0:
        # full-plane column m - v mirrors half-plane column v (rows negated)
        rows = (-np.arange(m)) % m
        mirrored = magnitude[rows][:, m - np.arange(1, ncols + 1)]
        total += np.sum((mirrored - a[:, 1:ncols + 1]) ** 2)
    return float(total)
