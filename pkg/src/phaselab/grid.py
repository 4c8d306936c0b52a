"""Oversampled DFT plane.

Images are ``(n, n)`` float64 arrays. Fields on the oversampled grid are
``(m, m)`` arrays, float64 when real-valued and complex128 otherwise. The
image support is the top-left ``n x n`` block of the grid.

The transform convention is the usual FFT default: unnormalized forward DFT with kernel
``exp(-2j*pi*(uk + vl)/m)`` and ``1/m**2`` on the inverse.
"""
import numpy as np
import scipy.fft


class GridError(ValueError):
    """Raised for grid sizes that violate the oversampling condition."""


def validate_image(image):
    """Return ``image`` as a float64 square array, checking finiteness and sign."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ValueError(f"image must be square 2-D, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite pixels")
    if np.any(img < 0):
        raise ValueError("image contains negative pixels")
    return img


def check_grid(n, m):
    """Raise :class:`GridError` unless ``m >= 2n - 1`` (uniqueness condition)."""
    if n < 1:
        raise GridError(f"support side must be >= 1, got {n}")
    if m < 2 * n - 1:
        raise GridError(f"grid side {m} < 2*{n}-1 violates the oversampling condition")


def default_grid_side(n):
    return 2 * n


def support_mask(n, m):
    """Boolean ``(m, m)`` mask, true exactly on the top-left ``n x n`` block."""
    check_grid(n, m)
    mask = np.zeros((m, m), dtype=bool)
    mask[:n, :n] = True
    return mask


def embed(image, m):
    """Zero-pad an ``(n, n)`` image into the top-left corner of an ``(m, m)`` grid."""
    img = validate_image(image)
    n = img.shape[0]
    check_grid(n, m)
    field = np.zeros((m, m), dtype=np.float64)
    field[:n, :n] = img
    return field


def forward_dft(field):
    return scipy.fft.fft2(field)


def inverse_dft(spectrum):
    return scipy.fft.ifft2(spectrum)


def crop(field, n):
    """Real part of the top-left ``n x n`` block, clamped to be nonnegative."""
    f = np.asarray(field)
    if f.ndim != 2 or f.shape[0] != f.shape[1]:
        raise ValueError(f"field must be square 2-D, got shape {f.shape}")
    if n > f.shape[0]:
        raise GridError(f"crop side {n} exceeds grid side {f.shape[0]}")
    return np.maximum(np.real(f[:n, :n]), 0.0).astype(np.float64)
