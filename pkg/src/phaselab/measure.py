"""Noisy Fourier-intensity measurements.

Intensities follow the Gaussian approximation of Poisson noise,
``y**2 = |Fx|**2 + w`` with ``w ~ N(0, alpha**2 |Fx|**2)`` drawn
independently per frequency. Negative intensities are clamped to zero before
taking the square root, and the fraction of clamped entries is recorded.

Random numbers come from numpy's PCG64 generator (``np.random.default_rng``)
seeded directly with ``NoiseParams.seed``.
"""
import struct
from dataclasses import dataclass

import numpy as np

from .errors import BadMagicError, MalformedHeaderError, TruncatedPayloadError
from .grid import check_grid, embed, forward_dft

MEAS_MAGIC = b"PRMEAS01"
_HEADER = struct.Struct("<8sId")


@dataclass(frozen=True)
class NoiseParams:
    alpha: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")


@dataclass
class MagnitudeMeasurement:
    """Fourier magnitudes ``y`` on an ``(m, m)`` grid plus simulation record."""

    y: np.ndarray
    alpha: float
    seed: int | None = None
    clamped_fraction: float = 0.0
    snr_db: float | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.y.ndim != 2 or self.y.shape[0] != self.y.shape[1]:
            raise ValueError(f"measurement must be square 2-D, got {self.y.shape}")
        if not np.all(np.isfinite(self.y)) or np.any(self.y < 0):
            raise ValueError("magnitudes must be finite and nonnegative")

    @property
    def m(self):
        return self.y.shape[0]

    @property
    def intensity(self):
        return self.y**2


def simulate(image, m, noise):
    """Simulate magnitudes of the ``m``-point oversampled DFT of ``image``.

    Parameters
    ----------
    image : ndarray, shape (n, n)
        Nonnegative ground truth.
    m : int
        Grid side, at least ``2n - 1``.
    noise : NoiseParams

    Returns
    -------
    MagnitudeMeasurement
    """
    img = np.asarray(image, dtype=np.float64)
    check_grid(img.shape[0], m)
    mag = np.abs(forward_dft(embed(img, m)))
    clean = mag**2
    if noise.alpha == 0:
        return MagnitudeMeasurement(mag, 0.0, noise.seed, 0.0, float("inf"))
    rng = np.random.default_rng(noise.seed)
    noisy = clean + noise.alpha * mag * rng.standard_normal((m, m))
    neg = noisy < 0
    noisy[neg] = 0.0
    return MagnitudeMeasurement(
        np.sqrt(noisy),
        float(noise.alpha),
        noise.seed,
        float(neg.mean()),
        snr_db(clean, noisy),
    )


def snr_db(clean_intensity, noisy_intensity):
    """``10 log10(||clean|| / ||noisy - clean||)``; ``inf`` when they are equal."""
    c = np.asarray(clean_intensity, dtype=np.float64).ravel()
    d = np.asarray(noisy_intensity, dtype=np.float64).ravel() - c
    if c.shape != d.shape:
        raise ValueError("intensity arrays differ in length")
    den = np.linalg.norm(d)
    if den == 0:
        return float("inf")
    return float(10.0 * np.log10(np.linalg.norm(c) / den))


def save_measurement(meas, path):
    """Write ``PRMEAS01 | u32 m | f64 alpha | m*m f64`` (all little-endian)."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MEAS_MAGIC, meas.m, float(meas.alpha)))
        fh.write(meas.y.astype("<f8").tobytes())


def load_measurement(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise MalformedHeaderError(f"{path}: file shorter than measurement header")
    magic, m, alpha = _HEADER.unpack_from(raw)
    if magic != MEAS_MAGIC:
        raise BadMagicError(f"{path}: bad magic {magic!r}, expected {MEAS_MAGIC!r}")
    payload = raw[_HEADER.size:]
    if len(payload) != 8 * m * m:
        raise TruncatedPayloadError(
            f"{path}: expected {8 * m * m} payload bytes for m={m}, got {len(payload)}"
        )
    y = np.frombuffer(payload, dtype="<f8").reshape(m, m).astype(np.float64)
    return MagnitudeMeasurement(y, alpha)
