"""Image quality metrics and registration over the trivial ambiguities.

A Fourier magnitude determines an image only up to circular translation and
180-degree rotation, so reconstructions are aligned to the ground truth
before scoring.
"""
from dataclasses import dataclass

import numpy as np
import scipy.fft

PSNR_CAP = 99.0
SSIM_WIN = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DATA_RANGE = 255.0


@dataclass(frozen=True)
class QualityScore:
    psnr_db: float
    ssim: float
    shift: tuple
    flipped: bool
    raw_psnr_db: float
    raw_ssim: float


def _pair(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b):
    """PSNR in dB for peak 255, capped at 99 dB (also returned for MSE = 0)."""
    a, b = _pair(a, b)
    mse = np.mean((a - b) ** 2)
    if mse == 0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10.0 * np.log10(DATA_RANGE**2 / mse)))


def gaussian_window(size=SSIM_WIN, sigma=SSIM_SIGMA):
    """Normalized 1-D Gaussian; the 2-D window is its outer product."""
    t = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(t**2) / (2 * sigma**2))
    return g / g.sum()


def _valid_filter(img, g):
    # separable valid-mode correlation with the 1-D window g
    k = g.size
    rows = np.lib.stride_tricks.sliding_window_view(img, k, axis=0) @ g
    return np.lib.stride_tricks.sliding_window_view(rows, k, axis=1) @ g


def ssim_maps(a, b):
    """Luminance and contrast-structure SSIM maps over all valid windows."""
    a, b = _pair(a, b)
    if min(a.shape) < SSIM_WIN:
        raise ValueError(f"SSIM needs images of side >= {SSIM_WIN}, got {a.shape}")
    g = gaussian_window()
    c1 = (SSIM_K1 * DATA_RANGE) ** 2
    c2 = (SSIM_K2 * DATA_RANGE) ** 2
    mu_a = _valid_filter(a, g)
    mu_b = _valid_filter(b, g)
    var_a = _valid_filter(a * a, g) - mu_a * mu_a
    var_b = _valid_filter(b * b, g) - mu_b * mu_b
    cov = _valid_filter(a * b, g) - mu_a * mu_b
    lum = (2 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1)
    cs = (2 * cov + c2) / (var_a + var_b + c2)
    return lum, cs


def ssim(a, b):
    """Mean SSIM with an 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03."""
    lum, cs = ssim_maps(a, b)
    return float(np.mean(lum * cs))


@dataclass(frozen=True)
class Registration:
    aligned: np.ndarray
    shift: tuple  # (dy, dx) applied with np.roll after the optional flip
    flipped: bool


def _candidate(recon, flipped, dy, dx):
    base = recon[::-1, ::-1] if flipped else recon
    return np.roll(base, (dy, dx), axis=(0, 1))


def register(recon, truth, rtol=1e-9):
    """Align ``recon`` to ``truth`` over circular shifts and 180-degree rotation.

    Cross-correlations of both orientations are computed by FFT. Candidates
    within ``rtol`` of the best correlation are re-scored by exact squared
    error, ties going to the smallest ``(flipped, dy, dx)``.
    """
    recon, truth = _pair(recon, truth)
    tf = scipy.fft.fft2(truth)
    corr = np.stack(
        [np.real(scipy.fft.ifft2(tf * np.conj(scipy.fft.fft2(c)))) for c in (recon, recon[::-1, ::-1])]
    )
    best = corr.max()
    near = np.argwhere(corr >= best - rtol * max(abs(best), 1.0))
    choice = None
    for flipped, dy, dx in near:  # argwhere yields lexicographic order
        cand = _candidate(recon, bool(flipped), int(dy), int(dx))
        err = float(np.sum((cand - truth) ** 2))
        if choice is None or err < choice[0]:
            choice = (err, cand, (int(dy), int(dx)), bool(flipped))
    _, aligned, shift, flipped = choice
    return Registration(aligned, shift, flipped)


def score(recon, truth):
    """Registered and raw PSNR/SSIM of ``recon`` against ``truth``."""
    reg = register(recon, truth)
    return QualityScore(
        psnr(reg.aligned, truth),
        ssim(reg.aligned, truth),
        reg.shift,
        reg.flipped,
        psnr(recon, truth),
        ssim(recon, truth),
    )
