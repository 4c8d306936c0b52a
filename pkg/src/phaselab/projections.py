"""Alternating-projection phase retrieval: HIO and error reduction.

Iterates live on the full ``(m, m)`` grid and are stored as real float64
arrays, so real-valuedness is exact by construction. One step computes::

    x' = Re F^-1{ y * Fx / |Fx| }            (phase 1 where Fx == 0)
    gamma = outside support | x' < 0
    x_next = x'            off gamma
             x - beta*x'   on gamma (HIO), 0 on gamma (ER)

The real part is taken before gamma is evaluated. Because the spectrum of a
real iterate is Hermitian, ``Re F^-1{y * phase}`` equals the inverse real FFT
of the Hermitian-symmetrized magnitudes, which the inner loop exploits.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from . import kernels
from .grid import forward_dft, inverse_dft

HIO = "HIO"
ER = "ER"


@dataclass(frozen=True)
class HIOParams:
    beta: float = 0.9
    iterations: int = 1
    variant: str = HIO

    def __post_init__(self):
        if self.variant not in (HIO, ER):
            raise ValueError(f"variant must be 'HIO' or 'ER', got {self.variant!r}")
        if self.variant == HIO and not 0 < self.beta <= 1:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")


@dataclass
class HIOState:
    """Current iterate, step counter and per-step residuals."""

    iterate: np.ndarray
    k: int = 0
    residual_trace: list = field(default_factory=list)

    def copy(self):
        return HIOState(self.iterate.copy(), self.k, list(self.residual_trace))


def _magnitudes(y):
    return y.y if hasattr(y, "y") else np.asarray(y, dtype=np.float64)


def _check_sides(field_, y):
    if field_.shape != y.shape:
        raise ValueError(f"field shape {field_.shape} does not match measurement {y.shape}")


def magnitude_project(field_, y):
    """Replace the spectrum magnitude of ``field_`` by ``y``, keeping its phase.

    Returns the complex field ``F^-1{ y * phase(F field_) }``.
    """
    mag = _magnitudes(y)
    f = np.asarray(field_)
    _check_sides(f, mag)
    return inverse_dft(kernels.magnitude_replace(forward_dft(f), mag))


def residual(field_, y):
    """Squared data misfit ``||y - |F field_| ||_2^2``."""
    mag = _magnitudes(y)
    f = np.asarray(field_)
    _check_sides(f, mag)
    return float(np.sum((mag - np.abs(forward_dft(f))) ** 2))


class _Engine:
    """Precomputed half-spectrum data for repeated steps against one measurement."""

    def __init__(self, y, support):
        mag = _magnitudes(y)
        m = mag.shape[0]
        if support.shape != mag.shape:
            raise ValueError(f"support shape {support.shape} does not match measurement {mag.shape}")
        self.shape = mag.shape
        self.y = mag
        self.support = np.ascontiguousarray(support, dtype=bool)
        h = m // 2 + 1
        mirror = mag[(-np.arange(m)) % m][:, (-np.arange(m)) % m]
        self.y_half = np.ascontiguousarray((0.5 * (mag + mirror))[:, :h])

    def spectrum(self, x):
        return scipy.fft.rfft2(x)

    def residual(self, spec_half):
        return kernels.half_spectrum_residual(spec_half, self.y)

    def step(self, x, spec_half, beta, hard):
        proj = kernels.magnitude_replace(spec_half, self.y_half)
        xp = scipy.fft.irfft2(proj, s=self.shape)
        x_new = kernels.constraint_update(x, xp, self.support, beta, hard)
        spec_new = self.spectrum(x_new)
        return x_new, spec_new, self.residual(spec_new)


def _as_state(init):
    if isinstance(init, HIOState):
        return init.copy()
    f = np.asarray(init)
    if np.iscomplexobj(f):
        f = np.real(f)
    return HIOState(np.array(f, dtype=np.float64))


def _advance(state, y, support, beta, hard, iterations):
    eng = _Engine(y, support)
    _check_sides(state.iterate, eng.y)
    x = state.iterate
    spec = eng.spectrum(x)
    trace = state.residual_trace
    for _ in range(iterations):
        x, spec, r = eng.step(x, spec, beta, hard)
        trace.append(r)
    state.iterate = x
    state.k += iterations
    return state


def hio_step(state, y, params, support):
    """One HIO update; returns a new :class:`HIOState`."""
    return _advance(_as_state(state), y, support, params.beta, False, 1)


def er_step(state, y, support):
    """One error-reduction update; returns a new :class:`HIOState`."""
    return _advance(_as_state(state), y, support, 0.0, True, 1)


def run(y, init, params, support):
    """Apply ``params.iterations`` HIO or ER steps starting from ``init``.

    ``init`` may be a field or an existing :class:`HIOState`; in the latter
    case the counter and residual trace are continued.
    """
    hard = params.variant == ER
    beta = 0.0 if hard else params.beta
    return _advance(_as_state(init), y, support, beta, hard, params.iterations)
