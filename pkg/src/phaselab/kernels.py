"""Backend selection for the hot kernels.

The compiled Cython extension is used when it was built; otherwise (or when
``PHASELAB_PURE_PYTHON=1`` is set) the numpy fallback is used. Both expose the
same functions, so callers import them from here.
"""
import logging
import os

from . import _pykernels

logger = logging.getLogger(__name__)


def _load():
    if os.environ.get("PHASELAB_PURE_PYTHON", "") == "1":
        return _pykernels
    try:
        from . import _ckernels
    except ImportError:
        logger.debug("compiled kernels unavailable, using numpy fallback")
        return _pykernels
    return _ckernels


_impl = _load()

BACKEND = _impl.NAME
conv2d_forward = _impl.conv2d_forward
conv2d_backward = _impl.conv2d_backward
magnitude_replace = _impl.magnitude_replace
constraint_update = _impl.constraint_update
half_spectrum_residual = _impl.half_spectrum_residual


def available_backends():
    """Return ``{name: module}`` for every backend importable in this process."""
    out = {_pykernels.NAME: _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        out[_ckernels.NAME] = _ckernels
    return out
