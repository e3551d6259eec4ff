"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the NumPy
versions in ``_kernels_py`` stand in.  Setting ``GABORKIT_PURE_PYTHON=1``
forces the fallback (useful for comparing the two).
"""
import os

import numpy as np

from . import _kernels_py

if os.environ.get("GABORKIT_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def _c(a, ndim):
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {a.shape}")
    return a


def radial_moments(R, kappa, d, impl=None):
    R, kappa = np.broadcast_arrays(np.asarray(R, float), np.asarray(kappa, float))
    shape = R.shape
    out = (impl or _impl).radial_moments(_c(R.ravel(), 1), _c(kappa.ravel(), 1), int(d))
    return np.asarray(out).reshape(shape)


def box_transform(lo, hi, nu, impl=None):
    return np.asarray((impl or _impl).box_transform(_c(lo, 2), _c(hi, 2), _c(nu, 2)))


def box_stft_sq_sum(f_lo, f_hi, g_lo, g_hi, t, nu, impl=None):
    return float(
        (impl or _impl).box_stft_sq_sum(
            _c(f_lo, 1), _c(f_hi, 1), _c(g_lo, 1), _c(g_hi, 1), _c(t, 2), _c(nu, 2)
        )
    )


def count_in_boxes(points, lows, side, impl=None):
    return np.asarray((impl or _impl).count_in_boxes(_c(points, 2), _c(lows, 2), float(side)))
