# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.  ``_kernels_py`` holds the NumPy equivalents."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, fabs, M_PI, INFINITY

cnp.import_array()

cdef double SERIES_SWITCH = 1.0
cdef int SERIES_TERMS = 24


cdef double complex _radial(double R, double k, int d) nogil:
    # int_0^R r^(d-1) exp(-i k r) dr
    cdef double complex term, total, e
    cdef double kr = k * R
    cdef int n
    if fabs(kr) < SERIES_SWITCH:
        total = 0
        term = 1.0
        for n in range(SERIES_TERMS):
            total = total + term / (n + d)
            term = term * (-1j * kr) / (n + 1)
        if d == 2:
            return total * R * R
        return total * R * R * R
    e = cos(kr) - 1j * sin(kr)
    if d == 2:
        return e * (1j * R / k + 1.0 / (k * k)) - 1.0 / (k * k)
    return e * (1j * R * R / k + 2.0 * R / (k * k) - 2j / (k * k * k)) + 2j / (k * k * k)


def radial_moments(double[::1] R, double[::1] kappa, int d):
    cdef Py_ssize_t i, n = R.shape[0]
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] o = out
    if d != 2 and d != 3:
        raise ValueError("radial moments implemented for d = 2, 3")
    with nogil:
        for i in range(n):
            o[i] = _radial(R[i], kappa[i], d)
    return out


cdef inline double complex _interval(double lo, double hi, double nu) nogil:
    # int_lo^hi exp(-2 pi i x nu) dx
    cdef double L = hi - lo
    cdef double x, s, ph
    if L <= 0:
        return 0
    x = M_PI * nu * L
    if fabs(x) < 1e-8:
        s = L
    else:
        s = sin(x) / (M_PI * nu)
    ph = -M_PI * nu * (lo + hi)
    return s * (cos(ph) + 1j * sin(ph))


cdef inline double _interval_abs2(double lo, double hi, double nu) nogil:
    cdef double L = hi - lo
    cdef double x, s
    if L <= 0:
        return 0
    x = M_PI * nu * L
    if fabs(x) < 1e-8:
        s = L
    else:
        s = sin(x) / (M_PI * nu)
    return s * s


def box_transform(double[:, ::1] lo, double[:, ::1] hi, double[:, ::1] nu):
    """Row-wise Fourier transform of the boxes ``[lo, hi]`` at ``nu``."""
    cdef Py_ssize_t i, j, n = lo.shape[0], d = lo.shape[1]
    out = np.empty(n, dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef double complex acc
    with nogil:
        for i in range(n):
            acc = 1.0
            for j in range(d):
                acc = acc * _interval(lo[i, j], hi[i, j], nu[i, j])
                if acc == 0:
                    break
            o[i] = acc
    return out


def box_stft_sq_sum(double[::1] f_lo, double[::1] f_hi,
                    double[::1] g_lo, double[::1] g_hi,
                    double[:, ::1] t, double[:, ::1] nu):
    """Sum over rows of |int_{F cap (G + t)} exp(-2 pi i x nu) dx|^2."""
    cdef Py_ssize_t i, j, n = t.shape[0], d = t.shape[1]
    cdef double total = 0, acc, lo, hi
    with nogil:
        for i in range(n):
            acc = 1.0
            for j in range(d):
                lo = f_lo[j] if f_lo[j] > g_lo[j] + t[i, j] else g_lo[j] + t[i, j]
                hi = f_hi[j] if f_hi[j] < g_hi[j] + t[i, j] else g_hi[j] + t[i, j]
                acc = acc * _interval_abs2(lo, hi, nu[i, j])
                if acc == 0:
                    break
            total += acc
    return total


def count_in_boxes(double[:, ::1] points, double[:, ::1] lows, double side):
    """Number of points in each half-open cube ``[low, low + side)``."""
    cdef Py_ssize_t p, i, j, n = points.shape[0], m = lows.shape[0], D = points.shape[1]
    counts = np.zeros(m, dtype=np.int64)
    cdef long long[::1] c = counts
    cdef double v
    cdef bint inside
    with nogil:
        for p in range(m):
            for i in range(n):
                inside = True
                for j in range(D):
                    v = points[i, j] - lows[p, j]
                    if v < 0 or v >= side:
                        inside = False
                        break
                if inside:
                    c[p] += 1
    return counts
