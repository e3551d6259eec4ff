"""NumPy implementations of the compiled kernels (same signatures)."""
import numpy as np

SERIES_SWITCH = 1.0
SERIES_TERMS = 24


def radial_moments(R, kappa, d):
    """``int_0^R r^(d-1) exp(-i kappa r) dr`` elementwise, for d = 2 or 3."""
    if d not in (2, 3):
        raise ValueError("radial moments implemented for d = 2, 3")
    R = np.asarray(R, dtype=float)
    k = np.asarray(kappa, dtype=float)
    kr = k * R
    small = np.abs(kr) < SERIES_SWITCH
    out = np.empty(R.shape, dtype=complex)

    # power series sum_n (-i k r)^n / (n! (n + d)) for small arguments
    ks = kr[small]
    term = np.ones_like(ks, dtype=complex)
    total = np.zeros_like(ks, dtype=complex)
    for n in range(SERIES_TERMS):
        total += term / (n + d)
        term = term * (-1j * ks) / (n + 1)
    out[small] = total * R[small] ** d

    big = ~small
    Rb, kb = R[big], k[big]
    e = np.exp(-1j * kb * Rb)
    if d == 2:
        out[big] = e * (1j * Rb / kb + 1 / kb**2) - 1 / kb**2
    else:
        out[big] = e * (1j * Rb**2 / kb + 2 * Rb / kb**2 - 2j / kb**3) + 2j / kb**3
    return out


def _interval(lo, hi, nu):
    L = np.maximum(hi - lo, 0.0)
    # sin(pi nu L) / (pi nu), continuous at nu = 0
    s = L * np.sinc(nu * L)
    return s, -np.pi * nu * (lo + hi)


def box_transform(lo, hi, nu):
    s, ph = _interval(np.asarray(lo), np.asarray(hi), np.asarray(nu))
    return np.prod(s * np.exp(1j * ph), axis=1)


def box_stft_sq_sum(f_lo, f_hi, g_lo, g_hi, t, nu):
    lo = np.maximum(f_lo, g_lo + t)
    hi = np.minimum(f_hi, g_hi + t)
    s, _ = _interval(lo, hi, np.asarray(nu))
    return float(np.sum(np.prod(s * s, axis=1)))


def count_in_boxes(points, lows, side):
    points = np.asarray(points)
    counts = np.empty(len(lows), dtype=np.int64)
    for p, low in enumerate(np.asarray(lows)):
        v = points - low
        counts[p] = np.count_nonzero(np.all((v >= 0) & (v < side), axis=1))
    return counts
