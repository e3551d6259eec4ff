import cmath
import math

import numpy as np
import pytest
from scipy import integrate

from gaborkit import _kernels_py, kernels

try:
    from gaborkit import _kernels as _compiled
except ImportError:
    _compiled = None

BACKENDS = [
    pytest.param(_kernels_py, id="python"),
    pytest.param(
        _compiled,
        id="compiled",
        marks=pytest.mark.skipif(_compiled is None, reason="extension not built"),
    ),
]


def quad_moment(R, k, d):
    re = integrate.quad(lambda r: r ** (d - 1) * math.cos(k * r), 0, R, limit=400)[0]
    im = integrate.quad(lambda r: -(r ** (d - 1)) * math.sin(k * r), 0, R, limit=400)[0]
    return complex(re, im)


@pytest.mark.parametrize("impl", BACKENDS)
class TestRadialMoments:
    @pytest.mark.parametrize("d", [2, 3])
    def test_against_quadrature(self, impl, d):
        R = np.array([0.3, 1.0, 1.7, 0.9, 1e-4, 2.0])
        k = np.array([0.0, 1e-9, 0.8, 37.0, 5.0, -120.0])
        got = kernels.radial_moments(R, k, d, impl=impl)
        for g, r, kk in zip(got, R, k):
            assert abs(g - quad_moment(r, kk, d)) <= 1e-12 * max(1.0, r**d)

    @pytest.mark.parametrize("d", [2, 3])
    def test_series_switch_is_continuous(self, impl, d):
        # either side of |k R| = 1
        R = np.full(2, 2.0)
        k = np.array([0.5 - 1e-12, 0.5 + 1e-12])
        a, b = kernels.radial_moments(R, k, d, impl=impl)
        assert abs(a - b) <= 1e-10

    def test_zero_frequency(self, impl):
        assert kernels.radial_moments(np.array([3.0]), np.array([0.0]), 3, impl=impl)[0] == pytest.approx(9.0)

    def test_rejects_other_dimensions(self, impl):
        with pytest.raises(ValueError):
            kernels.radial_moments(np.array([1.0]), np.array([1.0]), 4, impl=impl)


@pytest.mark.parametrize("impl", BACKENDS)
class TestBoxKernels:
    def test_box_transform_vs_direct(self, impl, rng):
        lo = rng.uniform(-1, 0, (8, 2))
        hi = lo + rng.uniform(0, 1, (8, 2))
        nu = rng.uniform(-5, 5, (8, 2))
        got = kernels.box_transform(lo, hi, nu, impl=impl)
        for g, l, h, n in zip(got, lo, hi, nu):
            want = 1.0
            for i in range(2):
                if n[i] == 0:
                    want *= h[i] - l[i]
                else:
                    w = 2j * math.pi * n[i]
                    want *= (cmath.exp(-w * l[i]) - cmath.exp(-w * h[i])) / w
            assert abs(g - want) <= 1e-13

    def test_box_transform_zero_frequency_and_empty(self, impl):
        lo = np.array([[0.0, 0.0], [0.0, 0.0]])
        hi = np.array([[2.0, 0.5], [-1.0, 1.0]])
        got = kernels.box_transform(lo, hi, np.zeros((2, 2)), impl=impl)
        assert got[0] == pytest.approx(1.0) and got[1] == 0

    def test_stft_sum_vs_loop(self, impl, rng):
        f = np.array([-0.25, -0.25]), np.array([0.25, 0.25])
        g = np.array([-0.5, -0.5]), np.array([0.5, 0.5])
        t = rng.uniform(-1, 1, (30, 2))
        nu = rng.uniform(-4, 4, (30, 2))
        want = 0.0
        for ti, ni in zip(t, nu):
            lo = np.maximum(f[0], g[0] + ti)
            hi = np.minimum(f[1], g[1] + ti)
            want += abs(kernels.box_transform(lo[None], hi[None], ni[None], impl=_kernels_py)[0]) ** 2
        assert kernels.box_stft_sq_sum(*f, *g, t, nu, impl=impl) == pytest.approx(want, rel=1e-12)

    def test_count_half_open(self, impl):
        pts = np.array([[0.0, 0.0], [1.0, 0.5], [0.999, 0.999], [-1e-12, 0.5]])
        lows = np.array([[0.0, 0.0], [1.0, 0.0]])
        assert list(kernels.count_in_boxes(pts, lows, 1.0, impl=impl)) == [2, 1]

    def test_count_vs_brute(self, impl, rng):
        pts = rng.uniform(0, 10, (500, 3))
        lows = rng.uniform(0, 8, (20, 3))
        brute = [np.sum(np.all((pts >= l) & (pts < l + 2.0), axis=1)) for l in lows]
        assert list(kernels.count_in_boxes(pts, lows, 2.0, impl=impl)) == brute


@pytest.mark.skipif(_compiled is None, reason="extension not built")
def test_backends_agree(rng):
    R = rng.uniform(0, 2, 1000)
    k = rng.uniform(-100, 100, 1000)
    for d in (2, 3):
        a = kernels.radial_moments(R, k, d, impl=_compiled)
        b = kernels.radial_moments(R, k, d, impl=_kernels_py)
        assert np.max(np.abs(a - b)) <= 1e-12


def test_backend_name():
    assert kernels.BACKEND in ("compiled", "python")


def test_rejects_wrong_rank():
    with pytest.raises(ValueError):
        kernels.box_transform(np.zeros(2), np.ones(2), np.zeros(2))
