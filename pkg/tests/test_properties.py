"""Randomised invariants across the library."""

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from gaborkit import bodies, fourier, gabor, obstruction
from gaborkit.gabor import BoxIndicator, SpectrumPoint

finite = st.floats(-10, 10, allow_nan=False)
semi = st.floats(0.3, 3.0)
steps = st.sampled_from([0.5, 1.0, 2.0])
fast = settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])


def vec(n, lo=-10.0, hi=10.0):
    return st.lists(st.floats(lo, hi, allow_nan=False), min_size=n, max_size=n).map(np.array)


class TestBodyHomogeneity:
    @fast
    @given(semi, semi, vec(2), st.sampled_from([0.5, 2.0, 7.0]))
    def test_gauge_and_support(self, s1, s2, x, t):
        body = bodies.ellipsoid([s1, s2])
        assert bodies.gauge(body, t * x) == pytest.approx(t * bodies.gauge(body, x), rel=1e-14, abs=1e-14)
        assert bodies.support(body, t * x) == pytest.approx(t * bodies.support(body, x), rel=1e-14, abs=1e-14)

    @fast
    @given(semi, semi, semi, st.floats(0, 2 * math.pi), st.floats(0.1, math.pi - 0.1))
    def test_normal_consistency(self, s1, s2, s3, phi, theta):
        body = bodies.ellipsoid([s1, s2, s3])
        w = np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])
        assert bodies.normal_point(body, w).normal @ w >= 1 - 1e-8


class TestTransformSymmetry:
    @fast
    @given(semi, semi, vec(2, -20, 20))
    def test_real_and_even(self, s1, s2, xi):
        body = bodies.ellipsoid([s1, s2])
        tol = fourier.DEFAULT_TOL[2]
        f = fourier.ft_indicator(body, xi)
        g = fourier.ft_indicator(body, -xi)
        scale = max(abs(f), bodies.volume(body) * 1e-3 * (1 + np.linalg.norm(xi)) ** -1.5)
        assert abs(f.imag) <= 10 * tol * scale
        assert abs(f - g) <= 10 * tol * scale

    @fast
    @given(vec(2, -0.8, 0.8), vec(2, -0.8, 0.8), vec(2, -5, 5), vec(2, -3, 3))
    def test_translation_covariance(self, a, ap, v, xi):
        body = bodies.ellipsoid([2.0, 1.0])
        base = fourier.ft_intersection(body, a, ap, xi)
        moved = fourier.ft_intersection(body, a + v, ap + v, xi)
        assert abs(abs(moved) - abs(base)) <= 1e-7 * max(1.0, abs(base))


class TestGaborProperties:
    @fast
    @given(vec(2, -1, 1), vec(2, -3, 3), vec(2, -2, 2), st.lists(steps, min_size=2, max_size=2))
    def test_stft_covariance(self, t, nu, v, sides):
        window = bodies.cube(list(sides))
        f = BoxIndicator((0.1, -0.2), (0.5, 0.7))
        g = BoxIndicator(tuple(np.array(f.center) + v), f.sides)
        assert abs(gabor.stft(g, window, t + v, nu)) == pytest.approx(abs(gabor.stft(f, window, t, nu)), abs=1e-13)

    @settings(max_examples=9, deadline=None)
    @given(steps, steps)
    def test_lattice_gram(self, s1, s2):
        system = gabor.lattice_onb([s1, s2], 5.0)
        assert gabor.gram_scan(system).max_defect <= 1e-9

    @settings(max_examples=6, deadline=None)
    @given(st.lists(steps, min_size=2, max_size=2), st.integers(0, 1000))
    def test_packing_never_exceeded(self, s, seed):
        system = gabor.lattice_onb(s, 30.0)
        probes = gabor.random_probes(system, 10, 25.0, seed=seed)
        rep = gabor.tiling_defect(system, probes=probes)
        assert rep.max_sum <= 1 + 5e-2

    @settings(max_examples=8, deadline=None)
    @given(st.lists(steps, min_size=2, max_size=2), st.lists(steps, min_size=2, max_size=2))
    def test_lattice_density(self, a, b):
        assume(np.prod(a) * np.prod(b) >= 0.5)
        spec = gabor.product_lattice(a, b, 23.0)
        system = gabor.GaborSystem(bodies.cube(1.0, 2), spec, 23.0)
        want = 1 / (np.prod(a) * np.prod(b))
        (est,) = gabor.beurling_density(system, [20.0])
        assert est.lower == pytest.approx(want, rel=0.05)
        assert est.upper == pytest.approx(want, rel=0.05)

    @pytest.mark.parametrize("scale", [[0.5, 2.0], [1.0, 1.0], [2.0, 0.5], [0.5, 0.5]])
    def test_orthogonal_fixtures_are_separated(self, scale):
        system = gabor.lattice_onb(scale, 5.0)
        assert gabor.gram_scan(system).max_defect <= 1e-6
        assert gabor.separation(system) >= 0.1


class TestCertificateProperties:
    residual = st.floats(-0.25, 0.25, allow_nan=False)

    @fast
    @given(st.integers(2, 9), residual, residual, residual, st.lists(st.integers(-1000, 1000), min_size=3, max_size=3))
    def test_integer_shifts_leave_delta(self, d, e12, e23, e13, shifts):
        es = [e12, e23, e13]
        base = obstruction.mod4_certificate(d, [(0, e) for e in es])
        moved = obstruction.mod4_certificate(d, [(k, e) for k, e in zip(shifts, es)])
        assert moved.delta == base.delta and moved.verdict == base.verdict

    @fast
    @given(st.floats(5.0, 40.0), st.integers(0, 1000))
    def test_half_integer_phase_shift(self, t, m):
        disk = bodies.ball(1.0, 2)
        q = SpectrumPoint(np.zeros(2), np.zeros(2))
        k0, e0 = obstruction.phase_residual(disk, SpectrumPoint(np.zeros(2), np.array([t, 0.0])), q)
        k1, e1 = obstruction.phase_residual(disk, SpectrumPoint(np.zeros(2), np.array([t + m / 2, 0.0])), q)
        assume(abs(abs(e0) - 0.25) > 1e-9)
        assert k1 - k0 == m and e1 == pytest.approx(e0, abs=1e-12)

    def test_collinear_limit_gives_dimension_term(self):
        # b_1, b_2, b_3 on a line through a common time shift, gaps at sine zeros
        disk = bodies.ball(1.0, 2)
        g = 1 / 8 + 5
        pts = [SpectrumPoint(np.zeros(2), np.array([x, 0.0])) for x in (0.0, g, 2 * g)]
        res = [obstruction.phase_residual(disk, pts[j], pts[i]) for i, j in ((0, 1), (1, 2), (0, 2))]
        rep = obstruction.mod4_certificate(2, res)
        assert rep.delta == pytest.approx(1 / 4)
