import json
import math

import numpy as np
import pytest

from gaborkit import bodies
from gaborkit.errors import InvalidArgument, UnsupportedBody, UnsupportedDimension


def random_spd(rng, d):
    a = rng.standard_normal((d, d))
    return a @ a.T + d * np.eye(d)


class TestConstruction:
    def test_json_round_trip(self):
        body = bodies.ellipsoid([2.0, 1.0])
        again = bodies.BodyDescriptor.from_json(body.to_json())
        assert again == body
        assert hash(again) == hash(body)

    def test_from_dict_schema(self):
        body = bodies.BodyDescriptor.from_dict({"dim": 3, "family": "ball", "params": {"radius": 2}})
        assert body.dimension == 3 and body.radius == 2.0

    @pytest.mark.parametrize(
        "desc",
        [
            {"dim": 2, "family": "blob"},
            {"dim": 1, "family": "ball"},
            {"family": "ball"},
            {"dim": 2, "family": "ball", "params": {"radius": -1}},
            {"dim": 2, "family": "ellipsoid", "params": {"matrix": [[1, 2], [2, 1]]}},
            {"dim": 2, "family": "superellipsoid", "params": {"exponent": 3}},
            {"dim": 3, "family": "triangle"},
            {"dim": 2, "family": "triangle", "params": {"vertices": [[1, 1], [2, 1], [1, 2]]}},
        ],
    )
    def test_invalid_descriptions(self, desc):
        with pytest.raises(InvalidArgument):
            bodies.BodyDescriptor.from_dict(desc)

    def test_descriptor_is_immutable(self, disk):
        with pytest.raises(AttributeError):
            disk.family = "cube"

    def test_box_sides(self):
        box = bodies.cube([2.0, 0.5])
        assert np.allclose(box.sides, [2.0, 0.5])
        assert bodies.volume(box) == pytest.approx(1.0)


class TestGauge:
    def test_unit_ball(self, disk):
        assert bodies.gauge(disk, [3.0, 4.0]) == pytest.approx(5.0, abs=1e-15)

    def test_ellipse_boundary(self):
        body = bodies.ellipsoid(matrix=np.diag([1.0, 4.0]))
        assert bodies.gauge(body, [0.0, 0.5]) == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize(
        "body",
        [
            bodies.ball(2.0, 3),
            bodies.ellipsoid([2.0, 1.0]),
            bodies.cube(1.0, 2),
            bodies.make_body("triangle"),
            bodies.make_body("superellipsoid", 2, exponent=4, radius=1.5),
        ],
    )
    def test_origin_and_homogeneity(self, body, rng):
        d = body.dimension
        assert bodies.gauge(body, np.zeros(d)) == 0.0
        x = rng.standard_normal(d)
        xi = rng.standard_normal(d)
        for t in (0.5, 2.0, 7.0):
            assert bodies.gauge(body, t * x) == pytest.approx(t * bodies.gauge(body, x), rel=1e-14)
            assert bodies.support(body, t * xi) == pytest.approx(t * bodies.support(body, xi), rel=1e-14)

    def test_non_finite_rejected(self, disk):
        with pytest.raises(InvalidArgument):
            bodies.gauge(disk, [np.nan, 0.0])

    def test_vectorized(self, ellipse21, rng):
        x = rng.standard_normal((10, 2))
        assert np.allclose(bodies.gauge(ellipse21, x), [bodies.gauge(ellipse21, v) for v in x])


class TestSupport:
    def test_self_dual_ball(self, disk, rng):
        xi = rng.standard_normal(2)
        assert bodies.support(disk, xi) == pytest.approx(np.linalg.norm(xi), rel=1e-15)

    def test_ellipse_axis(self, ellipse21):
        assert bodies.support(ellipse21, [1.0, 0.0]) == pytest.approx(2.0)

    def test_matches_mesh_maximum(self, rng):
        body = bodies.ellipsoid(matrix=random_spd(rng, 2))
        pts = np.array([s.point for s in bodies.boundary_mesh(body, 10_000)])
        for _ in range(5):
            xi = rng.standard_normal(2)
            assert bodies.support(body, xi) == pytest.approx((pts @ xi).max(), abs=1e-4)

    def test_ellipsoid_closed_form_vs_mesh(self, rng):
        m = random_spd(rng, 3)
        body = bodies.ellipsoid(matrix=m)
        pts = np.array([s.point for s in bodies.boundary_mesh(body, 40_000)])
        xi = rng.standard_normal(3)
        exact = math.sqrt(xi @ np.linalg.inv(m) @ xi)
        assert bodies.support(body, xi) == pytest.approx(exact, rel=1e-12)
        assert (pts @ xi).max() <= exact + 1e-12
        assert (pts @ xi).max() == pytest.approx(exact, rel=1e-3)

    def test_polytope_support(self):
        tri = bodies.make_body("triangle")
        xi = np.array([0.3, -1.2])
        assert bodies.support(tri, xi) == pytest.approx((tri.vertices @ xi).max())


class TestNormalPoint:
    def test_sphere(self, disk):
        w = np.array([0.6, 0.8])
        s = bodies.normal_point(disk, w)
        assert np.allclose(s.point, w) and np.allclose(s.normal, w)

    def test_ellipse_axis_point(self, ellipse21):
        assert np.allclose(bodies.normal_point(ellipse21, [1.0, 0.0]).point, [2.0, 0.0])

    def test_random_ellipsoid(self, rng):
        body = bodies.ellipsoid(matrix=random_spd(rng, 3))
        for _ in range(5):
            w = rng.standard_normal(3)
            w /= np.linalg.norm(w)
            s = bodies.normal_point(body, w)
            assert bodies.gauge(body, s.point) == pytest.approx(1.0, abs=1e-12)
            # finite-difference gradient of the gauge is parallel to omega
            h = 1e-6
            g = np.array(
                [(bodies.gauge(body, s.point + h * e) - bodies.gauge(body, s.point - h * e)) / (2 * h) for e in np.eye(3)]
            )
            assert g / np.linalg.norm(g) @ w >= 1 - 1e-8
            assert np.linalg.norm(s.normal) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("body", [bodies.cube(1.0, 2), bodies.make_body("triangle")])
    def test_flat_families_rejected(self, body):
        with pytest.raises(UnsupportedBody):
            bodies.normal_point(body, [1.0, 0.0])

    def test_superellipsoid_flat_point(self):
        body = bodies.make_body("superellipsoid", 2, exponent=4)
        with pytest.raises(UnsupportedBody):
            bodies.gaussian_curvature(body, [1.0, 0.0])


class TestCurvature:
    @pytest.mark.parametrize("d", [2, 3])
    def test_ball(self, d, rng):
        w = rng.standard_normal(d)
        w /= np.linalg.norm(w)
        assert bodies.gaussian_curvature(bodies.ball(2.0, d), w) == pytest.approx(2.0 ** (1 - d))

    def test_ellipse_axis(self, ellipse21):
        # plane-curve curvature a/b^2 at (a, 0)
        assert bodies.gaussian_curvature(ellipse21, [1.0, 0.0]) == pytest.approx(2.0)
        assert bodies.curvature_fd(ellipse21, np.array([1.0, 0.0])) == pytest.approx(2.0, rel=1e-6)

    def test_symmetry(self, disk):
        w = np.array([0.6, -0.8])
        assert bodies.gaussian_curvature(disk, w) == bodies.gaussian_curvature(disk, -w)

    @pytest.mark.parametrize("d", [2, 3])
    def test_fd_matches_closed_form(self, d, rng):
        body = bodies.ellipsoid(matrix=random_spd(rng, d))
        for _ in range(5):
            w = rng.standard_normal(d)
            w /= np.linalg.norm(w)
            exact = bodies.gaussian_curvature(body, w)
            assert bodies.curvature_fd(body, w) == pytest.approx(exact, rel=1e-4)

    def test_superellipsoid_positive_off_axis(self):
        body = bodies.make_body("superellipsoid", 2, exponent=4)
        w = np.array([1.0, 1.0]) / math.sqrt(2)
        assert 0 < bodies.gaussian_curvature(body, w) < math.inf


class TestMesh:
    def test_circle(self, disk):
        mesh = bodies.boundary_mesh(disk, 360)
        pts = np.array([s.point for s in mesh])
        assert len(mesh) == 360
        assert np.allclose(np.linalg.norm(pts, axis=1), 1.0)

    def test_ellipse_on_boundary(self, ellipse21):
        pts = np.array([s.point for s in bodies.boundary_mesh(ellipse21, 500)])
        assert np.max(np.abs(bodies.gauge(ellipse21, pts) - 1)) <= 1e-10

    def test_ellipsoid_gap(self):
        from scipy.spatial import cKDTree

        body = bodies.ellipsoid([1.5, 1.0, 0.75])
        n = 2000
        pts = np.array([s.point for s in bodies.boundary_mesh(body, n)])
        gap = cKDTree(pts).query(pts, k=2)[0][:, 1].max()
        assert gap <= 4 * math.pi / math.sqrt(n)

    def test_resolution_too_small(self, disk):
        with pytest.raises(InvalidArgument):
            bodies.boundary_mesh(disk, 4)

    def test_dimension_four_mesh(self):
        with pytest.raises(UnsupportedDimension):
            bodies.boundary_mesh(bodies.ball(1.0, 4), 100)


class TestVolumeAndRadii:
    @pytest.mark.parametrize(
        "body, expected",
        [
            (bodies.ball(1.0, 2), math.pi),
            (bodies.ball(2.0, 3), 32 * math.pi / 3),
            (bodies.ellipsoid([2.0, 1.0]), 2 * math.pi),
            (bodies.cube(0.5, 3), 0.125),
            (bodies.make_body("triangle"), 3 * math.sqrt(3) / 4),
        ],
    )
    def test_volume(self, body, expected):
        assert bodies.volume(body) == pytest.approx(expected, rel=1e-12)

    def test_radii(self, ellipse21):
        assert bodies.circumradius(ellipse21) == pytest.approx(2.0)
        assert bodies.inradius(ellipse21) == pytest.approx(1.0)

    def test_ray_exit(self, ellipse21):
        dirs = np.array([[1.0, 0.0], [0.0, 1.0]])
        assert np.allclose(bodies.ray_exit(ellipse21, np.zeros(2), dirs), [2.0, 1.0])

    def test_superellipsoid_ray_exit(self):
        body = bodies.make_body("superellipsoid", 2, exponent=4, radius=1.0)
        u = np.array([[1.0, 1.0]]) / math.sqrt(2)
        t = bodies.ray_exit(body, np.zeros(2), u)[0]
        assert bodies.gauge(body, t * u[0]) == pytest.approx(1.0, abs=1e-12)


def test_to_dict_is_json(ellipse21):
    assert json.loads(json.dumps(ellipse21.to_dict()))["family"] == "ellipsoid"
