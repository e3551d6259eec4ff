"""Convex bodies described by gauge and support evaluators.

A body is one of a closed set of families:

ball
    ``{"radius": R}``
ellipsoid
    ``{"matrix": M}`` (positive definite, gauge ``sqrt(x^T M x)``) or
    ``{"semiaxes": [a_1, ..., a_d]}``
superellipsoid
    ``{"exponent": p, "radius": R}``, gauge ``(sum |x_i|^p)^(1/p) / R`` with
    even ``p >= 4``.  Curvature vanishes on the coordinate axes, so this family
    fails the positive-curvature hypothesis and serves as a negative fixture.
cube
    ``{"side": s}`` or ``{"sides": [s_1, ..., s_d]}``, an axis-aligned box
    centred at the origin.
triangle
    ``{"vertices": [[x, y], ...]}`` (d = 2 only, not origin-symmetric).

All evaluators accept arrays whose last axis has length ``d``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gamma

from .errors import InvalidArgument, UnsupportedBody, UnsupportedDimension

FAMILIES = ("ball", "ellipsoid", "superellipsoid", "cube", "triangle")
SMOOTH_FAMILIES = ("ball", "ellipsoid")

# Step used for finite-difference curvature of the support function.
FD_STEP = 1e-4


def _cross2(u, v):
    return u[0] * v[1] - u[1] * v[0]


def _freeze(value):
    if isinstance(value, (list, tuple, np.ndarray)):
        return tuple(_freeze(v) for v in value)
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def _thaw(value):
    if isinstance(value, tuple):
        return [_thaw(v) for v in value]
    return value


@dataclass(frozen=True)
class BodyDescriptor:
    """Immutable description of a convex body containing the origin."""

    dimension: int
    family: str
    params: tuple = ()

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise InvalidArgument(f"unknown body family {self.family!r}")
        if int(self.dimension) != self.dimension or self.dimension < 2:
            raise InvalidArgument("dimension must be an integer >= 2")
        if self.family == "triangle" and self.dimension != 2:
            raise InvalidArgument("triangle fixture exists only in d = 2")
        # validate eagerly so a malformed body never escapes construction
        self._check()

    def param(self, name, default=None):
        for key, value in self.params:
            if key == name:
                return value
        return default

    @property
    def symmetric(self) -> bool:
        return self.family != "triangle"

    @property
    def smooth(self) -> bool:
        """True for families with smooth boundary and positive curvature."""
        return self.family in SMOOTH_FAMILIES

    def _check(self):
        d = self.dimension
        if self.family == "ball":
            if not self.radius > 0:
                raise InvalidArgument("ball radius must be positive")
        elif self.family == "ellipsoid":
            m = self.matrix
            if m.shape != (d, d) or not np.allclose(m, m.T):
                raise InvalidArgument("ellipsoid matrix must be symmetric d x d")
            if np.linalg.eigvalsh(m).min() <= 0:
                raise InvalidArgument("ellipsoid matrix must be positive definite")
        elif self.family == "superellipsoid":
            p = self.param("exponent")
            if p is None or p < 4 or p % 2:
                raise InvalidArgument("superellipsoid exponent must be even and >= 4")
            if not self.radius > 0:
                raise InvalidArgument("superellipsoid radius must be positive")
        elif self.family == "cube":
            if self.sides.shape != (d,) or np.any(self.sides <= 0):
                raise InvalidArgument("cube sides must be positive")
        elif self.family == "triangle":
            v = self.vertices
            if v.shape != (3, 2):
                raise InvalidArgument("triangle needs three planar vertices")
            normals, offsets = self.facets
            if np.any(offsets <= 0):
                raise InvalidArgument("triangle must contain the origin in its interior")

    # -- family data -------------------------------------------------------

    @cached_property
    def radius(self) -> float:
        return float(self.param("radius", 1.0))

    @cached_property
    def matrix(self) -> np.ndarray:
        """Quadratic form of an ellipsoid (identity scaled for a ball)."""
        if self.family == "ball":
            return np.eye(self.dimension) / self.radius**2
        if self.family != "ellipsoid":
            raise UnsupportedBody(f"{self.family} has no quadratic form")
        m = self.param("matrix")
        if m is not None:
            return np.array(m, dtype=float)
        axes = np.array(self.param("semiaxes"), dtype=float)
        if axes.shape != (self.dimension,) or np.any(axes <= 0):
            raise InvalidArgument("semiaxes must be d positive numbers")
        return np.diag(axes**-2.0)

    @cached_property
    def inverse_matrix(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)

    @cached_property
    def sides(self) -> np.ndarray:
        s = self.param("sides")
        if s is None:
            s = [self.param("side", 1.0)] * self.dimension
        return np.array(s, dtype=float)

    @cached_property
    def vertices(self) -> np.ndarray:
        v = self.param("vertices")
        if v is None:
            ang = np.pi / 2 + 2 * np.pi * np.arange(3) / 3
            v = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        return np.array(v, dtype=float)

    @cached_property
    def facets(self):
        """Outward normals ``n_k`` and offsets ``c_k`` with ``K = {n_k . x <= c_k}``."""
        if self.family == "cube":
            d = self.dimension
            normals = np.concatenate([np.eye(d), -np.eye(d)])
            offsets = np.concatenate([self.sides, self.sides]) / 2
            return normals, offsets
        if self.family != "triangle":
            raise UnsupportedBody(f"{self.family} is not a polytope")
        v = self.vertices
        # orient counter-clockwise
        if _cross2(v[1] - v[0], v[2] - v[0]) < 0:
            v = v[::-1]
        edges = np.roll(v, -1, axis=0) - v
        normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1)
        normals /= np.linalg.norm(normals, axis=1)[:, None]
        offsets = np.einsum("ij,ij->i", normals, v)
        return normals, offsets

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "dim": self.dimension,
            "family": self.family,
            "params": {k: _thaw(v) for k, v in self.params},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, desc: dict) -> "BodyDescriptor":
        try:
            dim = int(desc["dim"])
            family = desc["family"]
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArgument(f"malformed body description: {desc!r}") from exc
        params = desc.get("params", {}) or {}
        frozen = tuple(sorted((k, _freeze(v)) for k, v in params.items()))
        return cls(dim, family, frozen)

    @classmethod
    def from_json(cls, text: str) -> "BodyDescriptor":
        return cls.from_dict(json.loads(text))


def make_body(family: str, dim: int = 2, **params) -> BodyDescriptor:
    """Shorthand constructor, e.g. ``make_body("ellipsoid", semiaxes=[2, 1])``."""
    return BodyDescriptor.from_dict({"dim": dim, "family": family, "params": params})


def ball(radius: float = 1.0, dim: int = 2) -> BodyDescriptor:
    return make_body("ball", dim, radius=radius)


def ellipsoid(semiaxes=None, matrix=None) -> BodyDescriptor:
    if matrix is not None:
        matrix = np.asarray(matrix, dtype=float)
        return make_body("ellipsoid", matrix.shape[0], matrix=matrix)
    return make_body("ellipsoid", len(semiaxes), semiaxes=list(semiaxes))


def cube(side=1.0, dim: int = 2) -> BodyDescriptor:
    if np.ndim(side):
        return make_body("cube", len(side), sides=list(side))
    return make_body("cube", dim, side=side)


# -- evaluators ------------------------------------------------------------


def _as_points(body, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (body.dimension,):
        raise InvalidArgument(
            f"expected vectors of length {body.dimension}, got shape {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise InvalidArgument("non-finite input")
    return x


def _scalar(value):
    return float(value) if np.ndim(value) == 0 else value


def gauge(body: BodyDescriptor, x) -> float | np.ndarray:
    """Minkowski functional ``rho_K(x) = inf{t > 0 : x in tK}``."""
    x = _as_points(body, x)
    fam = body.family
    if fam == "ball":
        out = np.linalg.norm(x, axis=-1) / body.radius
    elif fam == "ellipsoid":
        q = np.einsum("...i,ij,...j->...", x, body.matrix, x)
        out = np.sqrt(np.maximum(q, 0.0))
    elif fam == "superellipsoid":
        p = body.param("exponent")
        ax = np.abs(x)
        scale = ax.max(axis=-1, keepdims=True)
        safe = np.where(scale > 0, scale, 1.0)
        out = scale[..., 0] * np.sum((ax / safe) ** p, axis=-1) ** (1.0 / p)
        out = out / body.radius
    elif fam == "cube":
        out = np.max(2 * np.abs(x) / body.sides, axis=-1)
    else:
        normals, offsets = body.facets
        out = np.max(np.maximum(x @ normals.T, 0.0) / offsets, axis=-1)
    return _scalar(out)


def support(body: BodyDescriptor, xi) -> float | np.ndarray:
    """Support function ``rho*(xi) = sup_{x in K} x . xi``."""
    xi = _as_points(body, xi)
    fam = body.family
    if fam == "ball":
        out = body.radius * np.linalg.norm(xi, axis=-1)
    elif fam == "ellipsoid":
        q = np.einsum("...i,ij,...j->...", xi, body.inverse_matrix, xi)
        out = np.sqrt(np.maximum(q, 0.0))
    elif fam == "superellipsoid":
        p = body.param("exponent")
        q = p / (p - 1.0)
        ax = np.abs(xi)
        scale = ax.max(axis=-1, keepdims=True)
        safe = np.where(scale > 0, scale, 1.0)
        out = scale[..., 0] * np.sum((ax / safe) ** q, axis=-1) ** (1.0 / q)
        out = out * body.radius
    elif fam == "cube":
        out = 0.5 * np.abs(xi) @ body.sides
    else:
        out = np.max(xi @ body.vertices.T, axis=-1)
    return _scalar(out)


def volume(body: BodyDescriptor) -> float:
    d = body.dimension
    unit_ball = math.pi ** (d / 2) / gamma(d / 2 + 1)
    fam = body.family
    if fam == "ball":
        return float(unit_ball * body.radius**d)
    if fam == "ellipsoid":
        return float(unit_ball / math.sqrt(np.linalg.det(body.matrix)))
    if fam == "superellipsoid":
        p = body.param("exponent")
        return float((2 * gamma(1 + 1 / p)) ** d / gamma(1 + d / p) * body.radius**d)
    if fam == "cube":
        return float(np.prod(body.sides))
    v = body.vertices
    return float(0.5 * abs(_cross2(v[1] - v[0], v[2] - v[0])))


def circumradius(body: BodyDescriptor) -> float:
    """Largest Euclidean norm of a point of K."""
    fam = body.family
    if fam == "ball":
        return body.radius
    if fam == "ellipsoid":
        return float(1 / math.sqrt(np.linalg.eigvalsh(body.matrix).min()))
    if fam == "superellipsoid":
        p = body.param("exponent")
        return float(body.radius * body.dimension ** (0.5 - 1.0 / p))
    if fam == "cube":
        return float(0.5 * np.linalg.norm(body.sides))
    return float(np.linalg.norm(body.vertices, axis=1).max())


def inradius(body: BodyDescriptor) -> float:
    """Radius of the largest origin-centred Euclidean ball inside K."""
    fam = body.family
    if fam == "ball":
        return body.radius
    if fam == "ellipsoid":
        return float(1 / math.sqrt(np.linalg.eigvalsh(body.matrix).max()))
    if fam == "superellipsoid":
        return body.radius
    if fam == "cube":
        return float(body.sides.min() / 2)
    return float(body.facets[1].min())


def ray_exit(body: BodyDescriptor, origin, directions) -> np.ndarray:
    """Distance ``t > 0`` at which ``origin + t*omega`` leaves K.

    ``origin`` must lie in the interior of K; ``directions`` are unit vectors
    of shape ``(..., d)``.  Polytopes and quadrics are solved in closed form,
    superellipsoids by bisection on the gauge.
    """
    o = np.asarray(origin, dtype=float)
    w = np.asarray(directions, dtype=float)
    fam = body.family
    if fam in ("ball", "ellipsoid"):
        m = body.matrix
        a = np.einsum("...i,ij,...j->...", w, m, w)
        b = 2 * (w @ (m @ o))
        c = o @ m @ o - 1.0
        disc = np.sqrt(np.maximum(b * b - 4 * a * c, 0.0))
        # q-form avoids cancellation when b > 0
        return np.where(b > 0, -2 * c / (b + disc), (disc - b) / (2 * a))
    if fam in ("cube", "triangle"):
        normals, offsets = body.facets
        slack = offsets - normals @ o
        rate = w @ normals.T
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(rate > 1e-300, slack / rate, np.inf)
        return t.min(axis=-1)
    hi = np.full(w.shape[:-1], 2 * circumradius(body) + np.linalg.norm(o))
    lo = np.zeros_like(hi)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        inside = gauge(body, o + mid[..., None] * w) <= 1.0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return 0.5 * (lo + hi)


def gauge_gradient(body: BodyDescriptor, x) -> np.ndarray:
    """Gradient of the gauge; on the boundary it points along the outer normal."""
    x = _as_points(body, x)
    fam = body.family
    if fam in ("ball", "ellipsoid"):
        mx = x @ body.matrix
        return mx / np.asarray(gauge(body, x))[..., None]
    if fam == "superellipsoid":
        p = body.param("exponent")
        g = np.asarray(gauge(body, x))[..., None]
        return np.sign(x) * (np.abs(x) / (g * body.radius)) ** (p - 1) / body.radius
    normals, offsets = body.facets
    active = np.argmax((x @ normals.T) / offsets, axis=-1)
    return normals[active] / offsets[active][..., None]


# -- curvature -------------------------------------------------------------


def _unit(body, omega):
    w = _as_points(body, omega)
    norm = np.linalg.norm(w)
    if w.ndim != 1 or abs(norm - 1.0) > 1e-9:
        raise InvalidArgument("omega must be a single unit vector")
    return w / norm


def _require_curved(body, w):
    if body.family in SMOOTH_FAMILIES:
        return
    if body.family == "superellipsoid" and np.min(np.abs(w)) > 1e-6:
        return
    raise UnsupportedBody(
        f"{body.family} has no positive-curvature point with normal {w.tolist()}"
    )


@dataclass(frozen=True)
class SurfaceSample:
    point: np.ndarray
    normal: np.ndarray
    curvature: float


def normal_point(body: BodyDescriptor, omega) -> SurfaceSample:
    """Boundary point whose outward unit normal is ``omega``."""
    w = _unit(body, omega)
    _require_curved(body, w)
    if body.family == "superellipsoid":
        p = body.param("exponent")
        q = p / (p - 1.0)
        # gradient of the dual norm
        h = support(body, w) / body.radius
        x = body.radius * np.sign(w) * (np.abs(w) / h) ** (q - 1)
    else:
        minv_w = body.inverse_matrix @ w
        x = minv_w / math.sqrt(w @ minv_w)
    return SurfaceSample(point=x, normal=w, curvature=gaussian_curvature(body, w))


def curvature_fd(body: BodyDescriptor, omega, step: float = FD_STEP) -> float:
    """Gaussian curvature at normal ``omega`` from the support function.

    The Hessian of the 1-homogeneous support function restricted to the
    tangent plane at ``omega`` has the principal radii of curvature as
    eigenvalues; its determinant is ``1 / kappa``.  Central differences with
    the given step.
    """
    w = np.asarray(omega, dtype=float)
    d = w.size
    # orthonormal tangent basis
    basis = np.linalg.svd(w[None, :])[2][1:]
    hess = np.empty((d - 1, d - 1))
    for i in range(d - 1):
        for j in range(i, d - 1):
            ei, ej = step * basis[i], step * basis[j]
            val = (
                support(body, w + ei + ej)
                - support(body, w + ei - ej)
                - support(body, w - ei + ej)
                + support(body, w - ei - ej)
            ) / (4 * step * step)
            hess[i, j] = hess[j, i] = val
    det = np.linalg.det(hess)
    if det <= 0:
        return math.inf
    return float(1.0 / det)


def gaussian_curvature(body: BodyDescriptor, omega) -> float:
    """Gaussian curvature of the boundary at the point with normal ``omega``."""
    w = _unit(body, omega)
    _require_curved(body, w)
    d = body.dimension
    if body.family == "ball":
        return body.radius ** (1 - d)
    if body.family == "ellipsoid":
        # kappa = h(w)^(d+1) det(M), h the support function
        return float(support(body, w) ** (d + 1) * np.linalg.det(body.matrix))
    return curvature_fd(body, w)


def _sphere_directions(dim, n):
    if dim == 2:
        ang = 2 * np.pi * np.arange(n) / n
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    if dim == 3:
        # Fibonacci lattice
        k = np.arange(n) + 0.5
        z = 1 - 2 * k / n
        phi = np.pi * (1 + 5**0.5) * k
        s = np.sqrt(1 - z * z)
        return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)
    raise UnsupportedDimension("boundary meshes exist for d = 2 and d = 3")


def boundary_mesh(body: BodyDescriptor, resolution: int) -> list[SurfaceSample]:
    """Quasi-uniform samples of the boundary (radial projection of a sphere grid)."""
    if resolution < 8:
        raise InvalidArgument("resolution must be at least 8")
    dirs = _sphere_directions(body.dimension, int(resolution))
    points = dirs / np.asarray(gauge(body, dirs))[:, None]
    grads = gauge_gradient(body, points)
    normals = grads / np.linalg.norm(grads, axis=1)[:, None]
    samples = []
    for x, n in zip(points, normals):
        if body.family in SMOOTH_FAMILIES:
            kappa = gaussian_curvature(body, n)
        elif body.family == "superellipsoid" and np.min(np.abs(n)) > 1e-6:
            kappa = curvature_fd(body, n)
        else:
            kappa = 0.0
        samples.append(SurfaceSample(point=x, normal=n, curvature=kappa))
    return samples
