"""Fourier transforms of indicator functions and their large-frequency asymptotics.

The transform of a star-shaped domain with radial function ``R(omega)``
about a centre ``m`` is

    F(xi) = exp(-2 pi i m.xi) * int_{S^{d-1}} int_0^{R(omega)} r^(d-1)
            exp(-2 pi i r omega.xi) dr domega,

and the radial integral has a closed form, so only the sphere integral is
done numerically: Gauss-Legendre panels in the angle (d = 2) or in the
polar angle with a periodic trapezoid rule in azimuth (d = 3).  Panels are
split where the radial function has kinks (polygon vertices, the seam where
two translates of a body cross), and the panel count is doubled until two
successive estimates agree.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import brentq, minimize

from . import bodies
from .bodies import BodyDescriptor
from .errors import (
    AccuracyNotReached,
    CalibrationFailed,
    InvalidArgument,
    UnsupportedBody,
    UnsupportedDimension,
)
from .kernels import radial_moments

DEFAULT_TOL = {2: 1e-8, 3: 1e-5}
DEFAULT_BUDGET = 4_000_000  # quadrature nodes per estimate
GL_ORDER = 16
_GL_X, _GL_W = np.polynomial.legendre.leggauss(GL_ORDER)


@dataclass
class QuadResult:
    value: complex
    error: float
    nodes: int
    empty: bool = False


def _panel_nodes(edges, panels_per_seg):
    """Gauss-Legendre nodes/weights on each segment split into equal panels."""
    xs, ws = [], []
    for (a, b), n in zip(zip(edges[:-1], edges[1:]), panels_per_seg):
        cuts = np.linspace(a, b, n + 1)
        half = 0.5 * np.diff(cuts)
        mid = 0.5 * (cuts[1:] + cuts[:-1])
        xs.append((mid[:, None] + half[:, None] * _GL_X).ravel())
        ws.append((half[:, None] * _GL_W).ravel())
    return np.concatenate(xs), np.concatenate(ws)


class _StarDomain:
    """Convex domain given as the intersection of translated bodies.

    ``parts`` is a list of ``(body, shift)``; the domain is the intersection
    of ``body + shift``.  ``center`` must be an interior point.
    """

    def __init__(self, parts, center):
        self.parts = parts
        self.center = np.asarray(center, dtype=float)
        self.dim = parts[0][0].dimension

    def radial(self, dirs):
        out = None
        for body, shift in self.parts:
            t = bodies.ray_exit(body, self.center - shift, dirs)
            out = t if out is None else np.minimum(out, t)
        return out

    def rmax(self):
        return max(
            bodies.circumradius(b) + np.linalg.norm(s - self.center) for b, s in self.parts
        )

    def _vertex_angles(self):
        angles = []
        for body, shift in self.parts:
            if body.family in ("cube", "triangle"):
                if body.family == "triangle":
                    verts = body.vertices
                else:
                    h = body.sides / 2
                    verts = np.array([[h[0], h[1]], [-h[0], h[1]], [-h[0], -h[1]], [h[0], -h[1]]])
                rel = verts + shift - self.center
                angles.extend(np.arctan2(rel[:, 1], rel[:, 0]))
        return angles

    def break_angles(self):
        """Kink locations of the radial function (d = 2)."""
        angles = self._vertex_angles()
        if len(self.parts) > 1:
            angles.extend(self._crossings())
        return sorted({round(a % (2 * np.pi), 14) for a in angles})

    def _crossings(self, n=2048):
        (b1, s1), (b2, s2) = self.parts[:2]
        if b1 == b2 and b1.family in ("ball", "ellipsoid"):
            # the two quadrics cross on the plane x^T M (s1 - s2) = 0 through
            # the midpoint; from any centre on that plane this is a line
            v = b1.matrix @ (s1 - s2)
            if np.linalg.norm(v) == 0:
                return []
            base = math.atan2(v[1], v[0]) + np.pi / 2
            return [base, base + np.pi]

        def diff(th):
            w = np.array([np.cos(th), np.sin(th)])
            return float(
                bodies.ray_exit(b1, self.center - s1, w) - bodies.ray_exit(b2, self.center - s2, w)
            )

        th = np.linspace(0, 2 * np.pi, n + 1)
        w = np.stack([np.cos(th), np.sin(th)], axis=1)
        vals = bodies.ray_exit(b1, self.center - s1, w) - bodies.ray_exit(b2, self.center - s2, w)
        roots = []
        for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
            roots.append(brentq(diff, th[i], th[i + 1], xtol=1e-15))
        return roots


def _integrate_2d(dom, xi, tol, budget):
    breaks = dom.break_angles()
    if breaks:
        edges = np.array(breaks + [breaks[0] + 2 * np.pi])
    else:
        edges = np.array([0.0, 2 * np.pi])
    seg = np.diff(edges)
    keep = seg > 1e-13
    edges = np.concatenate([edges[:1], edges[1:][keep]])
    seg = np.diff(edges)

    osc = dom.rmax() * np.linalg.norm(xi)
    base = np.maximum(1, np.ceil(seg / (2 * np.pi) * (2 * osc + 4))).astype(int)

    def estimate(level):
        th, w = _panel_nodes(edges, base * 2**level)
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
        R = dom.radial(dirs)
        k = 2 * np.pi * (dirs @ xi)
        return complex(np.dot(w, radial_moments(R, k, 2))), th.size

    return _refine(estimate, dom, xi, tol, budget)


def _frame(pole):
    pole = pole / np.linalg.norm(pole)
    basis = np.linalg.svd(pole[None, :])[2][1:]
    return basis[0], basis[1], pole


def _integrate_3d(dom, xi, tol, budget, pole, split):
    e1, e2, p = _frame(pole)
    edges = np.array([0.0, np.pi / 2, np.pi]) if split else np.array([0.0, np.pi])
    seg = np.diff(edges)
    osc = dom.rmax() * np.linalg.norm(xi)
    base_theta = np.maximum(1, np.ceil(seg / np.pi * (2 * osc + 4))).astype(int)
    # azimuthal oscillation is absent when the pole is along xi
    xi_perp = np.linalg.norm(xi - (xi @ p) * p)
    base_phi = int(max(16, 2 * np.ceil(2 * np.pi * dom.rmax() * xi_perp + 8)))

    def estimate(level):
        th, wt = _panel_nodes(edges, base_theta * 2**level)
        nphi = base_phi * 2**level
        phi = 2 * np.pi * np.arange(nphi) / nphi
        st = np.sin(th)
        total = 0j
        # chunk over theta to bound memory
        step = max(1, 2_000_000 // nphi)
        for i in range(0, th.size, step):
            s = st[i : i + step, None]
            dirs = (
                (s * np.cos(phi))[..., None] * e1
                + (s * np.sin(phi))[..., None] * e2
                + np.cos(th[i : i + step])[:, None, None] * p
            )
            R = dom.radial(dirs)
            k = 2 * np.pi * (dirs @ xi)
            vals = radial_moments(R, k, 3)
            total += np.sum(vals.sum(axis=1) * wt[i : i + step] * st[i : i + step])
        return total * (2 * np.pi / nphi), th.size * nphi

    return _refine(estimate, dom, xi, tol, budget)


def _refine(estimate, dom, xi, tol, budget):
    d = dom.dim
    vol_scale = dom.rmax() ** d
    envelope = 1e-3 * vol_scale * (1 + dom.rmax() * np.linalg.norm(xi)) ** (-(d + 1) / 2)
    prev, nodes = estimate(0)
    level = 1
    err = math.inf
    while True:
        # the next level doubles the node count
        if 2 * nodes > budget:
            raise AccuracyNotReached(
                f"quadrature tolerance {tol:g} not met within {budget} nodes "
                f"(estimate {prev:.6g}, error {err:.2g})",
                estimate=prev,
                error=err,
            )
        cur, nodes = estimate(level)
        err = abs(cur - prev)
        if err <= tol * max(abs(cur), envelope):
            return QuadResult(cur, err, nodes)
        prev = cur
        level += 1


def _check_dim(d):
    if d not in (2, 3):
        raise UnsupportedDimension(f"transforms are implemented for d = 2, 3 (got {d})")


def _as_xi(body, xi):
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (body.dimension,) or not np.all(np.isfinite(xi)):
        raise InvalidArgument(f"frequency must be a finite vector of length {body.dimension}")
    return xi


def _transform(dom, xi, tol, budget, pole=None, split=False):
    d = dom.dim
    if tol is None:
        tol = DEFAULT_TOL[d]
    if tol < 1e-12:
        raise InvalidArgument("tolerance below 1e-12 is not supported")
    local = xi
    if d == 2:
        res = _integrate_2d(dom, local, tol, budget)
    else:
        if pole is None:
            pole = xi if np.linalg.norm(xi) > 0 else np.array([0.0, 0.0, 1.0])
        res = _integrate_3d(dom, local, tol, budget, pole, split)
    phase = np.exp(-2j * np.pi * (dom.center @ xi))
    res.value = complex(res.value * phase)
    return res


def ft_indicator(
    body: BodyDescriptor, xi, tol: float | None = None, *, budget=DEFAULT_BUDGET, full_output=False
):
    """``int_K exp(-2 pi i x.xi) dx`` for a body containing the origin.

    ``tol`` is relative (default 1e-8 in d = 2, 1e-5 in d = 3).  With
    ``full_output`` a :class:`QuadResult` is returned instead of the value.
    """
    _check_dim(body.dimension)
    xi = _as_xi(body, xi)
    dom = _StarDomain([(body, np.zeros(body.dimension))], np.zeros(body.dimension))
    res = _transform(dom, xi, tol, budget)
    return res if full_output else res.value


def intersection_is_empty(body: BodyDescriptor, a, a_prime) -> bool:
    """Whether ``(K + a) cap (K + a')`` has empty interior (origin-symmetric K).

    Support-function separation: the translates are separated along ``u``
    iff ``(a - a').u >= 2 rho*(u)``; optimising over ``u`` gives the gauge
    test ``rho(a - a') >= 2``.
    """
    delta = np.asarray(a, float) - np.asarray(a_prime, float)
    return bool(bodies.gauge(body, delta) >= 2.0)


def ft_intersection(
    body: BodyDescriptor,
    a,
    a_prime,
    xi,
    tol: float | None = None,
    *,
    budget=DEFAULT_BUDGET,
    full_output=False,
):
    """``int chi_K(x - a) chi_K(x - a') exp(-2 pi i x.xi) dx``.

    The intersection is integrated about the midpoint of the two shifts and
    the modulation ``exp(-2 pi i m.xi)`` is factored out.  Disjoint
    translates give exactly 0 (``empty`` is set in the full output).
    """
    _check_dim(body.dimension)
    if not body.symmetric:
        raise UnsupportedBody("translated intersections need an origin-symmetric body")
    xi = _as_xi(body, xi)
    a = np.asarray(a, dtype=float)
    ap = np.asarray(a_prime, dtype=float)
    if intersection_is_empty(body, a, ap):
        res = QuadResult(0j, 0.0, 0, empty=True)
        return res if full_output else 0j
    mid = 0.5 * (a + ap)
    dom = _StarDomain([(body, a), (body, ap)], mid)
    pole, split = None, False
    delta = a - ap
    if body.dimension == 3 and np.linalg.norm(delta) > 0:
        # put the seam of the two translates on the equator
        if body.family in ("ball", "ellipsoid"):
            pole = body.matrix @ delta
        else:
            pole = delta
        split = True
    res = _transform(dom, xi, tol, budget, pole=pole, split=split)
    return res if full_output else res.value


def _interior_center(parts):
    """A point maximising the minimum gauge slack over ``parts`` (or None)."""

    def slack(x):
        return -min(1.0 - bodies.gauge(b, x - s) for b, s in parts)

    start = np.mean([s for _, s in parts], axis=0)
    best = minimize(slack, start, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12})
    if -best.fun <= 1e-9:
        return None
    return best.x


def ft_convex_intersection(parts, xi, tol: float | None = None, *, budget=DEFAULT_BUDGET):
    """Transform of ``cap_j (body_j + shift_j)`` for arbitrary convex bodies."""
    body0 = parts[0][0]
    _check_dim(body0.dimension)
    xi = _as_xi(body0, xi)
    parts = [(b, np.asarray(s, dtype=float)) for b, s in parts]
    center = _interior_center(parts)
    if center is None:
        return 0j
    dom = _StarDomain(parts, center)
    return _transform(dom, xi, tol, budget).value


# -- Herz asymptotics ------------------------------------------------------


def _require_smooth(body):
    if not body.smooth:
        raise UnsupportedBody(
            f"{body.family} is outside the smooth positive-curvature family"
        )


def herz_leading(body: BodyDescriptor, xi, c_d: float = 1.0) -> float:
    """Leading stationary-phase term of the transform of a smooth symmetric body.

    ``c_d * kappa(xi/|xi|)^(-1/2) * sin(2 pi (rho*(xi) - (d-1)/8)) * |xi|^(-(d+1)/2)``
    """
    _require_smooth(body)
    xi = _as_xi(body, xi)
    t = float(np.linalg.norm(xi))
    if t == 0:
        raise InvalidArgument("the asymptotic term is undefined at xi = 0")
    d = body.dimension
    kappa = bodies.gaussian_curvature(body, xi / t)
    phase = bodies.support(body, xi) - (d - 1) / 8
    return float(c_d * kappa**-0.5 * math.sin(2 * math.pi * phase) * t ** (-(d + 1) / 2))


def sine_extremal_magnitudes(body: BodyDescriptor, direction, lo: float, hi: float):
    """Magnitudes ``t`` in ``[lo, hi]`` where the leading sine is +-1 along ``direction``."""
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    h = bodies.support(body, u)
    shift = (body.dimension - 1) / 8 + 0.25
    k = np.arange(math.ceil(2 * (lo * h - shift)), math.floor(2 * (hi * h - shift)) + 1)
    return (shift + k / 2) / h


@lru_cache(maxsize=64)
def _calibrate(body, direction, lo, hi, tol):
    u = np.array(direction)
    ts = sine_extremal_magnitudes(body, u, lo, hi)
    if ts.size == 0:
        raise CalibrationFailed("no sine-extremal magnitudes in the calibration range")
    numeric = np.array([ft_indicator(body, t * u, tol).real for t in ts])
    leading = np.array([herz_leading(body, t * u, 1.0) for t in ts])
    denom = leading @ leading
    if denom <= 1e-300 * leading.size:
        raise CalibrationFailed("leading term vanishes on the calibration points")
    return float(numeric @ leading / denom)


def calibrate_constant(
    body: BodyDescriptor, direction, range=(10.0, 100.0), tol: float | None = None
) -> float:
    """Least-squares constant matching the leading term to the computed transform.

    Fit points are the magnitudes where the leading sine is extremal, so the
    next-order (cosine-phase) correction drops out of the fit.
    """
    _require_smooth(body)
    lo, hi = float(range[0]), float(range[1])
    if not (10.0 <= lo <= hi <= 200.0):
        raise InvalidArgument("calibration range must lie within [10, 200]")
    u = np.asarray(direction, dtype=float)
    u = tuple(u / np.linalg.norm(u))
    return _calibrate(body, u, lo, hi, tol)


@dataclass
class AsymptoticReport:
    direction: np.ndarray
    magnitudes: np.ndarray
    numeric: np.ndarray
    leading_values: np.ndarray
    remainders: np.ndarray
    fitted_decay_exponent: float
    calibration_constant: float
    remainder_constant: float
    degenerate: bool = False
    notes: list = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["magnitude", "numeric", "leading", "remainder"])
        for row in zip(self.magnitudes, self.numeric, self.leading_values, self.remainders):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def summary(self) -> dict:
        exp = self.fitted_decay_exponent
        return {
            "direction": [float(v) for v in self.direction],
            "exponent": None if math.isnan(exp) else exp,
            "c_d": self.calibration_constant,
            "remainder_constant": self.remainder_constant,
            "degenerate": self.degenerate,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True, indent=2)


def herz_remainder_scan(
    body: BodyDescriptor, direction, magnitudes, c_d: float | None = None, tol: float | None = None
) -> AsymptoticReport:
    """Remainder of the leading term along a ray and its fitted power-law decay.

    ``fitted_decay_exponent`` is the least-squares slope of ``log|remainder|``
    against ``log|xi|``; ``remainder_constant`` is the largest
    ``|remainder| * |xi|^((d+3)/2)`` seen on the grid.
    """
    _require_smooth(body)
    mags = np.asarray(magnitudes, dtype=float)
    if mags.ndim != 1 or mags.size == 0:
        raise InvalidArgument("magnitudes must be a non-empty list")
    if np.any(np.diff(mags) <= 0) or mags[0] < 5:
        raise InvalidArgument("magnitudes must be strictly ascending and >= 5")
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    d = body.dimension
    notes = []
    if c_d is None:
        lo, hi = max(10.0, mags[0]), min(200.0, mags[-1])
        if hi - lo < 5:
            lo, hi = 10.0, 100.0
            notes.append("magnitude grid too narrow; calibrated on [10, 100]")
        c_d = calibrate_constant(body, u, (lo, hi), tol)
    numeric = np.array([ft_indicator(body, t * u, tol).real for t in mags])
    leading = np.array([herz_leading(body, t * u, c_d) for t in mags])
    rem = np.abs(numeric - leading)
    degenerate = mags.size < 2 or np.any(rem == 0)
    if degenerate:
        slope = math.nan
        notes.append("decay slope undefined (fewer than two usable points)")
    else:
        slope = float(np.polyfit(np.log(mags), np.log(rem), 1)[0])
    return AsymptoticReport(
        direction=u,
        magnitudes=mags,
        numeric=numeric,
        leading_values=leading,
        remainders=rem,
        fitted_decay_exponent=slope,
        calibration_constant=float(c_d),
        remainder_constant=float(np.max(rem * mags ** ((d + 3) / 2))),
        degenerate=bool(degenerate),
        notes=notes,
    )


def transform_zeros(body: BodyDescriptor, direction, lo: float, hi: float, samples_per_unit=16):
    """Sign changes of the (real) transform along a ray, refined by Brent's method."""
    if not body.symmetric:
        raise UnsupportedBody("real-valued transform needs an origin-symmetric body")
    u = np.asarray(direction, dtype=float)
    u = u / np.linalg.norm(u)
    n = int(np.ceil((hi - lo) * samples_per_unit * max(1.0, bodies.support(body, u)))) + 1
    ts = np.linspace(lo, hi, n)
    vals = np.array([ft_indicator(body, t * u, 1e-10).real for t in ts])
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        roots.append(
            brentq(lambda t: ft_indicator(body, t * u, 1e-10).real, ts[i], ts[i + 1], xtol=1e-13)
        )
    return np.array(roots)
