"""Triple extraction and the mod-4 sine-phase certificate.

The argument runs on three spectrum points whose time shifts nearly agree
(``|a_i - a_j| <= 1/(100 r)``), whose frequencies are spread at scale ``r``
(``r <= |b_i - b_j| <= 2r``) and lie within ``1/r`` of a line.  If the three
Gabor atoms were mutually orthogonal, every pairwise phase
``phi_ij - (d-1)/8`` would sit within a small residual ``e_ij`` of the half
integers; additivity along the line then forces
``(d-1)/4 + 2(e_12 + e_23 - e_13)`` to be an integer, which is impossible
for small residuals unless ``d = 1 mod 4``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from . import bodies, fourier
from .bodies import BodyDescriptor
from .errors import InvalidArgument, TripleNotFound, UnsupportedBody
from .gabor import GaborSystem, LatticeSpectrum, PointSpectrum, SpectrumPoint

RESIDUAL_BOUND = 1 / 50
DELTA_TOLERANCE = 3 / 25

OBSTRUCTED = "Obstructed"
ABSORBED = "Absorbed"
INCONCLUSIVE = "Inconclusive"


@dataclass
class Triple:
    points: tuple
    r: float
    line_direction: np.ndarray
    line_deviation: float

    def violations(self) -> list[str]:
        """Conditions the triple fails (empty when valid)."""
        out = []
        r = self.r
        for i, j in ((0, 1), (1, 2), (0, 2)):
            p, q = self.points[i], self.points[j]
            da = np.linalg.norm(p.a - q.a)
            db = np.linalg.norm(p.b - q.b)
            if da > 1 / (100 * r) * (1 + 1e-12):
                out.append(f"|a{i + 1} - a{j + 1}| = {da:.3g} > 1/(100r)")
            if not (r * (1 - 1e-12) <= db <= 2 * r * (1 + 1e-12)):
                out.append(f"|b{i + 1} - b{j + 1}| = {db:.6g} outside [r, 2r]")
        if self.line_deviation > 1 / r * (1 + 1e-12):
            out.append(f"line deviation {self.line_deviation:.3g} > 1/r")
        return out

    def to_dict(self) -> dict:
        return {
            "points": [
                {"a": [float(v) for v in p.a], "b": [float(v) for v in p.b]} for p in self.points
            ],
            "r": self.r,
            "line_direction": [float(v) for v in self.line_direction],
            "line_deviation": self.line_deviation,
        }


def _line_deviation(b, u):
    perp = b - np.outer(b @ u, u)
    return float(np.linalg.norm(perp - perp.mean(axis=0), axis=1).max())


def _canonical(u):
    u = u / np.linalg.norm(u)
    nz = np.nonzero(np.abs(u) > 1e-12)[0]
    return -u if u[nz[0]] < 0 else u


def _meets_cube(body, times, lo, hi):
    """Whether ``(K + a) cap Q`` has non-empty interior, for each time shift."""
    times = np.atleast_2d(times)
    if body.family == "cube":
        h = body.sides / 2
        return np.all((times - h < hi) & (times + h > lo), axis=1)
    nearest = np.clip(times, lo, hi)
    dist = np.linalg.norm(times - nearest, axis=1)
    out = np.asarray(bodies.gauge(body, nearest - times)) < 1.0
    unsure = ~out & (dist < bodies.circumradius(body))
    for i in np.nonzero(unsure)[0]:
        a = times[i]
        res = minimize(
            lambda x: bodies.gauge(body, x - a) ** 2,
            nearest[i],
            method="L-BFGS-B",
            bounds=list(zip(lo, hi)),
        )
        out[i] = res.fun < 1.0 - 1e-12
    return out


def _triangles(b, a, r):
    """First triple (in t-order) with all pairwise conditions i) and ii)."""
    db = np.linalg.norm(b[:, None, :] - b[None, :, :], axis=-1)
    da = np.linalg.norm(a[:, None, :] - a[None, :, :], axis=-1)
    ok = (db >= r) & (db <= 2 * r) & (da <= 1 / (100 * r))
    n = len(b)
    for i in range(n):
        for j in np.nonzero(ok[i, i + 1 :])[0] + i + 1:
            common = np.nonzero(ok[i, j + 1 :] & ok[j, j + 1 :])[0]
            if len(common):
                return i, j, int(common[0] + j + 1)
    return None


def _search_fiber(fiber, r, u):
    """Look for a triple near a line parallel to ``u`` inside one time cell."""
    d = fiber.shape[1] // 2
    a, b = fiber[:, :d], fiber[:, d:]
    t = b @ u
    order = np.lexsort((np.arange(len(t)), t))
    a, b, t = a[order], b[order], t[order]
    perp = b - np.outer(t, u)
    tree = cKDTree(perp)
    tubes = 0
    for k in range(len(b)):
        members = np.array(sorted(tree.query_ball_point(perp[k], 2.0 / r)))
        members = members[members >= k]
        if len(members) < 3:
            continue
        tubes += 1
        hit = _triangles(b[members], a[members], r)
        if hit is None:
            continue
        idx = members[list(hit)]
        if _line_deviation(b[idx], u) <= 1.0 / r:
            return idx, order, tubes
    return None, order, tubes


def extract_triple(
    spectrum,
    r: float = 5.0,
    R: float = 100.0,
    base_cube=None,
    strategy="principal",
    body: BodyDescriptor | None = None,
    max_cells: int = 500,
) -> Triple:
    """Pigeonhole search for a triple satisfying conditions i)-iii).

    1. Keep frequencies with ``|b| <= R`` and time shifts whose translated
       body meets the unit ``base_cube`` (lower corner, default origin).
    2. Group points into time cells: each point anchors the cell of points
       whose time shift is within ``1/(100 r)`` of its own.  Cells are
       visited by decreasing fiber size, ties broken lexicographically.
    3. In a cell, choose the line direction (principal axis of the fiber's
       frequencies, or the explicit vector given as ``strategy``) and scan
       tubes of width ``2/r`` around lines with that direction for three
       points with pairwise gaps in ``[r, 2r]``.
    """
    if r < 2:
        raise InvalidArgument("r must be at least 2")
    if R < 10 * r:
        raise InvalidArgument("R must be at least 10 r")
    if isinstance(spectrum, GaborSystem):
        body = body or spectrum.window_body
        spectrum = spectrum.spectrum
    if not isinstance(spectrum, (PointSpectrum, LatticeSpectrum)):
        spectrum = PointSpectrum(spectrum)
    d = spectrum.dim
    if body is None:
        body = bodies.ball(0.5, d)
    lo = np.zeros(d) if base_cube is None else np.asarray(base_cube, dtype=float)
    hi = lo + 1.0
    reach = bodies.circumradius(body)
    pts = spectrum.time_slice(lo - reach, hi + reach)
    stats = {"points_near_cube": int(len(pts))}
    pts = pts[np.linalg.norm(pts[:, d:], axis=1) <= R]
    pts = pts[_meets_cube(body, pts[:, :d], lo, hi)] if len(pts) else pts
    stats["time_shifts_meeting_cube"] = int(len(pts))
    if len(pts) < 3:
        raise TripleNotFound("fewer than three points meet the base cube", stats)

    a = pts[:, :d]
    cell_radius = 1 / (100 * r)
    # many points share a time shift (lattices), so group those first
    times, inverse, counts = np.unique(a, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.ravel()
    rows_by_time = np.split(np.argsort(inverse, kind="stable"), np.cumsum(counts)[:-1])
    near = cKDTree(times).query_ball_point(times, cell_radius)
    sizes = np.array([counts[m].sum() for m in near])
    order = sorted(range(len(times)), key=lambda i: (-sizes[i], tuple(times[i])))
    stats["largest_fiber"] = int(sizes.max())
    seen = set()
    searched = 0
    tubes = 0
    for i in order:
        cell = tuple(sorted(near[i]))
        if cell in seen or sizes[i] < 3:
            continue
        seen.add(cell)
        if searched >= max_cells:
            break
        searched += 1
        fiber = pts[np.concatenate([rows_by_time[j] for j in cell])]
        # canonical row order keeps the result independent of input order
        fiber = fiber[np.lexsort(fiber.T[::-1])]
        if isinstance(strategy, str):
            if strategy != "principal":
                raise InvalidArgument(f"unknown strategy {strategy!r}")
            b = fiber[:, d:]
            u = np.linalg.svd(b - b.mean(axis=0), full_matrices=False)[2][0]
        else:
            u = np.asarray(strategy, dtype=float)
        u = _canonical(u)
        idx, perm, n_tubes = _search_fiber(fiber, r, u)
        tubes += n_tubes
        if idx is None:
            continue
        rows = fiber[perm[idx]]
        triple = Triple(
            points=tuple(SpectrumPoint.from_row(row) for row in rows),
            r=float(r),
            line_direction=u,
            line_deviation=_line_deviation(rows[:, d:], u),
        )
        bad = triple.violations()
        if bad:
            raise AssertionError(f"extracted triple violates {bad}")
        return triple
    stats.update(cells_searched=searched, tubes_searched=tubes)
    raise TripleNotFound("no triple satisfies the separation and collinearity conditions", stats)


# -- phases ----------------------------------------------------------------


def _require_smooth(body):
    if not body.smooth:
        raise UnsupportedBody(f"{body.family} lacks the positive-curvature hypothesis")


def pair_phase(body: BodyDescriptor, p: SpectrumPoint, q: SpectrumPoint, convention="modulated"):
    """Phase whose sine zeros locate orthogonality of the pair.

    ``convention="modulated"``: ``rho*(b_p - b_q) + (a_p - a_q).(b_p - b_q)``.
    ``convention="intersection"``: half-width of ``(K + a_p) cap (K + a_q)``
    in the direction ``b_p - b_q``, i.e. ``rho*(xi) - |(a_p - a_q).xi| / 2``,
    which is what the stationary points of the intersection actually produce.
    """
    _require_smooth(body)
    xi = p.b - q.b
    if not np.any(xi):
        raise InvalidArgument("coincident frequencies")
    delta = p.a - q.a
    if convention == "modulated":
        return float(bodies.support(body, xi) + delta @ xi)
    if convention == "intersection":
        return float(bodies.support(body, xi) - abs(delta @ xi) / 2)
    raise InvalidArgument(f"unknown phase convention {convention!r}")


def phase_residual(body: BodyDescriptor, p: SpectrumPoint, q: SpectrumPoint, convention="modulated"):
    """``(k, e)`` with ``phi - (d-1)/8 = k/2 + e`` and ``|e| <= 1/4``.

    Ties at ``e = +-1/4`` go to the even ``k``.
    """
    phi = pair_phase(body, p, q, convention)
    x = phi - (body.dimension - 1) / 8
    k = round(2 * x)
    return int(k), float(x - k / 2)


@dataclass
class PhaseReport:
    k: tuple
    e: tuple
    delta: float
    verdict: str
    tolerance_used: float
    dimension: int
    violated: list = field(default_factory=list)
    residual_bound: float = RESIDUAL_BOUND

    def to_dict(self) -> dict:
        return {
            "k": {"12": self.k[0], "23": self.k[1], "13": self.k[2]},
            "e": {"12": self.e[0], "23": self.e[1], "13": self.e[2]},
            "delta": self.delta,
            "verdict": self.verdict,
            "tolerance_used": self.tolerance_used,
            "dimension": self.dimension,
            "violated": self.violated,
            "residual_bound": self.residual_bound,
        }


def _distance_to_integer(x):
    return abs(x - round(x))


def mod4_certificate(d: int, residuals, line_budget: float = 0.0) -> PhaseReport:
    """Integrality verdict for the residual triple keyed ``12``, ``23``, ``13``.

    ``delta = (d-1)/4 + 2 (e_12 + e_23 - e_13)`` must be an integer for an
    orthogonal collinear triple.  With every ``|e_ij| <= 1/50`` and
    ``d != 1 mod 4`` it sits more than 3/25 from the integers: Obstructed.
    For ``d = 1 mod 4`` the phase shift is itself an integer: Absorbed.
    ``line_budget`` widens the residual bound to cover a triple that is only
    approximately collinear.
    """
    if isinstance(residuals, dict):
        residuals = [residuals["12"], residuals["23"], residuals["13"]]
    (k12, e12), (k23, e23), (k13, e13) = residuals
    es = (float(e12), float(e23), float(e13))
    if not all(math.isfinite(e) for e in es):
        raise InvalidArgument("residuals must be finite")
    if not line_budget >= 0:
        raise InvalidArgument("line budget must be non-negative")
    bound = RESIDUAL_BOUND + line_budget
    delta = (d - 1) / 4 + 2 * (es[0] + es[1] - es[2])
    violated = [
        f"|e_{key}| = {abs(e):.4g} > {bound:.4g}"
        for key, e in zip(("12", "23", "13"), es)
        if abs(e) > bound
    ]
    if d % 4 == 1:
        verdict = ABSORBED
    elif not violated and _distance_to_integer(delta) > DELTA_TOLERANCE:
        verdict = OBSTRUCTED
    else:
        verdict = INCONCLUSIVE
    return PhaseReport(
        k=(int(k12), int(k23), int(k13)),
        e=es,
        delta=float(delta),
        verdict=verdict,
        tolerance_used=DELTA_TOLERANCE,
        dimension=int(d),
        violated=violated,
        residual_bound=bound,
    )


# -- pipeline --------------------------------------------------------------


@dataclass
class FalsifyReport:
    triple: Triple
    pairs: list
    certificate: PhaseReport
    parameters: dict

    @property
    def verdict(self):
        return self.certificate.verdict

    @property
    def delta(self):
        return self.certificate.delta

    def to_dict(self) -> dict:
        return {
            "triple": self.triple.to_dict(),
            "pairs": self.pairs,
            "delta": self.certificate.delta,
            "verdict": self.certificate.verdict,
            "certificate": self.certificate.to_dict(),
            "parameters": self.parameters,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def falsify(
    body: BodyDescriptor,
    system,
    r: float = 5.0,
    R: float = 100.0,
    base_cube=None,
    strategy="principal",
    c_d: float | None = None,
    almost_zero_constant: float = 1.0,
) -> FalsifyReport:
    """Run extraction, pairwise phase residuals and the certificate end to end.

    For each pair the normalised transform amplitude
    ``|F| |b|^((d+1)/2) kappa^(1/2) / c_d`` of the translated intersection is
    recorded next to ``|sin(2 pi e)|``; when the atoms are orthogonal both
    must be ``<= C/r`` (``C = almost_zero_constant``).  Transforms are only
    evaluated for d <= 3.
    """
    _require_smooth(body)
    if isinstance(system, GaborSystem):
        if system.window_body != body:
            raise InvalidArgument("system window differs from the body under test")
        spectrum = system.spectrum
    else:
        spectrum = system
    triple = extract_triple(spectrum, r, R, base_cube, strategy, body=body)
    d = body.dimension
    if d <= 3 and c_d is None:
        c_d = fourier.calibrate_constant(body, np.eye(d)[0])
    pairs = []
    residuals = []
    for i, j in ((0, 1), (1, 2), (0, 2)):
        p, q = triple.points[i], triple.points[j]
        phi = pair_phase(body, p, q)
        k, e = phase_residual(body, p, q)
        residuals.append((k, e))
        xi = p.b - q.b
        entry = {
            "pair": f"{i + 1}{j + 1}",
            "phi": phi,
            "k": k,
            "e": e,
            "sine": abs(math.sin(2 * math.pi * e)),
            "transform_magnitude": None,
            "normalized_amplitude": None,
        }
        if d <= 3:
            mag = abs(fourier.ft_intersection(body, p.a, q.a, xi))
            t = float(np.linalg.norm(xi))
            kappa = bodies.gaussian_curvature(body, xi / t)
            entry["transform_magnitude"] = mag
            entry["normalized_amplitude"] = mag * t ** ((d + 1) / 2) * kappa**0.5 / c_d
        bound = almost_zero_constant / r
        entry["almost_zero"] = bool(
            entry["sine"] <= bound
            and (entry["normalized_amplitude"] is None or entry["normalized_amplitude"] <= bound)
        )
        pairs.append(entry)
    # off-line offsets of size s change |b_i - b_j| by at most 2 s^2 / gap
    dev = triple.line_deviation
    line_budget = bodies.circumradius(body) * 2 * dev**2 / r
    cert = mod4_certificate(d, residuals, line_budget)
    params = {
        "body": body.to_dict(),
        "r": r,
        "R": R,
        "base_cube": None if base_cube is None else [float(v) for v in base_cube],
        "strategy": strategy if isinstance(strategy, str) else [float(v) for v in strategy],
        "c_d": c_d,
        "almost_zero_constant": almost_zero_constant,
    }
    return FalsifyReport(triple, pairs, cert, params)


# -- synthetic spectra -----------------------------------------------------


def planted_triple_spectrum(dim: int, r: float, R: float, noise: int = 1000, seed: int = 0):
    """Uniform noise plus one triple meeting conditions i)-iii).

    Returns ``(points, planted_rows)``; the planted time shifts lie inside
    the unit cube at the origin and the frequencies near a random line.
    """
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(dim)
    u /= np.linalg.norm(u)
    n = rng.standard_normal(dim)
    n -= (n @ u) * u
    n /= np.linalg.norm(n)
    eps = 1e-3
    h = 1.1 * math.sqrt(r * eps)
    c = rng.uniform(-R / 4, R / 4, dim)
    bs = np.array([c, c + (r - eps / 2) * u + h * n, c + (2 * r - eps) * u])
    a0 = rng.uniform(0.25, 0.75, dim)
    jitter = rng.uniform(-1, 1, (3, dim))
    jitter *= 1 / (400 * r * math.sqrt(dim))
    planted = np.hstack([a0 + jitter, bs])
    g = rng.standard_normal((noise, dim))
    g /= np.linalg.norm(g, axis=1)[:, None]
    nb = g * (R * rng.random(noise) ** (1 / dim))[:, None]
    na = rng.uniform(-1.0, 2.0, (noise, dim))
    pts = np.vstack([np.hstack([na, nb]), planted])
    return pts[rng.permutation(len(pts))], planted


def engineered_zero_spectrum(body: BodyDescriptor, r_min: float, count: int = 3, direction=None):
    """Collinear frequencies spaced by the first transform zero beyond ``r_min``.

    Consecutive atoms are then exactly orthogonal.  Returns ``(points, gap)``;
    all time shifts are 0.
    """
    d = body.dimension
    u = np.eye(d)[0] if direction is None else np.asarray(direction, float)
    u = u / np.linalg.norm(u)
    if d <= 3:
        zeros = fourier.transform_zeros(body, u, r_min, r_min + 2.0)
        if len(zeros) == 0:
            raise InvalidArgument("no transform zero found near r_min")
        gap = float(zeros[0])
    else:
        # leading-term zero; no quadrature beyond d = 3
        h = bodies.support(body, u)
        k = math.ceil(2 * (r_min * h - (d - 1) / 8))
        gap = ((d - 1) / 8 + k / 2) / h
    bs = np.outer(gap * np.arange(count), u)
    pts = np.hstack([np.zeros((count, d)), bs])
    return pts, gap
