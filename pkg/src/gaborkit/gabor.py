"""Gabor systems with indicator windows and their structural diagnostics.

A spectrum is a finite sample of points ``(a, b)`` in ``R^d x R^d`` stored
as an ``(N, 2d)`` array, time shifts first.  Lattice spectra can be far too
large to materialise (``Z^2 x Z^2`` inside radius 100 has ~5e8 points), so
:class:`LatticeSpectrum` generates the points over a time window on demand
and materialises only when a whole-sample scan needs it.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import bodies, fourier
from .bodies import BodyDescriptor
from .errors import InvalidArgument, UndefinedResult, UnsupportedBody
from .kernels import box_stft_sq_sum, box_transform, count_in_boxes

MATERIALIZE_LIMIT = 20_000_000
GRAM_EXHAUSTIVE_LIMIT = 10_000


@dataclass(frozen=True, eq=False)
class SpectrumPoint:
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", np.asarray(self.a, dtype=float))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=float))
        if self.a.shape != self.b.shape or self.a.ndim != 1:
            raise InvalidArgument("time and frequency parts must be vectors of equal length")
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise InvalidArgument("spectrum points must be finite")

    @classmethod
    def from_row(cls, row):
        row = np.asarray(row, dtype=float)
        d = row.size // 2
        return cls(row[:d], row[d:])

    def as_row(self):
        return np.concatenate([self.a, self.b])

    def __eq__(self, other):
        if not isinstance(other, SpectrumPoint):
            return NotImplemented
        return np.array_equal(self.a, other.a) and np.array_equal(self.b, other.b)

    def __hash__(self):
        return hash(self.as_row().tobytes())


# -- spectra ---------------------------------------------------------------


class PointSpectrum:
    """An explicit finite point set."""

    def __init__(self, points, dim=None):
        pts = np.asarray(points, dtype=float)
        if pts.size == 0:
            if dim is None:
                raise InvalidArgument("empty spectrum needs an explicit dimension")
            pts = pts.reshape(0, 2 * dim)
        if pts.ndim != 2 or pts.shape[1] % 2:
            raise InvalidArgument("spectrum must be an (N, 2d) array")
        if not np.all(np.isfinite(pts)):
            raise InvalidArgument("spectrum points must be finite")
        self.points = pts
        self.dim = pts.shape[1] // 2

    def __len__(self):
        return len(self.points)

    def time_slice(self, lo, hi):
        a = self.points[:, : self.dim]
        mask = np.all((a >= lo) & (a <= hi), axis=1)
        return self.points[mask]


class LatticeSpectrum:
    """``(diag(time_steps) Z^d) x (diag(freq_steps) Z^d)`` inside a ball."""

    def __init__(self, time_steps, freq_steps, radius):
        self.time_steps = np.asarray(time_steps, dtype=float)
        self.freq_steps = np.asarray(freq_steps, dtype=float)
        self.radius = float(radius)
        self.dim = self.time_steps.size
        self._points = None

    @staticmethod
    def _grid(steps, lo, hi):
        axes = []
        for s, l, h in zip(steps, lo, hi):
            axes.append(s * np.arange(math.ceil(l / s - 1e-12), math.floor(h / s + 1e-12) + 1))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def time_slice(self, lo, hi):
        R = self.radius
        lo = np.maximum(np.broadcast_to(lo, (self.dim,)), -R)
        hi = np.minimum(np.broadcast_to(hi, (self.dim,)), R)
        times = self._grid(self.time_steps, lo, hi)
        times = times[np.sum(times**2, axis=1) <= R * R]
        chunks = []
        for a in times:
            rho = math.sqrt(max(R * R - a @ a, 0.0))
            b = self._grid(self.freq_steps, [-rho] * self.dim, [rho] * self.dim)
            b = b[np.sum(b**2, axis=1) <= rho * rho + 1e-9]
            chunks.append(np.hstack([np.broadcast_to(a, b.shape), b]))
        if not chunks:
            return np.empty((0, 2 * self.dim))
        return np.vstack(chunks)

    @property
    def points(self):
        if self._points is None:
            est = np.pi ** self.dim / math.factorial(self.dim) * self.radius ** (2 * self.dim)
            est /= np.prod(self.time_steps) * np.prod(self.freq_steps)
            if est > MATERIALIZE_LIMIT:
                raise InvalidArgument(
                    f"lattice sample of ~{est:.2g} points is too large to materialise"
                )
            self._points = self.time_slice(-self.radius, self.radius)
        return self._points

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class GaborSystem:
    """Normalised indicator window ``|K|^(-1/2) chi_K`` with a truncated spectrum."""

    window_body: BodyDescriptor
    spectrum: object
    truncation_radius: float
    normalization: float = field(init=False)

    def __post_init__(self):
        spec = self.spectrum
        if not isinstance(spec, (PointSpectrum, LatticeSpectrum)):
            spec = PointSpectrum(spec, dim=self.window_body.dimension)
            object.__setattr__(self, "spectrum", spec)
        if spec.dim != self.window_body.dimension:
            raise InvalidArgument("spectrum dimension does not match the window")
        if not self.truncation_radius > 0:
            raise InvalidArgument("truncation radius must be positive")
        if isinstance(spec, PointSpectrum) and len(spec):
            r = np.linalg.norm(spec.points, axis=1).max()
            if r > self.truncation_radius * (1 + 1e-12):
                raise InvalidArgument(
                    f"spectrum point at radius {r:g} lies outside the truncation radius"
                )
        object.__setattr__(
            self, "normalization", bodies.volume(self.window_body) ** -0.5
        )

    @property
    def dim(self):
        return self.window_body.dimension

    @property
    def points(self) -> np.ndarray:
        return self.spectrum.points

    def point(self, i) -> SpectrumPoint:
        return SpectrumPoint.from_row(self.points[i])

    def with_points(self, points) -> "GaborSystem":
        return GaborSystem(self.window_body, PointSpectrum(points, self.dim), self.truncation_radius)


# -- analysed functions ----------------------------------------------------


@dataclass(frozen=True)
class BoxIndicator:
    """Unit-norm indicator of an axis-aligned box."""

    center: tuple
    sides: tuple

    @property
    def lo(self):
        return np.asarray(self.center, float) - np.asarray(self.sides, float) / 2

    @property
    def hi(self):
        return np.asarray(self.center, float) + np.asarray(self.sides, float) / 2

    @property
    def norm_factor(self):
        return float(np.prod(self.sides)) ** -0.5

    def as_body(self):
        return bodies.cube(list(self.sides)), np.asarray(self.center, float)


@dataclass(frozen=True)
class BodyIndicator:
    """Unit-norm indicator of ``body + center``."""

    body: BodyDescriptor
    center: tuple

    @property
    def norm_factor(self):
        return bodies.volume(self.body) ** -0.5

    def as_body(self):
        return self.body, np.asarray(self.center, float)


def default_probe_function(dim: int) -> BoxIndicator:
    """Normalised indicator of the side-1/2 cube at the origin."""
    return BoxIndicator(center=(0.0,) * dim, sides=(0.5,) * dim)


def _window_box(body):
    if body.family != "cube":
        return None
    h = body.sides / 2
    return -h, h


def stft(f_spec, window, t, nu) -> complex:
    """``V_g f(t, nu) = int f(x) g(x - t) exp(-2 pi i x.nu) dx``.

    ``window`` is a body or a ``(body, normalization)`` pair; without an
    explicit normalization the unit-norm one is used.  Box windows against
    box functions use the exact product formula.
    """
    if isinstance(window, BodyDescriptor):
        body, norm = window, bodies.volume(window) ** -0.5
    else:
        body, norm = window
    if not isinstance(f_spec, (BoxIndicator, BodyIndicator)):
        raise InvalidArgument(f"unsupported analysed function {f_spec!r}")
    t = np.asarray(t, dtype=float)
    nu = np.asarray(nu, dtype=float)
    scale = norm * f_spec.norm_factor
    box = _window_box(body)
    if box is not None and isinstance(f_spec, BoxIndicator):
        lo = np.maximum(f_spec.lo, box[0] + t)
        hi = np.minimum(f_spec.hi, box[1] + t)
        return complex(scale * box_transform(lo[None], hi[None], nu[None])[0])
    fb, fc = f_spec.as_body()
    return complex(scale * fourier.ft_convex_intersection([(fb, fc), (body, t)], nu))


# -- orthogonality ---------------------------------------------------------


def _pair_defects(system, i_idx, j_idx):
    pts = system.points
    d = system.dim
    p, q = pts[i_idx], pts[j_idx]
    delta_b = p[:, d:] - q[:, d:]
    box = _window_box(system.window_body)
    if box is not None:
        lo = np.maximum(box[0] + p[:, :d], box[0] + q[:, :d])
        hi = np.minimum(box[1] + p[:, :d], box[1] + q[:, :d])
        vals = box_transform(lo, hi, delta_b)
        return system.normalization**2 * np.abs(vals)
    out = np.empty(len(i_idx))
    for k in range(len(i_idx)):
        out[k] = abs(
            fourier.ft_intersection(system.window_body, p[k, :d], q[k, :d], delta_b[k])
        )
    return system.normalization**2 * out


def orthogonality_defect(system: GaborSystem, p: SpectrumPoint, q: SpectrumPoint) -> float:
    """``|<g_p, g_q>|`` for two distinct spectrum points."""
    if np.array_equal(p.a, q.a) and np.array_equal(p.b, q.b):
        raise InvalidArgument("p == q: the inner product is the window norm (1)")
    sub = np.vstack([p.as_row(), q.as_row()])
    tmp = GaborSystem(system.window_body, PointSpectrum(sub), np.linalg.norm(sub, axis=1).max() + 1)
    return float(_pair_defects(tmp, np.array([0]), np.array([1]))[0])


@dataclass
class GramScan:
    max_defect: float
    worst_pair: tuple | None
    pairs_checked: int
    above_threshold: int
    pruned: bool


def _overlap_candidates(system):
    """Index pairs whose translated windows can overlap."""
    pts = system.points
    d = system.dim
    a = pts[:, :d]
    body = system.window_body
    box = _window_box(body)
    if box is not None:
        tree = cKDTree(a)
        pairs = tree.query_pairs(float(body.sides.max()), p=np.inf, output_type="ndarray")
        # coincident time shifts are returned too; keep strict overlaps only
        gap = np.abs(a[pairs[:, 0]] - a[pairs[:, 1]])
        return pairs[np.all(gap < body.sides, axis=1)]
    tree = cKDTree(a)
    pairs = tree.query_pairs(2 * bodies.circumradius(body), output_type="ndarray")
    if len(pairs):
        delta = a[pairs[:, 0]] - a[pairs[:, 1]]
        pairs = pairs[np.asarray(bodies.gauge(body, delta)) < 2.0]
    return pairs


def gram_scan(system: GaborSystem, threshold: float = 1e-6) -> GramScan:
    """Largest pairwise orthogonality defect over the spectrum sample.

    Pairs whose windows are disjoint in time have exactly zero inner product
    and are skipped; ``pruned`` records that the sample exceeded the
    exhaustive-scan size, which changes nothing about the result.
    """
    n = len(system.points)
    if n < 2:
        return GramScan(0.0, None, 0, 0, False)
    pairs = _overlap_candidates(system)
    if len(pairs) == 0:
        return GramScan(0.0, None, 0, 0, n > GRAM_EXHAUSTIVE_LIMIT)
    defects = np.empty(len(pairs))
    for s in range(0, len(pairs), 1_000_000):
        chunk = pairs[s : s + 1_000_000]
        defects[s : s + len(chunk)] = _pair_defects(system, chunk[:, 0], chunk[:, 1])
    k = int(np.argmax(defects))
    return GramScan(
        max_defect=float(defects[k]),
        worst_pair=(int(pairs[k, 0]), int(pairs[k, 1])),
        pairs_checked=len(pairs),
        above_threshold=int(np.count_nonzero(defects > threshold)),
        pruned=n > GRAM_EXHAUSTIVE_LIMIT,
    )


def separation(system: GaborSystem) -> float:
    """``min |a - a'| + |b - b'|`` over distinct points of the sample."""
    pts = system.points
    if len(pts) < 2:
        raise UndefinedResult("separation needs at least two points")
    d = system.dim
    tree = cKDTree(pts)
    dist, _ = tree.query(pts, k=2)
    nearest = dist[:, 1].min()
    if nearest == 0:
        return 0.0
    # the sum of the two norms lies in [e, sqrt(2) e] for Euclidean distance e
    pairs = tree.query_pairs(math.sqrt(2) * nearest * (1 + 1e-12), output_type="ndarray")
    diff = pts[pairs[:, 0]] - pts[pairs[:, 1]]
    metric = np.linalg.norm(diff[:, :d], axis=1) + np.linalg.norm(diff[:, d:], axis=1)
    return float(metric.min())


# -- covering and densities ------------------------------------------------


def _grid_in_ball(dim, spacing, radius):
    if radius < 0:
        return np.empty((0, dim))
    n = int(math.floor(radius / spacing + 1e-12))
    axis = spacing * np.arange(-n, n + 1)
    mesh = np.meshgrid(*([axis] * dim), indexing="ij")
    grid = np.stack([m.ravel() for m in mesh], axis=1)
    return grid[np.sum(grid**2, axis=1) <= radius * radius + 1e-9]


@dataclass
class CoveringResult:
    side: float
    emptiest_center: np.ndarray | None
    probes: int


def covering_radius(system: GaborSystem, margin: float = 2.0, resolution: float = 1 / 16):
    """Smallest tested side ``C`` such that every probe cube of side ``C`` holds a point.

    Probe cubes are open, centred on the half-integer grid, and lie inside
    the ball of radius ``truncation_radius - margin``.  The side is found by
    doubling from 1/2 and then bisecting down to ``resolution``.  The centre
    of an empty cube at the largest failing side is reported.
    """
    pts = system.points
    if len(pts) == 0:
        raise InvalidArgument("empty spectrum")
    D = pts.shape[1]
    inner = system.truncation_radius - margin
    all_centers = _grid_in_ball(D, 0.5, inner)
    # open cube of side C at c is empty iff the sup-norm distance to the sample is >= C/2
    cheb, _ = cKDTree(pts).query(all_centers, k=1, p=np.inf)
    radii = np.linalg.norm(all_centers, axis=1)

    def empty_probe(side):
        mask = radii <= inner - side * math.sqrt(D) / 2 + 1e-9
        if not np.any(mask):
            raise InvalidArgument(
                f"margin leaves no room for a probe cube of side {side:g}"
            )
        idx = np.nonzero(mask & (cheb >= side / 2 * (1 - 1e-12)))[0]
        return (all_centers[idx[0]] if len(idx) else None), int(mask.sum())

    side = 0.5
    last_empty, probes = empty_probe(side)
    if last_empty is None:
        return CoveringResult(side, None, probes)
    lo = side
    while True:
        side *= 2
        hole, probes = empty_probe(side)
        if hole is None:
            break
        lo, last_empty = side, hole
    hi = side
    while hi - lo > resolution:
        mid = 0.5 * (lo + hi)
        hole, _ = empty_probe(mid)
        if hole is None:
            hi = mid
        else:
            lo, last_empty = mid, hole
    return CoveringResult(hi, last_empty, probes)


@dataclass
class DensityEstimate:
    side: float
    lower: float
    upper: float
    probes: int
    skipped: bool = False
    subsampled: bool = False


def _probe_spacing(h):
    return max(0.5, 0.5 * round(h / 2))


def _thin(centers, max_probes):
    if len(centers) <= max_probes:
        return centers, False
    stride = -(-len(centers) // max_probes)
    return centers[::stride], True


GRID_CELL_LIMIT = 50_000_000


def _count_on_grid(points, lows, h, step):
    """Exact half-open counts when ``h`` is a multiple of ``step`` and all
    ``lows`` lie on a common grid of that step: histogram plus prefix sums.

    Returns None when the grid assumption fails or the histogram is too big.
    """
    m = round(h / step)
    if m < 1 or abs(h / step - m) > 1e-9:
        return None
    origin = lows.min(axis=0)
    lidx = np.rint((lows - origin) / step).astype(np.int64)
    if np.any(np.abs(origin + lidx * step - lows) > 1e-9 * max(1.0, h)):
        return None
    shape = lidx.max(axis=0) + m
    if np.prod(shape.astype(float)) > GRID_CELL_LIMIT:
        return None
    idx = np.floor((points - origin) / step).astype(np.int64)
    # settle points that rounding put in a neighbouring cell
    idx -= points < origin + idx * step
    idx += points >= origin + (idx + 1) * step
    inside = np.all((idx >= 0) & (idx < shape), axis=1)
    flat = np.ravel_multi_index(tuple(idx[inside].T), tuple(shape))
    prefix = np.bincount(flat, minlength=int(np.prod(shape))).reshape(tuple(shape))
    prefix = np.pad(prefix, [(1, 0)] * len(shape))
    for axis in range(len(shape)):
        np.cumsum(prefix, axis=axis, out=prefix)
    counts = np.zeros(len(lows), dtype=np.int64)
    for corner in itertools.product((0, 1), repeat=len(shape)):
        sign = (-1) ** (len(shape) - sum(corner))
        counts += sign * prefix[tuple((lidx + m * np.array(corner)).T)]
    return counts


def _count_half_open(points, lows, h, step=None):
    """Point counts in ``[low, low + h)`` for each probe corner ``low``.

    Grid-aligned probes use a prefix-sum histogram; otherwise points are
    bucketed in cells of side ``h`` so each probe scans the few cells it can
    meet (one extra per axis absorbs rounding in the cell index).
    """
    counts = np.zeros(len(lows), dtype=np.int64)
    if len(points) == 0 or len(lows) == 0:
        return counts
    if step is not None:
        # any common refinement of the probe grid and the side works
        for k in range(1, 9):
            fast = _count_on_grid(points, lows, h, step / k)
            if fast is not None:
                return fast
    origin = points.min(axis=0)
    keys = np.floor((points - origin) / h).astype(np.int64)
    order = np.lexsort(keys.T[::-1])
    keys, points = keys[order], points[order]
    uniq, starts = np.unique(keys, axis=0, return_index=True)
    stops = np.append(starts[1:], len(keys))
    cells = {tuple(k): (a, b) for k, a, b in zip(uniq.tolist(), starts, stops)}
    offsets = np.array(list(itertools.product((0, 1, 2), repeat=points.shape[1])))
    bases = np.floor((lows - origin) / h).astype(np.int64)
    for i, (low, base) in enumerate(zip(lows, bases)):
        spans = [cells[c] for c in map(tuple, (base + offsets).tolist()) if c in cells]
        if not spans:
            continue
        idx = np.concatenate([np.arange(a, b) for a, b in spans])
        counts[i] = count_in_boxes(points[idx], low[None], h)[0]
    return counts


def beurling_density(
    system: GaborSystem, window_sides, spacing=None, max_probes: int = 20_000
) -> list[DensityEstimate]:
    """Min/max of ``count / h^(2d)`` over half-open probe cubes of side ``h``.

    Centres sit on a grid (spacing ``max(1/2, h/4)`` rounded to the half-unit
    grid unless given) and each cube lies inside the truncation ball.  Sides
    too large for the sample are returned with ``skipped=True``.  Grids
    with more than ``max_probes`` centres are thinned by a fixed stride
    (``subsampled=True``).
    """
    pts = system.points
    D = 2 * system.dim
    out = []
    for h in window_sides:
        h = float(h)
        step = spacing or _probe_spacing(h)
        centers = _grid_in_ball(D, step, system.truncation_radius - h * math.sqrt(D) / 2)
        if len(centers) == 0:
            warnings.warn(f"window side {h:g} exceeds the truncation budget; skipped")
            out.append(DensityEstimate(h, math.nan, math.nan, 0, skipped=True))
            continue
        centers, thinned = _thin(centers, max_probes)
        # only points near the probe region can be counted
        reach = np.abs(centers).max() + h / 2
        near = pts[np.all(np.abs(pts) <= reach, axis=1)]
        dens = _count_half_open(near, centers - h / 2, h, step) / h**D
        out.append(
            DensityEstimate(h, float(dens.min()), float(dens.max()), len(centers), subsampled=thinned)
        )
    return out


def localized_lower_density(system: GaborSystem, region, ball_radius: float, h: float):
    """Lower density of the frequency projection of the points whose time
    shift lies within ``ball_radius`` of the box ``region = (lo, hi)``.

    Frequencies are de-duplicated (the projection is a set); windows are
    half-open cubes of side ``h`` centred on a grid inside the part of the
    frequency ball the sample covers for those time shifts.
    """
    d = system.dim
    lo, hi = (np.asarray(v, dtype=float) for v in region)
    if lo.shape != (d,) or np.any(hi <= lo):
        raise InvalidArgument("region must be a non-degenerate box in R^d")
    pts = system.spectrum.time_slice(lo - ball_radius, hi + ball_radius)
    a = pts[:, :d]
    gap = np.maximum(np.maximum(lo - a, a - hi), 0.0)
    sel = pts[np.linalg.norm(gap, axis=1) <= ball_radius]
    freqs = np.unique(sel[:, d:], axis=0) if len(sel) else np.empty((0, d))
    corner = np.maximum(np.abs(lo - ball_radius), np.abs(hi + ball_radius))
    avail = math.sqrt(max(system.truncation_radius**2 - corner @ corner, 0.0))
    step = _probe_spacing(h)
    centers = _grid_in_ball(d, step, avail - h * math.sqrt(d) / 2)
    if len(centers) == 0:
        warnings.warn(f"window side {h:g} exceeds the frequency range of the sample")
        return math.nan
    if len(freqs) == 0:
        return 0.0
    centers, _ = _thin(centers, 20_000)
    counts = _count_half_open(freqs, centers - h / 2, h, step)
    return float(counts.min() / h**d)


# -- tiling ----------------------------------------------------------------


@dataclass
class TilingReport:
    defect: float
    max_sum: float
    min_sum: float
    sums: np.ndarray
    packing_ok: bool
    tail_bound: float


def _tail_bound(system, f_spec, rho):
    """Rough bound on the squared STFT mass beyond frequency radius ``rho``."""
    d = system.dim
    if rho <= 1:
        return math.inf
    steps = getattr(system.spectrum, "freq_steps", np.ones(d))
    scale = (system.normalization * f_spec.norm_factor) ** 2
    support = min(np.prod(f_spec.sides) if isinstance(f_spec, BoxIndicator) else 1.0, 1.0)
    per_axis = 2 * math.sqrt(d) / (math.pi**2 * float(np.min(steps)) * rho)
    return scale * support * d * per_axis


def tiling_defect(system: GaborSystem, f_spec=None, probes=None, tol: float = 5e-2, margin=None):
    """Check ``sum_{alpha in S} |V_g f(w - alpha)|^2 = 1`` at probe points.

    Returns the largest deviation from 1 together with the packing check
    ``max sum <= 1 + tol``.  Only spectrum points whose time shift lets the
    window overlap ``f`` contribute, so each probe fetches a time slice.
    """
    d = system.dim
    body = system.window_body
    if f_spec is None:
        f_spec = default_probe_function(d)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    if probes.shape[1] != 2 * d:
        raise InvalidArgument("probes must be points of R^{2d}")
    f_body, f_center = f_spec.as_body()
    reach = bodies.circumradius(body) + bodies.circumradius(f_body) + np.abs(f_center).max()
    box = _window_box(body)
    scale = (system.normalization * f_spec.norm_factor) ** 2
    sums = np.empty(len(probes))
    tail = 0.0
    for k, w in enumerate(probes):
        x, y = w[:d], w[d:]
        near = system.spectrum.time_slice(x - reach, x + reach)
        t = x - near[:, :d]
        nu = y - near[:, d:]
        if box is not None and isinstance(f_spec, BoxIndicator):
            total = box_stft_sq_sum(f_spec.lo, f_spec.hi, box[0], box[1], t, nu)
        else:
            total = sum(
                abs(fourier.ft_convex_intersection([(f_body, f_center), (body, ti)], ni)) ** 2
                for ti, ni in zip(t, nu)
            )
        sums[k] = scale * total
        rho = math.sqrt(max(system.truncation_radius**2 - (np.abs(x) + reach) @ (np.abs(x) + reach), 0.0))
        tail = max(tail, _tail_bound(system, f_spec, rho - np.linalg.norm(y)))
    if margin is not None and tail > tol:
        warnings.warn(f"truncation margin insufficient: frequency tail up to {tail:.2g}")
    elif tail > tol:
        warnings.warn(f"estimated truncation tail {tail:.2g} exceeds tolerance")
    return TilingReport(
        defect=float(np.max(np.abs(sums - 1.0))) if len(sums) else 0.0,
        max_sum=float(sums.max()) if len(sums) else 0.0,
        min_sum=float(sums.min()) if len(sums) else 0.0,
        sums=sums,
        packing_ok=bool(np.all(sums <= 1 + tol)),
        tail_bound=float(tail),
    )


def random_probes(system: GaborSystem, count: int, margin: float, seed: int = 0):
    """Uniform probes in the ball of radius ``truncation_radius - margin``."""
    rng = np.random.default_rng(seed)
    D = 2 * system.dim
    r = system.truncation_radius - margin
    if r <= 0:
        raise InvalidArgument("margin exhausts the sample")
    g = rng.standard_normal((count, D))
    g /= np.linalg.norm(g, axis=1)[:, None]
    return g * (r * rng.random(count) ** (1 / D))[:, None]


# -- ground-truth bases ----------------------------------------------------


def lattice_onb(scale_matrix, truncation: float = 5.0) -> GaborSystem:
    """Gabor ONB from a box that tiles by the lattice ``L = diag(s) Z^d``.

    The window is the fundamental box of ``L`` and the spectrum is
    ``L x L*`` with ``L* = diag(1/s) Z^d``.
    """
    m = np.asarray(scale_matrix, dtype=float)
    if m.ndim == 1:
        m = np.diag(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 2:
        raise InvalidArgument("scale matrix must be square, d >= 2")
    if np.any(m - np.diag(np.diag(m))):
        raise UnsupportedBody("non-diagonal lattice: fundamental domain is not a box")
    steps = np.abs(np.diag(m))
    if np.any(steps == 0):
        raise InvalidArgument("scale matrix must be invertible")
    window = bodies.cube(list(steps))
    return GaborSystem(window, LatticeSpectrum(steps, 1 / steps, truncation), truncation)


def product_lattice(time_steps, freq_steps, truncation) -> LatticeSpectrum:
    return LatticeSpectrum(time_steps, freq_steps, truncation)


# -- files -----------------------------------------------------------------


def save_spectrum_csv(path, points) -> None:
    pts = np.asarray(points, dtype=float)
    d = pts.shape[1] // 2
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"a{i + 1}" for i in range(d)] + [f"b{i + 1}" for i in range(d)])
        for row in pts:
            w.writerow([repr(float(v)) for v in row])


def load_spectrum_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InvalidArgument(f"{path}: empty spectrum file")
    header, body = rows[0], rows[1:]
    if len(header) % 2 or not header:
        raise InvalidArgument(f"{path}: expected 2d columns a1..ad, b1..bd")
    try:
        pts = np.array([[float(v) for v in r] for r in body if r], dtype=float)
    except ValueError as exc:
        raise InvalidArgument(f"{path}: non-numeric entry") from exc
    return pts.reshape(-1, len(header))


def save_system_json(path, system: GaborSystem, spectrum_file) -> None:
    doc = {
        "body": system.window_body.to_dict(),
        "spectrum": str(spectrum_file),
        "truncation_radius": system.truncation_radius,
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def load_system_json(path) -> GaborSystem:
    path = Path(path)
    doc = json.loads(path.read_text())
    body = BodyDescriptor.from_dict(doc["body"])
    spec_path = Path(doc["spectrum"])
    if not spec_path.is_absolute():
        spec_path = path.parent / spec_path
    pts = load_spectrum_csv(spec_path)
    return GaborSystem(body, PointSpectrum(pts, body.dimension), float(doc["truncation_radius"]))
