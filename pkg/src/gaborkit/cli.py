"""Command-line experiment runner.

Each subcommand reads an optional TOML config, writes its CSV/JSON outputs
atomically into ``--out`` and finishes with ``run_manifest.json``.

Exit codes: 0 pass, 1 tolerance breach, 2 invalid input, 3 unsupported
body or dimension.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import tempfile
import time
import warnings
from pathlib import Path

import numpy as np
import scipy
from scipy import special
from threadpoolctl import threadpool_limits

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, bodies, fourier, gabor, kernels, obstruction
from .errors import (
    AccuracyNotReached,
    GaborKitError,
    InvalidArgument,
    TripleNotFound,
    UnsupportedBody,
    UnsupportedDimension,
)

EXIT_OK, EXIT_BREACH, EXIT_INVALID, EXIT_UNSUPPORTED = 0, 1, 2, 3

DEFAULT_BODY = {"dim": 2, "family": "ball", "params": {"radius": 1.0}}


# -- output ----------------------------------------------------------------


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n"


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


# -- config ----------------------------------------------------------------


class Config:
    """Parsed TOML config with paths resolved against its directory."""

    def __init__(self, data: dict, base: Path):
        self.data = data
        self.base = base

    @classmethod
    def load(cls, path):
        if path is None:
            return cls({}, Path.cwd())
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise InvalidArgument(f"config file {path} not found") from None
        except tomllib.TOMLDecodeError as exc:
            raise InvalidArgument(f"malformed config: {exc}") from None
        return cls(data, path.parent)

    @property
    def params(self) -> dict:
        return self.data.get("params", {})

    @property
    def spectrum(self) -> dict:
        return self.data.get("spectrum", {})

    def body(self, default=None):
        desc = self.data.get("body", default or DEFAULT_BODY)
        if isinstance(desc, str):
            try:
                desc = json.loads(desc)
            except json.JSONDecodeError as exc:
                raise InvalidArgument(f"body is not valid JSON: {exc}") from None
        return bodies.BodyDescriptor.from_dict(desc)

    def path(self, value) -> Path:
        p = Path(value)
        p = p if p.is_absolute() else self.base / p
        if not p.exists():
            raise InvalidArgument(f"referenced file {p} does not exist")
        return p

    def digest(self, seed) -> str:
        blob = json.dumps({"config": self.data, "seed": seed}, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()


def _spectrum(cfg: Config, body, seed):
    """Build the spectrum named in ``[spectrum]``; returns (points or lazy, extras)."""
    spec = cfg.spectrum
    source = spec.get("source", "lattice")
    extras = {"source": source}
    if source == "file":
        pts = gabor.load_spectrum_csv(cfg.path(spec["path"]))
        return gabor.PointSpectrum(pts), extras
    if source == "lattice":
        d = body.dimension
        steps = np.asarray(spec.get("scale", [1.0] * d), dtype=float)
        return gabor.product_lattice(steps, 1 / steps, float(spec.get("truncation", 5.0))), extras
    if source == "planted-triple":
        p = cfg.params
        pts, planted = obstruction.planted_triple_spectrum(
            body.dimension,
            float(p.get("r", 5.0)),
            float(p.get("R", 100.0)),
            int(spec.get("noise", 1000)),
            seed,
        )
        extras["planted"] = planted
        return gabor.PointSpectrum(pts), extras
    if source == "engineered-zeros":
        pts, gap = obstruction.engineered_zero_spectrum(
            body,
            float(spec.get("r_min", 5.0)),
            int(spec.get("count", 3)),
            spec.get("direction"),
        )
        extras["gap"] = gap
        return gabor.PointSpectrum(pts), extras
    raise InvalidArgument(f"unknown spectrum source {source!r}")


# -- subcommands -----------------------------------------------------------


def _disk_oracle(body, xi):
    """Closed-form transforms for balls and ellipsoids (d = 2, 3); else None."""
    d = body.dimension
    if body.family not in ("ball", "ellipsoid") or d not in (2, 3):
        return None
    # K = A B with B the unit ball and A = M^(-1/2), so F_K(xi) = det(A) F_B(A^T xi)
    w, v = np.linalg.eigh(body.matrix)
    A = v @ np.diag(w**-0.5) @ v.T
    t = float(np.linalg.norm(A.T @ xi))
    det = float(np.linalg.det(A))
    if t == 0:
        return det * (math.pi if d == 2 else 4 * math.pi / 3)
    if d == 2:
        return det * special.j1(2 * math.pi * t) / t
    s = 2 * math.pi * t
    return det * (math.sin(s) - s * math.cos(s)) / (2 * math.pi**2 * t**3)


def cmd_ft_verify(cfg: Config, out: Path, seed: int):
    body = cfg.body()
    p = cfg.params
    rtol = float(p.get("rtol", 1e-6))
    quad_tol = p.get("quad_tol")
    budget = int(p.get("budget", fourier.DEFAULT_BUDGET))
    d = body.dimension
    if "xi" in p:
        xis = np.atleast_2d(np.asarray(p["xi"], dtype=float))
    else:
        n = int(p.get("points", 200))
        mags = np.linspace(float(p.get("xi_min", 0.5)), float(p.get("xi_max", 50.0)), n)
        g = np.random.default_rng(seed).standard_normal((n, d))
        xis = g / np.linalg.norm(g, axis=1)[:, None] * mags[:, None]
    if xis.shape[1] != d:
        raise InvalidArgument("xi grid dimension differs from the body")
    rows, worst, breach = [], 0.0, False
    for xi in xis:
        try:
            value = fourier.ft_indicator(body, xi, quad_tol, budget=budget)
            status = "ok"
        except AccuracyNotReached as exc:
            value, status = complex(exc.estimate if exc.estimate is not None else math.nan), "accuracy-not-reached"
            breach = True
        if not np.any(xi):
            oracle = bodies.volume(body)
        else:
            oracle = _disk_oracle(body, xi)
        if oracle is None:
            err = math.nan
        else:
            err = abs(value - oracle) / abs(oracle)
            worst = max(worst, err)
            if err > rtol and status == "ok":
                status = "tolerance-breach"
                breach = True
        rows.append([*xi, float(np.linalg.norm(xi)), value.real, value.imag,
                     math.nan if oracle is None else oracle, err, status])
    header = [f"xi{i + 1}" for i in range(d)] + ["magnitude", "re", "im", "oracle", "rel_error", "status"]
    atomic_write(out / "ft_verify.csv", _csv(header, rows))
    summary = {"body": body.to_dict(), "points": len(rows), "max_rel_error": worst,
               "rtol": rtol, "pass": not breach}
    atomic_write(out / "ft_verify.json", _json(summary))
    return (EXIT_BREACH if breach else EXIT_OK), ["ft_verify.csv", "ft_verify.json"]


def cmd_herz_scan(cfg: Config, out: Path, seed: int):
    body = cfg.body()
    p = cfg.params
    d = body.dimension
    direction = np.asarray(p.get("direction", np.eye(d)[0]), dtype=float)
    if "magnitudes" in p:
        mags = np.asarray(p["magnitudes"], dtype=float)
    else:
        mags = np.logspace(
            math.log10(float(p.get("lo", 10.0))), math.log10(float(p.get("hi", 100.0))), int(p.get("count", 20))
        )
    report = fourier.herz_remainder_scan(body, direction, mags, p.get("c_d"), p.get("quad_tol"))
    threshold = float(p.get("max_slope", -2.3))
    summary = report.summary()
    ok = not report.degenerate and report.fitted_decay_exponent <= threshold
    summary.update(max_slope=threshold, pass_=ok)
    summary["pass"] = summary.pop("pass_")
    atomic_write(out / "herz_scan.csv", report.to_csv())
    atomic_write(out / "herz_scan.json", _json(summary))
    return (EXIT_OK if ok else EXIT_BREACH), ["herz_scan.csv", "herz_scan.json"]


def _modified(system, cfg: Config, seed: int):
    """Apply the optional ``decimate`` / ``perturb`` entries of ``[spectrum]``."""
    spec = cfg.spectrum
    if "decimate" not in spec and "perturb" not in spec:
        return system
    pts = system.points.copy()
    if "decimate" in spec:
        keep = np.random.default_rng(seed).random(len(pts)) >= float(spec["decimate"])
        pts = pts[keep]
    if "perturb" in spec:
        shift = np.asarray(spec["perturb"], dtype=float)
        i = int(np.argmin(np.linalg.norm(pts, axis=1)))
        pts[i, : len(shift)] += shift
    return system.with_points(pts)


def _gabor_system(cfg: Config, seed: int, truncation: float):
    spec = cfg.spectrum
    source = spec.get("source", "lattice")
    if source == "lattice":
        d = int(spec.get("dim", 2))
        scale = spec.get("scale", [1.0] * d)
        system = gabor.lattice_onb(np.diag(np.asarray(scale, float)), truncation)
    elif source == "file":
        pts = gabor.load_spectrum_csv(cfg.path(spec["path"]))
        if len(pts) == 0:
            raise InvalidArgument("spectrum file is empty")
        body = cfg.body({"dim": pts.shape[1] // 2, "family": "cube", "params": {"side": 1.0}})
        radius = float(spec.get("truncation", np.linalg.norm(pts, axis=1).max()))
        pts = pts[np.linalg.norm(pts, axis=1) <= radius]
        system = gabor.GaborSystem(body, gabor.PointSpectrum(pts), radius)
    else:
        raise InvalidArgument(f"gabor-check needs a lattice or file spectrum, not {source!r}")
    return _modified(system, cfg, seed)


def cmd_gabor_check(cfg: Config, out: Path, seed: int):
    p = cfg.params
    spec = cfg.spectrum
    base_trunc = float(spec.get("truncation", 5.0))
    checks = {}

    small = _gabor_system(cfg, seed, base_trunc)
    if len(small.points) == 0:
        raise InvalidArgument("empty spectrum")
    gthr = float(p.get("gram_threshold", 1e-9))
    scan = gabor.gram_scan(small, gthr)
    checks["gram"] = {"max_defect": scan.max_defect, "threshold": gthr, "pairs": scan.pairs_checked,
                      "pass": scan.max_defect <= gthr}
    sep = gabor.separation(small)
    min_sep = float(p.get("min_separation", 1.0))
    checks["separation"] = {"value": sep, "pass": sep >= min_sep - 1e-12}

    dens_sys = _gabor_system(cfg, seed, float(p.get("density_truncation", max(base_trunc, 26.0))))
    dtol = float(p.get("density_tol", 0.05))
    rows = []
    dens_ok = True
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        estimates = gabor.beurling_density(dens_sys, p.get("density_sides", [20.0]))
    for est in estimates:
        ok = (not est.skipped) and abs(est.lower - 1) <= dtol and abs(est.upper - 1) <= dtol
        dens_ok &= ok
        rows.append([est.side, est.lower, est.upper, est.probes, est.skipped])
    checks["density"] = {"estimates": rows, "tolerance": dtol, "pass": bool(dens_ok),
                         "warnings": [str(w.message) for w in caught]}

    tile_sys = _gabor_system(cfg, seed, float(p.get("tiling_truncation", 100.0)))
    margin = float(p.get("tiling_margin", min(20.0, tile_sys.truncation_radius / 2)))
    probes = gabor.random_probes(tile_sys, int(p.get("tiling_probes", 20)), margin, seed)
    ttol = float(p.get("tiling_tol", 5e-2))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        tiling = gabor.tiling_defect(tile_sys, probes=probes, tol=ttol, margin=margin)
    checks["tiling"] = {"defect": tiling.defect, "min_sum": tiling.min_sum, "max_sum": tiling.max_sum,
                        "packing_ok": tiling.packing_ok, "tail_bound": tiling.tail_bound,
                        "tolerance": ttol, "pass": tiling.defect <= ttol,
                        "warnings": [str(w.message) for w in caught]}

    passed = all(c["pass"] for c in checks.values())
    atomic_write(out / "gabor_check.json", _json({"checks": checks, "pass": passed}))
    atomic_write(
        out / "tiling_sums.csv",
        _csv([f"w{i + 1}" for i in range(probes.shape[1])] + ["sum"],
             [[*w, s] for w, s in zip(probes, tiling.sums)]),
    )
    return (EXIT_OK if passed else EXIT_BREACH), ["gabor_check.json", "tiling_sums.csv"]


def cmd_density(cfg: Config, out: Path, seed: int):
    p = cfg.params
    system = _gabor_system(cfg, seed, float(cfg.spectrum.get("truncation", 26.0)))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        estimates = gabor.beurling_density(system, p.get("sides", [5.0, 10.0, 20.0]), p.get("spacing"))
    rows = [[e.side, e.lower, e.upper, e.probes, e.skipped] for e in estimates]
    expected = p.get("expected")
    ok = True
    if expected is not None:
        tol = float(p.get("tol", 0.05))
        ok = all(e.skipped or (abs(e.lower - expected) <= tol and abs(e.upper - expected) <= tol) for e in estimates)
    atomic_write(out / "density.csv", _csv(["side", "lower", "upper", "probes", "skipped"], rows))
    atomic_write(out / "density.json", _json({"pass": ok, "warnings": [str(w.message) for w in caught]}))
    return (EXIT_OK if ok else EXIT_BREACH), ["density.csv", "density.json"]


def _triple_inputs(cfg: Config, seed: int):
    body = cfg.body({"dim": 2, "family": "ball", "params": {"radius": 0.5}})
    spectrum, extras = _spectrum(cfg, body, seed)
    p = cfg.params
    r = float(p.get("r", extras.get("gap", 5.0)))
    R = float(p.get("R", 10 * r))
    strategy = p.get("strategy", "principal")
    return body, spectrum, extras, r, R, strategy, p.get("base_cube")


def cmd_triple_extract(cfg: Config, out: Path, seed: int):
    body, spectrum, extras, r, R, strategy, base = _triple_inputs(cfg, seed)
    try:
        triple = obstruction.extract_triple(spectrum, r, R, base, strategy, body=body)
    except TripleNotFound as exc:
        atomic_write(out / "triple.json", _json({"found": False, "reason": str(exc), "stats": exc.stats}))
        return EXIT_BREACH, ["triple.json"]
    report = {"found": True, "triple": triple.to_dict()}
    ok = True
    if "planted" in extras:
        got = np.array([p.as_row() for p in triple.points])
        want = extras["planted"]
        ok = bool(np.array_equal(got[np.lexsort(got.T[::-1])], want[np.lexsort(want.T[::-1])]))
        report["planted_recovered"] = ok
    atomic_write(out / "triple.json", _json(report))
    return (EXIT_OK if ok else EXIT_BREACH), ["triple.json"]


def cmd_falsify(cfg: Config, out: Path, seed: int):
    body, spectrum, extras, r, R, strategy, base = _triple_inputs(cfg, seed)
    p = cfg.params
    report = obstruction.falsify(body, spectrum, r, R, base, strategy, c_d=p.get("c_d"))
    data = report.to_dict()
    expected = p.get("expect")
    if expected is not None:
        ok = report.verdict == expected
    else:
        ok = report.verdict != obstruction.INCONCLUSIVE
    data["pass"] = ok
    atomic_write(out / "falsify.json", _json(data))
    return (EXIT_OK if ok else EXIT_BREACH), ["falsify.json"]


COMMANDS = {
    "ft-verify": (cmd_ft_verify, "check indicator transforms against closed forms"),
    "herz-scan": (cmd_herz_scan, "fit the decay of the leading-term remainder"),
    "gabor-check": (cmd_gabor_check, "orthogonality, separation, density and tiling checks"),
    "density": (cmd_density, "Beurling density estimates"),
    "triple-extract": (cmd_triple_extract, "pigeonhole triple search"),
    "falsify": (cmd_falsify, "run the mod-4 certificate end to end"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaborkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gaborkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", help="TOML experiment config")
        sp.add_argument("--out", default=".", help="output directory (default: cwd)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1, help="cap on BLAS threads")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    func = COMMANDS[args.command][0]
    start = time.perf_counter()
    outputs: list[str] = []
    error = digest = None
    try:
        if args.threads < 1:
            raise InvalidArgument("--threads must be positive")
        cfg = Config.load(args.config)
        digest = cfg.digest(args.seed)
        threadpool_limits(limits=args.threads)
        code, outputs = func(cfg, out, args.seed)
    except (UnsupportedBody, UnsupportedDimension) as exc:
        code, error = EXIT_UNSUPPORTED, exc
    except (InvalidArgument, KeyError, ValueError, OSError) as exc:
        code, error = EXIT_INVALID, exc
    except GaborKitError as exc:
        code, error = EXIT_BREACH, exc
    if error is not None:
        print(f"gaborkit {args.command}: {type(error).__name__}: {error}", file=sys.stderr)
    manifest = {
        "command": args.command,
        "config": args.config,
        "config_sha256": digest,
        "seed": args.seed,
        "threads": args.threads,
        "exit_code": code,
        "error": None if error is None else f"{type(error).__name__}: {error}",
        "outputs": outputs,
        "backend": kernels.BACKEND,
        "versions": {
            "gaborkit": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "wall_time_s": time.perf_counter() - start,
    }
    try:
        atomic_write(out / "run_manifest.json", _json(manifest))
    except OSError as exc:
        print(f"gaborkit: cannot write manifest: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return code


if __name__ == "__main__":
    sys.exit(main())
