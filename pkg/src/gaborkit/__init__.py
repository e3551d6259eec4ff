"""Numerical checks for Gabor systems whose window is a convex indicator."""

__version__ = "0.1.0"

from .bodies import BodyDescriptor, ball, cube, ellipsoid, make_body
from .errors import (
    AccuracyNotReached,
    CalibrationFailed,
    GaborKitError,
    InvalidArgument,
    TripleNotFound,
    UndefinedResult,
    UnsupportedBody,
    UnsupportedDimension,
)
from .fourier import (
    calibrate_constant,
    ft_convex_intersection,
    ft_indicator,
    ft_intersection,
    herz_leading,
    herz_remainder_scan,
)
from .gabor import (
    GaborSystem,
    LatticeSpectrum,
    PointSpectrum,
    SpectrumPoint,
    beurling_density,
    covering_radius,
    gram_scan,
    lattice_onb,
    orthogonality_defect,
    separation,
    stft,
    tiling_defect,
)
from .kernels import BACKEND
from .obstruction import extract_triple, falsify, mod4_certificate, phase_residual

__all__ = [
    "AccuracyNotReached", "BACKEND", "BodyDescriptor", "CalibrationFailed", "GaborKitError",
    "GaborSystem", "InvalidArgument", "LatticeSpectrum", "PointSpectrum", "SpectrumPoint",
    "TripleNotFound", "UndefinedResult", "UnsupportedBody", "UnsupportedDimension", "ball",
    "beurling_density", "calibrate_constant", "covering_radius", "cube", "ellipsoid",
    "extract_triple", "falsify", "ft_convex_intersection", "ft_indicator", "ft_intersection",
    "gram_scan", "herz_leading", "herz_remainder_scan", "lattice_onb", "make_body",
    "mod4_certificate", "orthogonality_defect", "phase_residual", "separation", "stft",
    "tiling_defect",
]
