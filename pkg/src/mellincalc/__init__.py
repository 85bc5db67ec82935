"""Mellin-transform tools for spectral multipliers, maximal operators and
square functions on finite self-adjoint model operators."""

from .config import RunConfig, parse_config
from .grids import LogGrid, UGrid
from .maxsq import TGrid
from .mellin import MellinSamples, a_phi, mellin_inverse, mellin_transform
from .multipliers import MultiplierSpec, builtin_catalog, parse_multiplier
from .norms import NormReport, mh_norm, smoothness_norms
from .reports import VerificationReport
from .spectral import SpectralModel, build_cycle_laplacian, build_diagonal
from .suites import run_suite

__all__ = [
    "LogGrid", "MellinSamples", "MultiplierSpec", "NormReport", "RunConfig", "SpectralModel",
    "TGrid", "UGrid", "VerificationReport", "a_phi", "build_cycle_laplacian", "build_diagonal",
    "builtin_catalog", "mellin_inverse", "mellin_transform", "mh_norm", "parse_config",
    "parse_multiplier", "run_suite", "smoothness_norms",
]
