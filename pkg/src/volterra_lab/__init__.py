"""Numerical laboratory for Volterra Ito processes, occupation measures and
self-interacting equations driven by distributional drifts."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (AlignmentError, ConfigError, DomainError, InsufficientDataError, LabError,
                     NoContractionError, NumericalFailure, PathOverflowError, QuadratureError)
from .kernels import KernelCertificate, KernelSpec, certify_kernel, diagonal_integral, eval_kernel, modulus_omega
from .simulate import (CoefficientProcess, SamplePath, TimeGrid, WeightProcess, brownian_paths,
                       simulate_fbm, simulate_volterra_ito, simulate_volterra_power)
from .occupation import (OccupationFT, SelfIntersectionFT, SpectralGrid, fl_norm, local_time_reconstruct,
                         occupation_ft, self_intersection_ft)
from .regularity import DecayFit, RegularityPrediction, char_fn_decay, fit_decay, lp_moment_curve, predict_kappa
from .sewing import Germ1D, SewingRate, sewing_rate, sewing_sum
from .young2d import TwoParamField, box_increment, germ_error_exponent, nl_young_integral
from .selfinteract import (FourierDrift, SolverConfig, build_field, solve_picard, stability_experiment,
                           threshold_presets)

__all__ = [
    "__version__",
    "AlignmentError",
    "ConfigError",
    "DomainError",
    "InsufficientDataError",
    "LabError",
    "NoContractionError",
    "NumericalFailure",
    "PathOverflowError",
    "QuadratureError",
    "KernelCertificate",
    "KernelSpec",
    "certify_kernel",
    "diagonal_integral",
    "eval_kernel",
    "modulus_omega",
    "CoefficientProcess",
    "SamplePath",
    "TimeGrid",
    "WeightProcess",
    "brownian_paths",
    "simulate_fbm",
    "simulate_volterra_ito",
    "simulate_volterra_power",
    "OccupationFT",
    "SelfIntersectionFT",
    "SpectralGrid",
    "fl_norm",
    "local_time_reconstruct",
    "occupation_ft",
    "self_intersection_ft",
    "DecayFit",
    "RegularityPrediction",
    "char_fn_decay",
    "fit_decay",
    "lp_moment_curve",
    "predict_kappa",
    "Germ1D",
    "SewingRate",
    "sewing_rate",
    "sewing_sum",
    "TwoParamField",
    "box_increment",
    "germ_error_exponent",
    "nl_young_integral",
    "FourierDrift",
    "SolverConfig",
    "build_field",
    "solve_picard",
    "stability_experiment",
    "threshold_presets",
]
