"""Predicted and measured Fourier decay of occupation measures and laws.

The prediction is the index

    kappa*(eta) = min{(1 ^ delta) chi (1 + eta/H), eta (zeta/H - 1)} / (zeta + eta),

and the measurement is a log-log regression of Monte Carlo ``L^p`` moments of
occupation transforms against ``1 + |xi|``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Any, Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError
from .occupation import OccupationFT, SpectralGrid
from .stats import jackknife, linear_fit

__all__ = [
    "RegularityPrediction",
    "DecayFit",
    "MomentCurve",
    "CharFnDecay",
    "ETA_GRID",
    "predict_kappa",
    "best_prediction",
    "lp_moment_curve",
    "fit_decay",
    "fit_time_exponent",
    "char_fn_decay",
]

ETA_GRID = tuple(np.round(np.arange(0.05, 0.451, 0.05), 2))
MIN_FIT_POINTS = 6
MIN_TIME_GAPS = 5


@dataclass(frozen=True)
class RegularityPrediction:
    H: float
    zeta: float
    eta: float
    delta: float
    chi: float
    kappa_star: float

    def to_record(self) -> dict[str, float]:
        return asdict(self)


def predict_kappa(H: float, zeta: float, eta: float, delta: float = 0.0, chi: float = 1.0) -> RegularityPrediction:
    """Regularity index for time-regularity exponent ``1 - eta``.

    With ``delta = 0`` the weight is never differenced and only the second
    branch of the minimum remains.  ``zeta = inf`` (pure Gaussian noise, no
    drift-type term) gives the limit ``eta / H``.
    """
    if not H > 0:
        raise DomainError("H must be positive", "regularity")
    if not 0 < eta < 0.5:
        raise DomainError(f"eta must lie in (0, 1/2), got {eta}", "regularity")
    if delta < 0 or not 0 <= chi <= 1:
        raise DomainError("need delta >= 0 and chi in [0, 1]", "regularity")
    if zeta <= H:
        raise DomainError("zeta <= H: no smoothing regime", "regularity")
    if math.isinf(zeta):
        # No drift-type smoothing limit: only the noise counts, kappa* = eta / H.
        kappa = eta / H if delta == 0 else 0.0
        return RegularityPrediction(float(H), float(zeta), float(eta), float(delta), float(chi), float(kappa))
    second = eta * (zeta / H - 1.0)
    if delta == 0:
        kappa = second / (zeta + eta)
    else:
        first = min(1.0, delta) * chi * (1.0 + eta / H)
        kappa = min(first, second) / (zeta + eta)
    return RegularityPrediction(float(H), float(zeta), float(eta), float(delta), float(chi), float(kappa))


def best_prediction(H: float, zeta: float, delta: float = 0.0, chi: float = 1.0,
                    etas: Sequence[float] = ETA_GRID) -> RegularityPrediction:
    """The largest prediction over a grid of ``eta`` values."""
    return max((predict_kappa(H, zeta, e, delta, chi) for e in etas), key=lambda r: r.kappa_star)


@dataclass
class MomentCurve:
    """``values[pair, k]`` estimates ``||l(s, t, xi_k)||_{L^p}``."""

    xi: np.ndarray
    time_pairs: np.ndarray
    values: np.ndarray
    stderr: np.ndarray
    p: float
    n_paths: int

    @property
    def magnitudes(self) -> np.ndarray:
        return np.linalg.norm(self.xi.reshape(len(self.xi), -1), axis=1)


@dataclass(frozen=True)
class DecayFit:
    exponent: float
    intercept: float
    r_squared: float
    xi_range: tuple[float, float]
    p_moment: float
    n_points: int

    def to_record(self) -> dict[str, Any]:
        rec = asdict(self)
        rec["xi_range"] = list(self.xi_range)
        return rec


def lp_moment_curve(ensemble: OccupationFT | Sequence[OccupationFT], p: float = 2.0) -> MomentCurve:
    """Monte Carlo ``(M^-1 sum |l|^p)^(1/p)`` with a delete-block jackknife error."""
    if not p >= 1:
        raise DomainError("p must be >= 1", "regularity")
    if isinstance(ensemble, OccupationFT):
        ref, vals = ensemble, ensemble.values
    else:
        items = list(ensemble)
        if not items:
            raise InsufficientDataError("empty ensemble", "regularity")
        ref, vals = items[0], np.concatenate([e.values for e in items], axis=0)
    powers = np.abs(vals) ** p
    if vals.shape[0] > 1:
        mom, err = jackknife(powers, lambda m: m ** (1.0 / p))
    else:
        mom, err = powers[0] ** (1.0 / p), np.zeros(vals.shape[1:])
    return MomentCurve(ref.spectral.xi_points.copy(), np.asarray(ref.time_pairs), mom, err, float(p), vals.shape[0])


def _curve_arrays(curve, pair_index: int) -> tuple[np.ndarray, np.ndarray, float]:
    if isinstance(curve, MomentCurve):
        return curve.magnitudes, np.asarray(curve.values[pair_index], dtype=float), curve.p
    xi, vals = curve[0], curve[1]
    xi = np.asarray(xi, dtype=float)
    mags = np.abs(xi) if xi.ndim == 1 else np.linalg.norm(xi, axis=1)
    return mags, np.abs(np.asarray(vals, dtype=float)).reshape(-1), float(curve[2]) if len(curve) > 2 else 2.0


def fit_decay(curve, xi_min: float, xi_max: float, pair_index: int = 0) -> DecayFit:
    """Negated slope of ``log moment`` against ``log(1 + |xi|)`` on a window.

    ``curve`` is a :class:`MomentCurve` or a tuple ``(xi, values[, p])``.
    Repeated magnitudes (``+xi`` and ``-xi``) are merged by averaging logs.
    """
    mags, vals, p = _curve_arrays(curve, pair_index)
    sel = (mags >= xi_min) & (mags <= xi_max)
    if np.any(vals[sel] <= 0):
        raise DomainError("moment curve must be positive inside the fit window", "regularity")
    keys = np.round(mags[sel], 12)
    uniq = np.unique(keys)
    if uniq.size < MIN_FIT_POINTS:
        raise InsufficientDataError(
            f"{uniq.size} frequency magnitudes in [{xi_min}, {xi_max}], need {MIN_FIT_POINTS}", "regularity"
        )
    logs = np.log(vals[sel])
    y = np.array([logs[keys == u].mean() for u in uniq])
    slope, intercept, r2 = linear_fit(np.log1p(uniq), y)
    return DecayFit(-slope, intercept, r2, (float(xi_min), float(xi_max)), p, int(uniq.size))


def fit_time_exponent(gaps, values) -> float:
    """Slope of ``log moment`` against ``log(t - s)`` across at least five gaps."""
    gaps = np.asarray(gaps, dtype=float)
    values = np.abs(np.asarray(values, dtype=float))
    if np.unique(gaps).size < MIN_TIME_GAPS:
        raise InsufficientDataError(f"need {MIN_TIME_GAPS} distinct gaps", "regularity")
    if np.any(gaps <= 0) or np.any(values <= 0):
        raise DomainError("gaps and moments must be positive", "regularity")
    slope, _, _ = linear_fit(np.log(gaps), np.log(values))
    return slope


@dataclass
class CharFnDecay:
    xi: np.ndarray
    curve: np.ndarray
    stderr: np.ndarray
    fit: DecayFit | None


def char_fn_decay(states: np.ndarray, spectral: SpectralGrid, weights=None, delta: float = 0.0,
                  xi_min: float | None = None, xi_max: float | None = None) -> CharFnDecay:
    """Empirical ``|E[w(X_t)^delta exp(i <xi, X_t>)]|`` across ``xi`` and its decay fit.

    ``states`` has shape ``(M, d)`` (or ``(M,)``); ``weights`` are the values
    ``sigma_*(X_t)`` per sample.  The fit is skipped when no window is given.
    """
    x = np.asarray(states, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] != spectral.dim:
        raise DomainError("state dimension does not match the spectral grid", "regularity")
    M = x.shape[0]
    w = np.ones(M) if weights is None else np.clip(np.broadcast_to(np.asarray(weights, float), (M,)), 0.0, 1.0)
    samples = (w**delta)[:, None] * np.exp(1j * (x @ spectral.xi_points.T))
    if M > 1:
        curve, err = jackknife(samples, np.abs)
    else:
        curve, err = np.abs(samples[0]), np.zeros(spectral.size)
    fit = None
    if xi_min is not None and xi_max is not None:
        fit = fit_decay((spectral.xi_points, curve), xi_min, xi_max)
    return CharFnDecay(spectral.xi_points.copy(), curve, err, fit)
