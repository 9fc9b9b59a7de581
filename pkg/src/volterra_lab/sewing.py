"""Dyadic Riemann-sum driver for one-parameter germs.

A germ ``A_{u,v}`` is sewn by summing it over the dyadic partition of
``[s, t]`` at increasing levels.  The Cauchy rate of the level sums
(``||S_{L+1} - S_L|| ~ 2^(-rate L)``) is what the sewing lemma controls.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, InsufficientDataError
from .simulate import SamplePath
from .stats import linear_fit

__all__ = [
    "Germ1D",
    "SewingRate",
    "dyadic_points",
    "sewing_sum",
    "sewing_rate",
    "delta_germ",
    "smooth_germ",
    "additive_germ",
    "frozen_occupation_germ",
]

MAX_LEVEL = 16
MIN_RATE_LEVELS = 4


@dataclass(frozen=True)
class Germ1D:
    """A germ evaluated on arrays of left points ``u`` and right points ``v``.

    ``evaluate(u, v)`` returns an array whose first axis runs over cells; any
    further axes (paths, components) are carried through the sums.
    """

    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    declared_kappa2: float = 1.0
    declared_kappa1: float | None = None

    def __post_init__(self) -> None:
        if not self.declared_kappa2 > 0.5:
            raise DomainError("declared_kappa2 must exceed 1/2", "sewing")
        if self.declared_kappa1 is not None and not self.declared_kappa1 > 1:
            raise DomainError("declared_kappa1 must exceed 1", "sewing")

    def __call__(self, u, v) -> np.ndarray:
        return np.asarray(self.evaluate(np.atleast_1d(np.asarray(u, float)), np.atleast_1d(np.asarray(v, float))))

    @property
    def expected_rate(self) -> float:
        """Rate suggested by the remainder bounds, ``min(k1 - 1, k2 - 1/2)``."""
        r = self.declared_kappa2 - 0.5
        return r if self.declared_kappa1 is None else min(self.declared_kappa1 - 1.0, r)


def dyadic_points(s: float, t: float, level: int, offset: float = 0.0) -> np.ndarray:
    """Partition points of ``[s, t]`` at a dyadic level, optionally shifted.

    A shift by ``offset`` cells (in ``[0, 1)``) moves the interior points and
    keeps ``s`` and ``t`` as end points.
    """
    if not 0 <= level <= MAX_LEVEL:
        raise DomainError(f"level must lie in [0, {MAX_LEVEL}]", "sewing")
    if not t >= s:
        raise DomainError("need s <= t", "sewing")
    if not 0.0 <= offset < 1.0:
        raise DomainError("offset must lie in [0, 1)", "sewing")
    n = 2**level
    k = np.arange(n + 1)
    if offset == 0.0:
        return s + (t - s) * k / n
    inner = s + (t - s) * (k[:-1] + offset) / n
    return np.concatenate([[s], inner[inner > s], [t]])


def sewing_sum(germ: Germ1D, s: float, t: float, level: int, offset: float = 0.0) -> np.ndarray:
    """Sum of the germ over the dyadic partition of ``[s, t]``."""
    pts = dyadic_points(s, t, level, offset)
    vals = germ(pts[:-1], pts[1:])
    return np.sum(vals, axis=0)


def delta_germ(germ: Germ1D, s, r, t) -> np.ndarray:
    """``delta_r A_{s,t} = A_{s,t} - A_{s,r} - A_{r,t}``."""
    return germ(s, t) - germ(s, r) - germ(r, t)


@dataclass(frozen=True)
class SewingRate:
    rate: float
    exact: bool
    levels: tuple[int, ...]
    differences: tuple[float, ...]
    limit: np.ndarray | None = None
    per_path: np.ndarray | None = None

    def to_record(self) -> dict:
        return {
            "rate": "exact" if self.exact else self.rate,
            "levels": list(self.levels),
            "differences": list(self.differences),
        }


def sewing_rate(germ: Germ1D, s: float, t: float, levels: Sequence[int],
                path_axis: int | None = None, rtol: float = 1e-12) -> SewingRate:
    """Dyadic Cauchy rate of the level sums.

    Regresses ``log2 ||S_{L+1} - S_L||`` on ``L``; the rate is the negated
    slope.  With ``path_axis`` set, the sums carry an ensemble axis and the
    rate is fitted per path and averaged.  When every difference is within
    ``rtol`` of the largest sum the sums are level-independent (up to
    rounding) and the result is the ``exact`` sentinel.
    """
    levels = sorted(int(L) for L in levels)
    if len(levels) < MIN_RATE_LEVELS:
        raise InsufficientDataError(f"need at least {MIN_RATE_LEVELS} levels", "sewing")
    if np.any(np.abs(germ(s, s)) > 0):
        raise DomainError("germ does not vanish on the diagonal", "sewing")
    sums = [sewing_sum(germ, s, t, L) for L in levels + [levels[-1] + 1]]
    diffs = np.stack([sums[k + 1] - sums[k] for k in range(len(levels))])
    if path_axis is None:
        norms = np.array([np.linalg.norm(d) for d in diffs])
    else:
        moved = np.moveaxis(diffs, path_axis + 1, 1)
        norms = np.sqrt(np.sum(np.abs(moved.reshape(moved.shape[0], moved.shape[1], -1)) ** 2, axis=2))
    tol = rtol * max(1.0, max(float(np.max(np.abs(x))) for x in sums))
    if np.all(norms <= tol):
        return SewingRate(math.inf, True, tuple(levels), tuple(np.zeros(len(levels))), sums[-1])
    L = np.asarray(levels, dtype=float)
    if path_axis is None:
        slope, _, _ = linear_fit(L, np.log2(np.maximum(norms, np.finfo(float).tiny)))
        return SewingRate(-slope, False, tuple(levels), tuple(map(float, norms)), sums[-1])
    rates = []
    for j in range(norms.shape[1]):
        col = norms[:, j]
        if np.all(col <= tol):
            continue
        slope, _, _ = linear_fit(L, np.log2(np.maximum(col, np.finfo(float).tiny)))
        rates.append(-slope)
    mean_norms = norms.mean(axis=1)
    return SewingRate(float(np.mean(rates)), False, tuple(levels), tuple(map(float, mean_norms)),
                      sums[-1], np.asarray(rates))


def smooth_germ(f: Callable[[np.ndarray], np.ndarray]) -> Germ1D:
    """Riemann germ ``A_{u,v} = f(u) (v - u)``."""
    return Germ1D(lambda u, v: f(u) * (v - u), declared_kappa2=1.0, declared_kappa1=2.0)


def additive_germ(F: Callable[[np.ndarray], np.ndarray]) -> Germ1D:
    """Increment germ ``A_{u,v} = F(v) - F(u)``; every partition sum telescopes."""
    return Germ1D(lambda u, v: F(v) - F(u), declared_kappa2=1.0)


def frozen_occupation_germ(path: SamplePath, xi: float, drift: float = 0.0, diffusion: float = 1.0,
                           weights=None, delta: float = 0.0, eta: float = 0.25) -> Germ1D:
    """Frozen-coefficient germ of the occupation transform of a diffusion-type path.

    Conditioning on the state at ``u`` and freezing drift ``b`` and diffusion
    ``sigma`` gives

        A_{u,v} = rho_u^delta exp(i xi X_u) int_0^{v-u} exp(z r) dr,
        z = i xi b - xi^2 sigma^2 / 2.

    Evaluations use the path at grid nodes; all partition points must be
    nodes.  The result has shape ``(cells, n_paths)``.
    """
    if path.dim != 1:
        raise DomainError("frozen occupation germ is one-dimensional", "sewing")
    grid = path.grid
    x = path.values[:, :, 0]
    rho = np.ones_like(x) if weights is None else np.broadcast_to(np.asarray(weights, float), x.shape)
    z = 1j * xi * drift - 0.5 * (xi * diffusion) ** 2

    def evaluate(u: np.ndarray, v: np.ndarray) -> np.ndarray:
        iu = np.rint(u / grid.dt).astype(int)
        if np.any(np.abs(iu * grid.dt - u) > 1e-9 * grid.horizon_T):
            raise DomainError("germ points must be grid nodes", "sewing")
        h = (v - u)[:, None]
        factor = h if z == 0 else np.expm1(z * h) / z
        return (rho[:, iu] ** delta * np.exp(1j * xi * x[:, iu])).T * factor

    return Germ1D(evaluate, declared_kappa2=1.0 - eta)
