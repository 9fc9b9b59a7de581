"""Fourier transforms of weighted occupation and self-intersection measures.

For a path ``X`` with weight ``rho`` the occupation transform on ``[s, t]`` is
the left Riemann sum

    l(s, t, xi) = sum_{s <= t_j < t} rho_j^delta exp(i <xi, X_j>) dt,

computed once as a prefix sum so every pair is a difference of two prefixes
and additivity holds to rounding.  Self-intersection transforms are products
of two occupation transforms.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .errors import AlignmentError, DomainError
from .simulate import SamplePath, WeightProcess
from .stats import jackknife

__all__ = [
    "SpectralGrid",
    "OccupationFT",
    "SelfIntersectionFT",
    "LocalTimeEstimate",
    "occupation_prefix",
    "occupation_ft",
    "self_intersection_ft",
    "fl_norm",
    "japanese",
    "local_time_reconstruct",
    "ensemble_rows",
    "write_ensemble_csv",
]

DEFAULT_XI_MAX = 128.0
_CHUNK_ELEMENTS = 1 << 22


@dataclass(frozen=True)
class SpectralGrid:
    """Frequency points ``xi_k`` (shape ``(K, d)``) with positive quadrature weights."""

    xi_points: np.ndarray
    quad_weights: np.ndarray

    def __post_init__(self) -> None:
        xi = np.asarray(self.xi_points, dtype=float)
        if xi.ndim == 1:
            xi = xi[:, None]
        w = np.asarray(self.quad_weights, dtype=float).reshape(-1)
        if xi.ndim != 2 or xi.shape[0] != w.size or w.size == 0:
            raise DomainError("xi_points and quad_weights do not match", "occupation")
        if not np.all(w > 0) or not np.all(np.isfinite(xi)):
            raise DomainError("quadrature weights must be positive and points finite", "occupation")
        if np.unique(xi, axis=0).shape[0] != xi.shape[0]:
            raise DomainError("frequency points must be distinct", "occupation")
        object.__setattr__(self, "xi_points", xi)
        object.__setattr__(self, "quad_weights", w)

    @classmethod
    def uniform(cls, xi_max: float = DEFAULT_XI_MAX, spacing: float = 1.0, dim: int = 1) -> "SpectralGrid":
        """Symmetric uniform grid on ``[-xi_max, xi_max]^d`` with trapezoid weights."""
        if xi_max <= 0 or spacing <= 0:
            raise DomainError("xi_max and spacing must be positive", "occupation")
        m = int(round(xi_max / spacing))
        if m < 1 or abs(m * spacing - xi_max) > 1e-9 * xi_max:
            raise DomainError("xi_max must be a multiple of the spacing", "occupation")
        axis = np.arange(-m, m + 1) * spacing
        w1 = np.full(axis.size, spacing)
        w1[[0, -1]] *= 0.5
        if dim == 1:
            return cls(axis[:, None], w1)
        mesh = np.meshgrid(*([axis] * dim), indexing="ij")
        wmesh = np.meshgrid(*([w1] * dim), indexing="ij")
        pts = np.stack([g.reshape(-1) for g in mesh], axis=1)
        return cls(pts, np.prod([g.reshape(-1) for g in wmesh], axis=0))

    @classmethod
    def from_points(cls, points, weights=None) -> "SpectralGrid":
        pts = np.asarray(points, dtype=float)
        w = np.ones(pts.shape[0]) if weights is None else weights
        return cls(pts, w)

    @property
    def dim(self) -> int:
        return self.xi_points.shape[1]

    @property
    def size(self) -> int:
        return self.xi_points.shape[0]

    @property
    def magnitudes(self) -> np.ndarray:
        return np.linalg.norm(self.xi_points, axis=1)

    def negation_index(self) -> np.ndarray:
        """Index of ``-xi_k`` for each ``k``, or ``-1`` when it is missing."""
        keys = {tuple(np.round(p, 12)): k for k, p in enumerate(self.xi_points)}
        return np.array([keys.get(tuple(np.round(-p, 12)), -1) for p in self.xi_points])

    @property
    def is_symmetric(self) -> bool:
        neg = self.negation_index()
        return bool(np.all(neg >= 0) and np.allclose(self.quad_weights[neg], self.quad_weights))

    def uniform_spacing(self) -> float | None:
        """Spacing of a 1-d uniform grid, ``None`` otherwise."""
        if self.dim != 1 or self.size < 2:
            return None
        d = np.diff(self.xi_points[:, 0])
        return float(d[0]) if np.allclose(d, d[0], rtol=1e-10) and d[0] > 0 else None

    def to_config(self) -> dict[str, Any]:
        return {"points": self.xi_points.tolist(), "weights": self.quad_weights.tolist()}


def _weights_array(path: SamplePath, weights) -> np.ndarray:
    if weights is None:
        return np.ones(path.values.shape[:2])
    if isinstance(weights, WeightProcess):
        return weights.evaluate(path)
    w = np.asarray(weights, dtype=float)
    try:
        w = np.broadcast_to(w, path.values.shape[:2])
    except ValueError:
        raise AlignmentError("weights are not aligned with the path grid", "occupation") from None
    if np.any(w < 0) or np.any(w > 1) or not np.all(np.isfinite(w)):
        raise DomainError("weights must lie in [0, 1]", "occupation")
    return w


def _prefix_chunks(path: SamplePath, weights, delta: float, spectral: SpectralGrid):
    # Yield (first path, prefix block) so large ensembles never hold every prefix.
    if delta < 0:
        raise DomainError("delta must be non-negative", "occupation")
    if spectral.dim != path.dim:
        raise DomainError("spectral grid and path dimensions differ", "occupation")
    rho = _weights_array(path, weights)[:, :-1] ** delta * path.grid.dt
    n_paths, n = rho.shape
    K = spectral.size
    step = max(1, _CHUNK_ELEMENTS // max(1, n * K))
    xi = spectral.xi_points.T
    for a in range(0, n_paths, step):
        phase = path.values[a : a + step, :-1] @ xi
        terms = rho[a : a + step, :, None] * np.exp(1j * phase)
        block = np.zeros((terms.shape[0], n + 1, K), dtype=complex)
        np.cumsum(terms, axis=1, out=block[:, 1:])
        yield a, block


def occupation_prefix(path: SamplePath, weights, delta: float, spectral: SpectralGrid) -> np.ndarray:
    """Prefix sums ``P[p, i, k] = l(0, t_i, xi_k)`` for every path and node."""
    return np.concatenate([b for _, b in _prefix_chunks(path, weights, delta, spectral)], axis=0)


@dataclass
class OccupationFT:
    """Occupation transforms ``values[path, pair, k]`` of a batch of paths."""

    spectral: SpectralGrid
    time_pairs: np.ndarray
    values: np.ndarray
    delta: float
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def value(self, pair_index: int, path_index: int = 0) -> np.ndarray:
        return self.values[path_index, pair_index]


def _pair_indices(path: SamplePath, pairs) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
    idx = np.array([[path.grid.index_of(s, "occupation"), path.grid.index_of(t, "occupation")] for s, t in arr])
    if np.any(idx[:, 0] > idx[:, 1]):
        raise DomainError("time pairs must satisfy s <= t", "occupation")
    return arr, idx


def occupation_ft(path: SamplePath, weights, delta: float, spectral: SpectralGrid,
                  pairs: Sequence[tuple[float, float]]) -> OccupationFT:
    """Weighted occupation transforms of every path at the requested grid-aligned pairs."""
    arr, idx = _pair_indices(path, pairs)
    values = np.empty((path.n_paths, len(idx), spectral.size), dtype=complex)
    for a, block in _prefix_chunks(path, weights, delta, spectral):
        values[a : a + len(block)] = block[:, idx[:, 1]] - block[:, idx[:, 0]]
    return OccupationFT(spectral, arr, values, float(delta), {"n_steps": path.grid.n_steps})


@dataclass
class SelfIntersectionFT:
    """Self-intersection transform of one path, stored as its two factors.

    ``occ_t1[a]`` and ``occ_t2[b]`` are the occupation transforms of
    ``[0, t1[a]]`` and ``[0, t2[b]]``; ``values[a, b, k]`` is their product
    ``occ_t2[b, k] * conj(occ_t1[a, k])``, formed on demand.
    """

    spectral: SpectralGrid
    t1_nodes: np.ndarray
    t2_nodes: np.ndarray
    occ_t1: np.ndarray
    occ_t2: np.ndarray
    weight: Any = None
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return self.occ_t2[None, :, :] * np.conj(self.occ_t1)[:, None, :]

    def at(self, a: int, b: int) -> np.ndarray:
        return self.occ_t2[b] * np.conj(self.occ_t1[a])


def self_intersection_ft(path: SamplePath, weights, spectral: SpectralGrid, t1_nodes, t2_nodes,
                         path_index: int = 0, delta: float = 1.0) -> SelfIntersectionFT:
    """Self-intersection transform as the product ``l(0,t2,xi) * l(0,t1,-xi)``.

    The weight ``w`` enters as ``w^delta`` (``delta = 1`` uses ``w`` itself).
    For real weights ``l(0,t1,-xi)`` is the conjugate of ``l(0,t1,xi)``, and
    the product equals the double left Riemann sum exactly.
    """
    one = path.path(path_index)
    w = _weights_array(path, weights)[path_index : path_index + 1]
    prefix = occupation_prefix(one, w, delta, spectral)[0]
    t1 = np.atleast_1d(np.asarray(t1_nodes, dtype=float))
    t2 = np.atleast_1d(np.asarray(t2_nodes, dtype=float))
    i1 = np.array([one.grid.index_of(t, "occupation") for t in t1])
    i2 = np.array([one.grid.index_of(t, "occupation") for t in t2])
    return SelfIntersectionFT(spectral, t1, t2, prefix[i1], prefix[i2], weights,
                              {"n_steps": one.grid.n_steps, "dt": one.grid.dt})


def japanese(xi: np.ndarray) -> np.ndarray:
    """``<xi> = (1 + |xi|^2)^(1/2)`` row-wise."""
    xi = np.asarray(xi, dtype=float)
    sq = xi**2 if xi.ndim == 1 else np.sum(xi**2, axis=-1)
    return np.sqrt(1.0 + sq)


def fl_norm(ft_values, spectral: SpectralGrid, kappa: float, q: float) -> float:
    """Discrete Fourier-Lebesgue norm ``|| <xi>^kappa f ||_{L^q}`` on the grid."""
    f = np.abs(np.asarray(ft_values)).reshape(-1)
    if f.size != spectral.size:
        raise DomainError("transform values do not match the spectral grid", "occupation")
    if not q >= 1:
        raise DomainError(f"q must be >= 1, got {q}", "occupation")
    weighted = japanese(spectral.xi_points) ** kappa * f
    if math.isinf(q):
        return float(np.max(weighted)) if weighted.size else 0.0
    return float(np.sum(spectral.quad_weights * weighted**q) ** (1.0 / q))


@dataclass
class LocalTimeEstimate:
    x: np.ndarray
    density: np.ndarray
    imag_residue: float
    warning: str | None = None


def local_time_reconstruct(ft: OccupationFT, pair_index: int, x_window: tuple[float, float, int],
                           path_index: int | None = 0) -> LocalTimeEstimate:
    """Invert the occupation transform on an ``x`` lattice.

    ``path_index=None`` reconstructs from the ensemble mean transform, which
    estimates the expected local time.
    """
    sp = ft.spectral
    if sp.dim != 1 or sp.uniform_spacing() is None or not sp.is_symmetric:
        raise DomainError("reconstruction needs a symmetric uniform 1-d grid", "occupation")
    x_min, x_max, n_x = x_window
    x = np.linspace(float(x_min), float(x_max), int(n_x))
    vals = ft.values[:, pair_index].mean(axis=0) if path_index is None else ft.value(pair_index, path_index)
    xi = sp.xi_points[:, 0]
    raw = np.exp(-1j * np.outer(x, xi)) @ (sp.quad_weights * vals) / (2 * math.pi)
    re = raw.real
    residue = float(np.max(np.abs(raw.imag))) if raw.size else 0.0
    warning = None
    scale = float(np.max(np.abs(re))) if re.size else 0.0
    if residue > 0.01 * scale:
        warning = f"imaginary residue {residue:.3g} exceeds 1% of the real sup {scale:.3g}"
    return LocalTimeEstimate(x, re, residue, warning)


def ensemble_rows(ft: OccupationFT, p: float = 2.0) -> list[list[float]]:
    """Rows ``s, t, xi..., re_mean, im_mean, abs_Lp, mc_stderr`` of an ensemble.

    ``mc_stderr`` is the jackknife error of the L^p moment.
    """
    rows = []
    mean = ft.values.mean(axis=0)
    if ft.n_paths > 1:
        mom, err = jackknife(np.abs(ft.values) ** p, lambda m: m ** (1.0 / p))
    else:
        mom, err = np.abs(ft.values[0]), np.zeros(ft.values.shape[1:])
    for a, (s, t) in enumerate(ft.time_pairs):
        for k, xi in enumerate(ft.spectral.xi_points):
            rows.append([float(s), float(t), *map(float, xi), float(mean[a, k].real),
                         float(mean[a, k].imag), float(mom[a, k]), float(err[a, k])])
    return rows


def write_ensemble_csv(ft: OccupationFT, target, p: float = 2.0) -> None:
    xi_cols = ["xi"] if ft.spectral.dim == 1 else [f"xi_{k + 1}" for k in range(ft.spectral.dim)]
    with open(target, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "t", *xi_cols, "re_mean", "im_mean", "abs_Lp", "mc_stderr"])
        for row in ensemble_rows(ft, p):
            w.writerow([repr(v) for v in row])
