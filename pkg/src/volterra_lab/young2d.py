"""Two-parameter increments, Hoelder seminorms and nonlinear Young integrals.

The integral ``int int A(dr, theta_{r2} - theta_{r1})`` over a rectangle is
the limit of sums of box increments ``Box_{u,v} A(., theta_{u2} - theta_{u1})``
over dyadic rectangle partitions, with the spatial argument frozen at the
lower-left corner of each cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import AlignmentError, DomainError, InsufficientDataError
from .simulate import SamplePath
from .stats import linear_fit

__all__ = [
    "TwoParamField",
    "Sampled2D",
    "YoungIntegral",
    "GermExponent",
    "box_increment",
    "holder2_seminorms",
    "holder_seminorm",
    "path_function",
    "nl_young_integral",
    "grid_square_integrals",
    "germ_error_exponent",
]

_CELL_BLOCK = 1 << 20


@dataclass(frozen=True)
class TwoParamField:
    """A family ``A(t1, t2, x)`` of spatial functions.

    ``eval(t1, t2, x)`` is vectorized: ``t1`` and ``t2`` have shape ``(N,)``,
    ``x`` has shape ``(N, d)`` and the result ``(N, d)``.  ``eval_grad_x``
    returns ``(N, d, d)``.
    """

    eval: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    eval_grad_x: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray] | None = None
    gamma: float = 1.0
    spatial_kappa: float = 1.0
    dim: int = 1

    def __post_init__(self) -> None:
        if not 0.5 < self.gamma <= 1.0:
            raise DomainError(f"gamma must lie in (1/2, 1], got {self.gamma}", "young2d")
        if not 0.0 < self.spatial_kappa <= 1.0:
            raise DomainError(f"spatial_kappa must lie in (0, 1], got {self.spatial_kappa}", "young2d")

    def __call__(self, t1, t2, x) -> np.ndarray:
        t1 = np.atleast_1d(np.asarray(t1, dtype=float))
        t2 = np.atleast_1d(np.asarray(t2, dtype=float))
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        n = max(len(t1), len(t2), len(x))
        t1, t2 = np.broadcast_to(t1, (n,)), np.broadcast_to(t2, (n,))
        x = np.broadcast_to(x, (n, self.dim))
        return np.asarray(self.eval(t1, t2, x)).reshape(n, self.dim)

    def box(self, u1, u2, v1, v2, x) -> np.ndarray:
        """``Box_{u,v} A(., x)`` for arrays of cells."""
        return self(v1, v2, x) - self(v1, u2, x) - self(u1, v2, x) + self(u1, u2, x)

    @classmethod
    def separable(cls, f: Callable, g: Callable, gamma: float = 1.0, spatial_kappa: float = 1.0,
                  grad: Callable | None = None) -> "TwoParamField":
        """``A(t1, t2, x) = f(t1, t2) g(x)`` for scalar ``f`` and vector-valued ``g``."""

        def ev(t1, t2, x):
            return np.asarray(f(t1, t2))[:, None] * np.asarray(g(x)).reshape(x.shape)

        def gx(t1, t2, x):
            return np.asarray(f(t1, t2))[:, None, None] * np.asarray(grad(x)).reshape(x.shape + (x.shape[1],))

        return cls(ev, gx if grad is not None else None, gamma, spatial_kappa)


@dataclass(frozen=True)
class Sampled2D:
    """A two-parameter function sampled on ``nodes1 x nodes2``."""

    nodes1: np.ndarray
    nodes2: np.ndarray
    values: np.ndarray

    @classmethod
    def from_function(cls, f: Callable, nodes1, nodes2=None) -> "Sampled2D":
        n1 = np.asarray(nodes1, dtype=float)
        n2 = n1 if nodes2 is None else np.asarray(nodes2, dtype=float)
        T1, T2 = np.meshgrid(n1, n2, indexing="ij")
        return cls(n1, n2, np.asarray(f(T1, T2), dtype=float))

    def index(self, t: float, axis: int) -> int:
        nodes = self.nodes1 if axis == 0 else self.nodes2
        i = int(np.argmin(np.abs(nodes - t)))
        if abs(nodes[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise AlignmentError(f"time {t} is not a grid node", "young2d")
        return i


def box_increment(f: Sampled2D, s: tuple[float, float], t: tuple[float, float]):
    """``f(t1,t2) - f(t1,s2) - f(s1,t2) + f(s1,s2)``."""
    if s[0] > t[0] or s[1] > t[1]:
        raise DomainError("need s <= t componentwise", "young2d")
    a1, a2 = f.index(s[0], 0), f.index(s[1], 1)
    b1, b2 = f.index(t[0], 0), f.index(t[1], 1)
    v = f.values
    return v[b1, b2] - v[b1, a2] - v[a1, b2] + v[a1, a2]


def holder2_seminorms(f: Sampled2D, alpha: tuple[float, float]) -> tuple[float, float, float]:
    """Grid maxima of the ``(1,0)``, ``(0,1)`` and ``(1,1)`` Hoelder ratios."""
    v = np.asarray(f.values)
    if v.shape[0] < 4 or v.shape[1] < 4:
        raise InsufficientDataError("need at least 4 nodes per axis", "young2d")
    v = v.reshape(v.shape[0], v.shape[1], -1)
    n1, n2 = f.nodes1, f.nodes2
    i, j = np.triu_indices(len(n1), 1)
    k, l = np.triu_indices(len(n2), 1)
    g1 = np.abs(n1[j] - n1[i]) ** alpha[0]
    g2 = np.abs(n2[l] - n2[k]) ** alpha[1]
    d1 = np.linalg.norm(v[j] - v[i], axis=-1)  # (pairs1, n2)
    s10 = float(np.max(d1 / g1[:, None]))
    d2 = np.linalg.norm(v[:, l] - v[:, k], axis=-1)  # (n1, pairs2)
    s01 = float(np.max(d2 / g2[None, :]))
    s11 = 0.0
    for p in range(len(i)):
        inc = (v[j[p]] - v[i[p]])  # (n2, c)
        box = np.linalg.norm(inc[l] - inc[k], axis=-1)
        s11 = max(s11, float(np.max(box / (g1[p] * g2))))
    return s10, s01, s11


def holder_seminorm(values: np.ndarray, times: np.ndarray, beta: float) -> float:
    """``max |x_t - x_s| / |t - s|^beta`` over grid pairs of a single path."""
    x = np.asarray(values, dtype=float).reshape(len(times), -1)
    i, j = np.triu_indices(len(times), 1)
    if len(i) == 0:
        return 0.0
    d = np.linalg.norm(x[j] - x[i], axis=1)
    return float(np.max(d / np.abs(times[j] - times[i]) ** beta))


def path_function(theta) -> Callable[[np.ndarray], np.ndarray]:
    """Turn a callable or a single :class:`SamplePath` into ``t -> (N, d)`` lookups.

    Sample paths are read at grid nodes only; off-grid times raise.
    """
    if isinstance(theta, SamplePath):
        grid, vals = theta.grid, theta.values[0]

        def lookup(t: np.ndarray) -> np.ndarray:
            x = np.asarray(t, dtype=float) / grid.dt
            i = np.rint(x).astype(int)
            if np.any(np.abs(x - i) > 1e-9 * np.maximum(1.0, np.abs(x))) or np.any(i < 0) or np.any(i > grid.n_steps):
                raise AlignmentError("partition point is not a node of the path grid", "young2d")
            return vals[i]

        return lookup

    def call(t: np.ndarray) -> np.ndarray:
        out = np.asarray(theta(np.asarray(t, dtype=float)), dtype=float)
        return out.reshape(len(np.atleast_1d(t)), -1)

    return call


def _level_sum(A: TwoParamField, th, rect, level: int) -> np.ndarray:
    (s1, t1), (s2, t2) = rect
    n = 2**level
    e1 = s1 + (t1 - s1) * np.arange(n + 1) / n
    e2 = s2 + (t2 - s2) * np.arange(n + 1) / n
    th1 = th(e1[:-1])
    th2 = th(e2[:-1])
    total = np.zeros(A.dim)
    rows = max(1, _CELL_BLOCK // n)
    for a in range(0, n, rows):
        ia = np.arange(a, min(n, a + rows))
        I, J = np.meshgrid(ia, np.arange(n), indexing="ij")
        I, J = I.reshape(-1), J.reshape(-1)
        x = th2[J] - th1[I]
        total += A.box(e1[I], e2[J], e1[I + 1], e2[J + 1], x).sum(axis=0)
    return total


@dataclass(frozen=True)
class YoungIntegral:
    value: np.ndarray
    error: float
    converged: bool
    level_sums: tuple[np.ndarray, ...]


def nl_young_integral(A: TwoParamField, theta, rect, level: int, history: int = 3) -> YoungIntegral:
    """Dyadic Riemann sum of box increments over ``rect = ((s1, t1), (s2, t2))``.

    ``error`` is ``|S_L - S_{L-1}|``.  ``converged`` is false when the
    successive-level differences fail to decrease over the last ``history``
    levels.
    """
    if level < 1:
        raise DomainError("level must be at least 1", "young2d")
    (s1, t1), (s2, t2) = rect
    if s1 > t1 or s2 > t2:
        raise DomainError("rectangle must satisfy s <= t", "young2d")
    th = path_function(theta)
    first = max(0, level - history)
    sums = tuple(_level_sum(A, th, rect, L) for L in range(first, level + 1))
    diffs = [float(np.linalg.norm(sums[k + 1] - sums[k])) for k in range(len(sums) - 1)]
    converged = all(diffs[k + 1] <= diffs[k] for k in range(len(diffs) - 1)) or diffs[-1] == 0.0
    return YoungIntegral(sums[-1], diffs[-1], converged, sums)


def grid_square_integrals(A: TwoParamField, nodes: np.ndarray, theta_values: np.ndarray) -> np.ndarray:
    """Grid-level integrals over ``[0, t_n]^2`` for every node ``n``.

    Uses the grid cells as the partition: the cell matrix
    ``B[i, j] = Box A(., theta_j - theta_i)`` on ``[t_i, t_i+1] x [t_j, t_j+1]``
    is accumulated into the growing squares.
    """
    nodes = np.asarray(nodes, dtype=float)
    th = np.asarray(theta_values, dtype=float).reshape(len(nodes), -1)
    n = len(nodes) - 1
    I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    I, J = I.reshape(-1), J.reshape(-1)
    B = A.box(nodes[I], nodes[J], nodes[I + 1], nodes[J + 1], th[J] - th[I]).reshape(n, n, -1)
    C = np.cumsum(np.cumsum(B, axis=0), axis=1)
    out = np.zeros((n + 1, th.shape[1]))
    out[1:] = C[np.arange(n), np.arange(n)]
    return out


@dataclass(frozen=True)
class GermExponent:
    exponent: float
    exact: bool
    sizes: tuple[float, ...]
    defects: tuple[float, ...]

    def to_record(self) -> dict:
        return {"exponent": "exact" if self.exact else self.exponent,
                "sizes": list(self.sizes), "defects": list(self.defects)}


def germ_error_exponent(A: TwoParamField, theta, corner: tuple[float, float], h0: float,
                        n_sizes: int = 5, oracle_level: int = 12, tol: float = 1e-13) -> GermExponent:
    """Decay exponent of the germ defect on shrinking square boxes.

    Boxes ``[c1, c1 + h] x [c2, c2 + h]`` with ``h = h0 2^-k``.  Each box is
    integrated on the fixed fine mesh ``h0 2^-oracle_level`` (the level
    ``oracle_level`` integral restricted to the box) and compared with the
    single germ ``Box A(., theta_c2 - theta_c1)``.  Defects at or below
    ``tol`` everywhere give the ``exact`` sentinel.
    """
    if n_sizes < 5:
        raise InsufficientDataError("need at least 5 box sizes", "young2d")
    if oracle_level - (n_sizes - 1) < 1:
        raise DomainError("oracle level too coarse for the smallest box", "young2d")
    th = path_function(theta)
    c1, c2 = corner
    sizes, defects = [], []
    for k in range(n_sizes):
        h = h0 * 2.0**-k
        rect = ((c1, c1 + h), (c2, c2 + h))
        oracle = _level_sum(A, th, rect, oracle_level - k)
        x = th(np.array([c2])) - th(np.array([c1]))
        germ = A.box(np.array([c1]), np.array([c2]), np.array([c1 + h]), np.array([c2 + h]), x)[0]
        sizes.append(h)
        defects.append(float(np.linalg.norm(oracle - germ)))
    d = np.asarray(defects)
    if np.all(d <= tol):
        return GermExponent(math.inf, True, tuple(sizes), tuple(defects))
    slope, _, _ = linear_fit(np.log(sizes), np.log(np.maximum(d, np.finfo(float).tiny)))
    return GermExponent(slope, False, tuple(sizes), tuple(defects))
