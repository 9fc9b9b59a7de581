"""Small statistical helpers shared by the Monte Carlo modules."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .errors import InsufficientDataError

JACKKNIFE_BLOCK = 100


def n_blocks(M: int, block: int = JACKKNIFE_BLOCK) -> int:
    """Number of jackknife blocks: leave-``block``-out when the ensemble allows it."""
    return math.ceil(M / block) if M >= 2 * block else M


def jackknife(samples: np.ndarray, stat: Callable[[np.ndarray], np.ndarray],
              block: int = JACKKNIFE_BLOCK) -> tuple[np.ndarray, np.ndarray]:
    """Estimate ``stat(mean(samples))`` and its delete-block jackknife error.

    ``samples`` has the ensemble along axis 0; ``stat`` maps a mean (same
    shape as one sample) to the statistic.  Block sums make the cost linear
    in the ensemble size.
    """
    x = np.asarray(samples)
    M = x.shape[0]
    if M < 2:
        raise InsufficientDataError("jackknife needs at least two samples", "stats")
    g = n_blocks(M, block)
    parts = np.array_split(np.arange(M), g)
    sums = np.stack([x[idx].sum(axis=0) for idx in parts])
    sizes = np.array([len(idx) for idx in parts], dtype=float).reshape((g,) + (1,) * (x.ndim - 1))
    total = sums.sum(axis=0)
    full = stat(total / M)
    loo = np.stack([stat((total - sums[k]) / (M - sizes[k])) for k in range(g)])
    spread = loo - loo.mean(axis=0)
    var = (g - 1) / g * (np.abs(spread) ** 2).sum(axis=0)
    return full, np.sqrt(var)


def linear_fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Least squares ``y = a + b x``; returns ``(slope, intercept, r_squared)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise InsufficientDataError("need at least two points to fit a line", "stats")
    A = np.column_stack([np.ones_like(x), x])
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (a + b * x)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - float(np.sum(resid**2) / ss) if ss > 0 else 1.0
    return float(b), float(a), r2
