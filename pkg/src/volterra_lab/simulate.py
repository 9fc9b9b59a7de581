"""Sample paths of Volterra Ito processes and exact fractional Brownian motion.

The scheme is the explicit left-point Euler-Volterra recursion

    X_i = g(t_i) + sum_{j<i} Kb_ij b(X_j) dt + sum_{j<i} Ks_ij sigma(X_j) dB_j

where ``Kb_ij`` and ``Ks_ij`` are cell weights for the kernels on
``[t_j, t_{j+1})``.  Randomness comes from a counter-based generator keyed by
``(seed, path index)`` so any path can be regenerated on its own and batches
can be split across workers without changing a single bit.
"""

from __future__ import annotations

import csv
import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import AlignmentError, DomainError, PathOverflowError
from .kernels import KernelSpec, eval_kernel

__all__ = [
    "TimeGrid",
    "SamplePath",
    "CoefficientProcess",
    "WeightProcess",
    "path_rng",
    "sample_brownian",
    "brownian_paths",
    "kernel_cell_weights",
    "simulate_volterra_ito",
    "simulate_fbm",
    "simulate_volterra_power",
    "path_statistics",
    "write_path_csv",
]

DEFAULT_BOUND = 1e8
FBM_MAX_STEPS = 8192
_DENSE_LIMIT = 4096


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_i = i * T / n`` on ``[0, T]``."""

    horizon_T: float
    n_steps: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.horizon_T) and self.horizon_T > 0):
            raise DomainError(f"horizon must be positive, got {self.horizon_T}", "simulate")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise DomainError(f"need at least 2 steps, got {self.n_steps}", "simulate")
        object.__setattr__(self, "n_steps", int(self.n_steps))
        object.__setattr__(self, "horizon_T", float(self.horizon_T))

    @property
    def dt(self) -> float:
        return self.horizon_T / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def index_of(self, t: float, module: str = "simulate") -> int:
        """Index of the node at time ``t``; raises if ``t`` is off the grid."""
        x = float(t) / self.dt
        i = int(round(x))
        if not (0 <= i <= self.n_steps) or abs(x - i) > 1e-9 * max(1.0, abs(x)):
            raise AlignmentError(f"time {t} is not a node of {self}", module)
        return i

    def refine(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.horizon_T, self.n_steps * int(factor))

    def to_config(self) -> dict[str, Any]:
        return {"T": self.horizon_T, "n_steps": self.n_steps}


@dataclass
class SamplePath:
    """A batch of ``d``-dimensional trajectories on a grid.

    ``values`` has shape ``(n_paths, n_steps + 1, dim)``; a single trajectory
    is a batch of one.
    """

    grid: TimeGrid
    values: np.ndarray
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[None, :, None]
        elif v.ndim == 2:
            v = v[None, :, :]
        if v.ndim != 3 or v.shape[1] != self.grid.n_steps + 1:
            raise DomainError(
                f"values of shape {np.shape(self.values)} do not fit {self.grid}", "simulate"
            )
        if not np.all(np.isfinite(v)):
            raise DomainError("sample path has non-finite entries", "simulate")
        self.values = v

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[2]

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes

    def path(self, index: int) -> "SamplePath":
        return SamplePath(self.grid, self.values[index : index + 1], dict(self.metadata))

    def at(self, t: float) -> np.ndarray:
        """States of all paths at node ``t``, shape ``(n_paths, dim)``."""
        return self.values[:, self.grid.index_of(t)]


def _broadcast(out, shape: tuple[int, ...], what: str) -> np.ndarray:
    # Accept scalars, per-sample scalars and full arrays; pad trailing axes.
    arr = np.asarray(out, dtype=float)
    if arr.ndim and arr.shape[0] == shape[0] and arr.shape != shape[1:]:
        arr = arr.reshape(arr.shape + (1,) * (len(shape) - arr.ndim))
    try:
        return np.broadcast_to(arr, shape)
    except ValueError:
        raise DomainError(f"{what} returned shape {arr.shape}, expected {shape}", "simulate") from None


@dataclass(frozen=True)
class CoefficientProcess:
    """Drift or diffusion coefficient of a Volterra Ito process.

    ``kind`` is ``"constant"`` (``value`` is a vector or matrix), ``"state"``
    (``value(x)`` with ``x`` of shape ``(n_paths, d)``) or ``"functional"``
    (``value(i, history)`` with ``history`` of shape ``(n_paths, i + 1, d)``).
    """

    kind: str
    value: Any
    holder_alpha: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "state", "functional"):
            raise DomainError(f"unknown coefficient kind {self.kind!r}", "simulate")
        if self.kind != "constant" and not callable(self.value):
            raise DomainError(f"{self.kind} coefficient needs a callable", "simulate")
        if self.holder_alpha < 0:
            raise DomainError("holder_alpha must be non-negative", "simulate")

    @classmethod
    def constant(cls, value, holder_alpha: float = 0.0) -> "CoefficientProcess":
        return cls("constant", np.asarray(value, dtype=float), holder_alpha)

    @classmethod
    def state(cls, fn: Callable, holder_alpha: float = 1.0) -> "CoefficientProcess":
        return cls("state", fn, holder_alpha)

    @classmethod
    def functional(cls, fn: Callable, holder_alpha: float = 0.0) -> "CoefficientProcess":
        return cls("functional", fn, holder_alpha)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"

    def evaluate(self, i: int, history: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
        if self.kind == "constant":
            out = self.value
        elif self.kind == "state":
            out = self.value(history[:, i])
        else:
            out = self.value(i, history[:, : i + 1])
        out = _broadcast(out, shape, "coefficient")
        if not np.all(np.isfinite(out)):
            raise PathOverflowError(f"coefficient is not finite at step {i}", "simulate")
        return out


@dataclass(frozen=True)
class WeightProcess:
    """Weight ``rho`` in ``[0, 1]`` attached to a path.

    ``"one"`` is the constant weight, ``"state"`` applies ``fn`` to the state
    (shape ``(..., d)`` to ``(...)``), ``"custom"`` calls
    ``fn(times, values)`` with the full batch.
    """

    kind: str = "one"
    fn: Callable | None = None
    holder_chi: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("one", "state", "custom"):
            raise DomainError(f"unknown weight kind {self.kind!r}", "simulate")
        if self.kind != "one" and not callable(self.fn):
            raise DomainError(f"{self.kind} weight needs a callable", "simulate")
        if not 0.0 <= self.holder_chi <= 1.0:
            raise DomainError("holder_chi must lie in [0, 1]", "simulate")

    def evaluate(self, path: SamplePath) -> np.ndarray:
        """Weights of shape ``(n_paths, n_steps + 1)``, clamped to ``[0, 1]``."""
        shape = path.values.shape[:2]
        if self.kind == "one":
            return np.ones(shape)
        if self.kind == "state":
            out = self.fn(path.values)
        else:
            out = self.fn(path.times, path.values)
        out = np.broadcast_to(np.asarray(out, dtype=float), shape)
        return np.clip(out, 0.0, 1.0)


def path_rng(seed: int, path_index: int) -> np.random.Generator:
    """Counter-based generator for one path, keyed by ``(seed, path_index)``."""
    if seed < 0 or path_index < 0:
        raise DomainError("seed and path index must be non-negative", "simulate")
    return np.random.Generator(np.random.Philox(key=[int(seed), int(path_index)]))


def sample_brownian(grid: TimeGrid, dim_m: int, seed: int, path_index: int = 0) -> np.ndarray:
    """Brownian increments ``dB_i ~ N(0, dt I_m)`` of one path, shape ``(n_steps, m)``.

    Step ``i`` always consumes the same position of the key's stream, so the
    output depends only on ``(seed, path_index)`` and the grid.
    """
    if dim_m < 1:
        raise DomainError("dim_m must be at least 1", "simulate")
    z = path_rng(seed, path_index).standard_normal((grid.n_steps, dim_m))
    return z * math.sqrt(grid.dt)


def _increment_batch(grid: TimeGrid, dim_m: int, seed: int, first: int, count: int) -> np.ndarray:
    out = np.empty((count, grid.n_steps, dim_m))
    for k in range(count):
        out[k] = sample_brownian(grid, dim_m, seed, first + k)
    return out


def _chunked(n_paths: int, threads: int, work: Callable[[int, int], np.ndarray]) -> np.ndarray:
    # Split paths into contiguous blocks; results are reassembled by index.
    threads = max(1, int(threads))
    if threads == 1 or n_paths < 2 * threads:
        return work(0, n_paths)
    bounds = np.linspace(0, n_paths, threads + 1).astype(int)
    with ThreadPoolExecutor(threads) as pool:
        parts = list(pool.map(lambda k: work(bounds[k], bounds[k + 1] - bounds[k]), range(threads)))
    return np.concatenate(parts, axis=0)


def brownian_paths(grid: TimeGrid, dim: int, seed: int, n_paths: int = 1,
                   first_path: int = 0, threads: int = 1) -> SamplePath:
    """Standard Brownian motion paths started at zero."""

    def work(start: int, count: int) -> np.ndarray:
        inc = _increment_batch(grid, dim, seed, first_path + start, count)
        out = np.zeros((count, grid.n_steps + 1, dim))
        np.cumsum(inc, axis=1, out=out[:, 1:])
        return out

    return SamplePath(grid, _chunked(n_paths, threads, work), {"process": "brownian", "seed": seed})


def _rl_cell_weights(spec: KernelSpec, grid: TimeGrid, power: int) -> np.ndarray:
    # Exact mean of K^power over cells at lags [k dt, (k+1) dt], k = 0..n-1.
    dt = grid.dt
    e = power * (spec.H - 0.5) + 1.0
    edges = np.arange(grid.n_steps + 1) * dt
    integ = (edges[1:] ** e - edges[:-1] ** e) / e
    return integ * spec.norm_const**power / dt


def kernel_cell_weights(spec: KernelSpec, grid: TimeGrid, role: str) -> np.ndarray | Callable[[int], np.ndarray]:
    """Cell weights of a kernel on the grid.

    For convolution kernels returns a lag vector ``w`` with ``K_ij = w[i-1-j]``;
    otherwise a function ``i -> row`` of length ``i``.  RL drift weights are the
    exact cell averages of ``K``; RL diffusion weights are root-mean-square
    averages so that every cell reproduces ``int K^2`` exactly.  Other
    families are evaluated at the cell midpoint.
    """
    if spec.family == "fbm":
        raise DomainError("the fBm kernel is not evaluated pointwise; use simulate_fbm", "simulate")
    dt = grid.dt
    if spec.family == "rl":
        if role == "drift":
            return _rl_cell_weights(spec, grid, 1)
        return np.sqrt(_rl_cell_weights(spec, grid, 2))
    if spec.family in ("constant", "log", "qlog"):
        lags = (np.arange(grid.n_steps) + 0.5) * dt
        return np.asarray(eval_kernel(spec, lags, 0.0), dtype=float)
    nodes = grid.nodes

    def row(i: int) -> np.ndarray:
        return np.asarray(eval_kernel(spec, np.full(i, nodes[i]), nodes[:i] + 0.5 * dt), dtype=float)

    return row


def _weight_matrix(w, n: int) -> np.ndarray:
    # Lower-triangular (n+1) x n matrix: row i holds the weights of cells j < i.
    mat = np.zeros((n + 1, n))
    for i in range(1, n + 1):
        mat[i, :i] = w[i - 1 :: -1] if isinstance(w, np.ndarray) else w(i)
    return mat


def _row(w, i: int) -> np.ndarray:
    return w[i - 1 :: -1] if isinstance(w, np.ndarray) else w(i)


def _initial_values(g, grid: TimeGrid, n_paths: int, dim: int) -> np.ndarray:
    if isinstance(g, SamplePath):
        v = g.values
        if v.shape[1] != grid.n_steps + 1 or v.shape[2] != dim or v.shape[0] not in (1, n_paths):
            raise DomainError("initial path does not match grid/dimension", "simulate")
        return np.broadcast_to(v, (n_paths, grid.n_steps + 1, dim))
    if callable(g):
        out = np.asarray(g(grid.nodes), dtype=float)
        out = out.reshape(grid.n_steps + 1, -1)
        return np.broadcast_to(out[None], (n_paths, grid.n_steps + 1, dim))
    x0 = np.broadcast_to(np.asarray(g, dtype=float), (dim,))
    return np.broadcast_to(x0, (n_paths, grid.n_steps + 1, dim))


def simulate_volterra_ito(
    g,
    Kb: KernelSpec,
    Ks: KernelSpec,
    b: CoefficientProcess,
    sigma: CoefficientProcess,
    grid: TimeGrid,
    seed: int,
    *,
    n_paths: int = 1,
    dim: int = 1,
    dim_m: int | None = None,
    bound: float = DEFAULT_BOUND,
    first_path: int = 0,
    threads: int = 1,
) -> SamplePath:
    """Left-point Euler-Volterra scheme for a Volterra Ito process.

    ``g`` is a constant, a callable of time, or a :class:`SamplePath`.  The
    drift coefficient must produce ``d``-vectors and the diffusion
    ``d x m`` matrices (scalars broadcast).  Raises
    :class:`PathOverflowError` once any component exceeds ``bound``.
    """
    m = dim if dim_m is None else int(dim_m)
    n, dt = grid.n_steps, grid.dt
    wb = kernel_cell_weights(Kb, grid, "drift")
    ws = kernel_cell_weights(Ks, grid, "diffusion")
    dense = b.is_constant and sigma.is_constant and n <= _DENSE_LIMIT

    def work(start: int, count: int) -> np.ndarray:
        dB = _increment_batch(grid, m, seed, first_path + start, count)
        X = np.array(_initial_values(g, grid, count, dim), dtype=float)
        if dense:
            drift = _broadcast(b.value, (dim,), "drift") * dt
            vol = _broadcast(sigma.value, (dim, m), "diffusion")
            noise = np.einsum("dm,pjm->pjd", vol, dB)
            X += _weight_matrix(wb, n).sum(axis=1)[None, :, None] * drift
            X += np.einsum("ij,pjd->pid", _weight_matrix(ws, n), noise)
        else:
            drift = np.zeros((count, n, dim))
            noise = np.zeros((count, n, dim))
            for i in range(n + 1):
                if i:
                    X[:, i] += np.einsum("j,pjd->pd", _row(wb, i), drift[:, :i])
                    X[:, i] += np.einsum("j,pjd->pd", _row(ws, i), noise[:, :i])
                    if not np.all(np.abs(X[:, i]) <= bound):
                        raise PathOverflowError(
                            f"|X| exceeded {bound:g} at t={grid.nodes[i]:.6g}", "simulate"
                        )
                if i < n:
                    drift[:, i] = b.evaluate(i, X, (count, dim)) * dt
                    vol = sigma.evaluate(i, X, (count, dim, m))
                    noise[:, i] = np.einsum("pdm,pm->pd", vol, dB[:, i])
        if not np.all(np.abs(X) <= bound):
            raise PathOverflowError(f"|X| exceeded {bound:g}", "simulate")
        return X

    values = _chunked(n_paths, threads, work)
    meta = {"process": "volterra_ito", "seed": seed, "Kb": Kb.to_config(), "Ks": Ks.to_config()}
    return SamplePath(grid, values, meta)


@functools.lru_cache(maxsize=8)
def _fbm_factor(H: float, T: float, n: int) -> tuple[np.ndarray, bool]:
    t = np.arange(1, n + 1) * (T / n)
    cov = 0.5 * (t[:, None] ** (2 * H) + t[None, :] ** (2 * H) - np.abs(t[:, None] - t[None, :]) ** (2 * H))
    try:
        return np.linalg.cholesky(cov), False
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        return vecs * np.sqrt(np.clip(vals, 0.0, None)), True


def simulate_fbm(H: float, grid: TimeGrid, dim: int, seed: int, *, n_paths: int = 1,
                 first_path: int = 0, threads: int = 1) -> SamplePath:
    """Exact fBm samples by factorizing the covariance of the grid nodes.

    Coordinates are independent.  If the Cholesky factorization fails the
    covariance is diagonalized with negative eigenvalues clipped to zero and
    ``metadata["eigen_clipped"]`` is set.
    """
    if not 0.0 < H < 1.0:
        raise DomainError(f"Hurst index must lie in (0, 1), got {H}", "simulate")
    if grid.n_steps > FBM_MAX_STEPS:
        raise DomainError(f"fBm factorization limited to {FBM_MAX_STEPS} steps", "simulate")
    L, clipped = _fbm_factor(float(H), grid.horizon_T, grid.n_steps)

    def work(start: int, count: int) -> np.ndarray:
        z = np.empty((grid.n_steps, count, dim))
        for k in range(count):
            z[:, k] = path_rng(seed, first_path + start + k).standard_normal((grid.n_steps, dim))
        out = np.zeros((count, grid.n_steps + 1, dim))
        out[:, 1:] = (L @ z.reshape(grid.n_steps, -1)).reshape(grid.n_steps, count, dim).transpose(1, 0, 2)
        return out

    values = _chunked(n_paths, threads, work)
    return SamplePath(grid, values, {"process": "fbm", "H": H, "seed": seed, "eigen_clipped": clipped})


def simulate_volterra_power(H: float, x0: float, b0: float, beta: float, theta: float,
                            grid: TimeGrid, seed: int, *, n_paths: int = 1,
                            bound: float = DEFAULT_BOUND, threads: int = 1) -> SamplePath:
    """Volterra equation with affine drift and diffusion ``max(X, 0)^theta``.

    ``theta = 1/2`` is the Volterra Cox-Ingersoll-Ross process.
    """
    if x0 < 0 or b0 < 0:
        raise DomainError("x0 and b0 must be non-negative", "simulate")
    if not 0.5 <= theta <= 1.0:
        raise DomainError(f"theta must lie in [1/2, 1], got {theta}", "simulate")
    K = KernelSpec.riemann_liouville(H)
    drift = CoefficientProcess.state(lambda x: b0 + beta * x, holder_alpha=1.0)
    vol = CoefficientProcess.state(lambda x: np.maximum(x, 0.0) ** theta, holder_alpha=theta)
    path = simulate_volterra_ito(x0, K, K, drift, vol, grid, seed, n_paths=n_paths,
                                 bound=bound, threads=threads)
    path.metadata.update(process="volterra_power", theta=theta, b0=b0, beta=beta, x0=x0)
    return path


def path_statistics(path: SamplePath) -> dict[str, Any]:
    """Per-node ensemble mean and variance, accumulated as sums and sums of squares."""
    s1 = path.values.sum(axis=0)
    s2 = (path.values**2).sum(axis=0)
    M = path.n_paths
    mean = s1 / M
    var = (s2 - M * mean**2) / max(M - 1, 1)
    return {
        "n_paths": M,
        "t": path.times.tolist(),
        "mean": mean.tolist(),
        "variance": var.tolist(),
    }


def write_path_csv(path: SamplePath, target, path_index: int = 0) -> None:
    """Write one trajectory as CSV with columns ``t, x_1, ..., x_d``."""
    rows = path.values[path_index]
    with open(target, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"x_{k + 1}" for k in range(path.dim)])
        for t, x in zip(path.times, rows):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in x])
