"""Averaged fields ``A^b = b * G`` and the self-interacting Picard solver.

With the drift convention ``b_hat(xi) = int exp(-i xi x) b(x) dx`` the field is

    A^b(t1, t2, theta) = (2 pi)^-d sum_k w_k b_hat(xi_k) G_hat_{t1,t2}(xi_k) exp(i xi_k theta),

where ``G_hat_{t1,t2}(xi) = l(0,t2,xi) conj(l(0,t1,xi))
= int int exp(i xi (z_r2 - z_r1))`` is built from the occupation transforms of
the driving path ``z`` (which carry ``exp(+i xi z)``).  On the grid the box
increment of a cell ``[t_i, t_i+1] x [t_j, t_j+1]`` factorizes into
``cell_j(xi) conj(cell_i(xi))`` and the square integral of the germs becomes

    I_n(theta) = (2 pi)^-d Re sum_k w_k b_hat_k |S_n(k)|^2,
    S_n(k) = sum_{j<n} cell_j(xi_k) exp(i xi_k theta_j),

so one Picard sweep costs ``O(n K)``.  Splitting ``S_n = S_old + S_new`` at a
window start gives the old x old, cross and new x new pieces of the square.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence

import numpy as np
from scipy.special import dawsn

from .errors import DomainError, NoContractionError
from .kernels import gamma_fn
from .occupation import SelfIntersectionFT, SpectralGrid, fl_norm, self_intersection_ft
from .simulate import SamplePath
from .young2d import TwoParamField, grid_square_integrals, holder_seminorm

__all__ = [
    "FourierDrift",
    "FourierField",
    "SolverConfig",
    "SolveResult",
    "build_field",
    "field_from_path",
    "solve_picard",
    "holder_proxy",
    "stability_experiment",
    "u0_sensitivity",
    "threshold_presets",
    "gaussian_bump",
    "example_condition",
]

_EVAL_BLOCK = 1 << 21


@dataclass(frozen=True)
class FourierDrift:
    """A drift given by its Fourier transform.

    ``b_hat`` maps frequencies of shape ``(K, d)`` to ``(K,)`` (scalar, only
    for ``d = 1``) or ``(K, d)`` complex values.  ``fl_delta`` and
    ``fl_qprime`` are the Fourier-Lebesgue indices the drift is used with.
    """

    b_hat: Callable[[np.ndarray], np.ndarray]
    fl_delta: float = 0.0
    fl_qprime: float = math.inf
    description: str = ""
    dim: int = 1

    def values(self, spectral: SpectralGrid) -> np.ndarray:
        """``b_hat`` on the grid as a ``(K, d)`` complex array."""
        if spectral.dim != self.dim:
            raise DomainError("drift and spectral grid dimensions differ", "selfinteract")
        out = np.asarray(self.b_hat(spectral.xi_points), dtype=complex)
        if out.ndim == 1:
            out = out[:, None]
        return np.broadcast_to(out, (spectral.size, self.dim)).copy()

    def check_symmetry(self, spectral: SpectralGrid, atol: float = 1e-12) -> bool:
        """``b_hat(-xi) = conj(b_hat(xi))`` on the grid (``b`` real-valued)."""
        neg = spectral.negation_index()
        if np.any(neg < 0):
            raise DomainError("spectral grid lacks -xi for some xi", "selfinteract")
        v = self.values(spectral)
        return bool(np.allclose(v[neg], np.conj(v), atol=atol))

    def mollified(self, n: float) -> "FourierDrift":
        """Heat-kernel mollification ``b_hat(xi) exp(-|xi|^2 / (2 n^2))``."""
        if not n > 0:
            raise DomainError("mollification level must be positive", "selfinteract")
        base = self.b_hat

        def b_hat(xi):
            damp = np.exp(-np.sum(np.asarray(xi, float) ** 2, axis=-1) / (2.0 * n * n))
            out = np.asarray(base(xi), dtype=complex)
            return out * (damp if out.ndim == 1 else damp[:, None])

        return replace(self, b_hat=b_hat, description=f"{self.description} mollified n={n:g}")

    def to_record(self) -> dict[str, Any]:
        return {"description": self.description, "fl_delta": self.fl_delta,
                "fl_qprime": "inf" if math.isinf(self.fl_qprime) else self.fl_qprime}


@dataclass(frozen=True)
class FourierField(TwoParamField):
    """``A^b`` built from a self-intersection transform on grid nodes.

    Besides the generic evaluation interface it keeps the per-cell occupation
    transforms so the solver can sum germs in factorized form.
    """

    spectral: SpectralGrid | None = None
    coef: np.ndarray | None = None  # (K, d): (2 pi)^-d w_k b_hat(xi_k)
    prefix: np.ndarray | None = None  # (n+1, K): l(0, t_i, xi_k)
    nodes: np.ndarray | None = None
    imag_residue: float = 0.0
    truncation_ratio: float = 0.0
    warnings: tuple[str, ...] = ()

    @property
    def cells(self) -> np.ndarray:
        return np.diff(self.prefix, axis=0)

    def node_index(self, t: np.ndarray) -> np.ndarray:
        dt = self.nodes[1] - self.nodes[0]
        x = np.asarray(t, dtype=float) / dt
        i = np.rint(x).astype(int)
        if np.any(np.abs(x - i) > 1e-9 * np.maximum(1.0, np.abs(x))) or np.any(i < 0) or np.any(i >= len(self.nodes)):
            raise DomainError("field is only known at grid nodes", "selfinteract")
        return i

    def complex_eval(self, t1, t2, x, grad: bool = False) -> np.ndarray:
        """Complex field (before taking the real part); ``(N, d)`` or ``(N, d, d)``."""
        i1, i2 = self.node_index(t1), self.node_index(t2)
        x = np.asarray(x, dtype=float).reshape(len(i1), -1)
        xi = self.spectral.xi_points
        K, d = self.coef.shape
        out = np.zeros((len(i1), d, d) if grad else (len(i1), d), dtype=complex)
        step = max(1, _EVAL_BLOCK // K)
        for a in range(0, len(i1), step):
            sl = slice(a, a + step)
            g = self.prefix[i2[sl]] * np.conj(self.prefix[i1[sl]]) * np.exp(1j * (x[sl] @ xi.T))
            if grad:
                out[sl] = np.einsum("nk,kc,ke->nce", g, self.coef, 1j * xi)
            else:
                out[sl] = g @ self.coef
        return out


def _fourier_eval(holder: list) -> tuple[Callable, Callable]:
    def ev(t1, t2, x):
        return holder[0].complex_eval(t1, t2, x).real

    def gx(t1, t2, x):
        return holder[0].complex_eval(t1, t2, x, grad=True).real

    return ev, gx


def build_field(b: FourierDrift, G: SelfIntersectionFT, gamma: float = 0.75,
                spatial_kappa: float = 1.0, probe: np.ndarray | None = None) -> FourierField:
    """Averaged field ``A^b`` from a drift and a self-intersection transform.

    ``G`` must be taken on a common node set for both time arguments
    starting at 0 (the grid of the driving path).  The imaginary residue of
    the reconstruction is measured on a probe set of ``theta`` values at
    ``(T, T)``; a truncation warning is recorded when the summand at the
    largest frequency exceeds 1% of the accumulated sum.
    """
    sp = G.spectral
    neg = sp.negation_index()
    if np.any(neg < 0):
        raise DomainError("spectral grid lacks -xi for some xi", "selfinteract")
    if not (np.array_equal(G.t1_nodes, G.t2_nodes) and G.t1_nodes[0] == 0.0):
        raise DomainError("field needs matching node sets starting at 0", "selfinteract")
    nodes = np.asarray(G.t1_nodes, dtype=float)
    if len(nodes) > 2 and not np.allclose(np.diff(nodes), nodes[1] - nodes[0]):
        raise DomainError("field nodes must be uniform", "selfinteract")
    bh = b.values(sp)
    coef = (sp.quad_weights[:, None] * bh) / (2 * math.pi) ** sp.dim
    holder: list = []
    ev, gx = _fourier_eval(holder)
    fld = FourierField(ev, gx, gamma, spatial_kappa, b.dim, sp, coef, np.asarray(G.occ_t1), nodes)
    holder.append(fld)

    warnings = []
    T = nodes[-1]
    if probe is None:
        probe = np.linspace(-2.0, 2.0, 41)
    probe = np.asarray(probe, dtype=float).reshape(-1, b.dim)
    vals = fld.complex_eval(np.full(len(probe), T), np.full(len(probe), T), probe)
    real_sup = float(np.max(np.abs(vals.real))) if vals.size else 0.0
    imag_residue = float(np.max(np.abs(vals.imag))) / real_sup if real_sup > 0 else float(np.max(np.abs(vals.imag)))
    if imag_residue > 0.01:
        warnings.append(f"imaginary residue {imag_residue:.3g} exceeds 1% of the real sup")
    summand = np.linalg.norm(coef, axis=1) * np.abs(fld.prefix[-1]) ** 2
    mags = sp.magnitudes
    total = float(np.sum(summand))
    tail = float(np.max(summand[np.isclose(mags, mags.max())])) if total > 0 else 0.0
    ratio = tail / total if total > 0 else 0.0
    if ratio > 0.01:
        warnings.append(f"truncation: summand at |xi|={mags.max():g} is {100 * ratio:.2g}% of the sum")
    return replace(fld, imag_residue=imag_residue, truncation_ratio=ratio, warnings=tuple(warnings))


def field_from_path(b: FourierDrift, z: SamplePath, spectral: SpectralGrid, weights=None,
                    gamma: float = 0.75, spatial_kappa: float = 1.0, path_index: int = 0) -> FourierField:
    """Convenience: self-intersection transform of ``z`` on its grid, then :func:`build_field`."""
    nodes = z.grid.nodes
    G = self_intersection_ft(z, weights, spectral, nodes, nodes, path_index=path_index)
    span = float(np.ptp(z.values[path_index])) + 1.0
    probe = np.linspace(-span, span, 41)[:, None] * np.ones((1, z.dim))
    return build_field(b, G, gamma, spatial_kappa, probe)


@dataclass(frozen=True)
class SolverConfig:
    gamma: float = 0.75
    u0: Any = 0.0
    step_tau: float | str = "auto"
    picard_tol: float = 1e-8
    max_iters: int = 200
    contraction_target: float = 0.5
    failure_factor: float = 0.9

    def __post_init__(self) -> None:
        if not 0.5 < self.gamma < 1.0:
            raise DomainError(f"gamma must lie in (1/2, 1), got {self.gamma}", "selfinteract")
        if self.step_tau != "auto" and not (isinstance(self.step_tau, (int, float)) and self.step_tau > 0):
            raise DomainError("step_tau must be positive or 'auto'", "selfinteract")
        if not self.picard_tol > 0 or self.max_iters < 1:
            raise DomainError("need picard_tol > 0 and max_iters >= 1", "selfinteract")

    def to_record(self) -> dict[str, Any]:
        return {"gamma": self.gamma, "u0": np.atleast_1d(self.u0).tolist(), "step_tau": self.step_tau,
                "picard_tol": self.picard_tol, "max_iters": self.max_iters}


def holder_proxy(values: np.ndarray, times: np.ndarray, gamma: float) -> float:
    """Grid ``C^gamma`` proxy: sup norm plus the Hoelder seminorm."""
    v = np.asarray(values, dtype=float).reshape(len(times), -1)
    if len(times) < 2:
        return float(np.max(np.abs(v))) if v.size else 0.0
    return float(np.max(np.linalg.norm(v, axis=1))) + holder_seminorm(v, times, gamma)


class _Integrator:
    """Grid-level square integrals ``I_n(theta)`` with window bookkeeping."""

    def __init__(self, A: TwoParamField, nodes: np.ndarray, dim: int) -> None:
        self.A, self.nodes, self.dim = A, nodes, dim
        self.fourier = isinstance(A, FourierField)
        if self.fourier:
            self.cells = A.cells
            self.xi = A.spectral.xi_points
            self.coef = A.coef

    def old_state(self, theta: np.ndarray, a: int):
        if not self.fourier:
            return None
        phase = np.exp(1j * (theta[:a] @ self.xi.T))
        return np.sum(self.cells[:a] * phase, axis=0)

    def window(self, theta: np.ndarray, a: int, b: int, S_old) -> np.ndarray:
        """``I_n`` for ``n = a+1..b`` given ``theta`` on ``[0, b-1]``."""
        if self.fourier:
            phase = np.exp(1j * (theta[a:b] @ self.xi.T))
            S = S_old[None, :] + np.cumsum(self.cells[a:b] * phase, axis=0)
            return (np.abs(S) ** 2 @ self.coef).real
        return grid_square_integrals(self.A, self.nodes[: b + 1], theta[: b + 1])[a + 1 : b + 1]

    def full(self, theta: np.ndarray) -> np.ndarray:
        n = len(self.nodes) - 1
        out = np.zeros((n + 1, self.dim))
        out[1:] = self.window(theta, 0, n, self.old_state(theta, 0) if self.fourier else None)
        return out


@dataclass
class SolveResult:
    u: SamplePath
    theta: SamplePath
    diagnostics: dict[str, Any] = field(default_factory=dict)


def _run_window(integ: _Integrator, theta: np.ndarray, a: int, b: int, u0: np.ndarray,
                cfg: SolverConfig, times: np.ndarray):
    S_old = integ.old_state(theta, a)
    trial = theta.copy()
    trial[a + 1 : b + 1] = theta[a]
    diffs: list[float] = []
    for it in range(1, cfg.max_iters + 1):
        new = u0[None, :] + integ.window(trial, a, b, S_old)
        err = new - trial[a + 1 : b + 1]
        trial[a + 1 : b + 1] = new
        diffs.append(holder_proxy(np.vstack([np.zeros((1, err.shape[1])), err]), times[a : b + 1], cfg.gamma))
        if diffs[-1] <= cfg.picard_tol:
            break
    ratios = [diffs[k + 1] / diffs[k] for k in range(len(diffs) - 1) if diffs[k] > cfg.picard_tol]
    factor = max(ratios) if ratios else 0.0
    converged = diffs[-1] <= cfg.picard_tol
    return trial, len(diffs), factor, converged, diffs


def solve_picard(A: TwoParamField, cfg: SolverConfig, z: SamplePath, path_index: int = 0) -> SolveResult:
    """Solve ``theta_t = u0 + int_0^t int_0^t A(dr, theta_r2 - theta_r1)`` and return ``u = theta + z``.

    Time is split into windows of ``m`` grid steps.  On each window the
    Picard map is iterated from the constant extension until the ``C^gamma``
    proxy of successive differences is at most ``picard_tol``.  The
    contraction factor of a window is the largest ratio of successive
    differences.  With ``step_tau = "auto"`` the window starts at the full
    horizon and is halved until the factor is at most ``contraction_target``;
    if a single-step window still has a factor above ``failure_factor`` (or
    does not converge) :class:`NoContractionError` is raised.
    """
    if A.gamma * (1.0 + A.spatial_kappa) <= 1.0:
        raise DomainError("need gamma (1 + kappa) > 1 for the field", "selfinteract")
    grid = z.grid
    nodes = grid.nodes
    if isinstance(A, FourierField) and (len(A.nodes) != len(nodes) or not np.allclose(A.nodes, nodes)):
        raise DomainError("field and driving path live on different grids", "selfinteract")
    d = z.dim
    u0 = np.broadcast_to(np.asarray(cfg.u0, dtype=float), (d,)).copy()
    n = grid.n_steps
    integ = _Integrator(A, nodes, d)
    theta = np.zeros((n + 1, d))
    theta[0] = u0
    auto = cfg.step_tau == "auto"
    m = n if auto else max(1, min(n, int(round(float(cfg.step_tau) / grid.dt))))
    windows, tried = [], []
    a = 0
    while a < n:
        b = min(n, a + m)
        trial, iters, factor, converged, diffs = _run_window(integ, theta, a, b, u0, cfg, nodes)
        tried.append({"start": a, "steps": b - a, "factor": factor, "iterations": iters, "converged": converged})
        ok = converged and (factor <= cfg.contraction_target or not auto)
        if not ok:
            if auto and m > 1:
                m = max(1, m // 2)
                continue
            if not converged or factor > cfg.failure_factor:
                raise NoContractionError(
                    f"no contraction at t={nodes[a]:.4g}: factor {factor:.3g} with window {b - a} step(s)",
                    "selfinteract",
                )
        theta = trial
        windows.append({"start": float(nodes[a]), "end": float(nodes[b]), "iterations": iters,
                        "factor": factor, "last_difference": diffs[-1]})
        a = b

    defect_vec = theta - u0[None, :] - integ.full(theta)
    defect = float(np.max(np.abs(defect_vec)))
    diagnostics = {
        "tau": m * grid.dt,
        "window_steps": m,
        "n_windows": len(windows),
        "iterations": int(sum(w["iterations"] for w in windows)),
        "max_contraction_factor": max(w["factor"] for w in windows),
        "defect": defect,
        "defect_ok": defect <= 2 * cfg.picard_tol,
        "windows": windows,
        "attempts": tried,
        "imag_residue": getattr(A, "imag_residue", 0.0),
        "field_warnings": list(getattr(A, "warnings", ())),
    }
    zv = z.values[path_index]
    meta = {"solver": "picard", "gamma": cfg.gamma}
    return SolveResult(SamplePath(grid, theta + zv, dict(meta, role="u")),
                       SamplePath(grid, theta, dict(meta, role="theta")), diagnostics)


def stability_experiment(b: FourierDrift, levels: Sequence[float], z: SamplePath, cfg: SolverConfig,
                         spectral: SpectralGrid, weights=None, reference: float | None = None,
                         gamma: float = 0.75, spatial_kappa: float = 1.0) -> list[dict[str, Any]]:
    """Solve for mollified drifts ``b_n`` and compare with a reference solution.

    The reference is the unmollified drift when ``reference`` is ``None`` and
    ``b_reference`` otherwise.  Each row holds the FL proxy
    ``||b_n - b_ref||`` (at the drift's indices on the working grid), the
    ``C^gamma`` proxy ``||u_n - u_ref||`` and their ratio.
    """
    nodes = z.grid.nodes
    G = self_intersection_ft(z, weights, spectral, nodes, nodes)
    span = float(np.ptp(z.values[0])) + 1.0
    probe = np.linspace(-span, span, 41)[:, None]

    def solve(drift: FourierDrift) -> SolveResult:
        return solve_picard(build_field(drift, G, gamma, spatial_kappa, probe), cfg, z)

    ref_drift = b if reference is None else b.mollified(reference)
    ref = solve(ref_drift)
    ref_hat = ref_drift.values(spectral)
    rows = []
    for n in levels:
        if reference is not None and n == reference:
            continue
        bn = b.mollified(n)
        res = solve(bn)
        diff_b = fl_norm(np.linalg.norm(bn.values(spectral) - ref_hat, axis=1), spectral, b.fl_delta, b.fl_qprime)
        diff_u = holder_proxy(res.u.values[0] - ref.u.values[0], nodes, cfg.gamma)
        rows.append({
            "level": float(n),
            "b_diff_fl": diff_b,
            "u_diff_holder": diff_u,
            "ratio": diff_u / diff_b if diff_b > 0 else math.inf,
            "iterations": res.diagnostics["iterations"],
            "defect": res.diagnostics["defect"],
        })
    return rows


def u0_sensitivity(A: TwoParamField, cfg: SolverConfig, z: SamplePath,
                   shifts: Sequence[float]) -> list[dict[str, Any]]:
    """Solution change per unit change of ``u0`` with the drift held fixed."""
    base = solve_picard(A, cfg, z)
    rows = []
    for h in shifts:
        res = solve_picard(A, replace(cfg, u0=np.asarray(cfg.u0, dtype=float) + h), z)
        du = holder_proxy(res.u.values[0] - base.u.values[0], z.grid.nodes, cfg.gamma)
        rows.append({"shift": float(h), "u_diff_holder": du, "ratio": du / abs(h)})
    return rows


def gaussian_bump(scale: float = 1.0, amplitude: float = 1.0) -> FourierDrift:
    """Smooth drift ``b = amplitude * N(0, scale^2)`` density, ``b_hat = amplitude exp(-scale^2 xi^2 / 2)``."""

    def b_hat(xi):
        return amplitude * np.exp(-0.5 * scale**2 * np.sum(np.asarray(xi, float) ** 2, axis=-1))

    return FourierDrift(b_hat, fl_delta=0.0, fl_qprime=1.0, description=f"gaussian bump scale={scale:g}")


def example_condition(delta: float, H: float, q: float, d: int = 1) -> bool:
    """``delta + 1/H - d/q > 3``, the sufficient condition for the presets."""
    return delta + 1.0 / H - d / q > 3.0


def threshold_presets(name: str, alpha: float | None = None, d: int = 1,
                      slack: float = 0.05) -> tuple[FourierDrift, float]:
    """Drifts of the worked examples with their admissible Hurst bound.

    * ``skew_delta0`` -- ``b = delta_0`` in ``d = 1``; ``b_hat = 1``, ``(delta, q') = (0, inf)``, ``H < 1/4``.
    * ``edwards_grad_delta0`` -- ``b = grad delta_0``; ``b_hat = i xi``, ``(-1, inf)``, ``H < 1/(d+4)``.
    * ``edwards_fractional`` -- ``b = grad(|x|^-alpha chi)`` with ``alpha`` in ``(0, d-1)``;
      ``b_hat = i xi C <xi>^(alpha-d)``, which matches ``|xi|^(alpha-d)`` beyond the
      crossover ``|xi| = 1``; ``q' = 1`` and ``delta = -alpha - 1 - slack``; ``H < 1/(4+alpha)``.
    * ``durrett_rogers`` -- ``b = sgn(x) exp(-x^2/2)`` in ``d = 1`` (Gaussian cutoff), with
      ``b_hat = -2 sqrt(2) i F(xi / sqrt 2)`` (``F`` Dawson's integral), ``|b_hat| ~ 2/|xi|``;
      ``q' = 2`` and ``delta = 1/2 - slack``; ``H < 1/3``.
    """
    if name == "skew_delta0":
        if d != 1:
            raise DomainError("skew_delta0 is one-dimensional", "selfinteract")
        drift = FourierDrift(lambda xi: np.ones(len(xi), dtype=complex), 0.0, math.inf, "delta_0", 1)
        return drift, 0.25
    if name == "edwards_grad_delta0":
        drift = FourierDrift(lambda xi: 1j * np.asarray(xi, float), -1.0, math.inf, "grad delta_0", d)
        return drift, 1.0 / (d + 4)
    if name == "edwards_fractional":
        if alpha is None or not 0.0 < alpha < d - 1:
            raise DomainError(f"alpha must lie in (0, d-1) = (0, {d - 1}), got {alpha}", "selfinteract")
        C = math.pi ** (alpha - d / 2) * gamma_fn((d - alpha) / 2) / gamma_fn(alpha / 2)

        def b_hat(xi):
            xi = np.asarray(xi, float)
            r2 = np.sum(xi**2, axis=-1, keepdims=True)
            return 1j * xi * C * (1.0 + r2) ** ((alpha - d) / 2)

        drift = FourierDrift(b_hat, -alpha - 1.0 - slack, 1.0, f"grad |x|^-{alpha:g} chi", d)
        return drift, 1.0 / (4.0 + alpha)
    if name == "durrett_rogers":
        if d != 1:
            raise DomainError("durrett_rogers is one-dimensional", "selfinteract")

        def b_hat(xi):
            x = np.asarray(xi, float)[:, 0]
            return -2.0 * math.sqrt(2.0) * 1j * dawsn(x / math.sqrt(2.0))

        drift = FourierDrift(b_hat, 0.5 - slack, 2.0, "sgn(x) exp(-x^2/2)", 1)
        return drift, 1.0 / 3.0
    raise DomainError(f"unknown preset {name!r}", "selfinteract")
