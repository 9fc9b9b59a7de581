"""Config-driven experiments.

Each command maps a resolved configuration to an :class:`ExperimentResult`:
a JSON-ready report, flat summary scalars (used by sweeps), CSV tables and
figure specifications.  :func:`run_experiment` writes everything to disk.
"""

from __future__ import annotations

import copy
import csv
import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .config import ExperimentConfig, config_hash, dumps_config, resolve, set_path
from .errors import ConfigError, DomainError, LabError
from .figures import FigureSpec, Series, render
from .kernels import KernelSpec, certify_kernel
from .occupation import (SpectralGrid, ensemble_rows, local_time_reconstruct, occupation_ft)
from .regularity import best_prediction, char_fn_decay, fit_decay, lp_moment_curve
from .selfinteract import (FourierDrift, SolverConfig, field_from_path, gaussian_bump,
                           solve_picard, stability_experiment, threshold_presets, u0_sensitivity)
from .sewing import additive_germ, frozen_occupation_germ, sewing_rate, smooth_germ
from .simulate import (CoefficientProcess, SamplePath, TimeGrid, WeightProcess, brownian_paths,
                       path_statistics, simulate_fbm, simulate_volterra_ito, simulate_volterra_power)
from .young2d import TwoParamField, germ_error_exponent, nl_young_integral

__all__ = ["ExperimentResult", "RunOutcome", "run_experiment", "execute", "COMMAND_TABLE"]

Table = tuple[list[str], list[list[Any]]]


@dataclass
class ExperimentResult:
    report: dict[str, Any]
    summary: dict[str, Any] = field(default_factory=dict)
    tables: dict[str, Table] = field(default_factory=dict)
    figures: list[FigureSpec] = field(default_factory=list)


@dataclass
class RunOutcome:
    out_dir: Path
    config_hash: str
    files: list[Path]
    result: ExperimentResult


# --- builders ----------------------------------------------------------------

def build_grid(cfg: dict) -> TimeGrid:
    return TimeGrid(cfg["grid"]["horizon_T"], cfg["grid"]["n_steps"])


def _kernel(table: dict, path: str) -> KernelSpec:
    try:
        return KernelSpec.from_config(table)
    except (DomainError, TypeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None


def build_path(cfg: dict, n_paths: int | None = None, threads: int = 1) -> SamplePath:
    """Driving path ensemble described by the ``process`` block."""
    p = cfg["process"]
    grid = build_grid(cfg)
    M = cfg["ensemble"]["n_paths"] if n_paths is None else n_paths
    seed, dim = cfg["seed"], p["dim"]
    kind = p["kind"]
    if kind == "brownian":
        bm = brownian_paths(grid, dim, seed, M, threads=threads)
        vals = p["x0"] + p["drift"] * grid.nodes[None, :, None] + p["diffusion"] * bm.values
        return SamplePath(grid, vals, dict(bm.metadata, drift=p["drift"], diffusion=p["diffusion"]))
    if kind == "fbm":
        path = simulate_fbm(p["H"], grid, dim, seed, n_paths=M, threads=threads)
        path.values = p["x0"] + p["diffusion"] * path.values
        return path
    if kind == "volterra":
        Kb = _kernel(p["kernel_b"], "process.kernel_b")
        Ks = _kernel(p["kernel_sigma"], "process.kernel_sigma")
        return simulate_volterra_ito(p["x0"], Kb, Ks, CoefficientProcess.constant(p["drift"]),
                                     CoefficientProcess.constant(p["diffusion"]), grid, seed,
                                     n_paths=M, dim=dim, bound=p["bound"], threads=threads)
    if kind == "power":
        if dim != 1:
            raise ConfigError("process.dim: the power process is one-dimensional")
        return simulate_volterra_power(p["H"], p["x0"], p["b0"], p["beta"], p["theta"], grid, seed,
                                       n_paths=M, bound=p["bound"], threads=threads)
    t = grid.nodes
    curve = p["x0"] + p["amplitude"] * np.sin(2 * math.pi * p["frequency"] * t) + p["slope"] * t
    vals = np.broadcast_to(curve[None, :, None], (M, len(t), dim)).copy()
    return SamplePath(grid, vals, {"process": "smooth"})


def process_hurst(cfg: dict) -> float:
    p = cfg["process"]
    if p["kind"] == "brownian":
        return 0.5
    if p["kind"] == "volterra":
        ks = p["kernel_sigma"]
        if ks.get("family") in ("rl", "fbm") and "H" in ks:
            return float(ks["H"])
    if p["kind"] == "smooth":
        raise ConfigError("process.kind: a smooth path has no Hurst index")
    return p["H"]


def build_weights(cfg: dict) -> WeightProcess | None:
    w = cfg["weight"]
    if w["kind"] == "one":
        return None
    chi = w["exponent"]
    return WeightProcess("state", lambda x: np.minimum(1.0, np.linalg.norm(x, axis=-1)) ** chi, chi)


def build_spectral(cfg: dict) -> SpectralGrid:
    s = cfg["spectral"]
    try:
        return SpectralGrid.uniform(s["xi_max"], s["spacing"], cfg["process"]["dim"])
    except DomainError as exc:
        raise ConfigError(f"spectral: {exc}") from None


def symmetric_log_grid(xi_min: float, xi_max: float, n: int, dim: int = 1) -> SpectralGrid:
    """``+-`` integer magnitudes, log-spaced in ``[xi_min, xi_max]``, along the first axis."""
    mags = np.unique(np.round(np.geomspace(xi_min, xi_max, n)))
    vals = np.concatenate([-mags[::-1], mags])
    pts = np.zeros((vals.size, dim))
    pts[:, 0] = vals
    return SpectralGrid.from_points(pts)


def build_drift(cfg: dict) -> tuple[FourierDrift, float | None]:
    d = cfg["drift"]
    dim = cfg["process"]["dim"]
    name = d["preset"]
    if name == "gaussian":
        drift, bound = gaussian_bump(d["scale"], d["amplitude"]), None
        if dim != 1:
            raise ConfigError("drift.preset: the gaussian preset is one-dimensional")
    elif name == "zero":
        drift = FourierDrift(lambda xi: np.zeros(len(xi), dtype=complex), 0.0, math.inf, "zero", dim)
        bound = None
    else:
        try:
            drift, bound = threshold_presets(name, alpha=d["alpha"], d=dim)
        except DomainError as exc:
            raise ConfigError(f"drift: {exc}") from None
    if d["mollify"] > 0:
        drift = drift.mollified(d["mollify"])
    return drift, bound


def build_solver(cfg: dict) -> SolverConfig:
    s = cfg["solver"]
    return SolverConfig(gamma=s["gamma"], u0=s["u0"], step_tau=s["step_tau"],
                        picard_tol=s["picard_tol"], max_iters=s["max_iters"])


def _pairs(cfg: dict) -> list[list[float]]:
    return cfg["occupation"]["pairs"] or [[0.0, cfg["grid"]["horizon_T"]]]


# --- commands ----------------------------------------------------------------

def cmd_simulate(cfg: dict, threads: int) -> ExperimentResult:
    path = build_path(cfg, threads=threads)
    stats = path_statistics(path)
    mean, var = np.asarray(stats["mean"]), np.asarray(stats["variance"])
    t = path.times
    stat_rows = [[float(t[i]), *map(float, mean[i]), *map(float, var[i])] for i in range(len(t))]
    d = path.dim
    tables = {"statistics.csv": (["t"] + [f"mean_{k + 1}" for k in range(d)] + [f"var_{k + 1}" for k in range(d)],
                                 stat_rows)}
    n_show = min(cfg["output"]["paths_csv"], path.n_paths)
    if n_show:
        rows = [[j, float(t[i]), *map(float, path.values[j, i])] for j in range(n_show) for i in range(len(t))]
        tables["paths.csv"] = (["path", "t"] + [f"x_{k + 1}" for k in range(d)], rows)
    report = {"n_paths": path.n_paths, "final_mean": mean[-1].tolist(), "final_variance": var[-1].tolist(),
              "metadata": {k: v for k, v in path.metadata.items() if k not in ("Kb", "Ks")}}
    summary = {"final_mean": float(mean[-1, 0]), "final_variance": float(var[-1, 0])}
    c = cfg["certificate"]
    if c["enabled"]:
        spec = _kernel(cfg["process"]["kernel_sigma"], "process.kernel_sigma")
        cgrid = TimeGrid(cfg["grid"]["horizon_T"], c["n_nodes"] - 1)
        cert = certify_kernel(spec, cgrid, c["H_hypothesis"], c["tolerance"])
        report["certificate"] = cert.to_record()
        summary.update(gamma_sigma=cert.gamma_sigma, lnd_constant=cert.lnd_constant, valid=cert.valid)
    figs = [FigureSpec("paths.png", [Series(t, path.values[j, :, 0], f"path {j}") for j in range(min(5, path.n_paths))],
                       "t", "x", f"{cfg['process']['kind']} sample paths")]
    return ExperimentResult(report, summary, tables, figs)


def cmd_occupation(cfg: dict, threads: int) -> ExperimentResult:
    o = cfg["occupation"]
    path = build_path(cfg, threads=threads)
    if o["xi"]:
        pts = np.zeros((len(o["xi"]), path.dim))
        pts[:, 0] = o["xi"]
        spectral = SpectralGrid.from_points(pts)
    else:
        spectral = build_spectral(cfg)
    ft = occupation_ft(path, build_weights(cfg), o["delta"], spectral, _pairs(cfg))
    xi_cols = ["xi"] if spectral.dim == 1 else [f"xi_{k + 1}" for k in range(spectral.dim)]
    tables = {"occupation.csv": (["s", "t", *xi_cols, "re_mean", "im_mean", "abs_Lp", "mc_stderr"],
                                 ensemble_rows(ft, o["p"]))}
    report: dict[str, Any] = {"n_paths": ft.n_paths, "pairs": ft.time_pairs.tolist(), "K": spectral.size,
                              "delta": o["delta"], "p": o["p"]}
    figs = []
    mean = ft.values.mean(axis=0)
    mags = spectral.magnitudes
    pos = mags > 0
    figs.append(FigureSpec("occupation.png",
                           [Series(mags[pos], np.abs(mean[a][pos]), f"pair {a}", ".") for a in range(len(mean))],
                           "|xi|", "|mean transform|", "occupation transform", logx=True, logy=True))
    if o["local_time_points"]:
        lo, hi = o["local_time_window"]
        lt = local_time_reconstruct(ft, 0, (lo, hi, o["local_time_points"]), path_index=None)
        tables["local_time.csv"] = (["x", "density"], [[float(a), float(b)] for a, b in zip(lt.x, lt.density)])
        report["local_time"] = {"imag_residue": lt.imag_residue, "warning": lt.warning}
        figs.append(FigureSpec("local_time.png", [Series(lt.x, lt.density)], "x", "mean local time"))
    return ExperimentResult(report, {"K": spectral.size, "n_paths": ft.n_paths}, tables, figs)


def cmd_regularity(cfg: dict, threads: int) -> ExperimentResult:
    r = cfg["regularity"]
    H = process_hurst(cfg)
    path = build_path(cfg, threads=threads)
    spectral = symmetric_log_grid(r["xi_min"], r["xi_max"], r["n_xi"], path.dim)
    ft = occupation_ft(path, build_weights(cfg), r["delta"], spectral, [[0.0, cfg["grid"]["horizon_T"]]])
    curve = lp_moment_curve(ft, r["p"])
    fit = fit_decay(curve, r["xi_min"], r["xi_max"])
    pred = best_prediction(H, r["zeta"], r["delta"], r["chi"])
    passed = bool(fit.exponent >= pred.kappa_star - r["tolerance"])
    mags = curve.magnitudes
    rows = [[float(x), float(v), float(e)] for x, v, e in zip(spectral.xi_points[:, 0], curve.values[0], curve.stderr[0])]
    report = {"H": H, "fit": fit.to_record(), "prediction": pred.to_record(), "tolerance": r["tolerance"],
              "pass": passed, "n_paths": curve.n_paths}
    summary = {"H": H, "kappa_hat": fit.exponent, "kappa_star": pred.kappa_star, "r_squared": fit.r_squared,
               "mc_stderr_mean": float(np.mean(curve.stderr[0])), "pass": passed}
    pos = mags > 0
    xs = np.unique(mags[pos])
    figs = [FigureSpec("moments.png",
                       [Series(mags[pos], curve.values[0][pos], "moment", ".", curve.stderr[0][pos]),
                        Series(xs, np.exp(fit.intercept) * (1 + xs) ** -fit.exponent, f"fit {fit.exponent:.3f}", "--")],
                       "|xi|", f"L^{r['p']:g} moment", f"H={H:g}, kappa*={pred.kappa_star:.3f}", logx=True, logy=True)]
    return ExperimentResult(report, summary, {"moments.csv": (["xi", "moment", "stderr"], rows)}, figs)


def cmd_density(cfg: dict, threads: int) -> ExperimentResult:
    dcfg = cfg["density"]
    path = build_path(cfg, threads=threads)
    t = dcfg["t"] or cfg["grid"]["horizon_T"]
    i = path.grid.index_of(t, "cli")
    states = path.values[:, i]
    spectral = symmetric_log_grid(dcfg["xi_min"], dcfg["xi_max"], dcfg["n_xi"], path.dim)
    w = build_weights(cfg)
    weights = None if w is None else w.evaluate(path)[:, i]
    res = char_fn_decay(states, spectral, weights, dcfg["delta"], dcfg["xi_min"], dcfg["xi_max"])
    rows = [[float(x), float(c), float(e)] for x, c, e in zip(spectral.xi_points[:, 0], res.curve, res.stderr)]
    report = {"t": t, "fit": res.fit.to_record(), "n_paths": path.n_paths}
    mags = spectral.magnitudes
    figs = [FigureSpec("charfn.png", [Series(mags, res.curve, "|E exp(i xi X_t)|", ".", res.stderr)],
                       "|xi|", "characteristic function", logx=True, logy=True)]
    return ExperimentResult(report, {"exponent": res.fit.exponent, "r_squared": res.fit.r_squared},
                            {"charfn.csv": (["xi", "abs_charfn", "stderr"], rows)}, figs)


def cmd_sewing(cfg: dict, threads: int) -> ExperimentResult:
    s = cfg["sewing"]
    T = cfg["grid"]["horizon_T"]
    a, b = s["s"], s["t"] or T
    path_axis = None
    if s["germ"] == "smooth":
        # f(r) = r: the left Riemann error is exactly (f(t) - f(s)) h / 2
        germ = smooth_germ(lambda u: u)
    elif s["germ"] == "additive":
        germ = additive_germ(np.sin)
    else:
        path = build_path(cfg, threads=threads)
        germ = frozen_occupation_germ(path, s["xi"], cfg["process"]["drift"], cfg["process"]["diffusion"],
                                      build_weights(cfg), cfg["occupation"]["delta"], s["eta"])
        path_axis = 0
    res = sewing_rate(germ, a, b, s["levels"], path_axis=path_axis)
    rows = [[L, d] for L, d in zip(res.levels, res.differences)]
    report = {"germ": s["germ"], "interval": [a, b], **res.to_record(), "expected_rate": germ.expected_rate}
    figs = []
    if not res.exact:
        figs.append(FigureSpec("sewing.png", [Series(res.levels, res.differences, "", "o-")], "level",
                               "||S_{L+1} - S_L||", f"rate {res.rate:.3f}", logy=True))
    summary = {"rate": "exact" if res.exact else res.rate}
    return ExperimentResult(report, summary, {"sewing.csv": (["level", "difference"], rows)}, figs)


def cmd_young2d(cfg: dict, threads: int) -> ExperimentResult:
    y = cfg["young2d"]
    T = cfg["grid"]["horizon_T"]
    A = TwoParamField.separable(lambda t1, t2: t1 * t2, np.cos, 1.0, 1.0, grad=lambda x: -np.sin(x))
    if y["theta"] == "smooth":
        def theta(t):
            return np.sin(3 * t) + t**2
    else:
        theta = build_path(cfg, n_paths=1, threads=threads)
    ge = germ_error_exponent(A, theta, tuple(y["corner"]), y["h0"], y["n_sizes"], y["oracle_level"])
    integral = nl_young_integral(A, theta, ((0.0, T), (0.0, T)), y["level"])
    rows = [[h, d] for h, d in zip(ge.sizes, ge.defects)]
    report = {"germ_exponent": ge.to_record(), "integral": np.asarray(integral.value).tolist(),
              "integral_error": integral.error, "converged": integral.converged, "field": "t1 t2 cos(x)"}
    figs = []
    if not ge.exact:
        figs.append(FigureSpec("germ_defects.png", [Series(ge.sizes, ge.defects, "", "o-")], "box side",
                               "germ defect", f"exponent {ge.exponent:.3f}", logx=True, logy=True))
    summary = {"exponent": "exact" if ge.exact else ge.exponent, "integral": float(np.ravel(integral.value)[0])}
    return ExperimentResult(report, summary, {"germ_defects.csv": (["size", "defect"], rows)}, figs)


def cmd_selfinteract(cfg: dict, threads: int) -> ExperimentResult:
    z = build_path(cfg, n_paths=1, threads=threads)
    drift, bound = build_drift(cfg)
    spectral = build_spectral(cfg)
    solver = build_solver(cfg)
    A = field_from_path(drift, z, spectral, build_weights(cfg), gamma=solver.gamma)
    res = solve_picard(A, solver, z)
    d = res.diagnostics
    t = z.times
    u, th = res.u.values[0], res.theta.values[0]
    sol = [[float(t[i]), *map(float, u[i]), *map(float, th[i])] for i in range(len(t))]
    dim = z.dim
    header = ["t"] + [f"u_{k + 1}" for k in range(dim)] + [f"theta_{k + 1}" for k in range(dim)]
    win_rows = [[w["start"], w["end"], w["iterations"], w["factor"], w["last_difference"]] for w in d["windows"]]
    H = None if cfg["process"]["kind"] == "smooth" else process_hurst(cfg)
    report = {"drift": drift.to_record(), "H_bound": bound, "H": H,
              "within_threshold": None if bound is None or H is None else bool(H < bound),
              "solver": solver.to_record(), "diagnostics": {k: v for k, v in d.items() if k != "attempts"},
              "truncation_ratio": A.truncation_ratio}
    summary = {"max_contraction_factor": d["max_contraction_factor"], "defect": d["defect"],
               "defect_ok": d["defect_ok"], "iterations": d["iterations"], "tau": d["tau"],
               "theta_range": float(np.ptp(th))}
    figs = [FigureSpec("solution.png", [Series(t, u[:, 0], "u"), Series(t, th[:, 0], "theta")], "t", "",
                       f"{drift.description}: factor {d['max_contraction_factor']:.3f}")]
    tables = {"solution.csv": (header, sol),
              "windows.csv": (["start", "end", "iterations", "factor", "last_difference"], win_rows)}
    return ExperimentResult(report, summary, tables, figs)


def cmd_stability(cfg: dict, threads: int) -> ExperimentResult:
    st = cfg["stability"]
    z = build_path(cfg, n_paths=1, threads=threads)
    drift, _ = build_drift(cfg)
    spectral = build_spectral(cfg)
    solver = build_solver(cfg)
    weights = build_weights(cfg)
    ref = st["reference"] or None
    rows = stability_experiment(drift, st["levels"], z, solver, spectral, weights, reference=ref,
                                gamma=solver.gamma)
    ratios = np.array([r["ratio"] for r in rows])
    spread = float(ratios.max() / ratios.min()) if len(ratios) and ratios.min() > 0 else math.inf
    tables = {"stability.csv": (["level", "b_diff_fl", "u_diff_holder", "ratio"],
                                [[r["level"], r["b_diff_fl"], r["u_diff_holder"], r["ratio"]] for r in rows])}
    report: dict[str, Any] = {"reference": ref if ref is not None else "unmollified", "rows": rows,
                              "ratio_spread": spread, "drift": drift.to_record()}
    if st["u0_shifts"]:
        A = field_from_path(drift, z, spectral, weights, gamma=solver.gamma)
        sens = u0_sensitivity(A, solver, z, st["u0_shifts"])
        tables["u0_sensitivity.csv"] = (["shift", "u_diff_holder", "ratio"],
                                        [[r["shift"], r["u_diff_holder"], r["ratio"]] for r in sens])
        report["u0_sensitivity"] = sens
    figs = [FigureSpec("stability.png", [Series([r["level"] for r in rows], ratios, "", "o-")],
                       "mollification level n", "||u_n - u_ref|| / ||b_n - b_ref||", logx=True)]
    return ExperimentResult(report, {"ratio_spread": spread}, tables, figs)


COMMAND_TABLE: dict[str, Callable[[dict, int], ExperimentResult]] = {
    "simulate": cmd_simulate,
    "occupation": cmd_occupation,
    "regularity": cmd_regularity,
    "density": cmd_density,
    "sewing": cmd_sewing,
    "young2d": cmd_young2d,
    "selfinteract": cmd_selfinteract,
    "stability": cmd_stability,
}


# --- output ------------------------------------------------------------------

def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def _cell(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_table(target: Path, header: list[str], rows: list[list[Any]], chash: str) -> None:
    with open(target, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["config_hash", *header])
        for row in rows:
            w.writerow([chash, *map(_cell, row)])


def _write_outputs(cfg: dict, result: ExperimentResult, out_dir: Path, status: str,
                   started: float) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    chash = config_hash(cfg)
    files = []
    for name, (header, rows) in result.tables.items():
        target = out_dir / name
        write_table(target, header, rows, chash)
        files.append(target)
    if cfg["output"]["figures"]:
        for spec in result.figures:
            files.append(render(spec, out_dir))
    (out_dir / "config.toml").write_text(dumps_config(cfg))
    envelope = {
        "name": cfg["name"],
        "command": cfg["command"],
        "config_hash": chash,
        "status": status,
        "version": __version__,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
        "elapsed_seconds": round(time.time() - started, 3),
        "config": cfg,
        "summary": result.summary,
        "report": result.report,
        "files": [f.name for f in files],
    }
    (out_dir / "report.json").write_text(json.dumps(_jsonable(envelope), indent=2, sort_keys=False) + "\n")
    files += [out_dir / "config.toml", out_dir / "report.json"]
    return files


def execute(cfg: dict, threads: int = 1) -> ExperimentResult:
    """Run a single (non-sweep) command and return its result without writing files."""
    return COMMAND_TABLE[cfg["command"]](cfg, threads)


def _sweep_points(cfg: dict) -> list[dict[str, Any]]:
    params = cfg["sweep"]["params"]
    keys = list(params)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(params[k] for k in keys))]


def _run_sweep(cfg: dict, out_dir: Path, threads: int, log: Callable[[str], None]) -> ExperimentResult:
    points = _sweep_points(cfg)
    base = copy.deepcopy(cfg)
    base["command"] = cfg["sweep"]["command"]
    base["sweep"]["params"] = {}
    base["output"]["figures"] = False

    def one(index: int) -> dict[str, Any]:
        raw = copy.deepcopy(base)
        for key, value in points[index].items():
            set_path(raw, key, value)
        raw["seed"] = cfg["seed"] + index
        raw["name"] = f"{cfg['name']}_{index:03d}"
        row: dict[str, Any] = {"index": index, **points[index], "seed": raw["seed"]}
        try:
            sub = resolve(raw)
            outcome = run_experiment(ExperimentConfig(sub), out_dir / f"point_{index:03d}", threads)
            row.update(status="ok", **outcome.result.summary)
        except LabError as exc:
            row["status"] = f"failed: {exc}"
        log(f"sweep point {index}: {row['status']}")
        return row

    workers = cfg["sweep"]["workers"]
    if workers > 1 and len(points) > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(one, range(len(points))))
    else:
        rows = [one(i) for i in range(len(points))]
    keys = ["index", *cfg["sweep"]["params"], "seed", "status"]
    extra = sorted({k for r in rows for k in r} - set(keys))
    header = keys + extra
    table = [[r.get(k, "") for k in header] for r in rows]
    failed = sum(1 for r in rows if r["status"] != "ok")
    report = {"base_command": base["command"], "points": len(rows), "failed": failed, "rows": rows}
    figs = []
    params = list(cfg["sweep"]["params"])
    if len(params) == 1:
        for metric in extra:
            xs = [r[params[0]] for r in rows if r["status"] == "ok"]
            ys = [r.get(metric) for r in rows if r["status"] == "ok"]
            if xs and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in xs + ys):
                figs.append(FigureSpec(f"sweep_{metric}.png", [Series(xs, ys, "", "o-")], params[0], metric))
    return ExperimentResult(report, {"points": len(rows), "failed": failed}, {"sweep.csv": (header, table)}, figs)


def run_experiment(config: ExperimentConfig, out_dir: str | Path, threads: int | None = None,
                   log: Callable[[str], None] | None = None) -> RunOutcome:
    """Execute a configuration and write the report, tables, figures and resolved config."""
    cfg = config.data
    log = log or (lambda msg: None)
    threads = cfg["threads"] if threads is None else threads
    out = Path(out_dir)
    started = time.time()
    log(f"running {cfg['command']} ({cfg['name']}, hash {config_hash(cfg)})")
    if cfg["command"] == "sweep":
        if not cfg["sweep"]["params"]:
            base = copy.deepcopy(cfg)
            base["command"] = cfg["sweep"]["command"]
            return run_experiment(ExperimentConfig(resolve(base)), out, threads, log)
        result = _run_sweep(cfg, out, threads, log)
    else:
        result = execute(cfg, threads)
    files = _write_outputs(cfg, result, out, "ok", started)
    return RunOutcome(out, config_hash(cfg), files, result)
