"""Acceptance criteria 1-10 at their stated sizes and tolerances.

Every criterion writes its CSV tables into a run directory.  The whole suite
is executed twice with the same seeds; criterion 10 compares the two runs
byte for byte.  One PASS/FAIL line per criterion is printed (and repeated in
the pytest terminal summary).

Run directly with ``python tests/test_acceptance.py``.
"""

from __future__ import annotations

import csv
import math
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from volterra_lab.config import ExperimentConfig
from volterra_lab.experiments import build_path, run_experiment
from volterra_lab.kernels import KernelSpec, certify_kernel
from volterra_lab.occupation import SpectralGrid, occupation_ft, self_intersection_ft
from volterra_lab.selfinteract import SolverConfig, field_from_path, gaussian_bump, solve_picard
from volterra_lab.simulate import SamplePath, TimeGrid, brownian_paths
from volterra_lab.stats import jackknife

pytestmark = pytest.mark.acceptance

LINES: list[str] = []


@dataclass
class Outcome:
    passed: bool
    detail: str


def _write(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def _run(cfg: dict, out: Path):
    cfg = dict(cfg, output={"figures": False})
    return run_experiment(ExperimentConfig.from_dict(cfg), out)


# --- criteria ------------------------------------------------------------------

def criterion_1(out: Path) -> Outcome:
    """Brownian occupation mean against (2/xi^2)(1 - exp(-xi^2/2))."""
    t0 = time.perf_counter()
    cfg = ExperimentConfig.from_dict({"command": "occupation", "seed": 1, "grid": {"n_steps": 4096},
                                      "ensemble": {"n_paths": 10_000}}).data
    path = build_path(cfg)
    xi = np.array([1.0, 2.0, 4.0, 8.0, 16.0, 32.0])
    ft = occupation_ft(path, None, 0.0, SpectralGrid.from_points(xi[:, None]), [(0.0, 1.0)])
    vals = ft.values[:, 0, :]
    mean_re, se_re = jackknife(vals.real, lambda m: m)
    mean_im, se_im = jackknife(vals.imag, lambda m: m)
    oracle = 2.0 / xi**2 * (1.0 - np.exp(-(xi**2) / 2))
    z_re = np.abs(mean_re - oracle) / se_re
    z_im = np.abs(mean_im) / se_im
    elapsed = time.perf_counter() - t0
    _write(out / "c1_occupation_mean.csv", ["xi", "re_mean", "re_stderr", "im_mean", "im_stderr", "oracle", "z_re"],
           zip(xi, mean_re, se_re, mean_im, se_im, oracle, z_re))
    ok = bool(np.all(z_re <= 3) and np.all(z_im <= 3) and elapsed <= 120)
    return Outcome(ok, f"max z re={z_re.max():.2f} im={z_im.max():.2f} (limit 3), {elapsed:.0f}s (limit 120s)")


def criterion_2(out: Path) -> Outcome:
    """fBm decay exponents against max_eta eta/H - 0.2."""
    parts, ok = [], True
    for H, T in ((0.25, 0.01), (0.5, 1.0)):
        t0 = time.perf_counter()
        res = _run({"command": "regularity", "name": f"c2_H{H}", "seed": 2,
                    "grid": {"horizon_T": T, "n_steps": 4096}, "ensemble": {"n_paths": 10_000},
                    "process": {"kind": "fbm", "H": H},
                    "regularity": {"xi_min": 8.0, "xi_max": 64.0, "n_xi": 12, "p": 2.0, "tolerance": 0.2}},
                   out / f"c2_H{H}").result.summary
        elapsed = time.perf_counter() - t0
        ok &= bool(res["kappa_hat"] >= res["kappa_star"] - 0.2 and elapsed <= 300)
        parts.append(f"H={H}: kappa_hat={res['kappa_hat']:.3f} vs {res['kappa_star'] - 0.2:.3f}, {elapsed:.0f}s")
    return Outcome(ok, "; ".join(parts))


def criterion_3(out: Path) -> Outcome:
    """Product formula for the self-intersection transform against the double Riemann sum."""
    grid = TimeGrid(1.0, 32)
    sp = SpectralGrid.uniform(16.0, 1.0)
    xi = sp.xi_points[:, 0]
    worst, rows = 0.0, []
    for seed in range(5):
        path = brownian_paths(grid, 1, seed=100 + seed)
        G = self_intersection_ft(path, None, sp, grid.nodes, grid.nodes)
        x = path.values[0, :, 0]
        dt = grid.dt
        # brute force: sum_{i < a} sum_{j < b} dt^2 exp(i xi (x_j - x_i))
        brute = np.zeros((33, 33, sp.size), dtype=complex)
        for a in range(33):
            for b in range(33):
                if a and b:
                    diff = x[None, :b] - x[:a, None]
                    brute[a, b] = dt * dt * np.exp(1j * diff[..., None] * xi).sum(axis=(0, 1))
        err = float(np.max(np.abs(G.values - brute)))
        worst = max(worst, err)
        rows.append([seed, err])
    _write(out / "c3_product_identity.csv", ["seed", "max_abs_error"], rows)
    return Outcome(worst <= 1e-10, f"max abs error {worst:.2e} (limit 1e-10) over 5 seeds")


def criterion_4(out: Path) -> Outcome:
    """RL(0.3) and q-log certificates."""
    rl = certify_kernel(KernelSpec.riemann_liouville(0.3), TimeGrid(1.0, 8), 0.3)
    oracle = 1.0 / (0.6 * math.gamma(0.8) ** 2)
    rel = abs(rl.lnd_constant - oracle) / oracle
    ql = certify_kernel(KernelSpec.qlog(1.0), TimeGrid(0.5, 8), 0.5)
    rows = [["rl_0.3", *rl.to_record().values()], ["qlog_1", *ql.to_record().values()]]
    _write(out / "c4_certificates.csv", ["kernel", *rl.to_record().keys()], rows)
    ok = bool(rl.valid and rel <= 0.02 and abs(rl.gamma_sigma - 0.3) <= 0.05 and ql.valid)
    return Outcome(ok, f"RL constant rel err {rel:.1e} (limit 2%), gamma_sigma={rl.gamma_sigma:.4f}, "
                       f"RL valid={rl.valid}, q-log valid={ql.valid}")


def criterion_5(out: Path) -> Outcome:
    """Dyadic Cauchy rates of the smooth and the frozen occupation germ."""
    smooth = _run({"command": "sewing", "name": "c5_smooth", "sewing": {"germ": "smooth"}},
                  out / "c5_smooth").result.summary["rate"]
    occ = _run({"command": "sewing", "name": "c5_occupation", "seed": 5, "grid": {"n_steps": 4096},
                "ensemble": {"n_paths": 1000}, "sewing": {"germ": "occupation", "xi": 8.0}},
               out / "c5_occupation").result.summary["rate"]
    return Outcome(bool(smooth >= 1.0 and occ >= 0.4),
                   f"smooth rate {smooth:.3f} (>= 1), occupation rate {occ:.3f} (>= 0.4)")


def criterion_6(out: Path) -> Outcome:
    """Germ defect exponent for smooth A and theta."""
    e = _run({"command": "young2d", "name": "c6", "young2d": {"theta": "smooth", "oracle_level": 12}},
             out / "c6").result.summary["exponent"]
    ok = e == "exact" or e >= 2.8
    return Outcome(bool(ok), f"exponent {e if isinstance(e, str) else f'{e:.3f}'} (>= 2.8)")


def _classical_oracle(zfun, bfun, u0: float, nf: int) -> np.ndarray:
    """Picard on the trapezoid double quadrature over [0, t]^2, pointwise b."""
    t = np.linspace(0.0, 1.0, nf + 1)
    z = zfun(t)
    dt = 1.0 / nf
    u = np.ones(nf + 1)
    u[0] = 0.5
    th = np.full(nf + 1, u0)
    idx = np.arange(nf + 1)
    for _ in range(200):
        x = th + z
        B = bfun(x[:, None] - x[None, :])
        full = (u[:, None] * u[None, :] * B).cumsum(0).cumsum(1)[idx, idx]
        row = np.cumsum(u[None, :] * B, axis=1)[idx, idx]
        col = np.cumsum(u[:, None] * B, axis=0)[idx, idx]
        q = full - 0.5 * row - 0.5 * col + 0.25 * np.diag(B)
        q[0] = 0.0
        new = u0 + dt * dt * q
        done = np.max(np.abs(new - th)) < 1e-14
        th = new
        if done:
            break
    return th


def criterion_7(out: Path) -> Outcome:
    """Picard solver against the classical double-quadrature fixed point."""
    def zfun(t):
        return 0.8 * np.sin(2 * np.pi * t) + 0.3 * t

    def bfun(x):
        return np.exp(-x**2 / 2) / math.sqrt(2 * math.pi)

    u0, nf = 0.2, 4096
    ref = _classical_oracle(zfun, bfun, u0, nf)
    sp = SpectralGrid.uniform(10.0, 0.1)
    errs, rows = {}, []
    for n in (1024, 2048):
        grid = TimeGrid(1.0, n)
        z = SamplePath(grid, zfun(grid.nodes))
        res = solve_picard(field_from_path(gaussian_bump(), z, sp), SolverConfig(u0=u0, picard_tol=1e-10), z)
        th = res.theta.values[0, :, 0]
        r = ref[:: nf // n]
        errs[n] = float(np.max(np.abs(th - r)))
        rows += [[n, float(t), float(a), float(b)] for t, a, b in zip(grid.nodes, th, r)]
    _write(out / "c7_picard_vs_oracle.csv", ["n_steps", "t", "theta", "oracle"], rows)
    ratio = errs[1024] / errs[2048]
    return Outcome(bool(errs[1024] <= 1e-3 and ratio >= 1.5),
                   f"sup diff {errs[1024]:.2e} at 1024 (<= 1e-3), ratio {ratio:.2f} at 2048 (>= 1.5)")


_SKEW = {"seed": 7, "grid": {"horizon_T": 1.0, "n_steps": 512}, "process": {"kind": "fbm", "H": 0.2},
         "spectral": {"xi_max": 256.0, "spacing": 0.25}, "drift": {"preset": "skew_delta0"},
         "solver": {"picard_tol": 1e-8, "step_tau": "auto"}}


def criterion_8(out: Path) -> Outcome:
    """Threshold solve with b = delta_0 and an fBm path, H = 0.2."""
    t0 = time.perf_counter()
    res = _run(dict(_SKEW, command="selfinteract", name="c8"), out / "c8").result
    elapsed = time.perf_counter() - t0
    s = res.summary
    ok = bool(s["max_contraction_factor"] <= 0.5 and s["defect"] <= 2e-8 and elapsed <= 300
              and s["theta_range"] > 0)
    return Outcome(ok, f"contraction {s['max_contraction_factor']:.3f} (<= 0.5), defect {s['defect']:.1e} "
                       f"(<= 2e-8), theta range {s['theta_range']:.3f}, {elapsed:.0f}s (limit 300s)")


def criterion_9(out: Path) -> Outcome:
    """Stability ratios of heat-kernel mollified delta_0 against the n = 32 reference."""
    res = _run(dict(_SKEW, command="stability", name="c9",
                    stability={"levels": [4.0, 8.0, 16.0, 32.0], "reference": 32.0}), out / "c9").result
    spread = res.summary["ratio_spread"]
    ratios = ", ".join(f"{r['ratio']:.3f}" for r in res.report["rows"])
    return Outcome(bool(spread <= 10), f"ratios [{ratios}], spread {spread:.2f} (<= 10)")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
            criterion_6, criterion_7, criterion_8, criterion_9]


def run_all(root: Path) -> dict[int, Outcome]:
    root.mkdir(parents=True, exist_ok=True)
    results = {}
    for k, fn in enumerate(CRITERIA, start=1):
        d = root / f"criterion_{k}"
        d.mkdir(exist_ok=True)
        try:
            results[k] = fn(d)
        except Exception as exc:  # a crash is a failure of that criterion only
            results[k] = Outcome(False, f"raised {type(exc).__name__}: {exc}")
    return results


def compare_csvs(a: Path, b: Path) -> Outcome:
    fa = sorted(p.relative_to(a) for p in a.rglob("*.csv"))
    fb = sorted(p.relative_to(b) for p in b.rglob("*.csv"))
    if fa != fb:
        return Outcome(False, "the two runs produced different CSV file sets")
    diff = [str(p) for p in fa if (a / p).read_bytes() != (b / p).read_bytes()]
    if diff:
        return Outcome(False, f"{len(diff)} of {len(fa)} CSVs differ: {', '.join(diff[:3])}")
    return Outcome(bool(fa), f"{len(fa)} CSV files byte-identical across two runs")


def report_line(k: int, outcome: Outcome) -> str:
    line = f"criterion {k:2d}: {'PASS' if outcome.passed else 'FAIL'}  {outcome.detail}"
    LINES.append(line)
    print(line)
    return line


# --- pytest ----------------------------------------------------------------------

@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("acceptance")
    first = run_all(base / "run_a")
    second = run_all(base / "run_b")
    return first, second, base / "run_a", base / "run_b"


@pytest.mark.parametrize("k", range(1, 10))
def test_criterion(runs, k):
    outcome = runs[0][k]
    report_line(k, outcome)
    assert outcome.passed, outcome.detail


def test_criterion_10_determinism(runs):
    first, second, a, b = runs
    outcome = compare_csvs(a, b)
    report_line(10, outcome)
    assert outcome.passed, outcome.detail


if __name__ == "__main__":
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        first = run_all(Path(tmp) / "run_a")
        for k in sorted(first):
            report_line(k, first[k])
        run_all(Path(tmp) / "run_b")
        report_line(10, compare_csvs(Path(tmp) / "run_a", Path(tmp) / "run_b"))
    sys.exit(0 if all(line.split()[2] == "PASS" for line in LINES) else 1)
