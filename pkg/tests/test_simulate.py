from __future__ import annotations

import math

import numpy as np
import pytest

from volterra_lab.errors import AlignmentError, DomainError, PathOverflowError
from volterra_lab.kernels import KernelSpec
from volterra_lab.simulate import (CoefficientProcess, SamplePath, TimeGrid, WeightProcess, brownian_paths,
                                   path_statistics, sample_brownian, simulate_fbm, simulate_volterra_ito,
                                   simulate_volterra_power, write_path_csv)


def test_grid_basics():
    g = TimeGrid(2.0, 8)
    assert g.dt == 0.25
    assert g.index_of(0.75) == 3
    with pytest.raises(AlignmentError):
        g.index_of(0.1)
    assert g.refine(2).n_steps == 16


def test_brownian_reproducible_and_keyed_by_path():
    g = TimeGrid(1.0, 64)
    a = sample_brownian(g, 1, seed=3, path_index=5)
    b = sample_brownian(g, 1, seed=3, path_index=5)
    c = sample_brownian(g, 1, seed=3, path_index=6)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)
    batch = brownian_paths(g, 1, seed=3, n_paths=10)
    np.testing.assert_allclose(np.diff(batch.values[5, :, 0]), a[:, 0], atol=1e-15)


def test_threads_do_not_change_output():
    g = TimeGrid(1.0, 32)
    one = brownian_paths(g, 2, seed=1, n_paths=40, threads=1)
    four = brownian_paths(g, 2, seed=1, n_paths=40, threads=4)
    np.testing.assert_array_equal(one.values, four.values)


def test_linear_volterra_constant_kernels_is_brownian_with_drift():
    g = TimeGrid(1.0, 16)
    K = KernelSpec.constant(1.0)
    X = simulate_volterra_ito(1.0, K, K, CoefficientProcess.constant(0.5), CoefficientProcess.constant(2.0),
                              g, seed=9, n_paths=3)
    bm = brownian_paths(g, 1, seed=9, n_paths=3)
    np.testing.assert_allclose(X.values, 1.0 + 0.5 * g.nodes[None, :, None] + 2.0 * bm.values, atol=1e-12)


def test_rl_variance():
    # Var X_1 = int_0^1 K(1, r)^2 dr = 1 / (2H Gamma(H + 1/2)^2)
    H = 0.3
    g = TimeGrid(1.0, 256)
    K = KernelSpec.riemann_liouville(H)
    X = simulate_volterra_ito(0.0, K, K, CoefficientProcess.constant(0.0), CoefficientProcess.constant(1.0),
                              g, seed=2, n_paths=4000)
    var = X.values[:, -1, 0].var()
    exact = 1 / (2 * H * math.gamma(H + 0.5) ** 2)
    assert abs(var - exact) < 4 * exact * math.sqrt(2 / 4000)


def test_state_dependent_matches_dense_for_constant_function():
    g = TimeGrid(1.0, 32)
    K = KernelSpec.riemann_liouville(0.4)
    dense = simulate_volterra_ito(0.0, K, K, CoefficientProcess.constant(0.3), CoefficientProcess.constant(0.7),
                                  g, seed=4, n_paths=5)
    loop = simulate_volterra_ito(0.0, K, K, CoefficientProcess.state(lambda x: np.full(x.shape, 0.3)),
                                 CoefficientProcess.state(lambda x: np.full(x.shape + (1,), 0.7)),
                                 g, seed=4, n_paths=5)
    np.testing.assert_allclose(dense.values, loop.values, atol=1e-12)


def test_overflow_detected():
    g = TimeGrid(1.0, 64)
    K = KernelSpec.constant(1.0)
    with pytest.raises(PathOverflowError):
        simulate_volterra_ito(1.0, K, K, CoefficientProcess.state(lambda x: 50.0 * x ** 3),
                              CoefficientProcess.constant(0.0), g, seed=0, bound=1e6)


def test_fbm_increment_variance():
    H = 0.3
    g = TimeGrid(1.0, 64)
    z = simulate_fbm(H, g, 1, seed=5, n_paths=3000)
    inc = z.values[:, 33, 0] - z.values[:, 17, 0]
    exact = (16 / 64) ** (2 * H)
    assert abs(inc.var() - exact) < 4 * exact * math.sqrt(2 / 3000)
    with pytest.raises(DomainError):
        simulate_fbm(1.2, g, 1, seed=0)


def test_power_process_mean():
    # E X_t solves the linear Volterra equation; here compare with a plain Euler mean check at small t
    g = TimeGrid(0.5, 64)
    X = simulate_volterra_power(0.5, 1.0, 1.0, -0.5, 0.5, g, seed=1, n_paths=2000)
    # H = 1/2: ordinary ODE for the mean, m' = 1 - m/2, m(0) = 1
    exact = 2 - math.exp(-0.25)
    assert abs(X.values[:, -1, 0].mean() - exact) < 0.05
    with pytest.raises(DomainError):
        simulate_volterra_power(0.5, -1.0, 1.0, 0.0, 0.5, g, seed=1)


def test_weights_clamped():
    g = TimeGrid(1.0, 4)
    p = SamplePath(g, np.linspace(-2, 2, 5))
    w = WeightProcess("state", lambda x: x[..., 0]).evaluate(p)
    assert w.min() == 0.0 and w.max() == 1.0


def test_statistics_and_csv(tmp_path):
    g = TimeGrid(1.0, 4)
    p = brownian_paths(g, 1, seed=0, n_paths=3)
    stats = path_statistics(p)
    assert len(stats["mean"]) == 5
    write_path_csv(p, tmp_path / "p.csv")
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "t,x_1" and len(lines) == 6


def test_sample_path_shape_checks():
    with pytest.raises(DomainError):
        SamplePath(TimeGrid(1.0, 4), np.zeros(3))
    with pytest.raises(DomainError):
        SamplePath(TimeGrid(1.0, 2), np.array([0.0, np.nan, 1.0]))
