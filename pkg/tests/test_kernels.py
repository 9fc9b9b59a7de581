from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from volterra_lab.errors import DomainError
from volterra_lab.kernels import (KernelSpec, certify_kernel, diagonal_integral, eval_kernel, gamma_fn,
                                  modulus_omega)
from volterra_lab.simulate import TimeGrid


@pytest.mark.parametrize("x", [0.3, 0.8, 1.0, 1.5, 2.5, 7.2])
def test_gamma_matches_math(x):
    assert gamma_fn(x) == pytest.approx(math.gamma(x), rel=1e-13)


def test_rl_values_and_non_anticipation():
    K = KernelSpec.riemann_liouville(0.3)
    assert eval_kernel(K, 1.0, 0.5) == pytest.approx(0.5 ** -0.2 / math.gamma(0.8))
    assert eval_kernel(K, 0.5, 0.5) == 0.0
    assert eval_kernel(K, 0.5, 0.7) == 0.0


@settings(max_examples=60, deadline=None)
@given(t=st.floats(0.01, 5.0), frac=st.floats(0.0, 0.99), lam=st.floats(0.1, 10.0), H=st.floats(0.05, 0.95))
def test_rl_scaling(t, frac, lam, H):
    K = KernelSpec.riemann_liouville(H)
    s = frac * t
    lhs = eval_kernel(K, lam * t, lam * s)
    rhs = lam ** (H - 0.5) * eval_kernel(K, t, s)
    assert lhs == pytest.approx(rhs, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(t=st.floats(0.0, 0.9), s=st.floats(0.0, 0.9), fam=st.sampled_from(["rl", "log", "qlog", "constant"]))
def test_zero_above_diagonal(t, s, fam):
    spec = {"rl": KernelSpec.riemann_liouville(0.3), "log": KernelSpec.log_fractional(),
            "qlog": KernelSpec.qlog(1.0), "constant": KernelSpec.constant(2.0)}[fam]
    if s >= t:
        assert eval_kernel(spec, t, s) == 0.0


def test_diagonal_integral_rl_closed_form():
    H = 0.3
    K = KernelSpec.riemann_liouville(H)
    exact = 0.4 ** (2 * H) / (2 * H * math.gamma(H + 0.5) ** 2)
    assert diagonal_integral(K, 0.6, 1.0, 2.0) == pytest.approx(exact, rel=1e-8)


def test_qlog_diagonal_integral_closed_form():
    # int_s^t K^2 = log(1/(t-s))^(1-2q)/(2q-1)
    K = KernelSpec.qlog(1.0)
    gap = 0.01
    assert diagonal_integral(K, 0.3, 0.3 + gap, 2.0) == pytest.approx(1.0 / math.log(1 / gap), rel=1e-6)


def test_modulus_constant_kernel():
    K = KernelSpec.constant(1.0)
    # no history contribution; L^2(s, t) norm is sqrt(t - s)
    assert modulus_omega(K, 2.0, 0.2, 0.45) == pytest.approx(math.sqrt(0.25), rel=1e-10)


def test_modulus_monotone_in_t():
    K = KernelSpec.riemann_liouville(0.3)
    vals = [modulus_omega(K, 2.0, 0.25, t) for t in np.linspace(0.3, 1.0, 8)]
    assert np.all(np.diff(vals) >= 0)


def test_fbm_kernel_not_pointwise():
    with pytest.raises(DomainError):
        eval_kernel(KernelSpec.fbm(0.3), 1.0, 0.5)


def test_invalid_specs():
    with pytest.raises(DomainError):
        KernelSpec("nope")
    with pytest.raises(DomainError):
        KernelSpec.qlog(0.4)
    with pytest.raises(DomainError):
        KernelSpec.riemann_liouville(-1.0)


def test_config_round_trip():
    K = KernelSpec.qlog(1.5, role="drift")
    assert KernelSpec.from_config(K.to_config()) == K


def test_constant_kernel_certificate():
    cert = certify_kernel(KernelSpec.constant(1.0), TimeGrid(1.0, 6), 0.5)
    assert cert.valid
    assert cert.lnd_constant == pytest.approx(1.0, rel=1e-10)
    assert cert.gamma_sigma == pytest.approx(0.5, abs=0.01)


@pytest.mark.parametrize("H", [0.1, 0.3, 0.45, 0.7])
def test_rl_certificate_consistency(H):
    cert = certify_kernel(KernelSpec.riemann_liouville(H), TimeGrid(1.0, 6), H)
    assert cert.valid
    assert abs(cert.gamma_sigma - H) <= 0.05
    assert abs(cert.gamma_b - min(H + 0.5, 1.0)) <= 0.05
    assert cert.lnd_constant == pytest.approx(1 / (2 * H * math.gamma(H + 0.5) ** 2), rel=1e-6)


def test_certificate_invalid_when_hypothesis_too_small():
    # H_hypothesis larger than the kernel's: the ratio degenerates but never raises
    cert = certify_kernel(KernelSpec.riemann_liouville(0.3), TimeGrid(1.0, 4), 0.3)
    assert cert.to_record()["valid"] is True
    with pytest.raises(DomainError):
        certify_kernel(KernelSpec.constant(1.0), TimeGrid(1.0, 4), 0.0)
