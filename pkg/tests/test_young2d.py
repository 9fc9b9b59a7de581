from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from volterra_lab.errors import AlignmentError, DomainError
from volterra_lab.young2d import (Sampled2D, TwoParamField, box_increment, germ_error_exponent,
                                  grid_square_integrals, holder_seminorm, nl_young_integral)

NODES = np.linspace(0.0, 1.0, 17)
idx = st.integers(0, 16)


def _f(t1, t2):
    return np.sin(3 * t1) * np.cos(t2) + t1**2 * t2


def _g(t1, t2):
    return np.exp(t1 - t2)


@settings(max_examples=60, deadline=None)
@given(a=idx, b=idx, c=idx, d=idx, e=idx)
def test_rectangle_additivity(a, b, c, d, e):
    s1, m1, t1 = sorted((a, b, c))
    s2, t2 = sorted((d, e))
    F = Sampled2D.from_function(_f, NODES)
    n = NODES
    whole = box_increment(F, (n[s1], n[s2]), (n[t1], n[t2]))
    parts = box_increment(F, (n[s1], n[s2]), (n[m1], n[t2])) + box_increment(F, (n[m1], n[s2]), (n[t1], n[t2]))
    assert whole == pytest.approx(parts, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(a=idx, b=idx, c=idx, d=idx, lam=st.floats(-3, 3))
def test_box_bilinearity(a, b, c, d, lam):
    s1, t1 = sorted((a, b))
    s2, t2 = sorted((c, d))
    n = NODES
    F, G = Sampled2D.from_function(_f, n), Sampled2D.from_function(_g, n)
    H = Sampled2D(n, n, F.values + lam * G.values)
    s, t = (n[s1], n[s2]), (n[t1], n[t2])
    assert box_increment(H, s, t) == pytest.approx(box_increment(F, s, t) + lam * box_increment(G, s, t), abs=1e-11)


def test_box_of_sum_of_one_variable_functions_vanishes():
    F = Sampled2D.from_function(lambda t1, t2: np.cos(t1) + t2**3, NODES)
    assert box_increment(F, (0.25, 0.125), (0.75, 1.0)) == pytest.approx(0.0, abs=1e-14)


def test_box_errors():
    F = Sampled2D.from_function(_f, NODES)
    with pytest.raises(AlignmentError):
        box_increment(F, (0.1, 0.0), (0.5, 0.5))
    with pytest.raises(DomainError):
        box_increment(F, (0.5, 0.0), (0.25, 0.5))


def test_constant_in_x_field_is_exact():
    A = TwoParamField.separable(lambda t1, t2: t1 * t2 + np.sin(t1 + t2), lambda x: np.ones_like(x))
    theta = lambda t: np.sin(5 * t)
    res = nl_young_integral(A, theta, ((0.0, 1.0), (0.25, 0.75)), level=6)
    exact = A.box(np.array([0.0]), np.array([0.25]), np.array([1.0]), np.array([0.75]), np.zeros((1, 1)))[0]
    np.testing.assert_allclose(res.value, exact, atol=1e-13)
    assert germ_error_exponent(A, theta, (0.2, 0.3), 0.125, oracle_level=8).exact


def test_odd_field_on_square_vanishes():
    A = TwoParamField.separable(lambda t1, t2: t1 * t2, np.sin, grad=np.cos)
    res = nl_young_integral(A, lambda t: np.sin(3 * t) + t**2, ((0.0, 1.0), (0.0, 1.0)), level=7)
    assert abs(res.value[0]) < 1e-13
    sq = grid_square_integrals(A, NODES, np.sin(3 * NODES) + NODES**2)
    assert np.max(np.abs(sq)) < 1e-13


def test_grid_square_matches_level_sum():
    A = TwoParamField.separable(lambda t1, t2: t1 * t2, np.cos)
    th = np.sin(3 * NODES)
    sq = grid_square_integrals(A, NODES, th)
    res = nl_young_integral(A, lambda t: np.interp(t, NODES, th), ((0.0, 1.0), (0.0, 1.0)), level=4)
    assert sq[-1, 0] == pytest.approx(res.value[0], abs=1e-12)


def test_smooth_germ_exponent():
    A = TwoParamField.separable(lambda t1, t2: t1 * t2, np.cos)
    ex = germ_error_exponent(A, lambda t: np.sin(3 * t) + t**2, (0.25, 0.5), 0.125, oracle_level=10)
    assert ex.exponent >= 2.8


def test_field_validation():
    with pytest.raises(DomainError):
        TwoParamField(lambda a, b, x: x, gamma=0.4)
    with pytest.raises(DomainError):
        nl_young_integral(TwoParamField.separable(lambda a, b: a, np.cos), np.sin, ((1, 0), (0, 1)), 3)


def test_holder_seminorm():
    t = np.linspace(0, 1, 11)
    assert holder_seminorm(2 * t, t, 1.0) == pytest.approx(2.0)
