import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import faa_sum_bruteforce, fd_derivative, partition_counts, product_poly
from tfcomp.signal import AnalyticSignal, UniformGrid
from tfcomp.symbol import PerturbationMap, ScalarMap, symbol_eval
from tfcomp.ultradiff import (COEFF_CSV_COLUMNS, apply_operator, build_operator, check_cauchy_bound,
                              check_derivative_bound, coefficient_csv, enumerate_partitions, partition_count,
                              product_expansion, symbol_derivatives_bell, symbol_nth_derivative)
from tfcomp.weights import SubadditiveWeight

TWO_PI = 2 * math.pi
SINE = PerturbationMap.scalar(ScalarMap.sine(0.3).scale(TWO_PI), label="sin")
G2 = SubadditiveWeight.gevrey(2)


# --- partitions -------------------------------------------------------------------

def test_small_partitions():
    p1 = enumerate_partitions(1)
    assert p1.tuples == ((1,),) and p1.weight_sum == 1
    p3 = enumerate_partitions(3)
    assert len(p3) == 3 and p3.weight_sum == 4
    assert enumerate_partitions(12).weight_sum == 2048


def test_weight_sum_and_counts_all_n():
    counts = partition_counts(25)
    for n in range(1, 26):
        ps = enumerate_partitions(n)
        assert ps.weight_sum == 2 ** (n - 1)
        assert len(ps) == partition_count(n) == counts[n]
        assert all(sum(j * k for j, k in enumerate(t, 1)) == n for t in ps.tuples)
    assert partition_count(10) == 42


@pytest.mark.parametrize("n", [1, 5, 9, 14])
def test_weight_sum_matches_bruteforce(n):
    assert enumerate_partitions(n).weight_sum == faa_sum_bruteforce(n)


def test_faa_coefficients_sum_to_bell_numbers():
    # sum n!/prod(k_j! j!^k_j) over partitions = Bell number
    bell = [1, 1, 2, 5, 15, 52, 203, 877, 4140]
    for n in range(1, 9):
        assert sum(enumerate_partitions(n).faa_coefficients()) == bell[n]


@pytest.mark.parametrize("n", [0, 26, 2.5])
def test_partition_range(n):
    with pytest.raises(ValueError):
        enumerate_partitions(n)


# --- derivatives of the symbol ------------------------------------------------------------

def test_first_derivative_chain_rule():
    x, y = 0.4, 1.7
    d1 = symbol_nth_derivative(SINE, 1, x, y)
    assert d1 == pytest.approx(1j * TWO_PI * 0.3 * math.cos(x) * y * symbol_eval(SINE, x, y), rel=1e-14)


def test_fourth_derivative_vs_finite_differences():
    x, y = 0.7, 1.3
    exact = symbol_nth_derivative(SINE, 4, x, y)
    fd = fd_derivative(lambda t: symbol_eval(SINE, t, y), x, 4)
    assert abs(exact - fd) / abs(exact) <= 1e-4


def test_constant_map_derivatives_vanish():
    phi = PerturbationMap.scalar(ScalarMap.const(2.0))
    for n in range(1, 6):
        assert symbol_nth_derivative(phi, n, 0.3, 5.0) == 0


@given(st.floats(-4, 4), st.floats(-8, 8))
def test_partition_and_bell_routes_agree(x, y):
    bell = symbol_derivatives_bell(SINE, 10, x, y)
    for n in range(11):
        a = symbol_nth_derivative(SINE, n, x, y)
        assert abs(a - bell[n]) <= 1e-10 * max(1.0, abs(bell[n]))


@given(st.floats(-3, 3), st.floats(-4, 4), st.integers(1, 6))
def test_random_points_vs_finite_differences(x, y, n):
    exact = symbol_nth_derivative(SINE, n, x, y)
    fd = fd_derivative(lambda t: symbol_eval(SINE, t, y), x, n)
    assert abs(exact - fd) <= 1e-3 * max(1.0, abs(exact))


def test_curve_derivative_vs_finite_differences():
    phi = PerturbationMap((ScalarMap.sine(0.3).scale(TWO_PI), ScalarMap.bump(0.5, 0.3)))
    y = np.array([1.2, -0.7])
    for n in range(1, 5):
        exact = symbol_nth_derivative(phi, n, 0.4, y)
        fd = fd_derivative(lambda t: np.exp(1j * (phi.components[0](t) * y[0] + phi.components[1](t) * y[1])),
                           0.4, n)
        assert abs(exact - fd) <= 1e-6 * max(1.0, abs(exact))


def test_derivative_bound_examples():
    x = np.linspace(-4, 4, 33)
    y = np.linspace(-8, 8, 33)
    assert check_derivative_bound(PerturbationMap.zero(), G2, 1, 12, x, y).m == 0
    rep = check_derivative_bound(SINE, G2, 1, 12, x, y)
    assert rep.passed and rep.m <= 16 and rep.worst_margin >= 0


def test_derivative_bound_curve():
    phi = PerturbationMap((ScalarMap.sine(0.3).scale(TWO_PI),) * 2)
    x = np.linspace(-2, 2, 9)
    g = np.linspace(-4, 4, 9)
    y = np.stack(np.meshgrid(g, g), -1).reshape(-1, 2)
    rep = check_derivative_bound(phi, G2, 1, 8, x, y)
    assert rep.passed and rep.d == 2


def test_derivative_bound_order_range():
    with pytest.raises(ValueError):
        check_derivative_bound(SINE, G2, 1, 16, [0.0], [1.0])


# --- G(D) models ---------------------------------------------------------------------

@pytest.fixture(scope="module")
def G8():
    return build_operator(8, 2.0)


def test_model_coefficients():
    g1 = build_operator(1, 2.0)
    assert np.allclose(g1.coeffs, [1, 0, 1])
    assert np.allclose(g1.b, [1, 0, -1])
    g2 = build_operator(2, 2.0)
    assert g2.coeffs[4] == pytest.approx(1 / 16)
    for K in (3, 5, 8):
        gm = build_operator(K, 2.0)
        assert np.allclose(gm.coeffs, product_poly(K, 2.0), rtol=1e-14, atol=0)
        assert gm.coeffs[0] == 1 and np.all(gm.b[1::2] == 0)
    with pytest.raises(ValueError):
        build_operator(0, 2.0)


def test_ellipticity_report(G8):
    N, ratio, where = G8.ellipticity_level(1.0, 100.0)
    assert ratio == pytest.approx(G8.log_abs(where) / G8.omega(where))
    x0 = G8.elliptic_from(2.0, hi=100.0)
    xs = np.geomspace(x0, 100.0, 500)
    assert np.all(G8.log_abs(xs) >= 2.0 * G8.omega(xs))


def test_growth_constant(G8):
    r = np.geomspace(1, 1024, 200)
    th = np.linspace(0, 2 * np.pi, 90)
    z = r[:, None] * np.exp(1j * th)[None, :]
    assert np.max(G8.log_abs(z) / (1 + G8.omega(np.abs(z)))) <= G8.m_G + 1e-9


def test_cauchy_bound(G8):
    rep = check_cauchy_bound(G8, math.ceil(G8.m_G), 40)
    assert rep.passed
    assert rep.value[0] == 1 and rep.bound[0] == pytest.approx(math.exp(2 * math.ceil(G8.m_G)))
    assert np.all(rep.value[1::2] == 0)


@given(st.integers(1, 10), st.floats(1.5, 3.0))
def test_cauchy_bound_every_model(K, s):
    gm = build_operator(K, s, angles=90)
    assert check_cauchy_bound(gm, math.ceil(gm.m_G), 30).passed


@given(st.floats(-10, 10))
def test_eigenrelation(xi):
    gm = build_operator(8, 2.0)
    x = np.linspace(-3, 3, 7)
    out = apply_operator(gm, AnalyticSignal.plane_wave(xi), x)
    assert np.max(np.abs(out - gm(-xi) * np.exp(1j * xi * x))) <= 1e-10 * max(1.0, abs(gm(-xi)))


def test_apply_on_gaussian_and_constant():
    t = np.linspace(-3, 3, 61)
    out = apply_operator(build_operator(1, 2.0), AnalyticSignal.gaussian(), t)
    # G(D) f = f + i^2 f'' = f - f''
    assert np.max(np.abs(out - (1 + 2 * np.pi - 4 * np.pi ** 2 * t * t) * np.exp(-np.pi * t * t))) < 1e-12
    one = apply_operator(build_operator(5, 2.0), AnalyticSignal.constant(1.0), UniformGrid(1, 2.0, 8))
    assert np.allclose(one.values, 1.0)
    with pytest.raises(TypeError):
        apply_operator(build_operator(1, 2.0), np.ones(3), t)


def test_product_expansion_constant_g():
    gm = build_operator(2, 2.0)
    pe = product_expansion(gm, AnalyticSignal.constant(1.0), 6, 0, np.array([0.0, 1.0]))
    assert np.allclose(pe.a[: gm.b.size, 0, 0], gm.b)
    assert np.all(pe.a[gm.b.size:, 0] == 0)


@pytest.mark.parametrize("K", [1, 2, 4])
def test_product_expansion_reassembly(K):
    gm = build_operator(K, 2.0)
    pe = product_expansion(gm, AnalyticSignal.gaussian(), 2 * K + 2, 3, np.linspace(-3, 3, 25),
                           h=AnalyticSignal.plane_wave(1.7))
    assert pe.reassembly_residual <= 1e-8
    assert pe.passed
    assert pe.m0_formula == 3 * math.ceil(gm.m_G)
    assert np.all(pe.a[2 * K + 1:] == 0)


def test_product_expansion_derivative_table():
    gm = build_operator(2, 2.0)
    g = AnalyticSignal.gaussian()
    x = np.linspace(-1, 1, 5)
    pe = product_expansion(gm, g, 4, 2, x)
    # a_k^(1) equals the derivative of a_k
    for k in range(5):
        fd = np.array([fd_derivative(lambda t: product_expansion(gm, g, 4, 0, t).a[k, 0], xi, 1) for xi in x])
        assert np.allclose(pe.a[k, 1], fd, atol=1e-8)


def test_coefficient_csv(G8):
    text = coefficient_csv(check_cauchy_bound(G8, 3, 4).rows())
    lines = text.splitlines()
    assert tuple(lines[0].split(",")) == COEFF_CSV_COLUMNS and len(lines) == 6
