import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import fd_derivative
from tfcomp.signal import AnalyticSignal, UniformGrid
from tfcomp.symbol import (DECAY_CSV_COLUMNS, MemoryBudgetError, NoStableCandidateError, PerturbationMap, ScalarMap,
                           conjugate_symmetry_residual, decay_ratio_exp, decay_ratio_poly, decay_report_csv,
                           symbol_eval, symbol_stft_4d, symbol_stft_point)
from tfcomp.weights import SubadditiveWeight

TWO_PI = 2 * math.pi
SINE = PerturbationMap.scalar(ScalarMap.sine(0.3).scale(TWO_PI), C=0.6 * math.pi, label="sin")
BUMP = PerturbationMap.scalar(ScalarMap.bump(1.0, 0.3).scale(TWO_PI), b=0.6, C=TWO_PI, label="bump")
ZERO = PerturbationMap.zero()
G = AnalyticSignal.normalized_gaussian()
SMALL = dict(z_grid=UniformGrid(1, 6.0, 32), n_zeta=32)


@pytest.fixture(scope="module")
def V_zero():
    return symbol_stft_4d(ZERO, **SMALL)


@pytest.fixture(scope="module")
def V_sine():
    return symbol_stft_4d(SINE, **SMALL)


# --- maps ---------------------------------------------------------------------

def test_scalar_map_values():
    x = np.linspace(-3, 3, 13)
    assert np.allclose(ScalarMap.sine(0.3)(x), 0.3 * np.sin(x))
    assert np.allclose(ScalarMap.bump(2.0, 0.3)(x), 2.0 * (1 + x * x) ** 0.3)
    assert np.allclose((ScalarMap.linear(2.0) + ScalarMap.const(1.0))(x), 2 * x + 1)


@pytest.mark.parametrize("m", [ScalarMap.sine(0.3, 1.3, 0.2), ScalarMap.bump(1.0, 0.3), ScalarMap.bump(0.5, 0.45)])
def test_jets_match_finite_differences(m):
    j = m.jets(np.array([0.7]), 6)[:, 0]
    for n in range(1, 7):
        fd = fd_derivative(lambda t: m(t).astype(complex), 0.7, n).real
        assert abs(j[n] - fd) <= 1e-6 * max(1.0, abs(j[n]))


def test_declared_growth():
    assert SINE.verify_growth().passed
    assert BUMP.verify_growth().passed
    understated = PerturbationMap.scalar(ScalarMap.bump(1.0, 0.3).scale(TWO_PI), b=0.3, C=TWO_PI)
    assert not understated.verify_growth().passed


def test_schwartz_class_derivatives_finite():
    sups = SINE.derivative_sup()
    assert all(np.isfinite(v) for v in sups.values())
    assert sups[1] == pytest.approx(0.3 * TWO_PI, rel=1e-6)


def test_invalid_b_rejected():
    with pytest.raises(ValueError):
        PerturbationMap.scalar(ScalarMap.zero(), b=1.0)


# --- symbol values ---------------------------------------------------------------

def test_symbol_eval_examples():
    assert symbol_eval(ZERO, 1.3, 2.7) == 1.0
    assert symbol_eval(SINE, math.pi / 2, 1.0) == pytest.approx(np.exp(1j * 0.6 * math.pi))
    phi2 = PerturbationMap((ScalarMap.sine(0.3).scale(TWO_PI), ScalarMap.bump(1.0, 0.2)))
    x = np.array([[0.3, -1.0]])
    y = np.array([[1.5, 0.5]])
    expected = np.exp(1j * TWO_PI * 0.3 * np.sin(0.3) * 1.5) * np.exp(1j * 2.0 ** 0.2 * 0.5)
    assert symbol_eval(phi2, x, y)[0] == pytest.approx(expected)


@given(st.floats(-50, 50), st.floats(-50, 50))
def test_symbol_unimodular(x, y):
    assert abs(abs(symbol_eval(BUMP, x, y)) - 1.0) < 1e-14


# --- 4-D STFT ---------------------------------------------------------------------

def test_zero_map_separable(V_zero):
    e = V_zero.zeta_grid.nodes
    gh = np.abs(G.fourier()(e))
    sep = gh[:, None] * gh[None, :]
    assert np.max(np.abs(np.abs(V_zero.values) - sep[None, None])) < 1e-8


def test_fft_matches_point_oracle(V_sine):
    z, _, e, _ = V_sine.axes
    for idx in [(16, 16, 16, 16), (10, 20, 12, 18), (3, 28, 20, 9)]:
        ref = symbol_stft_point(SINE, G, z[idx[0]], z[idx[1]], e[idx[2]], e[idx[3]])
        assert abs(V_sine.values[idx] - ref) < 1e-6


def test_pointwise_bound(V_sine):
    assert np.max(np.abs(V_sine.values)) <= V_sine.window_l1_sq + 1e-12


def test_conjugate_symmetry(V_sine):
    assert conjugate_symmetry_residual(V_sine, "real") < 1e-10
    V_even = symbol_stft_4d(PerturbationMap.scalar(ScalarMap.bump(0.5, 0.3).scale(TWO_PI), b=0.6), **SMALL)
    assert conjugate_symmetry_residual(V_even, "even") < 1e-10
    assert conjugate_symmetry_residual(V_sine, "even") > 1e-3


def test_budget_refusal():
    with pytest.raises(MemoryBudgetError) as exc:
        symbol_stft_4d(SINE, z_grid=UniformGrid(1, 8.0, 64), n_zeta=64, budget=1 << 20)
    assert exc.value.required > 1 << 20


def test_workers_deterministic():
    a = symbol_stft_4d(SINE, z_grid=UniformGrid(1, 4.0, 16), n_zeta=16, workers=1)
    b = symbol_stft_4d(SINE, z_grid=UniformGrid(1, 4.0, 16), n_zeta=16, workers=3)
    assert np.array_equal(a.values, b.values)


def test_dump_layout(V_sine):
    blob = V_sine.to_bytes()
    assert len(blob) == 4 * 24 + 16 * 32 ** 4


# --- decay ratios -----------------------------------------------------------------------

def test_zero_map_zeta2_finite(V_zero):
    for N in (2, 6):
        rep = decay_ratio_poly(V_zero, N, "zeta2", 0.0)
        assert np.isfinite(rep.sup_ratio) and rep.stable


@pytest.mark.parametrize("N", [2, 4])
def test_sine_zeta1_stable(V_sine, N):
    assert decay_ratio_poly(V_sine, N, "zeta1").stable


def test_decay_ratio_rejects_bad_input(V_sine):
    with pytest.raises(ValueError):
        decay_ratio_poly(V_sine, 0, "zeta1")
    with pytest.raises(ValueError):
        decay_ratio_poly(V_sine, 2, "zeta3")


def test_exp_zero_map_k0(V_zero):
    w = SubadditiveWeight.gevrey(2)
    for mode in ("zeta1_vs_z2", "zeta2_vs_z1b"):
        assert decay_ratio_exp(V_zero, w, 2, mode, 0.5).k == 0


def test_exp_sine_some_k(V_sine):
    res = decay_ratio_exp(V_sine, SubadditiveWeight.gevrey(2), 2, "zeta1_vs_z2")
    assert res.passed and res.k <= 8


def test_exp_understated_fails(V_sine):
    with pytest.raises(NoStableCandidateError):
        decay_ratio_exp(V_sine, SubadditiveWeight.gevrey(2), 12, "zeta1_vs_z2", candidates=(0,),
                        raise_on_fail=True)


def test_csv(V_sine):
    text = decay_report_csv([decay_ratio_poly(V_sine, 2, "zeta1")])
    assert tuple(text.splitlines()[0].split(",")) == DECAY_CSV_COLUMNS
