import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import gauss
from tfcomp.operators import (CompositionMap, ProbeGrids, QuadratureTailError, affine_reduce, compose,
                              kohn_nirenberg_apply, loss_index, norm_ratio_probe, shift_family)
from tfcomp.signal import AnalyticSignal, TensorSignal, UniformGrid, sample
from tfcomp.symbol import ScalarMap
from tfcomp.weights import TFWeight

G = AnalyticSignal.normalized_gaussian()
GRID = UniformGrid(1, 8.0, 256)
SINE = CompositionMap.from_psi(ScalarMap.sine(0.3), label="sin")
BUMP = CompositionMap.from_psi(ScalarMap.bump(1.0, 0.3), b=0.6, C=2 * math.pi, label="bump")


def test_map_consistency():
    x = np.linspace(-20, 20, 401)
    assert SINE.consistency(x) <= 1e-12
    assert np.allclose(SINE(x), x + 0.3 * np.sin(x), atol=1e-14)
    with pytest.raises(ValueError):
        CompositionMap.from_psi(ScalarMap.zero(), A=0.0)


def test_compose_examples():
    assert np.array_equal(compose(G, CompositionMap.identity(), GRID).values, sample(G, GRID).values)
    t = GRID.nodes
    assert np.allclose(compose(G, CompositionMap.shift(1.5), GRID).values, G(t - 1.5), atol=1e-15)
    f = AnalyticSignal.gaussian()
    dbl = CompositionMap.from_psi(ScalarMap.zero(), A=2.0)
    assert np.allclose(compose(f, dbl, GRID).values, np.exp(-4 * np.pi * t * t), atol=1e-15)


def test_compose_tensor():
    psi = CompositionMap.from_psi([ScalarMap.sine(0.3), ScalarMap.zero()])
    grid = UniformGrid(2, 4.0, 32)
    f = TensorSignal((G, AnalyticSignal.hermite(1)))
    out = compose(f, psi, grid)
    x = grid.nodes
    assert np.allclose(out.values, np.outer(G(x + 0.3 * np.sin(x)), AnalyticSignal.hermite(1)(x)))


def test_kn_identity_family():
    x = np.linspace(-8, 8, 257)
    for f in (G, G.translate(2.0).modulate(-3.0), AnalyticSignal.gaussian(1.0, 2.0, -1.0, 1.5)):
        out = kohn_nirenberg_apply(CompositionMap.identity(), f, x)
        assert np.max(np.abs(out - f(x))) <= 1e-8


def test_kn_shift():
    x = np.linspace(-8, 8, 257)
    out = kohn_nirenberg_apply(CompositionMap.shift(1.25), G, x)
    assert np.max(np.abs(out - gauss(x, x0=1.25))) <= 1e-8


@pytest.mark.parametrize("psi", [SINE, BUMP, CompositionMap.from_psi(ScalarMap.sine(0.2, 2.0, 0.5))])
def test_kn_equals_compose(psi):
    x = np.linspace(-8, 8, 513)
    f = G.modulate(0.5)
    assert np.max(np.abs(kohn_nirenberg_apply(psi, f, x) - compose(f, psi, x))) <= 1e-4


def test_kn_tensor():
    psi = CompositionMap.from_psi([ScalarMap.sine(0.3), ScalarMap.sine(0.2)])
    grid = UniformGrid(2, 4.0, 32)
    f = TensorSignal((G, G.translate(0.5)))
    assert np.max(np.abs(kohn_nirenberg_apply(psi, f, grid).values - compose(f, psi, grid).values)) <= 1e-6


def test_kn_requires_translation_free():
    with pytest.raises(ValueError):
        kohn_nirenberg_apply(CompositionMap.from_psi(ScalarMap.zero(), A=2.0), G, GRID)


def test_kn_tail_error():
    with pytest.raises(QuadratureTailError):
        kohn_nirenberg_apply(SINE, AnalyticSignal.normalized_gaussian(1e4), GRID)


@given(st.complex_numbers(max_magnitude=5), st.complex_numbers(max_magnitude=5))
def test_linearity(alpha, beta):
    x = np.linspace(-6, 6, 65)
    f, h = G.translate(0.5), AnalyticSignal.hermite(2)
    comb = f.scale(alpha) + h.scale(beta)
    for op in (lambda u: compose(u, SINE, x), lambda u: kohn_nirenberg_apply(SINE, u, x)):
        lhs = op(comb)
        rhs = alpha * op(f) + beta * op(h)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, abs(alpha) + abs(beta))


# --- loss index ----------------------------------------------------------------------------

@pytest.mark.parametrize("s, b, d, t, N", [(0, 0, 1, 3, 3), (1, 0, 1, 6, 5), (1, 0.5, 1, 10, 9)])
def test_loss_index(s, b, d, t, N):
    li = loss_index(s, b, d)
    assert li.t == t and li.N == N
    assert (1 - b) * li.N > 2 * (s + d) >= (1 - b) * (li.N - 1)


@given(st.floats(0, 5), st.floats(0, 0.9), st.integers(1, 3))
def test_loss_index_minimal_N(s, b, d):
    li = loss_index(s, b, d)
    assert (1 - b) * li.N > 2 * (s + d)
    assert (1 - b) * (li.N - 1) <= 2 * (s + d)
    assert li.gap == pytest.approx(li.theorem_exponent - li.t)


# --- affine reduction ------------------------------------------------------------------------

def test_affine_identity_reduction():
    red = affine_reduce(SINE)
    assert np.all(red.A == 1.0)
    x = np.linspace(-5, 5, 11)
    assert np.allclose(red.reduced(x), SINE(x))


def test_affine_factorisation():
    psi = CompositionMap.from_psi(ScalarMap.sine(1.0), A=2.0)
    red = affine_reduce(psi)
    f = G.modulate(0.3)
    assert np.max(np.abs(red.apply(f, GRID).values - compose(f, psi, GRID).values)) <= 1e-10
    assert "A = diag" in red.record


def test_pure_affine_reduces_to_zero():
    red = affine_reduce(CompositionMap.from_psi(ScalarMap.zero(), A=3.0))
    x = np.linspace(-3, 3, 7)
    assert np.all(red.reduced.phi(x) == 0)


# --- probes -----------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def small_grids():
    return ProbeGrids.for_extent(4.0)


def test_identity_probe_all_one(small_grids):
    fam = shift_family(G, 4.0, 3)
    m = TFWeight.poly(1)
    res = norm_ratio_probe("identity", CompositionMap.identity(), fam, m, m, 2, small_grids)
    assert np.allclose([r["ratio"] for r in res.rows], 1.0, rtol=1e-12)
    assert res.bounded and not res.flagged


def test_probe_csv_and_workers(small_grids):
    fam = shift_family(G, 4.0, 3)
    a = norm_ratio_probe("compose", SINE, fam, TFWeight.poly(3), TFWeight.poly(1), 2, small_grids)
    b = norm_ratio_probe("compose", SINE, fam, TFWeight.poly(3), TFWeight.poly(1), 2, small_grids, workers=3)
    assert a.csv() == b.csv()
    assert a.csv().splitlines()[0] == "family_param_a,family_param_beta,ratio,flags"
    assert len(a.rows) == 9


def test_shift_family_layout():
    fam = shift_family(G, 16.0, 9)
    assert len(fam) == 81
    a, beta, f = fam[-1]
    assert (a, beta) == (16.0, 16.0)
    assert f(16.0) == pytest.approx(G(0.0) * np.exp(2j * np.pi * 16.0 * 16.0))


def test_probe_grids_cover_family():
    pg = ProbeGrids.for_extent(16.0)
    assert pg.x.L >= 16.0 + 8 and pg.signal.dual().L >= 16.0 + 8
