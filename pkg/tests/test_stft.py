import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import gaussian_stft, riemann_stft
from tfcomp.signal import AnalyticSignal, UniformGrid, sample
from tfcomp.stft import (TFMatrix, WindowTruncationError, orthogonality_check, rihaczek,
                         rihaczek_stft_identity_check, stft, stft_exact, stft_points, stft_tensor)

GRID = UniformGrid(1, 8.0, 1024)
G = AnalyticSignal.normalized_gaussian()


@pytest.fixture(scope="module")
def Vgg():
    return stft(G, G, GRID)


def _at(V, x, xi):
    i = int(np.argmin(np.abs(V.x_grid.nodes - x)))
    k = int(np.argmin(np.abs(V.xi_grid.nodes - xi)))
    assert V.x_grid.nodes[i] == x and V.xi_grid.nodes[k] == xi
    return V.values[i, k]


def test_origin_value(Vgg):
    assert abs(_at(Vgg, 0.0, 0.0) - 1) < 1e-12


def test_gaussian_decay_value(Vgg):
    t = np.linspace(-12, 12, 200001)
    oracle = abs(riemann_stft(G(t), t, G, 1.0, 0.0))
    assert abs(abs(_at(Vgg, 1.0, 0.0)) - oracle) < 1e-10
    assert oracle == pytest.approx(math.exp(-math.pi / 2), abs=1e-10)


def test_magnitude_closed_form(Vgg):
    X, E = np.meshgrid(Vgg.x_grid.nodes, Vgg.xi_grid.nodes, indexing="ij")
    sel = (np.abs(X) <= 4) & (np.abs(E) <= 4)
    assert np.max(np.abs(np.abs(Vgg.values[sel]) - np.abs(gaussian_stft(X[sel], E[sel])))) < 1e-6
    assert np.max(np.abs(Vgg.values[sel] - gaussian_stft(X[sel], E[sel]))) < 1e-10


def test_norm_and_pointwise_bound(Vgg):
    assert abs(Vgg.l2_norm() - 1) < 1e-5
    assert np.max(np.abs(Vgg.values)) <= 1 + 1e-12


def test_covariance():
    a, beta = 2.0, 3.0
    f = AnalyticSignal.hermite(1)
    V = stft(f, G, GRID)
    W = stft(f.translate(a).modulate(beta), G, GRID)
    dx, de = V.x_grid.spacing, V.xi_grid.spacing
    sa, sb = int(round(a / dx)), int(round(beta / de))
    inner = np.abs(W.values[sa:, sb:])
    shifted = np.abs(V.values[:-sa, :-sb])
    assert np.max(np.abs(inner - shifted)) < 1e-8


def test_three_routes_agree():
    f = AnalyticSignal.hermite(2).translate(0.5)
    x = np.array([-1.0, 0.0, 0.75])
    xi = np.array([0.5, -1.25, 2.0])
    ex = stft_exact(f, G, x, xi)
    pts = stft_points(f, G, x, xi, GRID)
    assert np.max(np.abs(ex - pts)) < 1e-12


def test_truncation_error():
    wide = AnalyticSignal.normalized_gaussian(0.05)
    with pytest.raises(WindowTruncationError):
        stft(AnalyticSignal.constant(1.0), wide, GRID)


def test_sampled_input_matches_closed_form():
    f = AnalyticSignal.hermite(1)
    assert np.max(np.abs(stft(sample(f, GRID), G, GRID).values - stft(f, G, GRID).values)) < 1e-14


def test_tfmatrix_roundtrip_and_validation(Vgg):
    small = TFMatrix(UniformGrid(1, 1.0, 8), UniformGrid(1, 2.0, 8), Vgg.values[:8, :8])
    back = TFMatrix.from_bytes(small.to_bytes())
    assert np.array_equal(back.values, small.values)
    assert len(small.to_bytes()) == 48 + 64 * 16
    with pytest.raises(ValueError):
        TFMatrix(UniformGrid(1, 1.0, 8), UniformGrid(1, 1.0, 8), np.ones((8, 9)))
    with pytest.raises(ValueError):
        TFMatrix(UniformGrid(1, 1.0, 8), UniformGrid(1, 1.0, 8), np.full((8, 8), np.nan))


def test_tensor_factorises():
    grid = UniformGrid(1, 6.0, 128)
    V = stft_tensor(G, AnalyticSignal.hermite(1), G, G, grid)
    A, B = stft(G, G, grid), stft(AnalyticSignal.hermite(1), G, grid)
    assert V.values.shape == (64, 64, 128, 128)
    assert abs(V.values[10, 20, 30, 40] - A.values[10, 30] * B.values[20, 40]) < 1e-15


# --- orthogonality ---------------------------------------------------------------

def test_orthogonality_gaussian():
    assert orthogonality_check(G, G, G, G, GRID).residual <= 1e-6


def test_orthogonality_parity():
    r = orthogonality_check(G, AnalyticSignal.hermite(1), G, G, GRID)
    assert abs(r.rhs) < 1e-15 and r.residual <= 1e-6


def test_orthogonality_translate():
    r = orthogonality_check(G.translate(2.0), G, G, G, GRID)
    assert abs(r.rhs) == pytest.approx(math.exp(-2 * math.pi), rel=1e-10)
    assert r.residual <= 1e-6


@given(st.integers(0, 3), st.integers(0, 3), st.floats(-2, 2), st.floats(-2, 2))
def test_orthogonality_property(i, j, a, b):
    f1 = AnalyticSignal.hermite(i).translate(a)
    f2 = AnalyticSignal.hermite(j).modulate(b)
    r = orthogonality_check(f1, f2, G, AnalyticSignal.normalized_gaussian(1.5), UniformGrid(1, 8.0, 512))
    assert r.residual <= 1e-8


# --- Rihaczek -----------------------------------------------------------------------

def test_rihaczek_examples():
    f = AnalyticSignal.hermite(2)
    assert rihaczek(G, f, 0.0, 0.0) == pytest.approx(G(0.0) * np.conj(f.fourier()(0.0)))
    x, xi = np.meshgrid(np.linspace(-2, 2, 9), np.linspace(-2, 2, 9))
    R = rihaczek(G, G, x, xi)
    assert np.max(np.abs(R - np.sqrt(2) * np.exp(-2j * np.pi * x * xi - np.pi * (x * x + xi * xi)))) < 1e-14
    assert np.allclose(np.abs(rihaczek(G, f, x, xi)), np.abs(G(x)) * np.abs(f.fourier()(xi)))


def _probe_points():
    k = np.linspace(-2, 2, 3)
    return np.array(np.meshgrid(k, k, k, k, indexing="ij")).reshape(4, -1).T


def test_rihaczek_identity_gaussian():
    assert rihaczek_stft_identity_check(G, G, G, G, _probe_points()).residual <= 1e-5


def test_rihaczek_identity_origin():
    f, g = AnalyticSignal.hermite(1).modulate(0.3), G.translate(0.2)
    rep = rihaczek_stft_identity_check(f, g, G, G, np.zeros((1, 4)))
    expected = stft_exact(g, G, 0.0, 0.0) * np.conj(stft_exact(f, G, 0.0, 0.0))
    assert abs(rep.rhs[0] - expected) < 1e-15
    assert abs(rep.lhs[0] - expected) < 1e-10


def test_rihaczek_identity_translated():
    rep = rihaczek_stft_identity_check(G.translate(0.7), G, G, G, _probe_points())
    assert rep.residual <= 1e-5
