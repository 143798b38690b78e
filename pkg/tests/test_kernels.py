import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tfcomp import _kernels

BACKENDS = _kernels.backends()
PY = BACKENDS["python"]
CY = BACKENDS.get("cython")
needs_cython = pytest.mark.skipif(CY is None, reason="compiled extension not built")

finite = st.floats(-3, 3)


def test_backend_selected():
    assert _kernels.BACKEND in ("python", "cython")
    if CY is not None:
        assert _kernels.BACKEND == "cython"


def test_pure_python_env_forces_fallback():
    env = dict(os.environ, TFCOMP_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from tfcomp import _kernels; print(_kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_cython
@given(st.integers(0, 2**32 - 1), st.booleans())
def test_sup_4d_agree(seed, cplx):
    rng = np.random.default_rng(seed)
    shape = tuple(rng.integers(1, 6, size=4))
    V = rng.standard_normal(shape)
    if cplx:
        V = V + 1j * rng.standard_normal(shape)
    ws = [rng.standard_normal(n) for n in shape]
    a, ia = PY.weighted_sup_4d(V, *ws)
    b, ib = CY.weighted_sup_4d(V, *ws)
    assert a == pytest.approx(b, rel=1e-13, abs=1e-13)
    assert ia == ib


@needs_cython
def test_sup_4d_zero():
    V = np.zeros((2, 2, 2, 2))
    w = np.zeros(2)
    for mod in (PY, CY):
        assert mod.weighted_sup_4d(V, w, w, w, w)[0] == -np.inf


@needs_cython
@given(arrays(float, st.integers(1, 400), elements=st.floats(0, 10)),
       st.sampled_from([1.0, 2.0, 1.5, np.inf]), st.integers(0, 2**32 - 1))
def test_lp_agree(a, p, seed):
    lw = np.random.default_rng(seed).uniform(-2, 2, a.shape)
    x, y = PY.weighted_lp(a, lw, p), CY.weighted_lp(a, lw, p)
    assert x == pytest.approx(y, rel=1e-12, abs=1e-300)


@needs_cython
@given(st.integers(0, 2**32 - 1))
def test_kn_sum_agree(seed):
    rng = np.random.default_rng(seed)
    ph = rng.uniform(-10, 10, rng.integers(1, 50))
    ys = rng.uniform(-5, 5, rng.integers(1, 80))
    c = rng.standard_normal(ys.size) + 1j * rng.standard_normal(ys.size)
    x, y = PY.kn_sum(ph, ys, c), CY.kn_sum(ph, ys, c)
    assert np.max(np.abs(x - y)) <= 1e-11 * np.sum(np.abs(c))
