"""Weighted modulation norms and STFT decay profiles.

``||f||_{M^p_m} = || m V_g f ||_{L^p(R^{2d})}``, estimated by Riemann sums
(``p`` finite) or a grid sup (``p = inf``) of the FFT-based STFT.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .io import rows_to_csv
from .signal import AnalyticSignal, SampledSignal, UniformGrid
from .stft import TFMatrix, stft, stft_exact_log_abs
from .weights import SubadditiveWeight, TFWeight

__all__ = [
    "AccuracyWarning",
    "NormResult",
    "mod_norm",
    "weighted_norm",
    "norm_table_csv",
    "DecayProfile",
    "gs_decay_profile",
    "TAIL_WARN_FRACTION",
    "WINDOW_ROBUSTNESS_FACTOR",
]

TAIL_WARN_FRACTION = 0.01
WINDOW_ROBUSTNESS_FACTOR = 10.0
NORM_CSV_COLUMNS = ("signal_id", "weight_id", "p", "norm", "tail_bound")


class AccuracyWarning(UserWarning):
    """The tail estimate is a noticeable fraction of the norm."""


@dataclass
class NormResult:
    norm: float
    tail_bound: float
    p: float
    signal_id: str = ""
    weight_id: str = ""
    accurate: bool = True

    def row(self) -> dict:
        return {"signal_id": self.signal_id, "weight_id": self.weight_id, "p": _p_label(self.p),
                "norm": self.norm, "tail_bound": self.tail_bound}


def _p_label(p) -> str:
    return "inf" if np.isinf(p) else format(float(p), "g")


def _check_p(p) -> float:
    p = float(p)
    if p not in (1.0, 2.0, np.inf):
        raise ValueError(f"p must be 1, 2 or inf, got {p}")
    return p


def _log_weight(V: TFMatrix, m: TFWeight) -> np.ndarray:
    if V.x_grid.d == 1:
        x = V.x_grid.nodes[:, None]
        xi = V.xi_grid.nodes[None, :]
        return np.broadcast_to(m.log_coords(x, xi), V.values.shape)
    x = V.x_grid.nodes
    e = V.xi_grid.nodes
    return np.broadcast_to(m.log_coords(x[:, None, None, None], x[None, :, None, None],
                                        e[None, None, :, None], e[None, None, None, :]), V.values.shape)


def weighted_norm(V: TFMatrix, m: TFWeight, p, mask=None) -> float:
    """``|| m V ||_p`` over the grid (optionally restricted to ``mask``)."""
    p = _check_p(p)
    a = np.abs(V.values)
    lw = _log_weight(V, m)
    if mask is not None:
        a = a[mask]
        lw = lw[mask]
    if a.size == 0:
        return 0.0
    raw = _kernels.weighted_lp(np.ascontiguousarray(a), np.ascontiguousarray(lw, dtype=float), p)
    if np.isinf(p):
        return float(raw)
    return float((raw * V.cell) ** (1.0 / p))


def _frame_mask(V: TFMatrix, frac: float = 0.1) -> np.ndarray:
    """Nodes whose phase-space coordinate lies in the outer ``frac`` of the box."""
    shape = V.values.shape
    masks = []
    for ax, n in enumerate(shape):
        idx = np.arange(n)
        edge = max(1, int(round(frac * n / 2)))
        sel = (idx < edge) | (idx >= n - edge)
        masks.append(sel.reshape([-1 if k == ax else 1 for k in range(len(shape))]))
    out = np.zeros(shape, dtype=bool)
    for mk in masks:
        out = out | mk
    return out


def mod_norm(f, g: AnalyticSignal, m: TFWeight, p, grid: UniformGrid,
             x_grid: UniformGrid | None = None, xi_count: int | None = None,
             signal_id: str | None = None, warn: bool = True, tail: str = "auto") -> NormResult:
    """Estimate ``||f||_{M^p_m}`` with window ``g``.

    The tail bound is the weighted mass the box misses, estimated as follows.
    For closed-form ``f`` the STFT is recomputed on a box twice as large in
    both directions and the mass of the added ring is reported.  For sampled
    ``f`` only the box is available, and the mass of its outer 10% frame is
    reported as an indicator.  An :class:`AccuracyWarning` is issued when the
    tail exceeds 1% of the estimate.

    ``tail`` selects the estimate: ``"auto"`` (ring for closed-form signals,
    frame otherwise), ``"ring"``, ``"frame"`` or ``"none"``.
    """
    p = _check_p(p)
    if x_grid is None:
        x_grid = grid.crop(grid.n // 2)
    dual = grid.dual()
    m_xi = dual.n if xi_count is None else xi_count
    V = stft(f, g, grid, x_grid, m_xi)
    norm = weighted_norm(V, m, p)
    if tail == "auto":
        tail = "frame" if isinstance(f, SampledSignal) else "ring"
    if tail not in ("ring", "frame", "none"):
        raise ValueError(f"unknown tail mode {tail!r}")
    if tail == "none":
        tail = 0.0
    elif tail == "frame" or isinstance(f, SampledSignal):
        tail = weighted_norm(V, m, p, mask=_frame_mask(V))
    else:
        # twice the box in both directions: double L and halve the spacing
        big = UniformGrid(1, 2 * grid.L, 4 * grid.n)
        bx = UniformGrid(1, 2 * x_grid.L, 2 * x_grid.n)
        W = stft(f, g, big, bx, min(4 * m_xi, big.n), check=False)
        in_x = np.abs(bx.nodes) <= x_grid.L - 0.5 * x_grid.spacing
        in_xi = np.abs(W.xi_grid.nodes) <= V.xi_grid.L - 0.5 * V.xi_grid.spacing
        box = in_x[:, None] & in_xi[None, :]
        tail = weighted_norm(W, m, p, mask=~box)
    res = NormResult(norm, float(tail), p, signal_id or getattr(f, "label", "signal"), m.label)
    if norm > 0 and tail > TAIL_WARN_FRACTION * norm:
        res.accurate = False
        if warn:
            warnings.warn(f"tail {tail:.3e} exceeds {TAIL_WARN_FRACTION:.0%} of the norm {norm:.3e} "
                          f"for {res.signal_id}", AccuracyWarning, stacklevel=2)
    return res


def norm_table_csv(results) -> str:
    return rows_to_csv(NORM_CSV_COLUMNS, [r.row() for r in results])


@dataclass
class DecayProfile:
    radii: np.ndarray
    log_sup: np.ndarray  # sup over |z| ~ r of log |V_g f(z)|
    scale: np.ndarray  # omega(r) or log(1 + r)
    scale_id: str

    @property
    def exponents(self) -> np.ndarray:
        """Effective decay exponent ``-log sup |V| / scale(r)``."""
        return -self.log_sup / self.scale

    def growing(self, factor: float = 2.0) -> bool:
        """Profile keeps increasing: last value exceeds ``factor`` times the middle one."""
        e = self.exponents
        return bool(np.all(np.diff(e[len(e) // 2:]) > 0) and e[-1] > factor * e[len(e) // 2])

    def rows(self) -> list[dict]:
        return [{"radius": float(r), "log_sup": float(l), "scale": float(s), "exponent": float(e)}
                for r, l, s, e in zip(self.radii, self.log_sup, self.scale, self.exponents)]


def _scale(w, r: np.ndarray) -> tuple[np.ndarray, str]:
    if w is None or w == "poly":
        return np.log1p(r), "log(1+r)"
    if isinstance(w, SubadditiveWeight):
        return np.asarray(w(r), dtype=float), w.label
    raise TypeError("scale must be a SubadditiveWeight or 'poly'")


def gs_decay_profile(f, w, g: AnalyticSignal, radii, angles: int = 256,
                     V: TFMatrix | None = None, band: float | None = None) -> DecayProfile:
    """Decay exponents ``-sup_{|z| ~ r} log|V_g f(z)| / scale(r)``.

    Closed-form signals are evaluated exactly on circles of radius ``r`` (in
    log space, so the Gaussian tails never underflow).  Sampled signals need
    a precomputed STFT ``V``; the sup is then taken over the annulus
    ``| |z| - r | <= band`` of grid nodes.
    """
    radii = np.asarray(radii, dtype=float)
    scale, sid = _scale(w, radii)
    logs = np.empty_like(radii)
    if isinstance(f, AnalyticSignal):
        th = np.linspace(0.0, 2 * np.pi, angles, endpoint=False)
        for i, r in enumerate(radii):
            logs[i] = np.max(stft_exact_log_abs(f, g, r * np.cos(th), r * np.sin(th)))
    else:
        if V is None:
            raise ValueError("sampled signals need a precomputed STFT")
        X, E = np.meshgrid(V.x_grid.nodes, V.xi_grid.nodes, indexing="ij")
        R = np.hypot(X, E)
        a = np.abs(V.values)
        bw = band if band is not None else max(V.x_grid.spacing, V.xi_grid.spacing)
        with np.errstate(divide="ignore"):
            for i, r in enumerate(radii):
                sel = np.abs(R - r) <= bw
                if not np.any(sel):
                    raise ValueError(f"no grid nodes near radius {r}")
                logs[i] = np.log(np.max(a[sel]))
    return DecayProfile(radii, logs, scale, sid)
