"""Composition operators, their Kohn-Nirenberg realisation, and boundedness probes.

A :class:`CompositionMap` stores ``psi(x) = A x + phi(x) / (2 pi)``.  With
``A = 1`` the composition ``f o psi`` equals ``sigma(x, D) f`` for the symbol
``sigma(x, y) = exp(i phi(x) y)``:
``sigma(x, D) f(x) = int exp(i phi(x) y) fhat(y) exp(2 pi i x y) dy``.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from . import _kernels
from .io import rows_to_csv
from .modnorm import AccuracyWarning, mod_norm
from .signal import AnalyticSignal, SampledSignal, TensorSignal, UniformGrid
from .symbol import PerturbationMap, ScalarMap
from .weights import TFWeight

__all__ = [
    "CompositionMap",
    "compose",
    "QuadratureTailError",
    "kohn_nirenberg_apply",
    "kn_nodes",
    "LossIndex",
    "loss_index",
    "shift_family",
    "ProbeGrids",
    "ProbeResult",
    "norm_ratio_probe",
    "AffineReduction",
    "affine_reduce",
    "SLOPE_MAX",
    "CAP_MAX",
    "NEGATIVE_SLOPE_MIN",
]

SLOPE_MAX = 0.01
CAP_MAX = 10.0
NEGATIVE_SLOPE_MIN = 0.05
KN_TAIL_TOL = 1e-12
PROBE_CSV_COLUMNS = ("family_param_a", "family_param_beta", "ratio", "flags")


@dataclass(frozen=True)
class CompositionMap:
    """``psi(x) = A x + phi(x) / (2 pi)`` with ``phi`` a :class:`PerturbationMap`.

    ``A`` is a scalar for ``d = 1`` and a diagonal (given as a vector or a
    diagonal matrix) for ``d = 2``.
    """

    phi: PerturbationMap
    A: object = 1.0
    label: str = field(default="psi", compare=False)

    def __post_init__(self):
        a = self.diag
        if np.any(a == 0):
            raise ValueError("the affine part must be invertible")

    @classmethod
    def from_psi(cls, p: ScalarMap | Sequence[ScalarMap], A=1.0, b: float = 0.0, C: float | None = None,
                 bound_class: str = "ultra", label: str | None = None) -> "CompositionMap":
        """Build from ``psi(x) = A x + p(x)`` (perturbation given in x-units)."""
        comps = (p,) if isinstance(p, ScalarMap) else tuple(p)
        phi = PerturbationMap(tuple(c.scale(2 * np.pi) for c in comps), b,
                              C if C is not None else 1.0, bound_class,
                              label or "+".join(c.label for c in comps))
        return cls(phi, A, label or f"{A}x+{phi.label}")

    @classmethod
    def identity(cls, d: int = 1) -> "CompositionMap":
        return cls(PerturbationMap.zero(d), 1.0 if d == 1 else np.ones(d), "identity")

    @classmethod
    def shift(cls, c: float) -> "CompositionMap":
        """``psi(x) = x - c`` (so ``f o psi = T_c f``)."""
        return cls(PerturbationMap.scalar(ScalarMap.const(-2 * np.pi * c), label=f"shift({c:g})"), 1.0,
                   f"x-{c:g}")

    @property
    def d(self) -> int:
        return self.phi.d

    @property
    def diag(self) -> np.ndarray:
        a = np.asarray(self.A, dtype=float)
        if a.ndim == 2:
            if np.any(a - np.diag(np.diag(a))):
                raise ValueError("only diagonal affine parts are supported for separable maps")
            a = np.diag(a)
        return np.broadcast_to(a, (self.d,)).astype(float)

    @property
    def is_translation_free(self) -> bool:
        return bool(np.all(self.diag == 1.0))

    def psi_components(self, xs):
        """Per-coordinate ``psi_i(x_i)``."""
        return [a * x + c(x) / (2 * np.pi) for a, c, x in zip(self.diag, self.phi.components, xs)]

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.d == 1:
            return self.psi_components([x])[0]
        return np.stack(self.psi_components([x[..., i] for i in range(self.d)]), axis=-1)

    def phi_kn(self, x):
        """``2 pi (psi(x) - x)``: the symbol phase (equals ``phi`` when ``A = 1``)."""
        return 2 * np.pi * (self(x) - np.asarray(x, dtype=float))

    def consistency(self, x) -> float:
        """``max |phi_kn - phi|`` on probes (zero up to rounding when ``A = 1``)."""
        return float(np.max(np.abs(self.phi_kn(x) - self.phi(x))))


def _points(grid_or_points):
    if isinstance(grid_or_points, UniformGrid):
        return grid_or_points.nodes
    return np.asarray(grid_or_points, dtype=float)


def compose(f, psi: CompositionMap, grid):
    """``f o psi`` by exact evaluation; a :class:`SampledSignal` on grids, an array on points."""
    if isinstance(f, TensorSignal):
        if not isinstance(grid, UniformGrid) or grid.d != 2:
            raise ValueError("tensor signals compose on 2-D grids")
        x = grid.nodes
        parts = psi.psi_components([x, x])
        vals = np.multiply.outer(f.factors[0](parts[0]), f.factors[1](parts[1]))
        return SampledSignal(grid, vals, f"{f.label}o{psi.label}")
    vals = f(psi(_points(grid)))
    if isinstance(grid, UniformGrid):
        return SampledSignal(grid, vals, f"{f.label}o{psi.label}")
    return vals


class QuadratureTailError(ArithmeticError):
    """The Fourier transform does not decay within the scanned frequency range."""


def kn_nodes(f: AnalyticSignal, rate: float, order: int = 16, tail_tol: float = KN_TAIL_TOL,
             scan: float = 200.0, periods_per_panel: float = 1.0):
    """Gauss-Legendre nodes and weights covering the essential support of ``fhat``.

    The interval is where ``|fhat| >= tail_tol * 1e-2 * max|fhat|`` on a scan of
    ``[-scan, scan]``; panels hold ``periods_per_panel`` periods of an
    oscillation at angular ``rate`` (``order`` nodes each).
    """
    fh = f.fourier()
    y = np.linspace(-scan, scan, 400001)
    la = fh.log_abs(y)
    top = np.max(la)
    if not np.isfinite(top):
        return np.zeros(0), np.zeros(0), fh  # zero signal
    keep = np.nonzero(la >= top + math.log(tail_tol * 1e-2))[0]
    if keep[0] == 0 or keep[-1] == y.size - 1:
        raise QuadratureTailError(f"Fourier transform of {f.label} still above {tail_tol:g} at |y| = {scan:g}")
    lo, hi = y[max(keep[0] - 1, 0)], y[min(keep[-1] + 1, y.size - 1)]
    width = 2 * np.pi * periods_per_panel / max(rate, 1.0)
    panels = max(1, int(math.ceil((hi - lo) / width)))
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights, fh


def kohn_nirenberg_apply(psi: CompositionMap, f, grid, order: int = 16, tail_tol: float = KN_TAIL_TOL):
    """``sigma(x, D) f`` at the grid nodes by Gauss-Legendre quadrature in frequency.

    Requires ``A = 1``; use :func:`affine_reduce` first otherwise.  Tensor
    signals on 2-D grids are handled factor by factor.
    """
    if not psi.is_translation_free:
        raise ValueError("Kohn-Nirenberg realisation needs A = 1; reduce the map first")
    if isinstance(f, TensorSignal):
        if not isinstance(grid, UniformGrid) or grid.d != 2:
            raise ValueError("tensor signals need a 2-D grid")
        x = grid.nodes
        outs = []
        for c, fj in zip(psi.phi.components, f.factors):
            sub = CompositionMap(PerturbationMap.scalar(c), 1.0)
            outs.append(kohn_nirenberg_apply(sub, fj, x, order, tail_tol))
        return SampledSignal(grid, np.multiply.outer(outs[0], outs[1]), f"KN[{f.label}]")
    x = _points(grid)
    phase = psi.phi_kn(x) + 2 * np.pi * x
    nodes, weights, fh = kn_nodes(f, float(np.max(np.abs(phase))) if phase.size else 1.0, order, tail_tol)
    coeffs = weights * fh(nodes)
    vals = _kernels.kn_sum(np.ascontiguousarray(phase), np.ascontiguousarray(nodes),
                           np.ascontiguousarray(coeffs, dtype=complex))
    if isinstance(grid, UniformGrid):
        return SampledSignal(grid, vals, f"KN[{f.label}]")
    return vals


@dataclass
class LossIndex:
    """Loss index ``t`` and the theorem's ``N``, with the weight exponent the theorem uses."""

    s: float
    b: float
    d: int
    t: float
    N: int
    theorem_exponent: float  # s + N b + N: polynomial order of v_{s+Nb} (1+|z2|)^N
    gap: float  # theorem_exponent - t (positive: t is below what the theorem's weight dominates)


def loss_index(s: float, b: float, d: int) -> LossIndex:
    """``t = (1+b)/(1-b) floor(2s) + s + 2d + 1`` and the smallest ``N`` with ``(1-b) N > 2(s+d)``."""
    if s < 0 or not 0 <= b < 1 or d < 1:
        raise ValueError("need s >= 0, 0 <= b < 1, d >= 1")
    t = (1 + b) / (1 - b) * math.floor(2 * s) + s + 2 * d + 1
    bound = 2 * (s + d) / (1 - b)
    N = int(math.floor(bound)) + 1
    while (1 - b) * (N - 1) > 2 * (s + d):  # guard against rounding in the division
        N -= 1
    th = s + N * b + N
    return LossIndex(s, b, d, t, N, th, th - t)


# --------------------------------------------------------------------------
# norm-ratio probes


def shift_family(g: AnalyticSignal, extent: float = 16.0, count: int = 9):
    """``M_beta T_a g`` for ``(a, beta)`` on a ``count x count`` lattice in ``[-extent, extent]^2``."""
    vals = np.linspace(-extent, extent, count)
    out = []
    for a in vals:
        for beta in vals:
            f = g.translate(float(a)).modulate(float(beta))
            out.append((float(a), float(beta), f))
    return out


@dataclass(frozen=True)
class ProbeGrids:
    """Integration grid, window positions and kept frequencies used for every norm."""

    signal: UniformGrid
    x: UniformGrid
    xi_count: int

    @classmethod
    def for_extent(cls, extent: float, margin: float = 12.0, dx: float = 0.25) -> "ProbeGrids":
        """Grids whose phase-space box is ``[-H, H]^2`` with ``H = extent + margin``.

        Window positions are spaced ``dx``; the integration grid extends 6 beyond
        the box (window tail far below 1e-14) and its dual covers ``[-H, H]``.
        """
        half = extent + margin
        xn = 2 * int(math.ceil(half / dx))
        L = half + 6.0
        n = 2 ** int(math.ceil(math.log2(4 * L * (half + 1.0))))
        sig = UniformGrid(1, L, n)
        keep = 2 * int(math.ceil(half / sig.dual().spacing))
        return cls(sig, UniformGrid(1, xn * dx / 2, xn), min(keep, n))


@dataclass
class ProbeResult:
    rows: list  # dicts: a, beta, shift, ratio, flags
    slope: float
    slope_stderr: float
    max_ratio: float
    median_ratio: float
    slope_max: float = SLOPE_MAX
    cap: float = CAP_MAX
    label: str = ""

    @property
    def cap_ratio(self) -> float:
        return self.max_ratio / self.median_ratio

    @property
    def bounded(self) -> bool:
        """Boundedness evidence: slope within threshold and max/median within the cap."""
        return bool(self.slope <= self.slope_max and self.cap_ratio <= self.cap)

    @property
    def flagged(self) -> list:
        return [r for r in self.rows if r["flags"]]

    def csv(self) -> str:
        return rows_to_csv(PROBE_CSV_COLUMNS, [{"family_param_a": r["a"], "family_param_beta": r["beta"],
                                                "ratio": r["ratio"], "flags": r["flags"]} for r in self.rows])


def _apply(T: str, psi: CompositionMap, f, grid: UniformGrid):
    if T == "identity":
        return f
    if T == "compose":
        return compose(f, psi, grid)
    if T == "kohn_nirenberg":
        return kohn_nirenberg_apply(psi, f, grid)
    raise ValueError(f"unknown operator {T!r}")


def norm_ratio_probe(T: str, psi: CompositionMap, family, m_src: TFWeight, m_tgt: TFWeight, p,
                     grids: ProbeGrids, window: AnalyticSignal | None = None, workers: int = 1,
                     slope_max: float = SLOPE_MAX, cap: float = CAP_MAX, label: str = "") -> ProbeResult:
    """Ratios ``||T f||_{M^p_{m_tgt}} / ||f||_{M^p_{m_src}}`` over a shift family.

    ``family`` holds ``(a, beta, f)`` triples.  The trend statistic is the
    least-squares slope of ``log r`` against ``|(a, beta)|`` (with its
    standard error); rows whose norms carry a tail above 1% are flagged.
    """
    g = window if window is not None else AnalyticSignal.normalized_gaussian()

    def one(item):
        a, beta, f = item
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", AccuracyWarning)
            src = mod_norm(f, g, m_src, p, grids.signal, grids.x, grids.xi_count, tail="frame", warn=False)
            Tf = _apply(T, psi, f, grids.signal)
            if isinstance(Tf, AnalyticSignal):
                tgt = mod_norm(Tf, g, m_tgt, p, grids.signal, grids.x, grids.xi_count, tail="frame", warn=False)
            else:
                tgt = mod_norm(Tf, g, m_tgt, p, grids.signal, grids.x, grids.xi_count, warn=False)
        flags = []
        if not src.accurate:
            flags.append("src_tail")
        if not tgt.accurate:
            flags.append("tgt_tail")
        return {"a": a, "beta": beta, "shift": math.hypot(a, beta), "ratio": tgt.norm / src.norm,
                "src": src.norm, "tgt": tgt.norm, "flags": ";".join(flags)}

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            rows = list(ex.map(one, family))
    else:
        rows = [one(it) for it in family]
    r = np.array([row["ratio"] for row in rows])
    R = np.array([row["shift"] for row in rows])
    if np.ptp(R) > 0:
        fit = stats.linregress(R, np.log(r))
        slope, err = float(fit.slope), float(fit.stderr)
    else:
        slope, err = 0.0, 0.0
    return ProbeResult(rows, slope, err, float(np.max(r)), float(np.median(r)), slope_max, cap, label)


# --------------------------------------------------------------------------
# affine reduction


@dataclass
class AffineReduction:
    """``psi = A o psi_reduced`` so that ``C_psi f = C_{psi_reduced}(f o A)``."""

    original: CompositionMap
    reduced: CompositionMap
    A: np.ndarray

    def apply(self, f, grid):
        """Factorised application ``C_{psi_reduced}(f o A)``."""
        if self.original.d == 1:
            fa = f.dilate(float(self.A[0])) if isinstance(f, AnalyticSignal) else (lambda t: f(self.A[0] * t))
        else:
            fa = TensorSignal(tuple(fj.dilate(float(a)) for fj, a in zip(f.factors, self.A)))
        return compose(fa, self.reduced, grid)

    @property
    def record(self) -> str:
        return f"psi = A o psi_reduced with A = diag{tuple(float(a) for a in self.A)}"


def affine_reduce(psi: CompositionMap) -> AffineReduction:
    """Factor ``psi(x) = A (x + A^{-1} phi(x) / (2 pi))`` (diagonal ``A``)."""
    a = psi.diag
    if np.any(a == 0):
        raise ValueError("singular affine part")
    comps = tuple(c.scale(1.0 / ai) if ai != 1.0 else c for c, ai in zip(psi.phi.components, a))
    reduced_phi = PerturbationMap(comps, psi.phi.b, psi.phi.C / float(np.min(np.abs(a))),
                                  psi.phi.bound_class, f"A^-1 {psi.phi.label}")
    reduced = CompositionMap(reduced_phi, 1.0 if psi.d == 1 else np.ones(psi.d), f"reduced[{psi.label}]")
    return AffineReduction(psi, reduced, a)
