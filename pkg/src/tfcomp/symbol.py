"""Perturbation maps, the symbol ``exp(i phi(x) y)`` and its 4-D STFT diagnostics.

For ``psi(x) = x + phi(x) / (2 pi)`` the composition ``f o psi`` is the
Kohn-Nirenberg operator with symbol ``sigma(x, y) = exp(i phi(x) y)``.  The
decay of ``V_{g (x) g} sigma`` in the frequency variables, measured against
growth in the space variables, controls boundedness of the operator.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .io import rows_to_csv
from .signal import AnalyticSignal, UniformGrid, physical_dft
from .stft import TRUNCATION_TOL, WindowTruncationError
from .weights import SubadditiveWeight, young_conjugate

__all__ = [
    "ScalarMap",
    "PerturbationMap",
    "GrowthReport",
    "symbol_eval",
    "MemoryBudgetError",
    "SymbolSTFT",
    "symbol_stft_4d",
    "symbol_stft_point",
    "conjugate_symmetry_residual",
    "DecayReport",
    "decay_ratio_poly",
    "decay_ratio_exp",
    "ExpDecayResult",
    "decay_report_csv",
    "DEFAULT_K_CANDIDATES",
    "STABILITY_TOL",
    "DEFAULT_BUDGET",
]

DEFAULT_K_CANDIDATES = (0, 1, 2, 4, 8, 16)
STABILITY_TOL = 0.05
DEFAULT_BUDGET = 1 << 30
DECAY_CSV_COLUMNS = ("phi_id", "mode", "N", "k", "sup_ratio", "stability")


# --------------------------------------------------------------------------
# scalar maps with exact derivatives


@dataclass(frozen=True)
class _Atom:
    kind: str  # const | linear | sine | bump
    amp: float = 0.0
    freq: float = 1.0
    phase: float = 0.0
    beta: float = 0.0

    def jets(self, x: np.ndarray, n_max: int) -> np.ndarray:
        """Derivatives of order ``0..n_max`` at ``x``, shape ``(n_max + 1, *x.shape)``."""
        out = np.zeros((n_max + 1,) + x.shape)
        if self.kind == "const":
            out[0] = self.amp
        elif self.kind == "linear":
            out[0] = self.amp * x
            if n_max >= 1:
                out[1] = self.amp
        elif self.kind == "sine":
            arg = self.freq * x + self.phase
            for k in range(n_max + 1):
                out[k] = self.amp * self.freq ** k * np.sin(arg + k * np.pi / 2)
        elif self.kind == "bump":
            # w = u^beta with u = 1 + x^2; Taylor coefficients from u w' = beta u' w
            U = (1.0 + x * x, 2.0 * x, np.ones_like(x))
            W = [U[0] ** self.beta]
            for k in range(1, n_max + 1):
                acc = np.zeros_like(x)
                for j in range(1, min(k, 2) + 1):
                    acc = acc + (self.beta * j - k + j) * U[j] * W[k - j]
                W.append(acc / (k * U[0]))
            for k in range(n_max + 1):
                out[k] = self.amp * math.factorial(k) * W[k]
        else:
            raise ValueError(f"unknown map atom {self.kind!r}")
        return out


@dataclass(frozen=True)
class ScalarMap:
    """Finite sum of constants, linear terms, sines and ``(1 + x^2)^beta`` bumps."""

    atoms: tuple = ()
    label: str = field(default="0", compare=False)

    @classmethod
    def zero(cls) -> "ScalarMap":
        return cls((), "0")

    @classmethod
    def const(cls, c: float) -> "ScalarMap":
        return cls((_Atom("const", amp=float(c)),), f"{c:g}")

    @classmethod
    def linear(cls, a: float) -> "ScalarMap":
        return cls((_Atom("linear", amp=float(a)),), f"{a:g}x")

    @classmethod
    def sine(cls, amp: float, freq: float = 1.0, phase: float = 0.0) -> "ScalarMap":
        return cls((_Atom("sine", amp=float(amp), freq=float(freq), phase=float(phase)),),
                   f"{amp:g}sin({freq:g}x+{phase:g})")

    @classmethod
    def bump(cls, amp: float, beta: float) -> "ScalarMap":
        """``amp * (1 + x^2)^beta``; grows like ``|x|^(2 beta)``."""
        return cls((_Atom("bump", amp=float(amp), beta=float(beta)),), f"{amp:g}(1+x^2)^{beta:g}")

    def __add__(self, other: "ScalarMap") -> "ScalarMap":
        return ScalarMap(self.atoms + other.atoms, f"{self.label}+{other.label}")

    def scale(self, c: float) -> "ScalarMap":
        atoms = tuple(_Atom(a.kind, a.amp * c, a.freq, a.phase, a.beta) for a in self.atoms)
        return ScalarMap(atoms, f"{c:g}*({self.label})")

    def jets(self, x, n_max: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros((n_max + 1,) + x.shape)
        for a in self.atoms:
            out += a.jets(x, n_max)
        return out

    def __call__(self, x) -> np.ndarray:
        return self.jets(x, 0)[0]

    def derivative(self, x, n: int) -> np.ndarray:
        return self.jets(x, n)[n]

    @property
    def is_constant(self) -> bool:
        return all(a.kind == "const" for a in self.atoms)


@dataclass
class GrowthReport:
    worst_ratio: float  # max |phi(x)| / (1 + |x|)^b over the probe grid
    constant: float
    passed: bool


@dataclass(frozen=True)
class PerturbationMap:
    """Smooth ``phi: R^d -> R^d`` with separable components ``phi_i(x) = c_i(x_i)``.

    Parameters
    ----------
    components : tuple of ScalarMap
        One scalar map per coordinate.
    b : float
        Declared growth exponent, ``|phi(x)| <= C (1 + |x|)^b``.
    C : float
        Declared growth constant.
    bound_class : {"schwartz", "ultra"}
        Derivative-bound class: all derivatives of order >= 1 bounded, or
        Gevrey-type bounds measured by :meth:`ultra_norm`.
    """

    components: tuple
    b: float = 0.0
    C: float = 1.0
    bound_class: str = "ultra"
    label: str = field(default="phi", compare=False)

    def __post_init__(self):
        if not 0.0 <= self.b < 1.0:
            raise ValueError(f"growth exponent must lie in [0, 1), got {self.b}")
        if self.bound_class not in ("schwartz", "ultra"):
            raise ValueError(f"unknown derivative-bound class {self.bound_class!r}")

    @classmethod
    def scalar(cls, m: ScalarMap, b: float = 0.0, C: float = 1.0, bound_class: str = "ultra",
               label: str | None = None) -> "PerturbationMap":
        return cls((m,), b, C, bound_class, label or m.label)

    @classmethod
    def zero(cls, d: int = 1) -> "PerturbationMap":
        return cls(tuple(ScalarMap.zero() for _ in range(d)), 0.0, 1.0, "ultra", "zero")

    @property
    def d(self) -> int:
        return len(self.components)

    def _split(self, x):
        x = np.asarray(x, dtype=float)
        if self.d == 1:
            return [x]
        if x.shape[-1] != self.d:
            raise ValueError(f"points need a trailing axis of length {self.d}")
        return [x[..., i] for i in range(self.d)]

    def __call__(self, x) -> np.ndarray:
        xs = self._split(x)
        if self.d == 1:
            return self.components[0](xs[0])
        return np.stack([c(xi) for c, xi in zip(self.components, xs)], axis=-1)

    def jets(self, x, n_max: int) -> list:
        """Per-component derivative arrays ``(n_max + 1, ...)``."""
        return [c.jets(xi, n_max) for c, xi in zip(self.components, self._split(x))]

    def verify_growth(self, x_max: float = 1e3, npts: int = 20001) -> GrowthReport:
        """Check ``|phi(x)| <= C (1 + |x|)^b`` on ``[-x_max, x_max]`` (per component for d > 1)."""
        t = np.linspace(-x_max, x_max, npts)
        vals = np.stack([np.abs(c(t)) for c in self.components])
        # separable maps are checked axis by axis: |phi_i(x_i)| <= C (1 + |x_i|)^b
        ratio = np.max(vals, axis=0) / (1 + np.abs(t)) ** self.b
        worst = float(np.max(ratio))
        return GrowthReport(worst, self.C, worst <= self.C * (1 + 1e-12))

    def derivative_sup(self, orders=range(1, 7), x_max: float = 50.0, npts: int = 4001) -> dict:
        """``sup |phi_i^(n)|`` over a grid, per order (max over components)."""
        t = np.linspace(-x_max, x_max, npts)
        n_max = max(orders)
        jets = [c.jets(t, n_max) for c in self.components]
        return {n: float(max(np.max(np.abs(j[n])) for j in jets)) for n in orders}

    def ultra_norm(self, w: SubadditiveWeight, ell: float, n_max: int = 15, x_max: float = 50.0,
                   npts: int = 2001) -> float:
        """``||phi'||_{ell,inf,omega} = sup_{x, a <= n_max} |phi^(a+1)(x)| exp(-ell phi*(a / ell))``."""
        t = np.linspace(-x_max, x_max, npts)
        a = np.arange(n_max + 1)
        damp = np.exp(-ell * young_conjugate(w, a / ell))
        best = 0.0
        for c in self.components:
            j = c.jets(t, n_max + 1)[1:]
            best = max(best, float(np.max(np.max(np.abs(j), axis=1) * damp)))
        return best


def symbol_eval(phi: PerturbationMap, x, y) -> np.ndarray:
    """``sigma(x, y) = exp(i phi(x) . y)``."""
    if phi.d == 1:
        return np.exp(1j * phi(x) * np.asarray(y, dtype=float))
    return np.exp(1j * np.sum(phi(x) * np.asarray(y, dtype=float), axis=-1))


# --------------------------------------------------------------------------
# 4-D STFT of the symbol (d = 1)


class MemoryBudgetError(MemoryError):
    """The requested 4-D array does not fit the configured memory budget."""

    def __init__(self, required: int, budget: int):
        super().__init__(f"symbol STFT needs about {required} bytes ({required / 2 ** 20:.1f} MiB), "
                         f"budget is {budget} bytes ({budget / 2 ** 20:.1f} MiB)")
        self.required = required
        self.budget = budget


@dataclass
class SymbolSTFT:
    """``V[i, j, k, l] = V_{g (x) g} sigma(z1_i, z2_j, zeta1_k, zeta2_l)``."""

    phi: PerturbationMap
    window: AnalyticSignal
    z_grid: UniformGrid
    zeta_grid: UniformGrid
    values: np.ndarray
    local_half_width: float
    n_local: int
    budget: int = DEFAULT_BUDGET
    workers: int = 1
    _wide: "SymbolSTFT | None" = field(default=None, repr=False)

    def __post_init__(self):
        shape = (self.z_grid.n,) * 2 + (self.zeta_grid.n,) * 2
        if self.values.shape != shape:
            raise ValueError(f"values have shape {self.values.shape}, expected {shape}")

    @property
    def axes(self) -> tuple:
        z = self.z_grid.nodes
        e = self.zeta_grid.nodes
        return z, z, e, e

    def widened(self) -> "SymbolSTFT":
        """Recompute with both the z-range and the zeta-range doubled.

        The zeta spacing is kept (same local window patch, twice the local
        resolution); the z spacing is coarsened by four to stay within the
        same memory.  Cached after the first call.
        """
        if self._wide is None:
            zg = UniformGrid(1, 2 * self.z_grid.L, max(8, self.z_grid.n // 2))
            self._wide = symbol_stft_4d(self.phi, self.window, zg, 2 * self.zeta_grid.n,
                                        self.local_half_width, 2 * self.n_local, self.budget, self.workers)
        return self._wide

    @property
    def window_l1_sq(self) -> float:
        """``(int |g|)^2``, the pointwise bound on ``|V|`` since ``|sigma| = 1``."""
        t = np.linspace(-12, 12, 24001)
        return float((np.sum(np.abs(self.window(t))) * (t[1] - t[0])) ** 2)

    def to_bytes(self) -> bytes:
        head = self.z_grid.header() * 2 + self.zeta_grid.header() * 2
        return head + np.ascontiguousarray(self.values, dtype="<c16").tobytes()


def _estimate_bytes(nz: int, n_zeta: int, n_local: int, workers: int) -> int:
    out = nz * nz * n_zeta * n_zeta * 16
    work = max(1, workers) * nz * n_local * n_local * 16 * 3
    return out + work


def symbol_stft_4d(phi: PerturbationMap, g: AnalyticSignal | None = None, z_grid: UniformGrid | None = None,
                   n_zeta: int = 64, local_half_width: float = 3.25, n_local: int | None = None,
                   budget: int = DEFAULT_BUDGET, workers: int = 1) -> SymbolSTFT:
    """Full 4-D STFT of ``sigma(x, y) = exp(i phi(x) y)`` with window ``g (x) g``.

    For each ``(z1, z2)`` the integrand is sampled on the local patch
    ``(z1 + u, z2 + v)``, ``u, v`` on a grid of half width
    ``local_half_width`` with ``n_local`` nodes, transformed by a 2-D FFT and
    cropped to the central ``n_zeta`` frequencies per axis (``n_local`` defaults
    to ``2 n_zeta`` so that the kept band is free of aliasing).

    Raises
    ------
    MemoryBudgetError
        If the output plus working buffers exceed ``budget`` bytes.
    WindowTruncationError
        If the window exceeds ``TRUNCATION_TOL`` (relative) at the patch edge.
    """
    if phi.d != 1:
        raise ValueError("the full 4-D sweep is implemented for d = 1 only")
    g = g if g is not None else AnalyticSignal.normalized_gaussian()
    z_grid = z_grid if z_grid is not None else UniformGrid(1, 8.0, 64)
    n_local = n_local if n_local is not None else 2 * n_zeta
    if n_zeta > n_local:
        raise ValueError("cannot keep more frequencies than local nodes")
    need = _estimate_bytes(z_grid.n, n_zeta, n_local, workers)
    if need > budget:
        raise MemoryBudgetError(need, budget)
    loc = UniformGrid(1, local_half_width, n_local)
    u = loc.nodes
    gu = np.conj(g(u))
    edge = max(abs(gu[0]), abs(g(loc.L))) / np.max(np.abs(gu))
    if edge > TRUNCATION_TOL:
        raise WindowTruncationError(f"window reaches {edge:.3e} of its peak at the patch edge")
    zeta_grid = loc.dual().crop(n_zeta)
    keep = loc.dual().crop_slice(n_zeta)
    z = z_grid.nodes
    zeta = zeta_grid.nodes
    win = gu[:, None] * gu[None, :]
    ph_z = np.exp(-2j * np.pi * np.outer(z, zeta))  # (nz, n_zeta)
    comp = phi.components[0]
    out = np.empty((z.size, z.size, n_zeta, n_zeta), dtype=complex)

    def one(i):
        phx = comp(z[i] + u)  # (n_local,)
        y = z[:, None] + u[None, :]  # (nz, n_local) values z2 + v
        patch = np.exp(1j * phx[None, :, None] * y[:, None, :]) * win[None]
        F = physical_dft(patch, loc, axis=1, sign=-1)[:, keep, :]
        F = physical_dft(F, loc, axis=2, sign=-1)[:, :, keep]
        out[i] = F * ph_z[i][None, :, None] * ph_z[:, None, :]

    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            list(ex.map(one, range(z.size)))
    else:
        for i in range(z.size):
            one(i)
    return SymbolSTFT(phi, g, z_grid, zeta_grid, out, local_half_width, n_local, budget, workers)


def symbol_stft_point(phi: PerturbationMap, g: AnalyticSignal, z1: float, z2: float, zeta1: float, zeta2: float,
                      half_width: float = 6.0, n: int = 1024) -> complex:
    """Direct 2-D Riemann sum of the symbol STFT at one point (independent oracle)."""
    t = np.linspace(-half_width, half_width, n, endpoint=False)
    h = t[1] - t[0]
    x = z1 + t
    y = z2 + t
    gx = np.conj(g(t)) * np.exp(-2j * np.pi * x * zeta1)
    gy = np.conj(g(t)) * np.exp(-2j * np.pi * y * zeta2)
    sig = np.exp(1j * phi.components[0](x)[:, None] * y[None, :])
    return complex(gx @ sig @ gy * h * h)


def conjugate_symmetry_residual(V: SymbolSTFT, form: str = "real") -> float:
    """Largest violation of a conjugation symmetry of the symbol STFT (even real window).

    ``form="real"`` (any real ``phi``): ``conj V(z1, z2, zeta1, zeta2) = V(z1, -z2, -zeta1, zeta2)``;
    ``form="even"`` (even real ``phi``): ``conj V(z, zeta) = V(-z, zeta)``.
    Grid nodes ``-L + j h`` are mirrored by ``j -> n - j``, so index 0 is dropped.
    """
    a = V.values[:, 1:, 1:, :]
    if form == "real":
        mirrored = V.values[:, :0:-1, :0:-1, :]
        return float(np.max(np.abs(np.conj(a) - mirrored)))
    if form == "even":
        a = V.values[1:, 1:]
        mirrored = V.values[:0:-1, :0:-1]
        return float(np.max(np.abs(np.conj(a) - mirrored)))
    raise ValueError(f"form must be 'real' or 'even', got {form!r}")


# --------------------------------------------------------------------------
# decay ratios


@dataclass
class DecayReport:
    mode: str
    N: float
    k: float
    b: float
    sup_ratio: float
    sup_wide: float
    stability: float  # relative growth of the sup when the domain is doubled
    argmax: tuple
    phi_id: str = ""

    @property
    def stable(self) -> bool:
        return bool(np.isfinite(self.sup_ratio) and self.stability < STABILITY_TOL)

    def row(self) -> dict:
        return {"phi_id": self.phi_id, "mode": self.mode, "N": self.N, "k": self.k,
                "sup_ratio": self.sup_ratio, "stability": self.stability}


def _log_sup(V: SymbolSTFT, logw) -> tuple[float, tuple]:
    w = [np.ascontiguousarray(np.broadcast_to(np.asarray(lw, dtype=float), (ax.size,)))
         for lw, ax in zip(logw(*V.axes), V.axes)]
    best, idx = _kernels.weighted_sup_4d(V.values, *w)
    z = V.axes
    return best, tuple(float(z[a][i]) for a, i in enumerate(idx))


def _ratio(V: SymbolSTFT, logw, mode, N, k, b, wide: bool) -> DecayReport:
    base, where = _log_sup(V, logw)
    if wide:
        wsup, wwhere = _log_sup(V.widened(), logw)
    else:
        wsup, wwhere = base, where
    total = max(base, wsup)
    growth = float(np.expm1(total - base)) if np.isfinite(base) else np.inf
    arg = wwhere if wsup > base else where
    return DecayReport(mode, N, k, b, float(np.exp(base)), float(np.exp(total)), growth, arg, V.phi.label)


def decay_ratio_poly(V: SymbolSTFT, N: int, mode: str, b: float = 0.0, wide: bool = True) -> DecayReport:
    """Polynomial decay ratio and its stability under doubling of the domain.

    ``zeta1``: ``sup (1 + |zeta1|)^N |V| / (1 + |z2|)^N``;
    ``zeta2``: ``sup (1 + |zeta2|)^N |V| / (1 + |z1|)^(N b)``.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    if mode == "zeta1":
        def logw(z1, z2, e1, e2):
            return 0.0, -N * np.log1p(np.abs(z2)), N * np.log1p(np.abs(e1)), 0.0
    elif mode == "zeta2":
        def logw(z1, z2, e1, e2):
            return -N * b * np.log1p(np.abs(z1)), 0.0, 0.0, N * np.log1p(np.abs(e2))
    else:
        raise ValueError(f"mode must be 'zeta1' or 'zeta2', got {mode!r}")
    return _ratio(V, logw, mode, N, 0.0, b, wide)


@dataclass
class ExpDecayResult:
    k: float | None
    sup_ratio: float
    reports: list

    @property
    def passed(self) -> bool:
        return self.k is not None


class NoStableCandidateError(RuntimeError):
    def __init__(self, reports):
        lines = ", ".join(f"k={r.k:g}: sup {r.sup_ratio:.3e} growth {r.stability:.2%}" for r in reports)
        super().__init__(f"no candidate k gives a stable ratio ({lines})")
        self.reports = reports


def decay_ratio_exp(V: SymbolSTFT, w: SubadditiveWeight, N: float, mode: str, b: float = 0.0,
                    candidates=DEFAULT_K_CANDIDATES, raise_on_fail: bool = False) -> ExpDecayResult:
    """Smallest ``k`` from ``candidates`` with a stable exponential decay ratio.

    ``zeta1_vs_z2``: ``sup exp(N w(zeta1) - k w(z2)) |V|``;
    ``zeta2_vs_z1b``: ``sup exp(N w(zeta2) - k w(|z1|^b)) |V|``.
    """
    reports = []
    for k in candidates:
        if mode == "zeta1_vs_z2":
            def logw(z1, z2, e1, e2, k=k):
                return 0.0, -k * w(np.abs(z2)), N * w(np.abs(e1)), 0.0
        elif mode == "zeta2_vs_z1b":
            def logw(z1, z2, e1, e2, k=k):
                return -k * w(np.abs(z1) ** b), 0.0, 0.0, N * w(np.abs(e2))
        else:
            raise ValueError(f"mode must be 'zeta1_vs_z2' or 'zeta2_vs_z1b', got {mode!r}")
        rep = _ratio(V, logw, mode, N, float(k), b, True)
        reports.append(rep)
        if rep.stable:
            return ExpDecayResult(float(k), rep.sup_ratio, reports)
    if raise_on_fail:
        raise NoStableCandidateError(reports)
    return ExpDecayResult(None, float("nan"), reports)


def decay_report_csv(reports) -> str:
    return rows_to_csv(DECAY_CSV_COLUMNS, [r.row() for r in reports])
