"""Short-time Fourier transform, Rihaczek distribution and two STFT identities.

``V_g f(x, xi) = int f(t) conj(g(t - x)) exp(-2 pi i t xi) dt``.

Three independent routes are provided:

* :func:`stft` -- batched FFT of the windowed slices (the production path);
* :func:`stft_points` -- direct Riemann sums at arbitrary points;
* :func:`stft_exact` -- closed form through the signal algebra, since
  ``V_g f(x, .)`` is the Fourier transform of ``f * conj(T_x g)``.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .signal import AnalyticSignal, SampledSignal, UniformGrid, physical_dft, _pack_complex, _unpack_complex

__all__ = [
    "TFMatrix",
    "WindowTruncationError",
    "stft",
    "stft_points",
    "stft_exact",
    "stft_exact_log_abs",
    "stft_tensor",
    "orthogonality_check",
    "OrthogonalityResult",
    "rihaczek",
    "rihaczek_stft_identity_check",
    "TRUNCATION_TOL",
]

TRUNCATION_TOL = 1e-14
_BATCH_BYTES = 64 << 20


class WindowTruncationError(ValueError):
    """The windowed slice does not decay at the edge of the integration grid."""


@dataclass
class TFMatrix:
    """STFT values ``V[j, k] = V_g f(x_j, xi_k)`` on two uniform grids."""

    x_grid: UniformGrid
    xi_grid: UniformGrid
    values: np.ndarray
    window: str = "window"
    tail: float = 0.0  # largest relative edge value of the windowed slices

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        shape = (self.x_grid.n,) * self.x_grid.d + (self.xi_grid.n,) * self.xi_grid.d
        if self.values.shape != shape:
            raise ValueError(f"values have shape {self.values.shape}, grids imply {shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("STFT values must be finite")

    @property
    def cell(self) -> float:
        return self.x_grid.cell * self.xi_grid.cell

    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    def inner(self, other: "TFMatrix") -> complex:
        """Riemann sum of ``V1 conj(V2)`` over phase space."""
        return complex(np.sum(self.values * np.conj(other.values)) * self.cell)

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.cell))

    def to_bytes(self) -> bytes:
        return self.x_grid.header() + self.xi_grid.header() + _pack_complex(self.values)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "TFMatrix":
        grids = []
        for k in range(2):
            d, n, L = struct.unpack_from("<3d", blob, 24 * k)
            grids.append(UniformGrid(int(d), L, int(n)))
        shape = (grids[0].n,) * grids[0].d + (grids[1].n,) * grids[1].d
        return cls(grids[0], grids[1], _unpack_complex(blob[48:], shape))


def _values_on(f, grid: UniformGrid) -> np.ndarray:
    if isinstance(f, SampledSignal):
        if f.grid != grid:
            raise ValueError("sampled signal lives on a different grid")
        return f.values
    return np.asarray(f(grid.nodes), dtype=complex)


def stft(f, g: AnalyticSignal, grid: UniformGrid, x_grid: UniformGrid | None = None,
         xi_count: int | None = None, check: bool = True) -> TFMatrix:
    """FFT-based STFT on ``x_grid`` times a centred crop of ``grid.dual()``.

    Parameters
    ----------
    f : AnalyticSignal or SampledSignal
        Signal; sampled signals must live on ``grid``.
    g : AnalyticSignal
        Window, evaluated exactly at ``t - x``.
    grid : UniformGrid
        One-dimensional integration grid.
    x_grid : UniformGrid, optional
        Window positions; defaults to the centred half of ``grid``.
    xi_count : int, optional
        Number of frequencies kept (centred crop of the dual grid); all by default.
    check : bool
        Raise :class:`WindowTruncationError` if a windowed slice exceeds
        ``TRUNCATION_TOL`` (relative) at the grid edge.
    """
    if grid.d != 1:
        raise ValueError("stft works on one-dimensional grids; use stft_tensor for d = 2")
    if x_grid is None:
        x_grid = grid.crop(grid.n // 2)
    xi_full = grid.dual()
    m = xi_full.n if xi_count is None else xi_count
    keep = xi_full.crop_slice(m)
    t = grid.nodes
    fv = _values_on(f, grid)
    xs = x_grid.nodes
    out = np.empty((xs.size, m), dtype=complex)
    batch = max(1, _BATCH_BYTES // (16 * grid.n))
    tail = 0.0
    for s in range(0, xs.size, batch):
        xb = xs[s:s + batch]
        slab = fv[None, :] * np.conj(g(t[None, :] - xb[:, None]))
        peak = np.max(np.abs(slab))
        if peak > 0:
            edge = max(np.max(np.abs(slab[:, 0])), np.max(np.abs(slab[:, -1])))
            tail = max(tail, float(edge / peak))
        out[s:s + batch] = physical_dft(slab, grid, axis=1, sign=-1)[:, keep]
    if check and tail > TRUNCATION_TOL:
        raise WindowTruncationError(
            f"windowed slice reaches {tail:.3e} of its peak at the grid edge (limit {TRUNCATION_TOL:g}); "
            f"widen the grid or shrink the x range")
    return TFMatrix(x_grid, xi_full.crop(m), out, getattr(g, "label", "window"), tail)


def stft_points(f, g, x, xi, grid: UniformGrid) -> np.ndarray:
    """Direct Riemann sum of the STFT integral at broadcastable points ``(x, xi)``."""
    x, xi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))
    t = grid.nodes
    fv = f(t) if not isinstance(f, SampledSignal) else f.values
    flat_x, flat_xi = x.ravel(), xi.ravel()
    out = np.empty(flat_x.size, dtype=complex)
    step = max(1, (1 << 20) // t.size)
    for s in range(0, flat_x.size, step):
        xb, eb = flat_x[s:s + step, None], flat_xi[s:s + step, None]
        integrand = fv[None, :] * np.conj(g(t[None, :] - xb)) * np.exp(-2j * np.pi * t[None, :] * eb)
        out[s:s + step] = np.sum(integrand, axis=1) * grid.spacing
    return out.reshape(x.shape)


def stft_exact(f: AnalyticSignal, g: AnalyticSignal, x, xi) -> np.ndarray:
    """Closed-form STFT of decaying closed-form signals at points ``(x, xi)``."""
    x, xi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))
    out = np.empty(x.shape, dtype=complex)
    gc = g.conj()
    for xv in np.unique(x):
        sel = x == xv
        out[sel] = (f * gc.translate(float(xv))).fourier()(xi[sel])
    return out


def stft_exact_log_abs(f: AnalyticSignal, g: AnalyticSignal, x, xi) -> np.ndarray:
    """``log |V_g f(x, xi)|`` in closed form, finite far into the tails."""
    x, xi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))
    out = np.empty(x.shape, dtype=float)
    gc = g.conj()
    for xv in np.unique(x):
        sel = x == xv
        out[sel] = (f * gc.translate(float(xv))).fourier().log_abs(xi[sel])
    return out


def stft_tensor(f1, f2, g1: AnalyticSignal, g2: AnalyticSignal, grid: UniformGrid,
                x_grid: UniformGrid | None = None, xi_count: int | None = None) -> TFMatrix:
    """STFT on R^2 of ``f1 (x) f2`` with window ``g1 (x) g2``.

    The 2-D integral factorises, so the result is the outer product of two
    1-D STFTs, arranged as ``V[x1, x2, xi1, xi2]``.
    """
    A = stft(f1, g1, grid, x_grid, xi_count)
    B = stft(f2, g2, grid, x_grid, xi_count)
    vals = np.einsum("ik,jl->ijkl", A.values, B.values)
    xg = UniformGrid(2, A.x_grid.L, A.x_grid.n)
    eg = UniformGrid(2, A.xi_grid.L, A.xi_grid.n)
    return TFMatrix(xg, eg, vals, f"{A.window}(x){B.window}", max(A.tail, B.tail))


@dataclass
class OrthogonalityResult:
    lhs: complex
    rhs: complex
    residual: float


def orthogonality_check(f1, f2, g1, g2, grid: UniformGrid, x_grid: UniformGrid | None = None) -> OrthogonalityResult:
    """Compare ``<V_{g1} f1, V_{g2} f2>`` with ``<f1, f2> conj(<g1, g2>)``.

    Both sides use Riemann sums on ``grid`` (phase space for the left side).
    """
    V1 = stft(f1, g1, grid, x_grid)
    V2 = stft(f2, g2, grid, x_grid)
    lhs = V1.inner(V2)
    t = grid.nodes
    ip_f = np.sum(f1(t) * np.conj(f2(t))) * grid.spacing
    ip_g = np.sum(g1(t) * np.conj(g2(t))) * grid.spacing
    rhs = complex(ip_f * np.conj(ip_g))
    return OrthogonalityResult(lhs, rhs, float(abs(lhs - rhs)))


def rihaczek(g: AnalyticSignal, f: AnalyticSignal, x, xi) -> np.ndarray:
    """``R(g, f)(x, xi) = exp(-2 pi i x xi) g(x) conj(fhat(xi))`` (closed-form transform)."""
    x, xi = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))
    fh = f.fourier()
    return np.exp(-2j * np.pi * x * xi) * g(x) * np.conj(fh(xi))


@dataclass
class IdentityReport:
    points: np.ndarray  # (P, 4) rows (z1, z2, zeta1, zeta2)
    lhs: np.ndarray
    rhs: np.ndarray

    @property
    def residual(self) -> float:
        return float(np.max(np.abs(self.lhs - self.rhs)))


def rihaczek_stft_identity_check(f: AnalyticSignal, g: AnalyticSignal, phi1: AnalyticSignal,
                                 phi2: AnalyticSignal, points, L: float = 8.0, n: int = 256) -> IdentityReport:
    """Both sides of the STFT-of-Rihaczek identity at 4-D probe points.

    Left: ``V_{Phi0} R(g, f)(z, zeta)`` with ``Phi0 = R(phi1, phi2)`` by a 2-D
    Riemann sum on ``[-L, L)^2`` with ``n^2`` nodes.  Right:
    ``exp(-2 pi i z2 zeta2) V_{phi1} g(z1, z2 + zeta1) conj(V_{phi2} f(z1 + zeta2, z2))``
    from the closed-form STFT.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    grid = UniformGrid(1, L, n)
    t = grid.nodes
    X, Y = np.meshgrid(t, t, indexing="ij")
    R = rihaczek(g, f, X, Y)
    lhs = np.empty(len(pts), dtype=complex)
    for i, (z1, z2, w1, w2) in enumerate(pts):
        W = rihaczek(phi1, phi2, X - z1, Y - z2)
        kern = np.exp(-2j * np.pi * (X * w1 + Y * w2))
        lhs[i] = np.sum(R * np.conj(W) * kern) * grid.spacing ** 2
    z1, z2, w1, w2 = pts.T
    rhs = (np.exp(-2j * np.pi * z2 * w2) * stft_exact(g, phi1, z1, z2 + w1)
           * np.conj(stft_exact(f, phi2, z1 + w2, z2)))
    return IdentityReport(pts, lhs, rhs)
