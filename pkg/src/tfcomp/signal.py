"""Uniform grids, closed-form signals and the continuous Fourier transform.

Fourier convention: ``fhat(xi) = int f(t) exp(-2 pi i t xi) dt``.

Closed-form signals are finite sums of terms ``P(t) exp(c2 t^2 + c1 t + c0)``
with complex polynomial ``P``.  The family is closed under differentiation,
translation, modulation, dilation, products and (for ``Re c2 < 0``) the
Fourier transform, so none of these operations needs interpolation.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import hermite as H
from numpy.polynomial import polynomial as P

__all__ = [
    "UniformGrid",
    "AnalyticSignal",
    "TensorSignal",
    "SampledSignal",
    "sample",
    "fourier",
    "inverse_fourier",
    "physical_dft",
]


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class UniformGrid:
    """Nodes ``x_j = -L + j * (2L/n)``, ``j = 0..n-1`` on each of ``d`` axes."""

    d: int
    L: float
    n: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"grid dimension must be 1 or 2, got {self.d}")
        if self.n < 8 or self.n % 2:
            raise ValueError(f"grid needs an even n >= 8, got {self.n}")
        if self.L <= 0:
            raise ValueError("half width must be positive")

    @property
    def spacing(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def nodes(self) -> np.ndarray:
        return -self.L + self.spacing * np.arange(self.n)

    @property
    def cell(self) -> float:
        return self.spacing ** self.d

    def mesh(self) -> tuple[np.ndarray, ...]:
        x = self.nodes
        if self.d == 1:
            return (x,)
        return tuple(np.meshgrid(x, x, indexing="ij"))

    def dual(self) -> "UniformGrid":
        """Frequency grid: spacing ``1/(2L)``, half width ``n/(4L)``."""
        return UniformGrid(self.d, self.n / (4.0 * self.L), self.n)

    def crop(self, m: int) -> "UniformGrid":
        """Centred sub-grid with ``m`` nodes per axis (same spacing)."""
        if m > self.n or m % 2:
            raise ValueError(f"cannot crop {self.n} nodes to {m}")
        return UniformGrid(self.d, self.L * m / self.n, m)

    def crop_slice(self, m: int) -> slice:
        off = (self.n - m) // 2
        return slice(off, off + m)

    def header(self) -> bytes:
        return struct.pack("<3d", float(self.d), float(self.n), float(self.L))


# --------------------------------------------------------------------------
# closed-form signals


@dataclass(frozen=True)
class _Term:
    poly: tuple  # ascending complex coefficients
    c2: complex
    c1: complex
    c0: complex

    def coeffs(self) -> np.ndarray:
        return np.asarray(self.poly, dtype=complex)


def _trim(c: np.ndarray) -> tuple:
    c = np.asarray(c, dtype=complex)
    if c.size == 0:
        return (0j,)
    nz = np.nonzero(c)[0]
    if nz.size == 0:
        return (0j,)
    return tuple(complex(v) for v in c[: nz[-1] + 1])


def _gauss_moments(mu, v, kmax: int) -> list:
    """Moments ``E[t^k]``, ``k <= kmax``, of a (complex) normal N(mu, v)."""
    M = [np.ones_like(mu), mu]
    for k in range(2, kmax + 1):
        M.append(mu * M[k - 1] + (k - 1) * v * M[k - 2])
    return M[: kmax + 1]


@dataclass(frozen=True)
class AnalyticSignal:
    """Sum of polynomial-times-Gaussian-type terms with exact calculus."""

    terms: tuple
    label: str = field(default="signal", compare=False)

    # constructors -------------------------------------------------------
    @classmethod
    def gaussian(cls, amplitude: complex = 1.0, width: float = 1.0, center: float = 0.0,
                 modulation: float = 0.0, label: str | None = None) -> "AnalyticSignal":
        """``amp * exp(-pi a (t - x0)^2) * exp(2 pi i beta t)``."""
        if width <= 0:
            raise ValueError("Gaussian width must be positive")
        a, x0, b = width, center, modulation
        term = _Term((complex(amplitude),), -np.pi * a, 2 * np.pi * a * x0 + 2j * np.pi * b,
                     -np.pi * a * x0 * x0 + 0j)
        return cls((term,), label or f"gauss(a={a:g},x0={x0:g},b={b:g})")

    @classmethod
    def normalized_gaussian(cls, width: float = 1.0) -> "AnalyticSignal":
        """L2-normalised ``exp(-pi a t^2)``."""
        return cls.gaussian((2.0 * width) ** 0.25, width, label=f"g{width:g}")

    @classmethod
    def hermite(cls, order: int) -> "AnalyticSignal":
        """L2-normalised Hermite function ``c_n H_n(sqrt(2 pi) t) exp(-pi t^2)``."""
        if order < 0:
            raise ValueError("Hermite order must be non-negative")
        e = np.zeros(order + 1)
        e[order] = 1.0
        c = H.herm2poly(e) * (np.sqrt(2 * np.pi) ** np.arange(order + 1))
        norm = 2 ** 0.25 / math.sqrt(2.0 ** order * math.factorial(order))
        return cls((_Term(_trim(c * norm), -np.pi + 0j, 0j, 0j),), f"hermite{order}")

    @classmethod
    def plane_wave(cls, freq: float, label: str | None = None) -> "AnalyticSignal":
        """``exp(i freq t)`` (angular frequency)."""
        return cls((_Term((1 + 0j,), 0j, 1j * freq, 0j),), label or f"wave({freq:g})")

    @classmethod
    def constant(cls, value: complex = 1.0) -> "AnalyticSignal":
        return cls((_Term((complex(value),), 0j, 0j, 0j),), f"const({value})")

    @classmethod
    def chirp(cls, rate: float, width: float = 0.0, label: str | None = None) -> "AnalyticSignal":
        """``exp(i pi rate t^2) exp(-pi width t^2)``."""
        return cls((_Term((1 + 0j,), -np.pi * width + 1j * np.pi * rate, 0j, 0j),),
                   label or f"chirp(c={rate:g},a={width:g})")

    @classmethod
    def polynomial(cls, coeffs: Sequence[complex]) -> "AnalyticSignal":
        return cls((_Term(_trim(coeffs), 0j, 0j, 0j),), "poly")

    # evaluation ---------------------------------------------------------
    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        for tm in self.terms:
            out = out + P.polyval(t, tm.coeffs()) * np.exp(tm.c2 * t * t + tm.c1 * t + tm.c0)
        return out

    def log_abs(self, t):
        """``log |f(t)|`` computed without under/overflow of the exponentials."""
        t = np.asarray(t, dtype=float)
        expo = [tm.c2 * t * t + tm.c1 * t + tm.c0 for tm in self.terms]
        M = np.max(np.stack([np.real(e) for e in expo]), axis=0)
        acc = np.zeros(t.shape, dtype=complex)
        for tm, e in zip(self.terms, expo):
            acc = acc + P.polyval(t, tm.coeffs()) * np.exp(e - M)
        with np.errstate(divide="ignore"):
            return M + np.log(np.abs(acc))

    @property
    def decays(self) -> bool:
        return all(tm.c2.real < 0 for tm in self.terms)

    def derivative(self, n: int = 1) -> "AnalyticSignal":
        if n < 0:
            raise ValueError("derivative order must be non-negative")
        terms = list(self.terms)
        for _ in range(n):
            new = []
            for tm in terms:
                c = tm.coeffs()
                dq = np.array([tm.c1, 2 * tm.c2])
                poly = P.polyadd(P.polyder(c) if c.size > 1 else [0j], P.polymul(c, dq))
                new.append(_Term(_trim(poly), tm.c2, tm.c1, tm.c0))
            terms = new
        return AnalyticSignal(tuple(terms), f"D{n}[{self.label}]")

    def derivatives(self, t, n_max: int) -> np.ndarray:
        """Array ``(n_max + 1, *t.shape)`` of derivatives of order ``0..n_max``."""
        out = []
        cur = self
        for _ in range(n_max + 1):
            out.append(cur(t))
            cur = cur.derivative(1)
        return np.stack(out)

    # algebra ------------------------------------------------------------
    def __add__(self, other: "AnalyticSignal") -> "AnalyticSignal":
        return AnalyticSignal(self.terms + other.terms, f"{self.label}+{other.label}")

    def scale(self, c: complex) -> "AnalyticSignal":
        return AnalyticSignal(tuple(_Term(_trim(tm.coeffs() * c), tm.c2, tm.c1, tm.c0) for tm in self.terms),
                              f"{c}*{self.label}")

    def __mul__(self, other):
        if not isinstance(other, AnalyticSignal):
            return self.scale(other)
        terms = []
        for a in self.terms:
            for b in other.terms:
                terms.append(_Term(_trim(P.polymul(a.coeffs(), b.coeffs())),
                                   a.c2 + b.c2, a.c1 + b.c1, a.c0 + b.c0))
        return AnalyticSignal(tuple(terms), f"({self.label})({other.label})")

    __rmul__ = __mul__

    def conj(self) -> "AnalyticSignal":
        return AnalyticSignal(tuple(_Term(tuple(np.conj(tm.coeffs())), np.conj(tm.c2), np.conj(tm.c1),
                                          np.conj(tm.c0)) for tm in self.terms), f"conj[{self.label}]")

    def translate(self, x0: float) -> "AnalyticSignal":
        """``t -> f(t - x0)``."""
        terms = []
        for tm in self.terms:
            # P(t - x0) by Horner in the shifted variable
            poly = np.array([0j])
            for c in tm.coeffs()[::-1]:
                poly = P.polyadd(P.polymul(poly, [-x0, 1.0]), [c])
            terms.append(_Term(_trim(poly), tm.c2, tm.c1 - 2 * tm.c2 * x0,
                               tm.c0 - tm.c1 * x0 + tm.c2 * x0 * x0))
        return AnalyticSignal(tuple(terms), f"T{x0:g}[{self.label}]")

    def modulate(self, beta: float) -> "AnalyticSignal":
        """``t -> exp(2 pi i beta t) f(t)``."""
        return AnalyticSignal(tuple(_Term(tm.poly, tm.c2, tm.c1 + 2j * np.pi * beta, tm.c0) for tm in self.terms),
                              f"M{beta:g}[{self.label}]")

    def dilate(self, lam: float) -> "AnalyticSignal":
        """``t -> f(lam t)``."""
        terms = []
        for tm in self.terms:
            c = tm.coeffs() * lam ** np.arange(len(tm.poly))
            terms.append(_Term(_trim(c), tm.c2 * lam * lam, tm.c1 * lam, tm.c0))
        return AnalyticSignal(tuple(terms), f"D({lam:g})[{self.label}]")

    def fourier(self) -> "AnalyticSignal":
        """Closed-form Fourier transform (all terms must decay)."""
        if not self.decays:
            raise ValueError("closed-form Fourier transform needs Re(c2) < 0 in every term")
        terms = []
        for tm in self.terms:
            alpha = -tm.c2
            c = tm.coeffs()
            # mu(xi) = (c1 - 2 pi i xi) / (2 alpha), v = 1 / (2 alpha)
            mu = np.array([tm.c1 / (2 * alpha), -1j * np.pi / alpha])
            v = 1.0 / (2 * alpha)
            moments = [np.array([1 + 0j]), mu]
            for k in range(2, len(c)):
                moments.append(P.polyadd(P.polymul(mu, moments[k - 1]), (k - 1) * v * moments[k - 2]))
            poly = np.array([0j])
            for k, ck in enumerate(c):
                poly = P.polyadd(poly, ck * moments[k])
            c0 = tm.c0 + tm.c1 ** 2 / (4 * alpha) + np.log(np.sqrt(np.pi / alpha))
            terms.append(_Term(_trim(poly), -np.pi ** 2 / alpha, -1j * np.pi * tm.c1 / alpha, c0))
        return AnalyticSignal(tuple(terms), f"F[{self.label}]")

    def inner(self, other: "AnalyticSignal") -> complex:
        """Exact ``<f, g> = int f conj(g)``."""
        prod = self * other.conj()
        return complex(prod.fourier()(0.0))

    def l2_norm(self) -> float:
        return math.sqrt(abs(self.inner(self)))


@dataclass(frozen=True)
class TensorSignal:
    """``f(x1, ..., xd) = prod_i f_i(x_i)``."""

    factors: tuple

    @property
    def d(self) -> int:
        return len(self.factors)

    @property
    def label(self) -> str:
        return "(x)".join(f.label for f in self.factors)

    def __call__(self, *xs):
        out = 1.0
        for f, x in zip(self.factors, xs):
            out = out * f(x)
        return out


# --------------------------------------------------------------------------
# sampled signals and the discrete transform


@dataclass
class SampledSignal:
    grid: UniformGrid
    values: np.ndarray
    label: str = "sampled"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        expected = (self.grid.n,) * self.grid.d
        if self.values.shape != expected:
            raise ValueError(f"expected {expected} values, got {self.values.shape}")

    def l2_norm(self) -> float:
        return float(np.sqrt(self.grid.cell * np.sum(np.abs(self.values) ** 2)))

    def to_bytes(self) -> bytes:
        return self.grid.header() + _pack_complex(self.values)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "SampledSignal":
        d, n, L = struct.unpack_from("<3d", blob, 0)
        grid = UniformGrid(int(d), L, int(n))
        vals = _unpack_complex(blob[24:], (grid.n,) * grid.d)
        return cls(grid, vals)


def _pack_complex(values: np.ndarray) -> bytes:
    v = np.ascontiguousarray(values, dtype="<c16")
    return v.tobytes(order="C")


def _unpack_complex(blob: bytes, shape) -> np.ndarray:
    v = np.frombuffer(blob, dtype="<c16")
    if v.size != int(np.prod(shape)):
        raise ValueError(f"payload holds {v.size} values, header implies {int(np.prod(shape))}")
    return v.reshape(shape).astype(complex)


def sample(f, grid: UniformGrid) -> SampledSignal:
    """Pointwise evaluation of a closed-form (or tensor) signal on ``grid``."""
    if grid.d == 1:
        return SampledSignal(grid, f(grid.nodes), getattr(f, "label", "sampled"))
    x = grid.nodes
    if isinstance(f, TensorSignal):
        vals = np.multiply.outer(f.factors[0](x), f.factors[1](x))
    else:
        X1, X2 = grid.mesh()
        vals = f(X1, X2)
    return SampledSignal(grid, vals, getattr(f, "label", "sampled"))


def physical_dft(values: np.ndarray, grid: UniformGrid, axis: int = -1, sign: int = -1) -> np.ndarray:
    """Riemann-sum transform ``sum_j v_j exp(sign 2 pi i x_j xi_k) * spacing`` along ``axis``.

    Input nodes are those of ``grid``; outputs sit on ``grid.dual()``.  With
    ``x_j = -L + j dx`` and ``xi_k = -n/(4L) + k/(2L)`` the kernel factors into
    ``(-1)^(j+k) exp(sign 2 pi i jk/n)`` times a global phase ``i^(sign n)``.
    """
    n = grid.n
    if not _is_pow2(n):
        raise ValueError(f"FFT grids need a power-of-two size, got {n}")
    v = np.moveaxis(np.asarray(values, dtype=complex), axis, -1)
    alt = np.where(np.arange(n) % 2, -1.0, 1.0)
    if sign < 0:
        out = np.fft.fft(v * alt, axis=-1)
    else:
        out = np.fft.ifft(v * alt, axis=-1) * n
    out *= alt * grid.spacing * (1j ** ((sign * n) % 4))
    return np.moveaxis(out, -1, axis)


def fourier(f: SampledSignal) -> SampledSignal:
    """Discrete approximation of the continuous transform on the dual grid."""
    g = f.grid
    vals = f.values
    for ax in range(g.d):
        vals = physical_dft(vals, g, axis=ax, sign=-1)
    return SampledSignal(g.dual(), vals, f"F[{f.label}]")


def inverse_fourier(F: SampledSignal) -> SampledSignal:
    """Inverse of :func:`fourier`; maps the dual grid back to the original one."""
    g = F.grid
    vals = F.values
    for ax in range(g.d):
        vals = physical_dft(vals, g, axis=ax, sign=+1)
    return SampledSignal(g.dual(), vals, f"Finv[{F.label}]")
