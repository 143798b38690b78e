"""Faa di Bruno sums, derivative bounds for the symbol, and ultradifferential operators.

The ultradifferential operator is modelled by the truncated product
``G(z) = prod_{k=1}^K (1 + z^2 / m_k^2)`` with ``m_k = k^s``, so every series
in the theory terminates at ``n = 2K`` and all identities hold exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .io import rows_to_csv
from .signal import AnalyticSignal, SampledSignal, UniformGrid
from .symbol import PerturbationMap
from .weights import SubadditiveWeight, young_conjugate

__all__ = [
    "PartitionSet",
    "enumerate_partitions",
    "partition_count",
    "symbol_nth_derivative",
    "symbol_derivatives_bell",
    "DerivativeBoundReport",
    "check_derivative_bound",
    "EntireOperatorModel",
    "build_operator",
    "CauchyReport",
    "check_cauchy_bound",
    "apply_operator",
    "ProductExpansion",
    "product_expansion",
    "coefficient_csv",
    "DEFAULT_M_CANDIDATES",
    "MAX_PARTITION_N",
]

MAX_PARTITION_N = 25
DEFAULT_M_CANDIDATES = (0, 1, 2, 4, 8, 16, 32)
COEFF_CSV_COLUMNS = ("model_id", "n_or_k", "value", "bound", "margin")


# --------------------------------------------------------------------------
# partitions


@dataclass(frozen=True)
class PartitionSet:
    """All ``k = (k_1, ..., k_n)`` with ``sum_j j k_j = n`` and their weights."""

    n: int
    tuples: tuple
    sizes: tuple  # k = sum_j k_j
    weights: tuple  # k! / (k_1! ... k_n!), exact integers

    def __len__(self) -> int:
        return len(self.tuples)

    @property
    def weight_sum(self) -> int:
        return sum(self.weights)

    def faa_coefficients(self) -> tuple:
        """Exact ``n! / prod_j (k_j! (j!)^{k_j})`` for each tuple."""
        fn = math.factorial(self.n)
        out = []
        for k in self.tuples:
            den = 1
            for j, kj in enumerate(k, start=1):
                den *= math.factorial(kj) * math.factorial(j) ** kj
            out.append(Fraction(fn, den))
        return tuple(out)


def _partitions(n: int, largest: int):
    """Partitions of ``n`` into parts ``<= largest`` as multiplicity dicts."""
    if n == 0:
        yield {}
        return
    for part in range(min(n, largest), 0, -1):
        for rest in _partitions(n - part, part):
            d = dict(rest)
            d[part] = d.get(part, 0) + 1
            yield d


def enumerate_partitions(n: int) -> PartitionSet:
    """Exact enumeration of the Faa di Bruno index set for order ``n`` (``1 <= n <= 25``)."""
    if not isinstance(n, (int, np.integer)) or not 1 <= n <= MAX_PARTITION_N:
        raise ValueError(f"partition order must be an integer in [1, {MAX_PARTITION_N}], got {n}")
    n = int(n)
    tuples, sizes, weights = [], [], []
    for mult in _partitions(n, n):
        k = tuple(mult.get(j, 0) for j in range(1, n + 1))
        size = sum(k)
        w = math.factorial(size)
        for kj in k:
            w //= math.factorial(kj)
        tuples.append(k)
        sizes.append(size)
        weights.append(w)
    return PartitionSet(n, tuple(tuples), tuple(sizes), tuple(weights))


def partition_count(n: int) -> int:
    """``p(n)`` from Euler's pentagonal-number recurrence (independent of the enumeration)."""
    p = [1] + [0] * n
    for m in range(1, n + 1):
        total = 0
        j = 1
        while True:
            g1 = j * (3 * j - 1) // 2
            if g1 > m:
                break
            sign = 1 if j % 2 else -1
            total += sign * p[m - g1]
            g2 = j * (3 * j + 1) // 2
            if g2 <= m:
                total += sign * p[m - g2]
            j += 1
        p[m] = total
    return p[n]


# --------------------------------------------------------------------------
# derivatives of sigma(x, y) = exp(i phi(x) y)


def _phase_jets(phi: PerturbationMap, x, y, n: int) -> np.ndarray:
    """Derivatives ``0..n`` in ``x`` of the phase ``u = i sum_j phi_j(x) y_j``.

    For ``d > 1`` the components are read as a curve ``x -> (phi_1(x), ..., phi_d(x))``
    with scalar ``x`` and ``y`` in ``R^d`` (trailing axis).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if phi.d == 1:
        return 1j * phi.components[0].jets(x, n) * y
    return 1j * sum(c.jets(x, n) * y[..., j] for j, c in enumerate(phi.components))


def _faa_sum(jets: np.ndarray, n: int) -> np.ndarray:
    """``sum_{k in I} n!/prod k_j! prod (u^(j)/j!)^{k_j}`` with ``jets[j] = u^(j)``."""
    parts = enumerate_partitions(n)
    out = np.zeros(jets.shape[1:], dtype=complex)
    for k, coef in zip(parts.tuples, parts.faa_coefficients()):
        term = np.full(jets.shape[1:], complex(float(coef)))
        for j, kj in enumerate(k, start=1):
            if kj:
                term = term * jets[j] ** kj
        out += term
    return out


def symbol_nth_derivative(phi: PerturbationMap, n: int, x, y) -> np.ndarray:
    """``d^n/dx^n exp(i phi(x) y)`` by the Faa di Bruno partition sum.

    For a curve ``phi: R -> R^d`` the derivative is assembled from the
    scalar factors ``sigma_j = exp(i phi_j(x) y_j)`` by the multinomial
    Leibniz rule.
    """
    if n < 0:
        raise ValueError("derivative order must be non-negative")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if phi.d == 1:
        sig = np.exp(1j * phi.components[0](x) * y)
        if n == 0:
            return sig
        return sig * _faa_sum(_phase_jets(phi, x, y, n), n)
    # per-component derivative tables, then the multinomial sum
    tables = []
    for j, c in enumerate(phi.components):
        sj = PerturbationMap.scalar(c)
        yj = y[..., j]
        tables.append([symbol_nth_derivative(sj, r, x, yj) for r in range(n + 1)])
    out = np.zeros(np.broadcast_shapes(x.shape, y.shape[:-1]), dtype=complex)
    for idx in _compositions(n, phi.d):
        coef = math.factorial(n)
        term = 1.0
        for j, r in enumerate(idx):
            coef //= math.factorial(r)
            term = term * tables[j][r]
        out = out + coef * term
    return out


def _compositions(n: int, parts: int):
    if parts == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, parts - 1):
            yield (first,) + rest


def symbol_derivatives_bell(phi: PerturbationMap, n_max: int, x, y) -> np.ndarray:
    """Derivatives ``0..n_max`` of ``exp(u)`` via ``B_n = sum_k C(n-1, k) u^(k+1) B_{n-1-k}``.

    An independent route to :func:`symbol_nth_derivative` (no partitions).
    """
    u = _phase_jets(phi, x, y, n_max)
    B = [np.ones(u.shape[1:], dtype=complex)]
    for n in range(1, n_max + 1):
        acc = np.zeros(u.shape[1:], dtype=complex)
        for k in range(n):
            acc = acc + math.comb(n - 1, k) * u[k + 1] * B[n - 1 - k]
        B.append(acc)
    return np.exp(u[0]) * np.stack(B)


@dataclass
class DerivativeBoundReport:
    m: float | None  # smallest passing candidate
    required: float  # max over the grid of the m each point needs
    required_by_n: dict
    worst_margin: float  # min log(RHS / LHS) at the chosen m
    worst_point: tuple  # (n, x, |y|) with the smallest margin (or the violation)
    candidates: tuple
    d: int = 1

    @property
    def passed(self) -> bool:
        return self.m is not None


def check_derivative_bound(phi: PerturbationMap, w: SubadditiveWeight, ell: int, n_max: int,
                           x, y, candidates: Sequence[float] = DEFAULT_M_CANDIDATES) -> DerivativeBoundReport:
    """Smallest ``m`` with ``|d^n sigma| <= (4d)^n e^{d m w(|y|)} e^{ell phi*(n / ell)}``, ``1 <= n <= n_max``.

    ``x`` and ``y`` are 1-D probe arrays (``y`` of shape ``(ny, d)`` for a curve);
    the check runs over their Cartesian product.
    """
    if not 1 <= n_max <= 15:
        raise ValueError("n_max must lie in [1, 15]")
    d = phi.d
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if d == 1:
        X, Y = np.meshgrid(x, y, indexing="ij")
        ynorm = np.abs(Y)
    else:
        X = x[:, None]
        Y = y[None, :, :]
        ynorm = np.broadcast_to(np.linalg.norm(y, axis=-1)[None, :], (x.size, y.shape[0]))
    wy = np.asarray(w(ynorm), dtype=float)
    req_by_n = {}
    margins = []
    logs = []
    for n in range(1, n_max + 1):
        D = np.abs(symbol_nth_derivative(phi, n, X, Y))
        with np.errstate(divide="ignore"):
            lhs = np.log(D)
        base = n * math.log(4 * d) + ell * float(young_conjugate(w, n / ell))
        logs.append((n, lhs, base))
        excess = lhs - base
        with np.errstate(divide="ignore", invalid="ignore"):
            need = np.where(excess > 0, excess / (d * np.where(wy > 0, wy, np.nan)), 0.0)
        need = np.where(np.isnan(need), np.inf, need)  # y = 0 with a positive excess
        req_by_n[n] = float(np.max(need))
    required = max(req_by_n.values())
    chosen = next((float(m) for m in candidates if m >= required), None)
    m_eval = chosen if chosen is not None else float(max(candidates))
    worst = np.inf
    where = None
    for n, lhs, base in logs:
        marg = base + d * m_eval * wy - lhs
        i = np.unravel_index(np.argmin(marg), marg.shape)
        if marg[i] < worst:
            worst = float(marg[i])
            where = (n, float(np.broadcast_to(X, marg.shape)[i]), float(ynorm[i]))
    return DerivativeBoundReport(chosen, required, req_by_n, worst, where, tuple(candidates), d)


# --------------------------------------------------------------------------
# ultradifferential operators


@dataclass
class EntireOperatorModel:
    """``G(z) = prod_{k=1}^K (1 + z^2 / k^{2s})`` with derived quantities."""

    K: int
    s: float
    roots: np.ndarray  # m_k = k^s
    coeffs: np.ndarray  # c_n = G^(n)(0) / n!, ascending, length 2K + 1
    b: np.ndarray  # b_n = (-i)^n c_n
    omega: SubadditiveWeight
    m_G: float  # max log|G| / (1 + omega(r)) over the probed radii
    m_G_radius: float
    ellipticity: float  # min log|G(x)| / omega(x) on [1, 1e3]
    ellipticity_at: float
    label: str = ""

    @property
    def degree(self) -> int:
        return 2 * self.K

    def __call__(self, z) -> np.ndarray:
        return P.polyval(np.asarray(z), self.coeffs)

    def log_abs(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape)
        for mk in self.roots:
            out = out + np.log(np.abs(1 + z * z / mk ** 2))
        return out

    def ellipticity_level(self, lo: float = 1.0, hi: float = 1e3, npts: int = 20001) -> tuple[int, float, float]:
        """Largest integer ``N`` with ``log|G(x)| >= N omega(x)`` on ``[lo, hi]``, plus the min ratio and its location."""
        x = np.geomspace(lo, hi, npts)
        ratio = self.log_abs(x) / self.omega(x)
        i = int(np.argmin(ratio))
        return int(math.floor(ratio[i])), float(ratio[i]), float(x[i])

    def elliptic_from(self, N: float, hi: float = 1e3, npts: int = 20001) -> float | None:
        """Smallest grid point ``x0`` such that ``log|G| >= N omega`` on ``[x0, hi]``."""
        x = np.geomspace(1e-3, hi, npts)
        ok = self.log_abs(x) >= N * self.omega(x)
        if not ok[-1]:
            return None
        bad = np.nonzero(~ok)[0]
        return float(x[0] if bad.size == 0 else x[bad[-1] + 1])


def _product_coeffs(roots) -> np.ndarray:
    c = np.array([1.0])
    for mk in roots:
        c = P.polymul(c, [1.0, 0.0, 1.0 / mk ** 2])
    return c


def build_operator(K: int, s: float, omega: SubadditiveWeight | None = None,
                   radii: Sequence[float] | None = None, angles: int = 720) -> EntireOperatorModel:
    """Truncated-product model of a strongly elliptic ultradifferential operator.

    ``m_G`` maximises ``log|G(z)| / (1 + omega(|z|))`` over the dyadic circles
    ``|z| = 2^j``, ``j = 0..10`` (sampled with ``angles`` points each), and
    over a dense radial scan of the real axis, where ``|G|`` attains its
    maximum on every circle.
    """
    if K <= 0:
        raise ValueError("truncation K must be positive")
    omega = omega if omega is not None else SubadditiveWeight.gevrey(s)
    roots = np.arange(1, K + 1, dtype=float) ** s
    coeffs = _product_coeffs(roots)
    n = np.arange(coeffs.size)
    b = ((-1j) ** n) * coeffs
    b[n % 2 == 1] = 0.0
    radii = np.asarray(radii if radii is not None else 2.0 ** np.arange(11), dtype=float)
    th = np.linspace(0, 2 * np.pi, angles, endpoint=False)
    model = EntireOperatorModel(K, s, roots, coeffs, b, omega, 0.0, 0.0, 0.0, 0.0,
                                f"G(K={K},s={s:g})")
    best, where = -np.inf, 0.0
    for r in radii:
        val = float(np.max(model.log_abs(r * np.exp(1j * th)))) / (1 + float(omega(r)))
        if val > best:
            best, where = val, float(r)
    dense = np.geomspace(1e-3, float(radii.max()), 4001)
    vals = model.log_abs(dense) / (1 + omega(dense))
    j = int(np.argmax(vals))
    if vals[j] > best:
        best, where = float(vals[j]), float(dense[j])
    model.m_G = best
    model.m_G_radius = where
    _, ell, at = model.ellipticity_level()
    model.ellipticity = ell
    model.ellipticity_at = at
    return model


@dataclass
class CauchyReport:
    m: float
    n: np.ndarray
    value: np.ndarray  # |c_n|
    bound: np.ndarray  # e^m exp(-m phi*(n / m))
    label: str = ""

    @property
    def margins(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.bound) - np.log(self.value)

    @property
    def worst_margin(self) -> float:
        return float(np.min(self.margins))

    @property
    def passed(self) -> bool:
        return bool(np.all(self.value <= self.bound * (1 + 1e-12)))

    @property
    def first_violation(self) -> int | None:
        bad = np.nonzero(self.value > self.bound * (1 + 1e-12))[0]
        return int(self.n[bad[0]]) if bad.size else None

    def rows(self) -> list[dict]:
        return [{"model_id": self.label, "n_or_k": int(n), "value": float(v), "bound": float(b),
                 "margin": float(mg)} for n, v, b, mg in zip(self.n, self.value, self.bound, self.margins)]


def check_cauchy_bound(Gm: EntireOperatorModel, m: float, n_max: int) -> CauchyReport:
    """Compare ``|G^(n)(0)/n!|`` with ``e^m exp(-m phi*(n/m))`` for ``n <= n_max``."""
    if m <= 0:
        raise ValueError("m must be positive")
    n = np.arange(n_max + 1)
    val = np.zeros(n_max + 1)
    top = min(n_max, Gm.coeffs.size - 1)
    val[: top + 1] = np.abs(Gm.coeffs[: top + 1])
    bound = np.exp(m - m * np.asarray(young_conjugate(Gm.omega, n / m), dtype=float))
    return CauchyReport(float(m), n, val, bound, Gm.label)


def apply_operator(Gm: EntireOperatorModel, f: AnalyticSignal, x) -> SampledSignal | np.ndarray:
    """``G(D) f = sum_n i^n c_n f^(n)`` (exact: the sum stops at ``n = 2K``).

    ``x`` may be a :class:`UniformGrid` (a :class:`SampledSignal` is returned)
    or an array of points.
    """
    if not isinstance(f, AnalyticSignal):
        raise TypeError("apply_operator needs a signal with closed-form derivatives")
    pts = x.nodes if isinstance(x, UniformGrid) else np.asarray(x, dtype=float)
    ders = f.derivatives(pts, Gm.degree)
    n = np.arange(Gm.degree + 1)
    w = (1j ** n) * Gm.coeffs
    out = np.tensordot(w, ders, axes=(0, 0))
    if isinstance(x, UniformGrid):
        return SampledSignal(x, out, f"G(D)[{f.label}]")
    return out


@dataclass
class ProductExpansion:
    k: np.ndarray
    r: np.ndarray
    x: np.ndarray
    a: np.ndarray  # a[k, r, i] = a_k^(r)(x_i)
    reassembly_residual: float | None = None
    m0_required_C: dict = field(default_factory=dict)  # m0 -> smallest C_ell that works
    m0_formula: int | None = None
    m0_empirical: float | None = None
    C_formula: float | None = None
    ell: int = 1

    @property
    def passed(self) -> bool:
        return self.m0_empirical is not None


def product_expansion(Gm: EntireOperatorModel, g: AnalyticSignal, k_max: int, r_max: int, x,
                      h: AnalyticSignal | None = None, ell: int = 1,
                      m0_candidates: Sequence[float] = (1, 2, 4, 8, 16, 32, 64),
                      C_max: float = 2.0 ** 20, tol: float = 1e-8) -> ProductExpansion:
    """Coefficients ``a_k^(r)(x) = sum_{n >= k} C(n, k) b_n g^(n - k + r)(x)`` and their checks.

    With a test function ``h`` the reassembly ``G(-D)(g h) = sum_k a_k h^(k)``
    is compared against the direct expansion of the closed-form product.
    The coefficient bound ``|a_k^(r)| <= C exp(-m0 phi*(k/m0) + ell phi*(r/ell))``
    is evaluated for each ``m0`` candidate by the smallest ``C`` that works.
    """
    x = np.asarray(x, dtype=float)
    deg = Gm.degree
    G_ders = g.derivatives(x, deg + r_max)  # g^(j), j = 0..deg + r_max
    ks = np.arange(k_max + 1)
    rs = np.arange(r_max + 1)
    a = np.zeros((ks.size, rs.size, x.size), dtype=complex)
    for k in ks:
        for nn in range(k, deg + 1):
            if Gm.b[nn] == 0:
                continue
            c = math.comb(nn, k) * Gm.b[nn]
            for r in rs:
                a[k, r] += c * G_ders[nn - k + r]
    res = ProductExpansion(ks, rs, x, a, ell=ell)
    if h is not None:
        gh = g * h
        direct = np.tensordot(Gm.b, gh.derivatives(x, deg), axes=(0, 0))
        full = np.zeros((deg + 1, x.size), dtype=complex)
        for k in range(deg + 1):
            for nn in range(k, deg + 1):
                full[k] += math.comb(nn, k) * Gm.b[nn] * G_ders[nn - k]
        hd = h.derivatives(x, deg)
        reassembled = np.sum(full * hd, axis=0)
        scale = max(1.0, float(np.max(np.abs(direct))))
        res.reassembly_residual = float(np.max(np.abs(reassembled - direct)) / scale)
        if res.reassembly_residual > tol:
            raise ArithmeticError(f"reassembly residual {res.reassembly_residual:.3e} exceeds {tol:g}")
    sup = np.max(np.abs(a), axis=2)  # (k, r)
    r_part = ell * np.asarray(young_conjugate(Gm.omega, rs / ell), dtype=float)
    m_int = int(math.ceil(Gm.m_G))
    m0_formula = 3 * m_int
    for m0 in tuple(m0_candidates) + (m0_formula,):
        k_part = -m0 * np.asarray(young_conjugate(Gm.omega, ks / m0), dtype=float)
        with np.errstate(divide="ignore"):
            need = np.log(sup) - (k_part[:, None] + r_part[None, :])
        res.m0_required_C[float(m0)] = float(np.exp(np.max(need)))
    res.m0_formula = m0_formula
    res.C_formula = res.m0_required_C[float(m0_formula)]
    passing = [m0 for m0 in m0_candidates if res.m0_required_C[float(m0)] <= C_max]
    res.m0_empirical = float(min(passing)) if passing else None
    return res


def coefficient_csv(rows) -> str:
    return rows_to_csv(COEFF_CSV_COLUMNS, rows)
