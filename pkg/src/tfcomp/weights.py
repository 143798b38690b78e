"""Subadditive weights, Young conjugates and phase-space weights.

A subadditive weight ``omega`` on ``[0, inf)`` is evaluated directly and in
its exponential parametrisation ``phi(u) = omega(exp(u))``.  Working in the
``u`` variable keeps the large-argument checks (BMM, small powers) free of
overflow.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import integrate, optimize, special

__all__ = [
    "SubadditiveWeight",
    "TFWeight",
    "DivergenceError",
    "young_conjugate",
    "check_young_inequality",
    "check_moderate",
    "check_weight_conditions",
    "check_bmm",
    "check_small_power",
    "YoungReport",
    "ModerateReport",
    "ConditionResult",
    "WeightConditionsReport",
    "SmallPowerReport",
]

T_MAX = 200.0
CLOSED_TOL = 1e-10
QUAD_TOL = 1e-6


class DivergenceError(ArithmeticError):
    """The supremum defining a Young conjugate is not attained on [0, T_max]."""


@dataclass(frozen=True)
class SubadditiveWeight:
    """One-variable weight ``omega``.

    ``kind`` is one of

    * ``"power"``: ``omega(t) = t**e`` (``e = 1/s`` is the Gevrey weight),
    * ``"logpower"``: ``omega(t) = log(1 + t)**q``.
    """

    kind: str
    param: float

    def __post_init__(self):
        if self.kind == "power":
            if not 0.0 < self.param <= 1.0:
                raise ValueError(f"power exponent must lie in (0, 1], got {self.param}")
        elif self.kind == "logpower":
            if self.param <= 0.0:
                raise ValueError(f"log-power exponent must be positive, got {self.param}")
        else:
            raise ValueError(f"unknown weight kind {self.kind!r}")

    @classmethod
    def gevrey(cls, s: float) -> "SubadditiveWeight":
        if s <= 1.0:
            raise ValueError(f"Gevrey order must exceed 1, got {s}")
        return cls("power", 1.0 / s)

    @classmethod
    def log_power(cls, q: float) -> "SubadditiveWeight":
        return cls("logpower", q)

    @classmethod
    def power(cls, exponent: float) -> "SubadditiveWeight":
        return cls("power", exponent)

    @property
    def gevrey_order(self) -> float | None:
        if self.kind == "power":
            return 1.0 / self.param
        return None

    @property
    def label(self) -> str:
        if self.kind == "power":
            s = 1.0 / self.param
            if s > 1.0:
                return f"gevrey(s={s:g})"
            return f"power(e={self.param:g})"
        return f"logpower(q={self.param:g})"

    def __call__(self, t):
        t = np.abs(np.asarray(t, dtype=float))
        if self.kind == "power":
            return t ** self.param
        return np.log1p(t) ** self.param

    def phi(self, u):
        """``omega(exp(u))`` evaluated without forming ``exp(u)``."""
        u = np.asarray(u, dtype=float)
        if self.kind == "power":
            with np.errstate(over="ignore"):
                return np.exp(self.param * u)
        return np.logaddexp(0.0, u) ** self.param

    def phi_prime(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "power":
            return self.param * np.exp(self.param * u)
        sp = np.logaddexp(0.0, u)
        return self.param * sp ** (self.param - 1.0) * special.expit(u)

    def has_closed_conjugate(self) -> bool:
        return self.kind == "power"

    def conjugate_closed(self, y):
        """Closed-form Young conjugate of ``phi`` for power weights.

        For ``omega(t) = t**e`` the maximiser of ``y*u - exp(e*u)`` is
        ``u = log(y/e)/e``; below ``y = e`` the supremum sits at ``u = 0``.
        """
        if self.kind != "power":
            raise NotImplementedError("closed form only for power weights")
        y = np.asarray(y, dtype=float)
        e = self.param
        r = y / e
        with np.errstate(divide="ignore", invalid="ignore"):
            interior = r * (np.log(r) - 1.0)
        return np.where(r >= 1.0, interior, -1.0)

    def tail_integral_bound(self, T: float) -> float:
        """Upper bound for ``int_T^inf omega(t) / (1 + t^2) dt`` (``T >= 1``)."""
        if self.kind == "power":
            e = self.param
            if e >= 1.0:
                return np.inf
            return T ** (e - 1.0) / (1.0 - e)
        # log(1+t) <= log t + c with c = 1/T on [T, inf); substitute w = log t + c
        q = self.param
        c = 1.0 / T
        lower = np.log(T) + c
        return float(np.exp(c) * special.gamma(q + 1.0) * special.gammaincc(q + 1.0, lower))


def _conjugate_numeric(w: SubadditiveWeight, y: float, t_max: float = T_MAX) -> float:
    def neg(u):
        return float(w.phi(u)) - y * u

    grid = np.linspace(0.0, t_max, 2001)
    with np.errstate(over="ignore"):
        vals = y * grid - w.phi(grid)
    i = int(np.nanargmax(vals))
    if i == len(grid) - 1:
        raise DivergenceError(f"maximiser of y*t - phi(t) reached T_max={t_max} (y={y})")
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    res = optimize.minimize_scalar(neg, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12, "maxiter": 500})
    u_star = float(res.x)
    best = -float(res.fun)
    # the boundary t = 0 is admissible and may be the maximiser
    at_zero = -float(w.phi(0.0))
    if at_zero >= best:
        u_star, best = 0.0, at_zero
    slope = y - float(w.phi_prime(u_star))
    if u_star > 1e-6:
        if abs(slope) > 1e-6 * max(1.0, y):
            raise DivergenceError(f"stationarity not certified at t={u_star} (residual {slope})")
    elif slope > 1e-6 * max(1.0, y):
        raise DivergenceError(f"boundary maximiser with positive slope {slope}")
    return best


def young_conjugate(w: SubadditiveWeight, y, method: str = "auto"):
    """``sup_{t >= 0} (y t - omega(exp t))``.

    ``method`` is ``"closed"``, ``"numeric"`` or ``"auto"`` (closed form when
    the weight has one).  Scalars in, scalars out; arrays are mapped.
    """
    if method not in ("auto", "closed", "numeric"):
        raise ValueError(f"unknown method {method!r}")
    y_arr = np.asarray(y, dtype=float)
    if np.any(y_arr < 0):
        raise ValueError("Young conjugate is defined for y >= 0")
    use_closed = method == "closed" or (method == "auto" and w.has_closed_conjugate())
    if use_closed:
        out = w.conjugate_closed(y_arr)
    else:
        flat = [_conjugate_numeric(w, float(v)) for v in y_arr.ravel()]
        out = np.asarray(flat).reshape(y_arr.shape)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass
class YoungReport:
    worst_slack: float
    worst_jm: tuple[int, int]
    passed: bool
    violations: list[tuple[int, int, float]] = field(default_factory=list)


def check_young_inequality(w: SubadditiveWeight, j_max: int, m_max: int,
                           tol: float = CLOSED_TOL) -> YoungReport:
    """Check ``3m phi*(j/3m) + j <= m phi*(j/m)`` for ``1 <= j, m`` up to the bounds."""
    if j_max < 1 or m_max < 1:
        raise ValueError("j_max and m_max must be >= 1")
    j = np.arange(1, j_max + 1, dtype=float)[:, None]
    m = np.arange(1, m_max + 1, dtype=float)[None, :]
    lhs = 3 * m * young_conjugate(w, j / (3 * m)) + j
    rhs = m * young_conjugate(w, j / m)
    slack = rhs - lhs
    idx = np.unravel_index(int(np.argmin(slack)), slack.shape)
    bad = np.argwhere(slack < -tol * np.maximum(1.0, np.abs(rhs)))
    violations = [(int(a) + 1, int(b) + 1, float(slack[a, b])) for a, b in bad]
    return YoungReport(
        worst_slack=float(slack[idx]),
        worst_jm=(int(idx[0]) + 1, int(idx[1]) + 1),
        passed=not violations,
        violations=violations,
    )


# --------------------------------------------------------------------------
# phase-space weights


def _norm(coords):
    acc = 0.0
    for c in coords:
        acc = acc + np.asarray(c, dtype=float) ** 2
    return np.sqrt(acc)


@dataclass(frozen=True)
class TFWeight:
    """Positive weight on phase space ``R^{2d}``, ``z = (z1bar, z2bar)``.

    Evaluation is done in log space (``log``/``log_coords``) since the
    exponential weights overflow long before the sups they enter do.
    """

    kind: str
    d: int = 1
    s: float = 0.0
    k: float = 0.0
    a: float = 0.0
    b: float = 0.0
    omega: SubadditiveWeight | None = None
    factors: tuple = ()
    signs: tuple = ()

    # constructors -------------------------------------------------------
    @classmethod
    def unit(cls, d: int = 1) -> "TFWeight":
        return cls("poly", d=d, s=0.0)

    @classmethod
    def poly(cls, s: float, d: int = 1) -> "TFWeight":
        """``(1 + |z|)^s``."""
        return cls("poly", d=d, s=s)

    @classmethod
    def poly_factored(cls, a: float, b: float, d: int = 1) -> "TFWeight":
        """``(1 + |z1bar|)^a (1 + |z2bar|)^b``."""
        return cls("poly_factored", d=d, a=a, b=b)

    @classmethod
    def exp_split(cls, s: float, omega: SubadditiveWeight, d: int = 1) -> "TFWeight":
        """``exp(s (omega(z1bar) + omega(z2bar)))``."""
        return cls("exp_split", d=d, s=s, omega=omega)

    @classmethod
    def exp_iso(cls, a: float, omega: SubadditiveWeight, d: int = 1) -> "TFWeight":
        """``exp(a omega(|z|))``."""
        return cls("exp_iso", d=d, a=a, omega=omega)

    @classmethod
    def loss(cls, s: float, k: float, omega: SubadditiveWeight, d: int = 1) -> "TFWeight":
        """``m_{s,k}(z) = exp(s(omega(z1bar) + omega(z2bar)) + k omega(z2bar))``."""
        return cls("loss", d=d, s=s, k=k, omega=omega)

    @classmethod
    def theorem_weight(cls, s: float, N: int, b: float, d: int = 1) -> "TFWeight":
        """``v_{s+Nb}(z) (1 + |z2bar|)^N``."""
        return cls.poly(s + N * b, d) * cls.poly_factored(0.0, N, d)

    def __mul__(self, other: "TFWeight") -> "TFWeight":
        return TFWeight("product", d=self.d, factors=(self, other), signs=(1, 1))

    def __truediv__(self, other: "TFWeight") -> "TFWeight":
        return TFWeight("product", d=self.d, factors=(self, other), signs=(1, -1))

    def inverse(self) -> "TFWeight":
        return TFWeight("product", d=self.d, factors=(self,), signs=(-1,))

    @property
    def label(self) -> str:
        om = self.omega.label if self.omega is not None else ""
        if self.kind == "poly":
            return f"v_{self.s:g}"
        if self.kind == "poly_factored":
            return f"poly({self.a:g},{self.b:g})"
        if self.kind == "exp_split":
            return f"exp_split({self.s:g};{om})"
        if self.kind == "exp_iso":
            return f"exp_iso({self.a:g};{om})"
        if self.kind == "loss":
            return f"m_{{{self.s:g},{self.k:g}}}({om})"
        parts = [("" if sg > 0 else "1/") + f.label for f, sg in zip(self.factors, self.signs)]
        return "*".join(parts)

    # evaluation ---------------------------------------------------------
    def log_coords(self, *coords):
        """Log-weight at broadcastable coordinate arrays ``(z_1, ..., z_2d)``."""
        d = self.d
        if len(coords) != 2 * d:
            raise ValueError(f"expected {2 * d} coordinates, got {len(coords)}")
        kind = self.kind
        if kind == "product":
            out = 0.0
            for f, sg in zip(self.factors, self.signs):
                out = out + sg * f.log_coords(*coords)
            return out
        if kind == "poly":
            return self.s * np.log1p(_norm(coords))
        if kind == "exp_iso":
            return self.a * self.omega(_norm(coords))
        n1 = _norm(coords[:d])
        n2 = _norm(coords[d:])
        if kind == "poly_factored":
            return self.a * np.log1p(n1) + self.b * np.log1p(n2)
        if kind == "exp_split":
            return self.s * (self.omega(n1) + self.omega(n2))
        if kind == "loss":
            return self.s * (self.omega(n1) + self.omega(n2)) + self.k * self.omega(n2)
        raise ValueError(f"unknown TFWeight kind {kind!r}")

    def log(self, z):
        z = np.asarray(z, dtype=float)
        return self.log_coords(*np.moveaxis(z, -1, 0))

    def __call__(self, z):
        return np.exp(self.log(z))


@dataclass
class ModerateReport:
    constant: float
    constant_inner: float
    relative_change: float
    stable: bool


def _moderate_sup(m: TFWeight, v: TFWeight, pts: np.ndarray, chunk: int = 256) -> float:
    lm = m.log(pts)
    lv = v.log(pts)
    best = -np.inf
    for start in range(0, len(pts), chunk):
        x1 = pts[start:start + chunk]
        summed = x1[:, None, :] + pts[None, :, :]
        val = m.log(summed) - lm[start:start + chunk, None] - lv[None, :]
        best = max(best, float(val.max()))
    return float(np.exp(best))


def check_moderate(m: TFWeight, v: TFWeight, points, stability_tol: float = 0.05) -> ModerateReport:
    """Estimate ``sup m(x1+x2) / (m(x1) v(x2))`` over all pairs of ``points``.

    ``points`` has shape ``(P, 2d)`` (or ``(P,)`` for a one-dimensional
    check).  The sup is also computed on the half-extent sub-grid; a relative
    change above ``stability_tol`` marks the estimate unstable.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    c_full = _moderate_sup(m, v, pts)
    extent = np.max(np.abs(pts))
    inner = pts[np.max(np.abs(pts), axis=1) <= extent / 2 + 1e-12]
    c_inner = _moderate_sup(m, v, inner) if len(inner) else np.nan
    change = abs(c_full - c_inner) / c_inner
    return ModerateReport(c_full, c_inner, float(change), bool(change < stability_tol))


# --------------------------------------------------------------------------
# weight condition diagnostics


@dataclass
class ConditionResult:
    name: str
    passed: bool
    value: float
    note: str = ""


@dataclass
class WeightConditionsReport:
    weight: str
    results: dict[str, ConditionResult]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    @property
    def failures(self) -> list[str]:
        return [k for k, r in self.results.items() if not r.passed]

    def raise_for_failure(self):
        if not self.passed:
            raise AssertionError(f"{self.weight}: conditions failed {self.failures}")


def check_weight_conditions(w: SubadditiveWeight, grid=None, tail: float = 1e6) -> WeightConditionsReport:
    """Numerical diagnostics for conditions (alpha)-(delta) of a weight.

    (alpha) pairwise on ``grid``; (beta) by quadrature on ``[0, tail]`` plus an
    analytic tail bound; (gamma) as decay of ``log(1+t^2)/omega(t)`` on
    ``[1, tail]`` (finite-range evidence only); (delta) as second differences
    of ``phi`` on a uniform ``u``-grid.
    """
    if tail <= 1.0:
        raise ValueError("tail must exceed 1")
    if grid is None:
        grid = np.concatenate([np.linspace(0.0, 4.0, 81), np.geomspace(4.0, 1e4, 120)[1:]])
    t = np.asarray(grid, dtype=float)
    results: dict[str, ConditionResult] = {}

    om = w(t)
    lhs = w(t[:, None] + t[None, :])
    rhs = om[:, None] + om[None, :]
    viol = lhs - rhs
    worst = float(viol.max())
    results["alpha"] = ConditionResult("alpha", worst <= CLOSED_TOL * max(1.0, float(rhs.max())), worst,
                                       "max of omega(s+t) - omega(s) - omega(t)")

    head, _ = integrate.quad(lambda x: float(w(x)) / (1.0 + x * x), 0.0, 1.0, epsabs=1e-12, limit=200)
    body, _ = integrate.quad(lambda u: float(w.phi(u)) * np.exp(u) / (1.0 + np.exp(2 * u)),
                             0.0, np.log(tail), epsabs=1e-12, limit=400)
    rest = w.tail_integral_bound(tail)
    total = head + body + rest
    results["beta"] = ConditionResult("beta", bool(np.isfinite(rest)), float(total),
                                      f"quadrature {head + body:.6g} + tail bound {rest:.6g}")

    tt = np.geomspace(1.0, tail, 400)
    ratio = np.log1p(tt * tt) / w(tt)
    late = ratio[tt >= np.sqrt(tail)]
    decreasing = bool(np.all(np.diff(late) <= QUAD_TOL * late[:-1]))
    small = bool(ratio[-1] <= 0.5 * ratio.max())
    results["gamma"] = ConditionResult("gamma", decreasing and small, float(ratio[-1]),
                                       "finite-range evidence, not proof")

    u = np.linspace(-10.0, np.log(tail), 2001)
    ph = w.phi(u)
    second = ph[2:] - 2 * ph[1:-1] + ph[:-2]
    worst2 = float(np.min(second / np.maximum(1.0, np.abs(ph[1:-1]))))
    results["delta"] = ConditionResult("delta", worst2 >= -CLOSED_TOL, worst2,
                                       "min relative second difference of phi")
    return WeightConditionsReport(w.label, results)


DEFAULT_BMM_CANDIDATES = (1.5, 2.0, 3.0, 4.0, 6.0, 8.0) + tuple(float(2 ** k) for k in range(4, 20)) + (1e6,)


def _default_log_grid():
    return np.concatenate([np.linspace(-30.0, 50.0, 2001), np.geomspace(50.0, 1e4, 2000)[1:]])


def check_bmm(w: SubadditiveWeight, candidates: Sequence[float] = DEFAULT_BMM_CANDIDATES,
              log_grid=None) -> float | None:
    """Smallest candidate ``H > 1`` with ``2 omega(t) <= omega(H t) + H`` on the grid.

    The grid is given in ``u = log t``; ``t = 0`` is always included.
    Points where the weight overflows are discarded.
    """
    u = _default_log_grid() if log_grid is None else np.asarray(log_grid, dtype=float)
    for H in sorted(candidates):
        if H <= 1.0:
            continue
        with np.errstate(over="ignore", invalid="ignore"):
            lhs = 2.0 * w.phi(u)
            slack = w.phi(u + np.log(H)) + H - lhs
        keep = np.isfinite(slack)
        # t = 0 gives 0 <= H trivially
        if np.all(slack[keep] >= -CLOSED_TOL * np.maximum(1.0, lhs[keep])):
            return float(H)
    return None


@dataclass
class SmallPowerReport:
    a: float
    u: np.ndarray
    ratio: np.ndarray
    passed: bool


def check_small_power(w: SubadditiveWeight, a: float, log_grid=None, vanish_tol: float = 1e-2) -> SmallPowerReport:
    """Tabulate ``omega(x^a)/omega(x)`` on a geometric ``x``-grid (given as ``log x``)."""
    if not 0.0 <= a < 1.0:
        raise ValueError(f"exponent a must lie in [0, 1), got {a}")
    u = np.linspace(1.0, 200.0, 2000) if log_grid is None else np.asarray(log_grid, dtype=float)
    ratio = w.phi(a * u) / w.phi(u)
    late = ratio[len(ratio) // 2:]
    monotone = bool(np.all(np.diff(late) <= 1e-12))
    return SmallPowerReport(a, u, ratio, monotone and bool(ratio[-1] <= vanish_tol))
