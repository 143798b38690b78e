"""Batch experiment runner.

``tfcomp run <config.ini>`` executes one experiment described by an INI file,
writes deterministic CSV tables, two-column TSV plot data and a JSON
manifest (the only place with timestamps).  ``tfcomp list`` shows the
experiment kinds with their parameter schemas, ``tfcomp dump <file>``
pretty-prints the grid headers of a binary dump.

Exit codes: 0 all checks passed, 1 a check failed, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import json
import math
import os
import struct
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .io import rows_to_csv

OUTPUT_ENV = "TFCOMP_OUTPUT_DIR"
DEFAULT_OUTPUT = "tfcomp-out"
DEFAULT_BUDGET = 1 << 30

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    """Malformed or incomplete experiment configuration."""


# --------------------------------------------------------------------------
# schemas

REQ = object()  # marks a required key

_MAP_SCHEMA = {
    "kind": ("sine", "sine | bump | zero | shift | identity"),
    "amp": (0.3, "amplitude of the perturbation of psi"),
    "freq": (1.0, "frequency (sine)"),
    "beta": (0.3, "exponent (bump: amp (1 + x^2)^beta)"),
    "b": (0.0, "declared growth exponent of phi"),
}
_RUN_SCHEMA = {
    "workers": (1, "parallel tasks"),
    "budget": (DEFAULT_BUDGET, "memory budget in bytes"),
}
_OUTPUT_SCHEMA = {
    "dir": ("", f"output directory (default ${OUTPUT_ENV} or ./{DEFAULT_OUTPUT})"),
    "name": ("", "file stem (default: config file stem)"),
    "dump": (False, "also write binary dumps"),
}

SCHEMAS = {
    "weights": {
        "description": "Young conjugate and the inequality 3m phi*(j/3m) + j <= m phi*(j/m)",
        "sections": {
            "weight": {"family": (REQ, "gevrey | log_power | power"), "param": (REQ, "s, q or exponent")},
            "young": {"j_max": (50, "largest j"), "m_max": (50, "largest m"),
                      "y_max": (100.0, "largest y in the conjugate table"),
                      "y_count": (100, "conjugate table size")},
        },
    },
    "stft-identities": {
        "description": "orthogonality relations and the STFT-of-Rihaczek identity",
        "sections": {
            "grid": {"L": (REQ, "half width of the integration grid"), "n": (REQ, "nodes (power of two)")},
            "probes": {"hermite_max": (3, "largest Hermite order in the quadruples"),
                       "points_per_axis": (3, "Rihaczek probes per axis in [-2, 2]^4"),
                       "tol": (1e-5, "residual threshold")},
        },
    },
    "symbol-decay": {
        "description": "decay ratios of the 4-D STFT of exp(i phi(x) y)",
        "sections": {
            "map": _MAP_SCHEMA,
            "grid": {"z_half_width": (8.0, "half width of the z grid"), "z_count": (64, "z nodes (power of two)"),
                     "n_zeta": (64, "zeta nodes (power of two)")},
            "decay": {"mode": ("zeta1", "zeta1 | zeta2 | zeta1_vs_z2 | zeta2_vs_z1b"),
                      "N": ("2,4,6", "decay orders"),
                      "gevrey": (2.0, "Gevrey order of omega (exponential modes)"),
                      "k_candidates": ("0,1,2,4,8,16", "k sweep (exponential modes)"),
                      "expect": ("stable", "stable | unstable")},
        },
    },
    "derivative-bounds": {
        "description": "Faa di Bruno derivative bound of exp(i phi(x) y)",
        "sections": {
            "map": _MAP_SCHEMA,
            "weight": {"family": ("gevrey", "gevrey | log_power | power"), "param": (2.0, "weight parameter")},
            "bounds": {"ell": (1, "ell"), "n_max": (12, "largest order (<= 15)"),
                       "x_half_width": (4.0, "x range"), "y_half_width": (8.0, "y range"),
                       "points": (33, "probe points per axis"),
                       "candidates": ("0,1,2,4,8,16,32", "m candidates")},
        },
    },
    "operator-model": {
        "description": "ultradifferential operator G(D): Cauchy bound and product expansion",
        "sections": {
            "model": {"K": (REQ, "number of product factors"), "s": (REQ, "Gevrey order")},
            "cauchy": {"n_max": (40, "largest coefficient index"), "m": ("", "m (default ceil(m_G))")},
            "expansion": {"k_max": (8, "largest k"), "r_max": (4, "largest r"), "ell": (1, "ell"),
                          "plane_wave": (1.0, "frequency of the test plane wave"),
                          "m0_candidates": ("1,2,4,8,16,32,64", "m0 sweep")},
        },
    },
    "norm-probe": {
        "description": "norm ratios of composition / Kohn-Nirenberg operators over shifted Gaussians",
        "sections": {
            "map": _MAP_SCHEMA,
            "probe": {"operator": ("compose", "identity | compose | kohn_nirenberg"),
                      "p": ("2", "1 | 2 | inf"), "extent": (16.0, "largest shift"), "count": (9, "lattice side"),
                      "source": ("poly:6", "poly:s | loss:s:k | exp_split:s | unit"),
                      "target": ("poly:1", "same syntax as source"),
                      "gevrey": (2.0, "Gevrey order for exponential weights"),
                      "slope_max": (0.01, "slope threshold"), "cap": (10.0, "max/median threshold"),
                      "growth_min": (0.05, "slope a growth expectation must exceed"),
                      "expect": ("bounded", "bounded | growth")},
        },
    },
}


@dataclass
class ExperimentConfig:
    kind: str
    params: dict  # section -> key -> value (strings resolved to typed defaults)
    workers: int = 1
    budget: int = DEFAULT_BUDGET
    output_dir: Path = Path(DEFAULT_OUTPUT)
    name: str = "experiment"
    dump: bool = False
    source: str = ""
    raw: dict = field(default_factory=dict)

    def get(self, section: str, key: str):
        return self.params[section][key]


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def _coerce(value: str, default, where: str):
    if default is REQ or isinstance(default, str):
        return value
    try:
        if isinstance(default, bool):
            v = value.strip().lower()
            if v in ("1", "true", "yes", "on"):
                return True
            if v in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {value!r} as {type(default).__name__}") from None
    return value


def _section_lines(text: str) -> dict:
    out = {}
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            out.setdefault(s[1:-1].strip(), i)
    return out


def _num(v, where):
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected a number, got {v!r}") from None


def parse_config(path) -> ExperimentConfig:
    """Parse and schema-check an experiment file.

    Errors name the file, the line (when known) and the offending key.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigError(str(exc).replace("\n", " ")) from None
    lines = _section_lines(text)

    def loc(section):
        return f"{path}:{lines[section]}" if section in lines else str(path)

    if not cp.has_section("experiment") or "kind" not in cp["experiment"]:
        raise ConfigError(f"{loc('experiment')}: missing key 'experiment.kind'")
    kind = cp["experiment"]["kind"].strip()
    if kind not in SCHEMAS:
        raise ConfigError(f"{loc('experiment')}: unknown experiment kind {kind!r} "
                          f"(known: {', '.join(SCHEMAS)})")
    schema = dict(SCHEMAS[kind]["sections"])
    allowed = set(schema) | {"experiment", "run", "output"}
    for sec in cp.sections():
        if sec not in allowed:
            raise ConfigError(f"{loc(sec)}: unknown section [{sec}] for kind {kind!r}")
    params = {}
    for sec, keys in list(schema.items()) + [("run", _RUN_SCHEMA), ("output", _OUTPUT_SCHEMA)]:
        given = cp[sec] if cp.has_section(sec) else {}
        for k in given:
            if k not in keys:
                raise ConfigError(f"{loc(sec)}: unknown key '{sec}.{k}'")
        vals = {}
        for k, (default, _) in keys.items():
            if k in given:
                vals[k] = _coerce(given[k], default, f"{loc(sec)}: key '{sec}.{k}'")
            elif default is REQ:
                if sec not in lines:
                    raise ConfigError(f"{path}: missing section [{sec}] (required key '{sec}.{k}')")
                raise ConfigError(f"{loc(sec)}: missing required key '{sec}.{k}'")
            else:
                vals[k] = default
        params[sec] = vals
    _validate(kind, params, loc)
    run, out = params.pop("run"), params.pop("output")
    if run["workers"] < 1:
        raise ConfigError(f"{loc('run')}: key 'run.workers' must be >= 1")
    if run["budget"] < 1:
        raise ConfigError(f"{loc('run')}: key 'run.budget' must be positive")
    odir = out["dir"] or os.environ.get(OUTPUT_ENV) or DEFAULT_OUTPUT
    raw = {s: dict(cp[s]) for s in cp.sections()}
    return ExperimentConfig(kind, params, run["workers"], run["budget"], Path(odir),
                            out["name"] or path.stem, out["dump"], str(path), raw)


def _validate(kind, params, loc):
    def pow2(sec, key):
        n = params[sec][key]
        n = int(_num(n, f"{loc(sec)}: key '{sec}.{key}'"))
        if not _is_pow2(n):
            raise ConfigError(f"{loc(sec)}: key '{sec}.{key}' must be a power of two, got {n}")
        params[sec][key] = n

    if kind == "stft-identities":
        pow2("grid", "n")
        params["grid"]["L"] = _num(params["grid"]["L"], f"{loc('grid')}: key 'grid.L'")
    elif kind == "symbol-decay":
        pow2("grid", "z_count")
        pow2("grid", "n_zeta")
    elif kind == "weights":
        params["weight"]["param"] = _num(params["weight"]["param"], f"{loc('weight')}: key 'weight.param'")
    elif kind == "operator-model":
        params["model"]["K"] = int(_num(params["model"]["K"], f"{loc('model')}: key 'model.K'"))
        params["model"]["s"] = _num(params["model"]["s"], f"{loc('model')}: key 'model.s'")
    if "map" in params and params["map"]["kind"] not in ("sine", "bump", "zero", "shift", "identity"):
        raise ConfigError(f"{loc('map')}: key 'map.kind' has unknown value {params['map']['kind']!r}")


# --------------------------------------------------------------------------
# builders


def _floats(text: str) -> list:
    return [float(v) for v in str(text).replace(" ", "").split(",") if v]


def _weight(family: str, param: float):
    from .weights import SubadditiveWeight

    if family == "gevrey":
        return SubadditiveWeight.gevrey(param)
    if family == "log_power":
        return SubadditiveWeight.log_power(param)
    if family == "power":
        return SubadditiveWeight.power(param)
    raise ConfigError(f"unknown weight family {family!r}")


def _scalar_map(spec: dict):
    from .symbol import ScalarMap

    kind = spec["kind"]
    if kind == "sine":
        return ScalarMap.sine(spec["amp"], spec["freq"])
    if kind == "bump":
        return ScalarMap.bump(spec["amp"], spec["beta"])
    if kind == "shift":
        return ScalarMap.const(spec["amp"])
    return ScalarMap.zero()


def _perturbation(spec: dict):
    """``phi = 2 pi p`` with ``psi = x + p``."""
    from .symbol import PerturbationMap

    p = _scalar_map(spec)
    return PerturbationMap.scalar(p.scale(2 * math.pi), b=spec["b"], label=f"{spec['kind']}")


def _composition(spec: dict):
    from .operators import CompositionMap

    if spec["kind"] == "identity":
        return CompositionMap.identity()
    return CompositionMap.from_psi(_scalar_map(spec), b=spec["b"], label=spec["kind"])


def _tf_weight(text: str, omega):
    from .weights import TFWeight

    parts = text.split(":")
    try:
        if parts[0] == "unit":
            return TFWeight.unit()
        if parts[0] == "poly":
            return TFWeight.poly(float(parts[1]))
        if parts[0] == "loss":
            return TFWeight.loss(float(parts[1]), float(parts[2]), omega)
        if parts[0] == "exp_split":
            return TFWeight.exp_split(float(parts[1]), omega)
    except (IndexError, ValueError):
        pass
    raise ConfigError(f"cannot parse weight {text!r} (poly:s | loss:s:k | exp_split:s | unit)")


def _p(text: str) -> float:
    t = str(text).strip().lower()
    if t in ("inf", "infinity"):
        return math.inf
    if t in ("1", "2"):
        return float(t)
    raise ConfigError(f"p must be 1, 2 or inf, got {text!r}")


# --------------------------------------------------------------------------
# experiments: each returns (tables, plots, checks, blobs)
#   tables: name -> (columns, rows); plots: name -> (x, y) arrays;
#   checks: list of dicts (check, value, threshold, status)


def _check(name, value, threshold, ok):
    return {"check": name, "value": value, "threshold": threshold, "status": "PASS" if ok else "FAIL"}


def _exp_weights(cfg):
    from .weights import check_young_inequality, young_conjugate

    w = _weight(cfg.get("weight", "family"), cfg.get("weight", "param"))
    yc = cfg.params["young"]
    rep = check_young_inequality(w, yc["j_max"], yc["m_max"])
    rows = [{"weight_id": w.label, "j_max": yc["j_max"], "m_max": yc["m_max"],
             "worst_slack": rep.worst_slack, "worst_j": rep.worst_jm[0], "worst_m": rep.worst_jm[1],
             "violations": len(rep.violations), "passed": rep.passed}]
    g = w.gevrey_order
    lo = 1.0 / g if g else 0.0
    y = np.linspace(lo, yc["y_max"], yc["y_count"])
    tables = {"young": (("weight_id", "j_max", "m_max", "worst_slack", "worst_j", "worst_m",
                         "violations", "passed"), rows)}
    plots = {"conjugate": (y, np.asarray(young_conjugate(w, y), dtype=float))}
    return tables, plots, [_check("young_inequality", rep.worst_slack, 0.0, rep.passed)], {}


def _exp_stft(cfg):
    from .signal import AnalyticSignal, UniformGrid
    from .stft import orthogonality_check, rihaczek_stft_identity_check, stft

    grid = UniformGrid(1, cfg.get("grid", "L"), cfg.get("grid", "n"))
    pr = cfg.params["probes"]
    fam = [AnalyticSignal.normalized_gaussian()] + [AnalyticSignal.hermite(k) for k in range(1, pr["hermite_max"] + 1)]
    fam.append(AnalyticSignal.normalized_gaussian(2.0))
    quads = []
    for i in range(len(fam)):
        j = (i + 1) % len(fam)
        quads.append((i, i, j, j))
        quads.append((i, j, j, i))
    rows = []
    for q in quads[:10]:
        r = orthogonality_check(fam[q[0]], fam[q[1]], fam[q[2]], fam[q[3]], grid)
        rows.append({"f1": fam[q[0]].label, "f2": fam[q[1]].label, "g1": fam[q[2]].label, "g2": fam[q[3]].label,
                     "lhs_re": r.lhs.real, "lhs_im": r.lhs.imag, "rhs_re": r.rhs.real, "rhs_im": r.rhs.imag,
                     "residual": r.residual})
    k = np.linspace(-2, 2, pr["points_per_axis"])
    pts = np.array(np.meshgrid(k, k, k, k, indexing="ij")).reshape(4, -1).T
    g0 = AnalyticSignal.normalized_gaussian()
    rep = rihaczek_stft_identity_check(g0, g0.translate(0.5), g0, AnalyticSignal.normalized_gaussian(1.5), pts)
    res = np.abs(rep.lhs - rep.rhs)
    rrows = [{"z1": p[0], "z2": p[1], "zeta1": p[2], "zeta2": p[3], "residual": float(e)} for p, e in zip(pts, res)]
    tol = pr["tol"]
    orth = max(r["residual"] for r in rows)
    checks = [_check("orthogonality", orth, tol, orth <= tol), _check("rihaczek_identity", rep.residual, tol,
                                                                       rep.residual <= tol)]
    tables = {"orthogonality": (("f1", "f2", "g1", "g2", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "residual"), rows),
              "rihaczek": (("z1", "z2", "zeta1", "zeta2", "residual"), rrows)}
    plots = {"rihaczek_residual": (np.arange(res.size, dtype=float), res)}
    blobs = {}
    if cfg.dump:
        blobs["stft"] = stft(g0, g0, grid).to_bytes()
    return tables, plots, checks, blobs


def _exp_symbol(cfg):
    from .signal import UniformGrid
    from .symbol import DECAY_CSV_COLUMNS, decay_ratio_exp, decay_ratio_poly, symbol_stft_4d

    phi = _perturbation(cfg.params["map"])
    gp, dp = cfg.params["grid"], cfg.params["decay"]
    V = symbol_stft_4d(phi, None, UniformGrid(1, gp["z_half_width"], gp["z_count"]), gp["n_zeta"],
                       budget=cfg.budget, workers=cfg.workers)
    mode, b = dp["mode"], cfg.params["map"]["b"]
    reports = []
    Ns = _floats(dp["N"])
    if mode in ("zeta1", "zeta2"):
        for N in Ns:
            reports.append(decay_ratio_poly(V, int(N), mode, b))
        stable = all(r.stable for r in reports)
        best = max(r.stability for r in reports)
        checks_detail = [("stability_" + format(r.N, "g"), r.stability, r.stable) for r in reports]
    elif mode in ("zeta1_vs_z2", "zeta2_vs_z1b"):
        w = _weight("gevrey", dp["gevrey"])
        stable = True
        checks_detail = []
        for N in Ns:
            res = decay_ratio_exp(V, w, N, mode, b, tuple(_floats(dp["k_candidates"])))
            reports.extend(res.reports)
            checks_detail.append((f"k_for_N{N:g}", res.k if res.k is not None else math.nan, res.passed))
            stable = stable and res.passed
        best = max(r.stability for r in reports)
    else:
        raise ConfigError(f"key 'decay.mode' has unknown value {mode!r}")
    from .symbol import STABILITY_TOL

    want = dp["expect"] == "stable"
    checks = []
    for name, val, ok in checks_detail:
        checks.append(_check(name, val, STABILITY_TOL, ok if want else not ok))
    if not want:
        checks.append(_check("growth_detected", best, STABILITY_TOL, best > STABILITY_TOL))
    tables = {"decay": (DECAY_CSV_COLUMNS, [r.row() for r in reports])}
    plots = {"sup_ratio": (np.array([r.N for r in reports]), np.array([r.sup_ratio for r in reports]))}
    blobs = {"symbol_stft": V.to_bytes()} if cfg.dump else {}
    return tables, plots, checks, blobs


def _exp_derivative(cfg):
    from .ultradiff import check_derivative_bound

    phi = _perturbation(cfg.params["map"])
    w = _weight(cfg.get("weight", "family"), float(cfg.get("weight", "param")))
    bp = cfg.params["bounds"]
    x = np.linspace(-bp["x_half_width"], bp["x_half_width"], bp["points"])
    y = np.linspace(-bp["y_half_width"], bp["y_half_width"], bp["points"])
    rep = check_derivative_bound(phi, w, bp["ell"], bp["n_max"], x, y, tuple(_floats(bp["candidates"])))
    rows = [{"phi_id": phi.label, "n": int(n), "required_m": float(v)} for n, v in sorted(rep.required_by_n.items())]
    tables = {"derivative_bound": (("phi_id", "n", "required_m"), rows),
              "summary": (("phi_id", "m", "required", "worst_margin"),
                          [{"phi_id": phi.label, "m": rep.m, "required": rep.required,
                            "worst_margin": rep.worst_margin}])}
    plots = {"required_m": (np.array([r["n"] for r in rows], dtype=float), np.array([r["required_m"] for r in rows]))}
    return tables, plots, [_check("derivative_bound", rep.m if rep.m is not None else math.nan,
                                  max(_floats(bp["candidates"])), rep.passed)], {}


def _exp_operator(cfg):
    from .signal import AnalyticSignal
    from .ultradiff import COEFF_CSV_COLUMNS, build_operator, check_cauchy_bound, product_expansion

    mp, cp, ep = cfg.params["model"], cfg.params["cauchy"], cfg.params["expansion"]
    Gm = build_operator(mp["K"], mp["s"])
    m = float(cp["m"]) if cp["m"] else float(math.ceil(Gm.m_G))
    rep = check_cauchy_bound(Gm, m, cp["n_max"])
    x = np.linspace(-4, 4, 33)
    g = AnalyticSignal.normalized_gaussian()
    h = AnalyticSignal.plane_wave(ep["plane_wave"])
    pe = product_expansion(Gm, g, ep["k_max"], ep["r_max"], x, h=h, ell=ep["ell"],
                           m0_candidates=tuple(_floats(ep["m0_candidates"])))
    m0_rows = [{"model_id": Gm.label, "m0": m0, "required_C": c} for m0, c in sorted(pe.m0_required_C.items())]
    tables = {"cauchy": (COEFF_CSV_COLUMNS, rep.rows()),
              "expansion": (("model_id", "m0", "required_C"), m0_rows),
              "model": (("model_id", "K", "s", "m_G", "m_G_radius", "ellipticity", "ellipticity_at",
                         "reassembly_residual", "m0_formula", "m0_empirical"),
                        [{"model_id": Gm.label, "K": Gm.K, "s": Gm.s, "m_G": Gm.m_G, "m_G_radius": Gm.m_G_radius,
                          "ellipticity": Gm.ellipticity, "ellipticity_at": Gm.ellipticity_at,
                          "reassembly_residual": pe.reassembly_residual, "m0_formula": pe.m0_formula,
                          "m0_empirical": pe.m0_empirical}])}
    with np.errstate(divide="ignore"):
        plots = {"cauchy_log_coeff": (rep.n.astype(float), np.log(rep.value)),
                 "cauchy_log_bound": (rep.n.astype(float), np.log(rep.bound))}
    checks = [_check("cauchy_bound", rep.worst_margin, 0.0, rep.passed),
              _check("reassembly", pe.reassembly_residual, 1e-8, pe.reassembly_residual <= 1e-8),
              _check("coefficient_bound", pe.m0_empirical if pe.passed else math.nan, "C<=2^20", pe.passed)]
    return tables, plots, checks, {}


def _exp_probe(cfg):
    from .operators import PROBE_CSV_COLUMNS, ProbeGrids, norm_ratio_probe, shift_family
    from .signal import AnalyticSignal

    pp = cfg.params["probe"]
    psi = _composition(cfg.params["map"])
    omega = _weight("gevrey", pp["gevrey"])
    m_src, m_tgt = _tf_weight(pp["source"], omega), _tf_weight(pp["target"], omega)
    g = AnalyticSignal.normalized_gaussian()
    fam = shift_family(g, pp["extent"], pp["count"])
    res = norm_ratio_probe(pp["operator"], psi, fam, m_src, m_tgt, _p(pp["p"]), ProbeGrids.for_extent(pp["extent"]),
                           workers=cfg.workers, slope_max=pp["slope_max"], cap=pp["cap"], label=psi.label)
    checks = []
    if pp["expect"] == "growth":
        checks.append(_check("slope_growth", res.slope, pp["growth_min"], res.slope > pp["growth_min"]))
    else:
        checks.append(_check("slope", res.slope, pp["slope_max"], res.slope <= pp["slope_max"]))
        checks.append(_check("cap_ratio", res.cap_ratio, pp["cap"], res.cap_ratio <= pp["cap"]))
    checks.append(_check("tail_flags", len(res.flagged), 0, not res.flagged))
    summary = [{"operator": pp["operator"], "map": psi.label, "source": m_src.label, "target": m_tgt.label,
                "p": pp["p"], "slope": res.slope, "slope_stderr": res.slope_stderr, "max_ratio": res.max_ratio,
                "median_ratio": res.median_ratio, "cap_ratio": res.cap_ratio, "expect": pp["expect"],
                "status": "PASS" if all(c["status"] == "PASS" for c in checks) else "FAIL"}]
    tables = {"ratios": (PROBE_CSV_COLUMNS, [{"family_param_a": r["a"], "family_param_beta": r["beta"],
                                              "ratio": r["ratio"], "flags": r["flags"]} for r in res.rows]),
              "trend": (tuple(summary[0]), summary)}
    plots = {"ratio_vs_shift": (np.array([r["shift"] for r in res.rows]), np.array([r["ratio"] for r in res.rows]))}
    return tables, plots, checks, {}


RUNNERS = {
    "weights": _exp_weights,
    "stft-identities": _exp_stft,
    "symbol-decay": _exp_symbol,
    "derivative-bounds": _exp_derivative,
    "operator-model": _exp_operator,
    "norm-probe": _exp_probe,
}


def run_experiment(cfg: ExperimentConfig) -> tuple[int, dict]:
    """Execute ``cfg``, write its files and return ``(exit status, manifest)``."""
    from .symbol import MemoryBudgetError

    started = _dt.datetime.now(_dt.timezone.utc)
    t0 = time.perf_counter()
    try:
        tables, plots, checks, blobs = RUNNERS[cfg.kind](cfg)
    except MemoryBudgetError as exc:
        raise ConfigError(f"memory budget refused: {exc}") from None
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    stem = cfg.name
    files = []
    for name, (cols, rows) in tables.items():
        p = cfg.output_dir / f"{stem}.{name}.csv"
        p.write_text(rows_to_csv(cols, rows))
        files.append(p.name)
    for name, (xv, yv) in plots.items():
        p = cfg.output_dir / f"{stem}.{name}.tsv"
        p.write_text(rows_to_csv(("x", "y"), [{"x": float(a), "y": float(b)} for a, b in zip(xv, yv)], "\t"))
        files.append(p.name)
    for name, blob in blobs.items():
        p = cfg.output_dir / f"{stem}.{name}.bin"
        p.write_bytes(blob)
        files.append(p.name)
    failed = [c["check"] for c in checks if c["status"] != "PASS"]
    status = EXIT_FAIL if failed else EXIT_OK
    manifest = {
        "tool": "tfcomp", "version": __version__, "kernel_backend": _kernels.BACKEND,
        "config": cfg.source, "kind": cfg.kind, "parameters": cfg.raw,
        "workers": cfg.workers, "budget": cfg.budget,
        "started": started.isoformat(), "finished": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "elapsed_s": time.perf_counter() - t0,
        "checks": checks, "failed": failed, "exit_status": status, "files": files,
    }
    (cfg.output_dir / f"{stem}.manifest.json").write_text(json.dumps(manifest, indent=2, default=str) + "\n")
    return status, manifest


# --------------------------------------------------------------------------
# list / dump


def list_experiments(as_json: bool = False) -> str:
    listing = {}
    for kind, sch in SCHEMAS.items():
        secs = dict(sch["sections"], run=_RUN_SCHEMA, output=_OUTPUT_SCHEMA)
        listing[kind] = {
            "description": sch["description"],
            "parameters": {f"{s}.{k}": {"default": None if d is REQ else d, "required": d is REQ, "help": h}
                           for s, keys in secs.items() for k, (d, h) in keys.items()},
        }
    if as_json:
        return json.dumps(listing, indent=2)
    out = []
    for kind, info in listing.items():
        out.append(f"{kind}: {info['description']}")
        for key, meta in info["parameters"].items():
            dflt = "(required)" if meta["required"] else f"= {meta['default']!r}"
            out.append(f"    {key} {dflt}  {meta['help']}")
    return "\n".join(out)


def _read_header(blob: bytes, offset: int):
    d, n, L = struct.unpack_from("<3d", blob, offset)
    return d, n, L


def _plausible(h) -> bool:
    d, n, L = h
    return d in (1.0, 2.0) and n >= 1 and n == int(n) and _is_pow2(int(n)) and L > 0 and math.isfinite(L)


def infer_headers(blob: bytes) -> list:
    """Grid headers of a dump: 1 (signal), 2 (STFT) or 4 (symbol STFT)."""
    for count in (4, 2, 1):
        if len(blob) < 24 * count:
            continue
        heads = [_read_header(blob, 24 * i) for i in range(count)]
        if not all(_plausible(h) for h in heads):
            continue
        cells = 1
        for d, n, _ in heads:
            cells *= int(n) ** int(d)
        if len(blob) - 24 * count == 16 * cells:
            return heads
    raise ValueError("file size matches no 1/2/4-header layout")


def dump_file(path) -> str:
    blob = Path(path).read_bytes()
    heads = infer_headers(blob)
    kinds = {1: "sampled signal", 2: "STFT matrix", 4: "symbol STFT"}
    lines = [f"{path}: {kinds[len(heads)]}, {len(heads)} grid header(s), {len(blob)} bytes"]
    for i, (d, n, L) in enumerate(heads):
        lines.append(f"  grid {i}: d={int(d)} n={int(n)} L={L!r} spacing={2 * L / n!r}")
    vals = np.frombuffer(blob, dtype="<c16", offset=24 * len(heads))
    a = np.abs(vals)
    lines.append(f"  values: {vals.size} complex, max |v| = {a.max():.6g}, l2 = {np.sqrt(np.sum(a ** 2)):.6g}")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tfcomp", description="time-frequency composition-operator experiments")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("config")
    r.add_argument("--output-dir", help=f"override the output directory (else [output] dir, ${OUTPUT_ENV})")
    r.add_argument("--workers", type=int, help="override [run] workers")
    ls = sub.add_parser("list", help="list experiment kinds and parameters")
    ls.add_argument("--json", action="store_true", help="machine-readable listing")
    d = sub.add_parser("dump", help="pretty-print a binary dump")
    d.add_argument("file")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    if args.command == "list":
        print(list_experiments(args.json))
        return EXIT_OK
    if args.command == "dump":
        try:
            print(dump_file(args.file))
        except (OSError, ValueError, struct.error) as exc:
            print(f"tfcomp dump: {exc}", file=sys.stderr)
            return EXIT_USAGE
        return EXIT_OK
    try:
        cfg = parse_config(args.config)
        if args.output_dir:
            cfg.output_dir = Path(args.output_dir)
        if args.workers:
            cfg.workers = args.workers
        status, manifest = run_experiment(cfg)
    except ConfigError as exc:
        print(f"tfcomp: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        print(f"tfcomp: check failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    for c in manifest["checks"]:
        print(f"{c['status']}  {c['check']}  value={c['value']}  threshold={c['threshold']}")
    print(f"wrote {len(manifest['files'])} files to {cfg.output_dir}")
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
