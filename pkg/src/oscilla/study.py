"""epsilon sweeps: errors of w0, W1 and W2 against the thin-domain solution."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
import ast
import csv
import io
import json
import logging
import math
import re
import time

import numpy as np

from .cell import richardson_reference, solve_cell
from .correctors import TruncationField, truncation_on_mesh, w0_on_mesh
from .fem2d import (
    MIDPOINT_BARY,
    assemble_system,
    boundary_l2_norm,
    p1_at_quadrature,
    rescaled_norms,
    solve_neumann,
)
from .geometry import PeriodicProfile, SourceFunction
from .homogenized1d import solve_w0
from .mesh import build_thin_mesh, period_count

log = logging.getLogger(__name__)

CSV_HEADER = ["eps", "dof", "e0_l2", "e0_h1", "e1_h1", "e2_h1", "runtime_ms"]
THIN_TOL = 1e-8


@dataclass
class Thresholds:
    slope_min: float = 0.45
    slope_max: float = 1.2
    e0_h1_plateau: float = 0.5
    e0_l2_decay: float = 0.25
    refinement_change: float = 0.10
    trace_growth: float = 2.0
    r_richardson: float = 0.01


@dataclass
class StudyConfig:
    profile: PeriodicProfile = field(default_factory=lambda: PeriodicProfile(2.0, (1.0,), 1.0))
    source: SourceFunction = field(default_factory=lambda: SourceFunction((0.0, 1.0)))
    eps: tuple = (Fraction(1, 8), Fraction(1, 16), Fraction(1, 32), Fraction(1, 64))
    m: int = 32
    n: int = 8
    cell_tol: float = 1e-10
    thin_tol: float = THIN_TOL
    refinement_check: bool = False
    refinement_eps: Fraction = Fraction(1, 16)
    out_csv: str = None
    out_json: str = None
    jobs: int = 1
    thresholds: Thresholds = field(default_factory=Thresholds)

    def __post_init__(self):
        self.eps = tuple(parse_eps(e) for e in self.eps)
        self.refinement_eps = parse_eps(self.refinement_eps)
        self.validate()

    def validate(self):
        if not self.eps:
            raise ValueError("the eps list is empty")
        if any(b >= a for a, b in zip(self.eps, self.eps[1:])):
            raise ValueError("eps list must be strictly decreasing")
        for e in self.eps:
            period_count(float(e), self.profile.period)
        if self.m < 2 or self.n < 1:
            raise ValueError("need m >= 2 and n >= 1")
        if self.m < 4 or self.n < 4:
            log.warning("m=%d, n=%d is below production resolution (m, n >= 4)", self.m, self.n)

    def echo(self):
        return {
            "profile": self.profile.describe(),
            "source": self.source.describe(),
            "eps": [str(e) for e in self.eps],
            "m": self.m,
            "n": self.n,
            "cell_tol": self.cell_tol,
            "thin_tol": self.thin_tol,
            "refinement_check": self.refinement_check,
            "refinement_eps": str(self.refinement_eps),
            "thresholds": asdict(self.thresholds),
        }


def parse_eps(value):
    """Parse ``1/16``, ``0.0625`` or a number into an exact :class:`Fraction`."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        value = value.strip()
        return Fraction(value).limit_denominator(10**9)
    return Fraction(value).limit_denominator(10**9)


_CALL = re.compile(r"^\s*(\w+)\s*\((.*)\)\s*$", re.S)


def parse_profile(text):
    """``cosine(a0, [a1, ...], L)`` or ``constant(h, L)``."""
    m = _CALL.match(text)
    if not m:
        raise ValueError(f"cannot parse profile {text!r}")
    name, args = m.group(1), ast.literal_eval("(" + m.group(2) + ",)")
    if name == "cosine":
        a0, amps = args[0], args[1] if len(args) > 1 else ()
        L = args[2] if len(args) > 2 else 1.0
        return PeriodicProfile(a0, tuple(amps), L)
    if name == "constant":
        return PeriodicProfile.constant(*args)
    raise ValueError(f"unknown profile family {name!r}")


def parse_source(text):
    """``cospoly([c0, c1, ...])``."""
    m = _CALL.match(text)
    if not m or m.group(1) != "cospoly":
        raise ValueError(f"cannot parse source {text!r}")
    return SourceFunction(tuple(ast.literal_eval(m.group(2))))


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config(text):
    """Parse the ``key = value`` config format (``#`` starts a comment)."""
    kw = {}
    thresholds = {}
    threshold_keys = set(Thresholds.__dataclass_fields__)
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "profile":
            kw["profile"] = parse_profile(value)
        elif key == "source":
            kw["source"] = parse_source(value)
        elif key == "eps":
            kw["eps"] = tuple(parse_eps(v) for v in value.split(",") if v.strip())
        elif key in ("m", "n", "jobs"):
            kw[key] = int(value)
        elif key in ("cell_tol", "thin_tol"):
            kw[key] = float(value)
        elif key == "refinement_check":
            kw[key] = _bool(value)
        elif key == "refinement_eps":
            kw[key] = parse_eps(value)
        elif key in ("out_csv", "out_json"):
            kw[key] = value
        elif key in threshold_keys:
            thresholds[key] = float(value)
        else:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
    if thresholds:
        kw["thresholds"] = Thresholds(**thresholds)
    return StudyConfig(**kw)


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


@dataclass
class ErrorRecord:
    eps: float
    dof: int
    e0_l2: float
    e0_h1: float
    e1_h1: float
    e2_h1: float
    runtime_ms: float
    w_h1: float = 0.0
    f_l2: float = 0.0
    trace_ratio: float = 0.0
    kappa_l2: float = 0.0
    solve: dict = field(default_factory=dict)

    def finite(self):
        vals = (self.e0_l2, self.e0_h1, self.e1_h1, self.e2_h1)
        return all(math.isfinite(v) and v >= 0 for v in vals)


@dataclass
class StudyContext:
    """eps-independent data shared by every case of a study."""

    cell: object
    w0: object


def prepare(config):
    cell = solve_cell(config.profile, config.m, config.n, tol=config.cell_tol)
    w0 = solve_w0(config.source, cell.r)
    return StudyContext(cell, w0)


def run_case(config, eps, context):
    """Solve the thin problem at ``eps`` and measure the three rescaled errors."""
    eps_f = float(eps)
    t0 = time.perf_counter()
    try:
        thin = build_thin_mesh(config.profile, eps_f, config.m, config.n)
        K, M = assemble_system(thin)
        sol = solve_neumann(thin, eps_f, config.source, tol=config.thin_tol, system=(K, M))
    except Exception as exc:
        raise RuntimeError(f"case eps={eps} failed: {exc}") from exc
    wv, wg = p1_at_quadrature(thin, sol.values)
    wg = wg[:, None, :]

    def err(values, grads):
        return rescaled_norms(thin, eps_f, wv - values, wg - grads)

    v0, g0 = w0_on_mesh(context.w0, thin)
    e0_l2, e0_h1 = err(v0, g0)
    w1v, w1g = truncation_on_mesh(TruncationField(1, context.cell, context.w0, config.profile, eps_f), thin)
    _, e1_h1 = err(w1v, w1g)
    w2v, w2g = truncation_on_mesh(TruncationField(2, context.cell, context.w0, config.profile, eps_f), thin)
    _, e2_h1 = err(w2v, w2g)

    _, w_h1 = rescaled_norms(thin, eps_f, wv, wg)
    fq = config.source.value(np.einsum("qi,ti->tq", MIDPOINT_BARY, thin.nodes[thin.triangles][..., 0]))
    f_l2, _ = rescaled_norms(thin, eps_f, fq, np.zeros(fq.shape + (2,)))
    kappa_l2, _ = rescaled_norms(thin, eps_f, w1v - v0, np.zeros(w1g.shape))
    # unscaled norms for the trace inequality
    h1_plain = w_h1 * math.sqrt(eps_f)
    trace_ratio = math.sqrt(eps_f) * boundary_l2_norm(thin, sol.values) / h1_plain
    runtime = (time.perf_counter() - t0) * 1e3
    rec = ErrorRecord(eps_f, thin.n_nodes, e0_l2, e0_h1, e1_h1, e2_h1, runtime,
                      w_h1=w_h1, f_l2=f_l2, trace_ratio=trace_ratio, kappa_l2=kappa_l2,
                      solve=sol.report.as_dict())
    log.info("eps=%s dof=%d e0=(%.3e, %.3e) e1=%.3e e2=%.3e [%.0f ms, %d its]", eps,
             thin.n_nodes, e0_l2, e0_h1, e1_h1, e2_h1, runtime, sol.report.iterations)
    return rec


def fit_slope(eps, errors):
    """Least-squares slope of log(error) against log(eps); needs two points."""
    eps = np.asarray(eps, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(eps) < 2:
        raise ValueError("a slope needs at least two records")
    if np.any(errors <= 0):
        raise ValueError("errors must be positive to fit a log-log slope")
    slope, _ = np.polyfit(np.log(eps), np.log(errors), 1)
    return float(slope)


@dataclass
class StudyReport:
    config: dict
    cell: dict
    records: list
    slopes: dict
    e0_summary: dict
    acceptance: dict
    refinement: dict = None
    fit_error: str = None

    def passed(self):
        return all(v["passed"] for v in self.acceptance.values())

    def as_dict(self):
        return {
            "config": self.config,
            "cell": self.cell,
            "records": [asdict(r) for r in self.records],
            "slopes": self.slopes,
            "e0_summary": self.e0_summary,
            "refinement": self.refinement,
            "acceptance": self.acceptance,
            "fit_error": self.fit_error,
        }


def _rule(passed, value, limit, description):
    return {"passed": bool(passed), "value": value, "limit": limit, "description": description}


def cell_reference(config):
    """Richardson reference of r over m in {16, 32, 64} with n = m."""
    rs = [solve_cell(config.profile, m, m, tol=config.cell_tol).r for m in (16, 32, 64)]
    ref, order = richardson_reference(rs)
    return {"r_sequence": rs, "r_reference": ref, "observed_order": order}


def evaluate_acceptance(config, cell_diag, records, slopes, refinement=None, reference=None):
    """Apply the acceptance rules that the available data can decide."""
    t = config.thresholds
    out = {}
    if "e2_h1" in slopes:
        s = slopes["e2_h1"]
        out["second_order_rate"] = _rule(t.slope_min <= s <= t.slope_max, s,
                                         [t.slope_min, t.slope_max], "slope of e2_h1")
    if "e1_h1" in slopes:
        s = slopes["e1_h1"]
        e1 = [r.e1_h1 for r in records]
        dec = all(b < a for a, b in zip(e1, e1[1:]))
        out["first_order_rate"] = _rule(t.slope_min <= s <= t.slope_max and dec, s,
                                        [t.slope_min, t.slope_max],
                                        "slope of e1_h1 and strict decrease")
    if len(records) >= 2:
        first, last = records[0], records[-1]
        h1_ratio = last.e0_h1 / first.e0_h1 if first.e0_h1 else float("nan")
        l2_ratio = last.e0_l2 / first.e0_l2 if first.e0_l2 else float("nan")
        out["corrector_necessity"] = _rule(
            h1_ratio >= t.e0_h1_plateau and l2_ratio <= t.e0_l2_decay,
            {"e0_h1_ratio": h1_ratio, "e0_l2_ratio": l2_ratio},
            {"e0_h1_ratio_min": t.e0_h1_plateau, "e0_l2_ratio_max": t.e0_l2_decay},
            "e0 stalls in H1 but decays in L2",
        )
        tr = last.trace_ratio / first.trace_ratio
        out["trace_inequality"] = _rule(tr <= t.trace_growth, tr, t.trace_growth,
                                        "trace ratio growth from largest to smallest eps")
    if records:
        worst = max(r.w_h1 - r.f_l2 for r in records)
        out["a_priori_bound"] = _rule(worst <= 0.0, worst, 0.0, "max |||w|||_H1 - |||f|||_L2")
    r = cell_diag["r_flux"]
    ident = (0.0 < r <= 1.0 + 1e-10) and cell_diag["gap"] <= 1e-9
    out["coefficient_identities"] = _rule(ident, {"r": r, "gap": cell_diag["gap"]},
                                          {"r_max": 1.0 + 1e-10, "gap_max": 1e-9},
                                          "0 < r <= 1 and r_flux matches r_energy")
    if config.profile.family == "constant":
        ok = abs(r - 1.0) <= 1e-12
        out["constant_profile"] = _rule(ok, r, 1e-12, "constant profile gives r = 1")
    compat = (abs(cell_diag["x_load_sum"]) <= 1e-12
              and abs(cell_diag["theta_compatibility_residual"]) <= 1e-10 * cell_diag["cell_area"])
    out["fredholm_compatibility"] = _rule(
        compat,
        {"x_load_sum": cell_diag["x_load_sum"],
         "theta_residual": cell_diag["theta_compatibility_residual"]},
        {"x_load_sum": 1e-12, "theta_residual": 1e-10 * cell_diag["cell_area"]},
        "cell right sides integrate to zero",
    )
    if reference is not None:
        rel = abs(reference["r_sequence"][-1] - reference["r_reference"]) / abs(reference["r_reference"])
        out["r_richardson"] = _rule(rel <= t.r_richardson, rel, t.r_richardson,
                                    "r(m=64) relative to Richardson reference")
    if refinement is not None:
        out["mesh_independence"] = _rule(refinement["relative_change"] < t.refinement_change,
                                         refinement["relative_change"], t.refinement_change,
                                         "relative change of e2_h1 under m, n doubling")
    return out


def refinement_check(config, base_record=None):
    """e2_h1 at ``refinement_eps`` for (m, n) and (2m, 2n)."""
    eps = config.refinement_eps
    coarse = base_record
    if coarse is None:
        coarse = run_case(config, eps, prepare(config))
    fine_cfg = StudyConfig(profile=config.profile, source=config.source, eps=(eps,),
                           m=2 * config.m, n=2 * config.n, cell_tol=config.cell_tol,
                           thin_tol=config.thin_tol, thresholds=config.thresholds)
    fine = run_case(fine_cfg, eps, prepare(fine_cfg))
    change = abs(fine.e2_h1 - coarse.e2_h1) / coarse.e2_h1
    return {"eps": str(eps), "coarse_e2_h1": coarse.e2_h1, "fine_e2_h1": fine.e2_h1,
            "fine_m": fine_cfg.m, "fine_n": fine_cfg.n, "relative_change": change}


def run_sweep_and_fit(config, context=None, reference=False):
    """Run every eps case, fit the rates and evaluate acceptance.

    Records keep the configured eps order whatever the completion order.
    """
    context = prepare(config) if context is None else context
    if config.jobs > 1:
        with ThreadPoolExecutor(config.jobs) as pool:
            records = list(pool.map(lambda e: run_case(config, e, context), config.eps))
    else:
        records = [run_case(config, e, context) for e in config.eps]
    eps = [r.eps for r in records]
    slopes, fit_error = {}, None
    try:
        slopes = {
            "e1_h1": fit_slope(eps, [r.e1_h1 for r in records]),
            "e2_h1": fit_slope(eps, [r.e2_h1 for r in records]),
        }
    except ValueError as exc:
        fit_error = str(exc)
    e0 = {}
    if len(records) >= 2:
        e0 = {
            "e0_h1_ratio": records[-1].e0_h1 / records[0].e0_h1 if records[0].e0_h1 else None,
            "e0_l2_ratio": records[-1].e0_l2 / records[0].e0_l2 if records[0].e0_l2 else None,
        }
        if min(r.e0_l2 for r in records) > 0:
            e0["e0_l2_slope"] = fit_slope(eps, [r.e0_l2 for r in records])
        if min(r.e0_h1 for r in records) > 0:
            e0["e0_h1_slope"] = fit_slope(eps, [r.e0_h1 for r in records])
    refinement = None
    if config.refinement_check:
        base = next((r for e, r in zip(config.eps, records) if e == config.refinement_eps), None)
        refinement = refinement_check(config, base)
    ref = cell_reference(config) if reference else None
    diag = dict(context.cell.diagnostics)
    if ref is not None:
        diag["richardson"] = ref
    acceptance = evaluate_acceptance(config, context.cell.diagnostics, records, slopes,
                                     refinement, ref)
    return StudyReport(config.echo(), diag, records, slopes, e0, acceptance, refinement, fit_error)


def report_to_csv(report, timings=True):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in report.records:
        w.writerow([repr(float(r.eps)), r.dof, repr(r.e0_l2), repr(r.e0_h1), repr(r.e1_h1),
                    repr(r.e2_h1), repr(float(r.runtime_ms) if timings else 0.0)])
    return buf.getvalue()


def report_to_json(report, timings=True):
    data = report.as_dict()
    if not timings:
        for rec in data["records"]:
            rec["runtime_ms"] = 0.0
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=True) + "\n"


def emit_report(report, fmt, path, timings=True):
    """Write ``report`` as ``csv`` or ``json``.

    Output is byte-identical across runs once ``timings`` is False; with
    timings on, only the ``runtime_ms`` fields can differ.
    """
    if fmt == "csv":
        text = report_to_csv(report, timings)
    elif fmt == "json":
        text = report_to_json(report, timings)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
