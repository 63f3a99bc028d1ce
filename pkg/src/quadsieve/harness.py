"""Experiment configs, dispatch to the library, and report persistence.

A config is one JSON document; CLI flags override its fields.  Reports carry
deterministic data rows plus timing, which is kept apart so two runs of the
same config give byte-identical rows.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import math
import os
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional

from . import __version__
from .arith import primes_upto
from .density import hl_prediction, local_density, padic_ball_volume, real_density
from .enumeration import (
    enumerate_integral,
    enumerate_s_integral,
    height_padic,
    height_real,
    integral_chunks,
)
from .equidist import CongruenceNeighborhood, count_in_neighborhood, fit_discrepancy, main_term, DiscrepancyRecord
from .errors import BudgetExceeded, CapExceeded, ConfigInvalid, DegenerateFit, NotCoprime, NotStabilized
from .forms import Box, QuadraticForm, QuadricInstance
from .geomsieve import bad_point_count, bound_shape_check, halfdim_count, verify_record
from .modular import (
    SubvarietySpec,
    count_prime_power,
    count_quadric_ffield_brute,
    count_quadric_ffield_exact,
    count_subvariety_ffield,
)
from .poly import Polynomial
from .sieve import (
    DensityTable,
    almost_prime_search,
    build_sequence_from_chunks,
    density_from_counts,
    fundamental_lemma_report,
)

SCHEMA_VERSION = 1
KINDS = ("enumerate", "count-mod", "density", "equidist", "sieve", "almost-prime", "geom-sieve", "halfdim")
THREADS_ENV = "QSIEVE_THREADS"

# machine-readable warning codes
W_NOT_STABILIZED = "NOT_STABILIZED"
W_CAP_EXCEEDED = "CAP_EXCEEDED"
W_COPRIMALITY = "ADVISORY_COPRIMALITY"
W_NAIVE_REDUCTION = "NAIVE_REDUCTION_OF_Z"
W_LOW_CONFIDENCE = "LOW_CONFIDENCE_FIT"
W_NEGATIVE_TARGET = "NEGATIVE_TARGET_ONLY"
W_DEGENERATE = "DEGENERATE_SIEVE"
W_NOT_FOUND = "ALMOST_PRIME_EXHAUSTED"


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class ExperimentConfig:
    kind: str
    form: Optional[str] = None
    m: Optional[int] = None
    p0: Optional[int] = None
    h: Optional[int] = None
    region: Optional[str] = None
    height: Optional[str] = None
    sup_norm: bool = False
    params: Dict[str, Any] = field(default_factory=dict)
    point_cap: int = 10**7
    scan_cap: int = 10**8
    time_cap: float = 3600.0
    out: Optional[str] = None
    format: str = "csv"
    threads: int = 1

    _SKIP_HASH = ("out", "format", "threads")

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - names
        if extra:
            raise ConfigInvalid(sorted(extra)[0], "unknown field")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except FileNotFoundError:
            raise ConfigInvalid("config", f"file {path} not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigInvalid("config", f"invalid JSON: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def content_hash(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in self._SKIP_HASH}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha1(f"blob {len(blob)}\0{blob}".encode()).hexdigest()

    # -- parsing helpers with field-level diagnostics -------------------------

    def validate(self):
        if self.kind not in KINDS:
            raise ConfigInvalid("kind", f"must be one of {', '.join(KINDS)}")
        if self.format not in ("csv", "json"):
            raise ConfigInvalid("format", "must be csv or json")
        for name in ("point_cap", "scan_cap", "time_cap", "threads"):
            if not getattr(self, name) or getattr(self, name) <= 0:
                raise ConfigInvalid(name, "must be positive")
        if self.kind != "halfdim":
            self.quadratic_form()
            if self.m is None or int(self.m) == 0:
                raise ConfigInvalid("m", "a nonzero integer target is required")
        if self.region is not None:
            self.box()
        for key in ("f", "g"):
            if key in self.params:
                self.poly(key)

    def quadratic_form(self) -> QuadraticForm:
        if not self.form:
            raise ConfigInvalid("form", "missing")
        try:
            return QuadraticForm.parse(str(self.form))
        except (ValueError, json.JSONDecodeError) as exc:
            raise ConfigInvalid("form", str(exc)) from None

    def box(self) -> Optional[Box]:
        if self.region is None:
            return None
        try:
            return Box.parse(self.region)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigInvalid("region", str(exc)) from None

    def instance(self) -> QuadricInstance:
        try:
            return QuadricInstance(self.quadratic_form(), int(self.m), self.p0, self.h, self.box())
        except ValueError as exc:
            raise ConfigInvalid("instance", str(exc)) from None

    def poly(self, key: str) -> Polynomial:
        spec = self.params.get(key)
        if spec is None:
            raise ConfigInvalid(f"params.{key}", "missing")
        n = self.quadratic_form().n if self.form else None
        try:
            if isinstance(spec, str) and not spec.lstrip().startswith("["):
                if not os.path.exists(spec):
                    raise ConfigInvalid(f"params.{key}", f"file {spec} not found")
                return Polynomial.load(spec, n)
            return Polynomial.from_json(spec, n)
        except (ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"params.{key}", str(exc)) from None

    def grid(self, key: str, default=None) -> List[float]:
        raw = self.params.get(key, default)
        if raw is None:
            raise ConfigInvalid(f"params.{key}", "missing")
        try:
            g = parse_grid(raw)
        except ValueError as exc:
            raise ConfigInvalid(f"params.{key}", str(exc)) from None
        if not g:
            raise ConfigInvalid(f"params.{key}", "grid is empty")
        return g

    def param(self, key: str, cast=int, default=None, required=False):
        if key not in self.params or self.params[key] is None:
            if required:
                raise ConfigInvalid(f"params.{key}", "missing")
            return default
        try:
            return cast(self.params[key])
        except (TypeError, ValueError) as exc:
            raise ConfigInvalid(f"params.{key}", str(exc)) from None


def parse_grid(raw) -> List[float]:
    """"10,30,100", "64:4096:x2" (geometric), "0:7" or "0:7:+1" (arithmetic), or a list."""
    if isinstance(raw, (list, tuple)):
        return [_num(v) for v in raw]
    s = str(raw).strip()
    if ":" in s:
        parts = s.split(":")
        lo, hi = _num(parts[0]), _num(parts[1])
        step = parts[2] if len(parts) > 2 else "+1"
        out = []
        if step.startswith("x"):
            r = _num(step[1:])
            if r <= 1:
                raise ValueError("geometric ratio must exceed 1")
            v = lo
            while v <= hi:
                out.append(v)
                v = v * r
        else:
            d = _num(step.lstrip("+"))
            if d <= 0:
                raise ValueError("step must be positive")
            v = lo
            while v <= hi:
                out.append(v)
                v = v + d
        return out
    return [_num(v) for v in s.split(",") if v.strip()]


def _num(v):
    f = Fraction(str(v).strip())
    return int(f) if f.denominator == 1 else float(f)


@dataclass
class ExperimentReport:
    config: Dict[str, Any]
    input_hash: str
    columns: List[str]
    rows: List[List[Any]]
    summary: Dict[str, Any]
    warnings: List[str]
    timing: Dict[str, float] = field(default_factory=dict)
    version: str = __version__
    schema: int = SCHEMA_VERSION

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d) -> "ExperimentReport":
        return cls(**d)

    def data_rows_text(self) -> str:
        """Canonical text of the data rows, the part covered by the determinism contract."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        w.writerows(self.rows)
        return buf.getvalue()


class _Deadline:
    def __init__(self, cap):
        self.cap = cap
        self.t0 = time.perf_counter()

    def check(self):
        if time.perf_counter() - self.t0 > self.cap:
            raise BudgetExceeded(f"time_cap={self.cap}s exceeded")


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    if isinstance(x, float):
        return repr(round(x, 12))
    return str(x)


# ---------------------------------------------------------------------------
# runners
# ---------------------------------------------------------------------------


def _run_enumerate(cfg: ExperimentConfig, dl: _Deadline):
    inst = cfg.instance()
    n = inst.n
    if cfg.region is not None:
        pts = enumerate_s_integral(inst, cfg.threads)
    else:
        if cfg.height is None:
            raise ConfigInvalid("height", "need height N or a region")
        pts = enumerate_integral(inst, Fraction(str(cfg.height)), cfg.sup_norm, cfg.threads)
    rows = []
    for pt in pts:
        if len(rows) >= cfg.point_cap:
            raise CapExceeded(f"point_cap={cfg.point_cap} exceeded")
        if len(rows) % 4096 == 0:
            dl.check()
        e = height_padic(pt.coords, cfg.p0) if cfg.p0 else ""
        if e == -math.inf:
            e = "-inf"
        rows.append([_fmt(c) for c in pt.coords] + [_fmt(height_real(pt.coords)), str(e)])
    cols = [f"x{i + 1}" for i in range(n)] + ["height_real", "p0_exponent"]
    return cols, rows, {"count": len(rows)}, []


def _run_count_mod(cfg: ExperimentConfig, dl: _Deadline):
    q = cfg.quadratic_form()
    m = int(cfg.m)
    ps = _prime_list(cfg)
    k = cfg.param("k", int, 1)
    warnings = []
    rows = []
    sub = None
    if "f" in cfg.params:
        polys = [cfg.poly("f")] + ([cfg.poly("g")] if "g" in cfg.params else [])
        try:
            sub = SubvarietySpec(tuple(polys))
        except NotCoprime as exc:
            raise ConfigInvalid("params.g", f"advisory coprimality check failed: {exc}") from None
        warnings.append(W_NAIVE_REDUCTION)
    for p in ps:
        dl.check()
        if sub is not None:
            rows.append([p, 1, count_subvariety_ffield(sub, q, m, p, cfg.scan_cap), "scan-subvariety"])
            continue
        if k == 1:
            if p**q.n <= cfg.scan_cap:
                rows.append([p, 1, count_quadric_ffield_brute(q, m, p, cfg.scan_cap), "scan"])
            if p != 2 and q.det % p:
                rows.append([p, 1, count_quadric_ffield_exact(q, m, p), "formula"])
        else:
            method = "scan" if p ** (k * q.n) <= min(cfg.scan_cap, 10**6) else "lift"
            rows.append([p, k, count_prime_power(q, m, p, k, method, cfg.scan_cap), method])
    return ["prime", "k", "count", "method"], rows, {"primes": len(ps)}, warnings


def _prime_list(cfg: ExperimentConfig) -> List[int]:
    if "p" in cfg.params:
        ps = [int(v) for v in parse_grid(cfg.params["p"])]
    elif "all_primes_upto" in cfg.params:
        ps = primes_upto(cfg.param("all_primes_upto"))
    else:
        raise ConfigInvalid("params.p", "give p or all_primes_upto")
    from .arith import is_prime

    bad = [p for p in ps if not is_prime(p)]
    if bad:
        raise ConfigInvalid("params.p", f"{bad[0]} is not prime")
    return ps


def _run_density(cfg: ExperimentConfig, dl: _Deadline):
    q = cfg.quadratic_form()
    m = int(cfg.m)
    rows, warnings, summary = [], [], {}
    if "p" in cfg.params or "all_primes_upto" in cfg.params:
        for p in _prime_list(cfg):
            dl.check()
            try:
                d = local_density(q, m, p)
                rows.append([p, d.value.numerator, d.value.denominator, d.k_used, d.stabilized])
            except NotStabilized:
                warnings.append(W_NOT_STABILIZED)
                rows.append([p, "", "", "", False])
    if cfg.params.get("real"):
        box = cfg.box()
        if box is None:
            raise ConfigInvalid("region", "real density needs a region")
        rd = real_density(q, m, region=box, level=cfg.param("level", int, None))
        summary.update(sigma_inf=round(rd.value, 12), sigma_inf_err=round(rd.error, 12), level=rd.level)
    if cfg.params.get("ball"):
        if cfg.p0 is None or cfg.h is None:
            raise ConfigInvalid("p0", "ball volume needs p0 and h")
        v = padic_ball_volume(q, m, cfg.p0, cfg.h)
        summary.update(ball_volume_num=v.numerator, ball_volume_den=v.denominator)
    if cfg.params.get("prediction"):
        inst = cfg.instance()
        pred = hl_prediction(q, m, inst.region, inst.p0, inst.h or 0, cfg.param("p_cut", int, 997))
        summary.update(
            prediction=round(pred.total, 9),
            euler_product=round(pred.euler_product, 12),
            tail_low=round(pred.tail_low, 12),
            tail_high=round(pred.tail_high, 12),
        )
    return ["prime", "value_num", "value_den", "k_used", "stabilized"], rows, summary, warnings


def _run_equidist(cfg: ExperimentConfig, dl: _Deadline):
    inst = cfg.instance()
    q, m = inst.form, inst.m
    modulus = cfg.param("modulus", int, 1)
    residue = cfg.params.get("residue", [0] * q.n)
    if isinstance(residue, str):
        residue = [int(v) for v in residue.split(",")]
    try:
        nb = CongruenceNeighborhood.make(q, m, modulus, residue, inst.p0)
    except ValueError as exc:
        raise ConfigInvalid("params.residue", str(exc)) from None
    sched = cfg.grid("schedule", "0:6")
    p_cut = cfg.param("p_cut", int, 997)
    recs, rows = [], []
    for hv in sched:
        dl.check()
        if inst.region is not None:
            sub = dataclasses.replace(inst, h=int(hv))
            mt = main_term(sub, nb, p_cut=p_cut).value
            cnt = count_in_neighborhood(sub, nb, threads=cfg.threads)
        else:
            raise ConfigInvalid("region", "equidist schedules run over a region with p0-heights h")
        rec = DiscrepancyRecord(hv, cnt, mt, modulus)
        recs.append(rec)
        rows.append([hv, cnt, _fmt(mt), _fmt(rec.abs_err), _fmt(rec.rel_err)])
    summary, warnings = {}, []
    try:
        fit = fit_discrepancy(recs)
        summary.update(delta_hat=round(fit.delta_hat, 9), slope=round(fit.slope, 9), residual=round(fit.residual, 9))
        if fit.low_confidence:
            warnings.append(W_LOW_CONFIDENCE)
    except DegenerateFit:
        warnings.append(W_LOW_CONFIDENCE)
    return ["h", "count", "main", "abs_err", "rel_err"], rows, summary, warnings


def _sprime(cfg) -> List[int]:
    raw = cfg.params.get("Sprime", [])
    if isinstance(raw, str):
        raw = [v for v in raw.split(",") if v.strip()]
    try:
        return sorted({int(v) for v in raw})
    except ValueError as exc:
        raise ConfigInvalid("params.Sprime", str(exc)) from None


def _run_sieve(cfg: ExperimentConfig, dl: _Deadline):
    inst = cfg.instance()
    if cfg.height is None:
        raise ConfigInvalid("height", "sieve needs a height N")
    f = cfg.poly("f")
    sp = _sprime(cfg)
    z = cfg.param("z", float, required=True)
    y = cfg.param("y", float, required=True)
    A = build_sequence_from_chunks(integral_chunks(inst, Fraction(str(cfg.height)), cfg.sup_norm, cfg.threads), f, sp)
    dl.check()
    ps = [p for p in primes_upto(int(math.ceil(z)) - 1) if p < z and p not in sp]
    T = density_from_counts(inst.form, inst.m, f, ps, cfg.scan_cap)
    X = cfg.param("X", float, None) or A.total
    rep = fundamental_lemma_report(A, T, X, y, z)
    rows = [[d, ad, _fmt(exp), _fmt(dev)] for d, ad, exp, dev in rep.ledger]
    summary = {k: (round(v, 9) if isinstance(v, float) else v) for k, v in rep.summary().items()}
    summary.update(total=A.total, zero_bucket=A.zero_bucket, omega={str(p): _fmt(w) for p, w in T.omega.items()})
    return ["d", "A_d", "expected", "deviation"], rows, summary, [W_DEGENERATE] if rep.degenerate else []


def _run_almost_prime(cfg: ExperimentConfig, dl: _Deadline):
    inst = cfg.instance()
    f = cfg.poly("f")
    sp = _sprime(cfg)
    N = Fraction(str(cfg.height)) if cfg.height is not None else None
    res = almost_prime_search(
        inst,
        f,
        sp,
        cfg.param("M", float, required=True),
        cfg.param("r", int, required=True),
        N=N,
        budget=int(cfg.param("budget", float, cfg.point_cap)),
        threads=cfg.threads,
    )
    cols = ["point", "value", "primes", "distinct", "with_multiplicity", "verified"]
    rows = []
    if res.found:
        rows.append(
            [" ".join(_fmt(c) for c in res.point), res.value, " ".join(map(str, res.primes)), res.distinct, res.with_multiplicity, res.verified]
        )
    summary = {"found": res.found, "examined": res.examined, "histogram": {str(k): v for k, v in res.histogram.items()}, "zero_values": res.zero_values}
    return cols, rows, summary, [] if res.found else [W_NOT_FOUND]


def _run_geom_sieve(cfg: ExperimentConfig, dl: _Deadline):
    inst = cfg.instance()
    if inst.region is None or inst.p0 is None:
        raise ConfigInvalid("region", "geometric sieve needs p0, h and a region")
    try:
        spec = SubvarietySpec((cfg.poly("f"), cfg.poly("g")))
    except NotCoprime as exc:
        raise ConfigInvalid("params.g", f"advisory coprimality check failed: {exc}") from None
    grid = cfg.grid("M_grid", "10,30,100,300")
    rows, series = [], []
    n = inst.n
    for M in grid:
        dl.check()
        res = bad_point_count(inst, spec, M, math.inf, cfg.threads)
        ok = all(verify_record(inst, spec, r) for r in res.records)
        if not ok:
            raise AssertionError(f"witness re-verification failed at M={M}")
        ratio = res.count / res.total if res.total else 0.0
        series.append((M, res.count / inst.p0 ** ((inst.h or 0) * (n - 2))))
        rows.append([M, res.count, res.total, _fmt(ratio), res.generic, ok])
    summary, warnings = {}, [W_NAIVE_REDUCTION]
    try:
        fit = bound_shape_check(series)
        summary.update(
            coefficients=[round(c, 12) for c in fit.coefficients], residual=round(fit.residual, 12), nonincreasing=fit.nonincreasing
        )
    except DegenerateFit:
        warnings.append(W_LOW_CONFIDENCE)
    return ["M", "bad_count", "total", "ratio", "generic", "verified"], rows, summary, warnings


def _run_halfdim(cfg: ExperimentConfig, dl: _Deadline):
    a = cfg.param("a", int, 1)
    tail = cfg.params.get("tail", [1, 1])
    if isinstance(tail, str):
        tail = [int(v) for v in tail.split(",")]
    grid = cfg.grid("B_grid", "64:4096:x2")
    c_fixed = cfg.param("c", int, None)
    c_scale = cfg.param("c_scale", int, None)
    if (c_fixed is None) == (c_scale is None):
        raise ConfigInvalid("params.c", "give exactly one of c, c_scale (c = c_scale * B^2)")
    rows, warnings = [], []
    for B in grid:
        dl.check()
        B = int(B)
        c = c_fixed if c_fixed is not None else c_scale * B * B
        r = halfdim_count(a, tail, c, B)
        if r.negative_target_only:
            warnings.append(W_NEGATIVE_TARGET)
        rows.append([B, c, r.count, r.total, _fmt(r.fraction)])
    return ["B", "c", "count", "total", "fraction"], rows, {}, sorted(set(warnings))


_RUNNERS = {
    "enumerate": _run_enumerate,
    "count-mod": _run_count_mod,
    "density": _run_density,
    "equidist": _run_equidist,
    "sieve": _run_sieve,
    "almost-prime": _run_almost_prime,
    "geom-sieve": _run_geom_sieve,
    "halfdim": _run_halfdim,
}


def run(cfg: ExperimentConfig) -> ExperimentReport:
    cfg.validate()
    dl = _Deadline(cfg.time_cap)
    t0 = time.perf_counter()
    cols, rows, summary, warnings = _RUNNERS[cfg.kind](cfg, dl)
    wall = time.perf_counter() - t0
    rows = [[_cell(v) for v in r] for r in rows]
    timing = {"wall_seconds": wall, "rows_per_second": len(rows) / wall if wall > 0 else 0.0}
    return ExperimentReport(cfg.to_dict(), cfg.content_hash(), cols, rows, summary, list(warnings), timing)


def _cell(v):
    if isinstance(v, (bool, int, str)) or v is None:
        return v
    if isinstance(v, float):
        return round(v, 12)
    return _fmt(v)


def emit(report: ExperimentReport, path: Optional[str] = None, fmt: str = "csv") -> str:
    """Write the report (csv: versioned header comment, column header, rows; json: the
    whole report).  Returns the text written."""
    if fmt == "csv":
        text = f"# quadsieve {report.config.get('kind')} schema v{report.schema}\n" + report.data_rows_text()
    elif fmt == "json":
        text = json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read_report(path: str) -> ExperimentReport:
    with open(path) as fh:
        return ExperimentReport.from_dict(json.load(fh))
