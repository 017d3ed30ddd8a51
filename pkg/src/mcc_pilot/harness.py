"""Worst-quarter evaluation protocol, parameter sweeps and pattern comparison.

Seeds: realization ``r`` of sweep value ``i`` draws its channel from
``make_rng(seed, i, r, 0)``, the noise of shift ``s`` from
``make_rng(seed, i, r, 1, s)`` and the random baseline from
``make_rng(seed, i, r, 2)``. All patterns see the same channel and noise, and
results do not depend on how work is split across processes.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from ._accel import backend_name
from .channel import SimConfig, build_dictionaries, channel_at, observe, sample_channel
from .geometry import coherence_map, collinearity_census, coverage, symmetric_triples
from .patterns import PilotPattern, baseline_3gpp, baseline_chirp, baseline_random, validate
from .recovery import RecoveryConfig, nmse, recover
from .rng import make_rng
from .solver import SolverConfig, solve_mcc, tighten_budget

log = logging.getLogger(__name__)

PATTERN_NAMES = ("mcc", "3gpp", "chirp", "random", "coverage_only", "collinearity_only")
SWEEP_KINDS = ("snr", "interval", "subwindow", "k")
CSV_HEADER = ("pattern", "sweep_kind", "sweep_value", "metric", "value", "realizations_used")
RAW_HEADER = ("pattern", "sweep_kind", "sweep_value", "realization", "worst_quarter_nmse", "error")
METRIC = "median_worst_quarter_nmse"
K_SWEEP_BANDWIDTH = 408
MAX_FAIL_FRACTION = 0.10

_STREAM_CHANNEL, _STREAM_NOISE, _STREAM_RANDOM = 0, 1, 2


class ShiftError(RuntimeError):
    def __init__(self, shift, cause):
        super().__init__(f"recovery failed at cyclic shift {shift}: {cause}")
        self.shift = shift


class SweepAborted(RuntimeError):
    pass


# --- reducers -----------------------------------------------------------------

def worst_count(k: int) -> int:
    """Number of worst shifts averaged; ``k < 4`` falls back to the single worst."""
    return max(k // 4, 1)


def worst_quarter(values) -> float:
    v = sorted((float(x) for x in values), reverse=True)
    if not v:
        raise ValueError("no values to reduce")
    n = worst_count(len(v))
    return math.fsum(v[:n]) / n


def exact_median(values) -> float:
    """Order-statistic median; an even count averages the two central values."""
    v = sorted(float(x) for x in values)
    if not v:
        raise ValueError("median of an empty sequence")
    mid = len(v) // 2
    if len(v) % 2:
        return v[mid]
    return (v[mid - 1] + v[mid]) / 2.0


# --- protocol -------------------------------------------------------------------

@lru_cache(maxsize=8)
def _dictionaries(config: SimConfig):
    return build_dictionaries(config)


def shift_nmse(pattern: PilotPattern, channel, config: SimConfig,
               recovery: RecoveryConfig = RecoveryConfig(), noise_key=(0,)) -> list[float]:
    """Latest-slot NMSE for every cyclic shift on one channel realization."""
    F, G = _dictionaries(config)
    truth = channel_at(channel.h, F, G, config.t0)
    out = []
    for s in range(pattern.k):
        try:
            window = observe(pattern, s, channel, config, rng=make_rng(*noise_key, s), F=F, G=G)
            res = recover(window, F, G, recovery)
            out.append(nmse(res.latest_channel, truth))
        except Exception as exc:
            raise ShiftError(s, exc) from exc
    return out


def evaluate_pattern(pattern: PilotPattern, channel, config: SimConfig,
                     recovery: RecoveryConfig = RecoveryConfig(), noise_key=(0,)) -> float:
    """Average of the worst ``floor(k/4)`` shift NMSEs on one realization."""
    return worst_quarter(shift_nmse(pattern, channel, config, recovery, noise_key))


# --- pattern construction and cache ---------------------------------------------

def default_cache_dir() -> Path:
    env = os.environ.get("MCC_PILOT_CACHE")
    return Path(env) if env else Path.home() / ".cache" / "mcc-pilot"


def design_key(name: str, k: int, threshold: float = 0.05, gap: float = 0.0) -> str:
    """Stable identifier of a solved design request."""
    payload = {"name": name, "k": k, "threshold": threshold, "gap": gap}
    digest = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()[:12]
    return f"{name}_k{k}_{digest}"


@lru_cache(maxsize=1)
def _bundled_designs() -> dict:
    try:
        text = resources.files("mcc_pilot").joinpath("designs.json").read_text()
    except FileNotFoundError:
        return {}
    return json.loads(text)


def _solve_design(name, k, time_limit, threshold, gap):
    base = SolverConfig(k, time_limit=time_limit, gap=gap)
    if name == "coverage_only":
        res = solve_mcc(replace(base, budget=None, symmetric_exclusion=False))
        budget = None
    elif name == "collinearity_only":
        res = solve_mcc(replace(base, objective="collinearity"))
        budget = None
    elif name == "mcc":
        budget, res = tighten_budget(k, threshold=threshold, base=base, bisect=True)
    else:
        raise ValueError(f"{name!r} is not a solver-built pattern")
    if res.pattern is None:
        raise RuntimeError(f"{name} design for k={k} has no feasible pattern ({res.status})")
    return {
        "name": name, "k": k, "schedule": list(res.pattern.schedule),
        "status": res.status, "objective": res.objective, "budget": budget,
        "radius_bound": res.radius_bound, "threshold": threshold, "gap": gap,
    }


def design_pattern(name: str, k: int, *, seed: int = 0, time_limit: float = 600.0,
                   threshold: float = 0.05, gap: float = 0.0, cache_dir=None,
                   use_cache: bool = True) -> PilotPattern:
    """Build one of the named patterns; solver designs go through the disk cache."""
    if name == "3gpp":
        return baseline_3gpp(k)
    if name == "chirp":
        return baseline_chirp(k)
    if name == "random":
        return baseline_random(k, make_rng(seed))
    if name not in PATTERN_NAMES:
        raise ValueError(f"unknown pattern {name!r}; choose from {', '.join(PATTERN_NAMES)}")
    key = design_key(name, k, threshold, gap)
    cache = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    path = cache / f"{key}.json"
    entry = None
    if use_cache:
        entry = _bundled_designs().get(key)
        if entry is None and path.exists():
            entry = json.loads(path.read_text())
    if entry is None:
        log.info("solving %s design for k=%d", name, k)
        entry = _solve_design(name, k, time_limit, threshold, gap)
        if use_cache:
            cache.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(entry, indent=1, sort_keys=True))
    pattern = PilotPattern(k, tuple(entry["schedule"]))
    if not validate(pattern):
        raise ValueError(f"cached design {key} is not a permutation pattern")
    return pattern


# --- sweeps -------------------------------------------------------------------

def apply_sweep_value(sim: SimConfig, kind: str, value) -> SimConfig:
    if kind == "snr":
        return replace(sim, snr_db=float(value))
    if kind == "interval":
        return replace(sim, pilot_interval=float(value))
    if kind == "subwindow":
        return replace(sim, window=int(value))
    if kind == "k":
        k = int(value)
        return replace(sim, k=k, M=K_SWEEP_BANDWIDTH // k)
    raise ValueError(f"unknown sweep kind {kind!r}; choose from {', '.join(SWEEP_KINDS)}")


def format_value(v) -> str:
    if isinstance(v, (int, np.integer)) or (isinstance(v, float) and v.is_integer()):
        return str(int(v))
    return repr(float(v))


@dataclass(frozen=True)
class SweepSpec:
    sweep_kind: str
    values: tuple
    sim: SimConfig = field(default_factory=SimConfig)
    recovery: RecoveryConfig = field(default_factory=RecoveryConfig)
    patterns: tuple = ("mcc", "3gpp", "chirp")
    realizations: int = 50
    seed: int = 0
    design_time_limit: float = 600.0

    def __post_init__(self):
        if self.sweep_kind not in SWEEP_KINDS:
            raise ValueError(f"unknown sweep kind {self.sweep_kind!r}")
        if len(self.values) == 0:
            raise ValueError("sweep needs at least one value")
        if self.realizations < 1:
            raise ValueError("realizations must be positive")
        bad = [p for p in self.patterns if p not in PATTERN_NAMES]
        if bad or not self.patterns:
            raise ValueError(f"unknown or missing patterns: {bad}")

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        d = dict(d)
        sim = SimConfig(**d.pop("sim", {}))
        rec = RecoveryConfig(**d.pop("recovery", {}))
        d["values"] = tuple(d["values"])
        if "patterns" in d:
            d["patterns"] = tuple(d["patterns"])
        return cls(sim=sim, recovery=rec, **d)

    def to_dict(self) -> dict:
        return {
            "sweep_kind": self.sweep_kind, "values": list(self.values),
            "sim": asdict(self.sim), "recovery": asdict(self.recovery),
            "patterns": list(self.patterns), "realizations": self.realizations,
            "seed": self.seed, "design_time_limit": self.design_time_limit,
        }


@dataclass(frozen=True)
class SweepRow:
    pattern_name: str
    sweep_kind: str
    sweep_value: object
    median_worst_quarter_nmse: float
    realizations_used: int
    raw: tuple = field(default=(), repr=False)


def _realization_task(args):
    """One (value, realization) unit: a shared channel scored for every pattern."""
    seed, vi, r, sim, rec, patterns = args
    channel = sample_channel(sim, make_rng(seed, vi, r, _STREAM_CHANNEL))
    out = {}
    for name, sched in patterns:
        try:
            if sched is None:
                pattern = baseline_random(sim.k, make_rng(seed, vi, r, _STREAM_RANDOM))
            else:
                pattern = PilotPattern(sim.k, sched)
            out[name] = (evaluate_pattern(pattern, channel, sim, rec, (seed, vi, r, _STREAM_NOISE)), "")
        except Exception as exc:  # recorded and excluded by the caller
            out[name] = (None, str(exc).replace("\n", " "))
    return vi, r, out


def _map(func, tasks, jobs):
    if jobs <= 1:
        return [func(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))


def resolve_patterns(spec: SweepSpec, k: int, cache_dir=None, use_cache=True):
    """``(name, schedule)`` pairs; the random baseline stays ``None`` (drawn per realization)."""
    out = []
    for name in spec.patterns:
        if name == "random":
            out.append((name, None))
        else:
            p = design_pattern(name, k, time_limit=spec.design_time_limit,
                               cache_dir=cache_dir, use_cache=use_cache)
            out.append((name, p.schedule))
    return tuple(out)


def run_sweep(spec: SweepSpec, out_dir=None, jobs: int = 1, cache_dir=None,
              use_cache: bool = True) -> list[SweepRow]:
    """Median worst-quarter NMSE per (pattern, value); writes CSVs when ``out_dir`` is set."""
    started = time.perf_counter()
    tasks, sims, resolved = [], [], {}
    for vi, value in enumerate(spec.values):
        sim = apply_sweep_value(spec.sim, spec.sweep_kind, value)
        sims.append(sim)
        if sim.k not in resolved:
            resolved[sim.k] = resolve_patterns(spec, sim.k, cache_dir, use_cache)
        for r in range(spec.realizations):
            tasks.append((spec.seed, vi, r, sim, spec.recovery, resolved[sim.k]))
    results = _map(_realization_task, tasks, jobs)

    scores = {}
    for vi, r, out in sorted(results, key=lambda x: (x[0], x[1])):
        for name, (val, err) in out.items():
            scores.setdefault((name, vi), []).append((r, val, err))
    rows = []
    for name in spec.patterns:
        for vi, value in enumerate(spec.values):
            entries = scores[(name, vi)]
            good = [v for _, v, _ in entries if v is not None]
            failed = len(entries) - len(good)
            if failed > MAX_FAIL_FRACTION * len(entries):
                first = next(e for _, v, e in entries if v is None)
                raise SweepAborted(
                    f"{failed}/{len(entries)} realizations failed for {name} at "
                    f"{spec.sweep_kind}={format_value(value)}: {first}")
            rows.append(SweepRow(name, spec.sweep_kind, value, exact_median(good), len(good),
                                 tuple(entries)))
    if out_dir is not None:
        write_sweep(rows, spec, out_dir, resolved, sims, time.perf_counter() - started, jobs)
    return rows


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in rows:
        w.writerow([row.pattern_name, row.sweep_kind, format_value(row.sweep_value), METRIC,
                    repr(float(row.median_worst_quarter_nmse)), row.realizations_used])
    return buf.getvalue()


def raw_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RAW_HEADER)
    for row in rows:
        for r, val, err in row.raw:
            w.writerow([row.pattern_name, row.sweep_kind, format_value(row.sweep_value), r,
                        "" if val is None else repr(float(val)), err])
    return buf.getvalue()


def write_sweep(rows, spec, out_dir, resolved, sims, wall_time, jobs):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"sweep_{spec.sweep_kind}"
    (out / f"{stem}.csv").write_text(sweep_csv(rows))
    (out / f"{stem}_raw.csv").write_text(raw_csv(rows))
    meta = {
        "tool": "mcc-pilot", "version": __version__, "backend": backend_name(),
        "spec": spec.to_dict(),
        "resolved_sims": [asdict(s) for s in sims],
        "patterns": {str(k): {n: (None if s is None else list(s)) for n, s in pats}
                     for k, pats in resolved.items()},
        "seed_streams": {"channel": [spec.seed, "value_idx", "realization", _STREAM_CHANNEL],
                         "noise": [spec.seed, "value_idx", "realization", _STREAM_NOISE, "shift"],
                         "random_pattern": [spec.seed, "value_idx", "realization", _STREAM_RANDOM]},
        "jobs": jobs, "wall_time_s": round(wall_time, 3),
    }
    (out / f"{stem}_meta.json").write_text(json.dumps(meta, indent=1))


# --- comparison -------------------------------------------------------------------

@dataclass(frozen=True)
class PatternReport:
    name: str
    schedule: tuple
    radius: int
    coverage_total: int
    redundant_lines: int
    collinear_triples: int
    four_collinear: bool
    symmetric_triples: int
    max_offpeak_coherence: float
    nmse: float | None = None


def pattern_metrics(name: str, pattern: PilotPattern) -> PatternReport:
    cov = coverage(pattern)
    census = collinearity_census(pattern) if pattern.k >= 2 else None
    coh = coherence_map(pattern)
    return PatternReport(
        name=name, schedule=pattern.schedule, radius=cov.radius, coverage_total=cov.total,
        redundant_lines=census.redundant_lines if census else 0,
        collinear_triples=int(sum(math.comb(int(c), 3) for c in census.counts)) if census else 0,
        four_collinear=census.has_four_collinear if census else False,
        symmetric_triples=len(symmetric_triples(pattern)) if pattern.k >= 3 else 0,
        max_offpeak_coherence=coh.max_offpeak,
    )


def compare_patterns(k: int, sim: SimConfig | None = None, recovery: RecoveryConfig = RecoveryConfig(),
                     patterns=PATTERN_NAMES, realizations: int = 50, seed: int = 0, jobs: int = 1,
                     design_time_limit: float = 600.0, cache_dir=None, with_nmse: bool = True,
                     use_cache: bool = True) -> list[PatternReport]:
    """Geometry metrics of each named pattern plus its default-SNR sweep score."""
    sim = replace(sim or SimConfig(), k=k)
    if sim.k != k or sim.N_tau > sim.N:
        raise ValueError(f"simulation grid does not fit k={k}")
    reports = []
    for name in patterns:
        p = design_pattern(name, k, seed=seed, time_limit=design_time_limit,
                           cache_dir=cache_dir, use_cache=use_cache)
        reports.append(pattern_metrics(name, p))
    if with_nmse:
        spec = SweepSpec("snr", (sim.snr_db,), sim=sim, recovery=recovery, patterns=tuple(patterns),
                         realizations=realizations, seed=seed, design_time_limit=design_time_limit)
        rows = {r.pattern_name: r for r in run_sweep(spec, jobs=jobs, cache_dir=cache_dir,
                                                      use_cache=use_cache)}
        reports = [replace(rep, nmse=rows[rep.name].median_worst_quarter_nmse) for rep in reports]
    return reports


def report_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["pattern", "schedule", "radius", "coverage_total", "redundant_lines",
                "collinear_triples", "four_collinear", "symmetric_triples", "max_offpeak_coherence", "nmse"])
    for r in reports:
        w.writerow([r.name, " ".join(map(str, r.schedule)), r.radius, r.coverage_total,
                    r.redundant_lines, r.collinear_triples, int(r.four_collinear), r.symmetric_triples,
                    repr(r.max_offpeak_coherence), "" if r.nmse is None else repr(r.nmse)])
    return buf.getvalue()
