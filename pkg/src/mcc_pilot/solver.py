"""Exact construction of coverage- and collinearity-controlled pilot patterns.

Stage one finds the smallest covering radius ``r_k`` reachable by any
permutation pattern. Stage two minimises the coverage total with the radius
capped at ``r_k``, optionally under a budget on lines holding three pilots,
a ban on four collinear pilots and a ban on symmetric triples.

Both stages run a depth-first branch-and-bound that fills one slot at a time
in increasing subband order. Subband 0 is pinned to slot 0: every constraint
and objective is invariant under cyclic time shifts, so this loses no
optimum, and the first optimum met is the lexicographically smallest one.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from . import kernels
from .geometry import (
    collinearity_census,
    coverage,
    enumerate_modular_lines,
    symmetric_triple_table,
    symmetric_triples,
)
from .patterns import PilotPattern, baseline_3gpp

log = logging.getLogger(__name__)

TABLE_LIMIT = 50_000_000
CHUNK_NODES = 200_000
GAP_DEN = 1_000_000
WARM_START_MIN_K = 10
ANNEAL_ITERS = 200_000
ANNEAL_RESTARTS = 4

OPTIMAL = "optimal"
GAP = "gap"
TIMEOUT = "timeout"
INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class SolverConfig:
    """Constraints and limits for one solve.

    ``budget=None`` drops every collinearity constraint except the optional
    symmetric-triple ban (coverage-only design). With a budget, a line may
    hold at most two pilots unless it is one of at most ``budget`` redundant
    lines; a redundant line holds three pilots, or more when
    ``forbid_four_collinear`` is off.
    """

    k: int
    budget: int | None = None
    forbid_four_collinear: bool = True
    symmetric_exclusion: bool = True
    time_limit: float = 60.0
    gap: float = 0.0
    objective: str = "coverage"
    radius: int | None = None
    symmetry_breaking: bool = True

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be positive, got {self.k}")
        if self.budget is not None and self.budget < 0:
            raise ValueError(f"budget must be non-negative, got {self.budget}")
        if self.budget is not None and self.k >= 2:
            n_lines = len(enumerate_modular_lines(self.k))
            if self.budget > n_lines:
                raise ValueError(f"budget {self.budget} exceeds the {n_lines} lines for k={self.k}")
        if not self.time_limit > 0:
            raise ValueError(f"time_limit must be positive, got {self.time_limit}")
        if not 0 <= self.gap < 1:
            raise ValueError(f"gap must lie in [0, 1), got {self.gap}")
        if self.objective not in ("coverage", "collinearity"):
            raise ValueError(f"unknown objective {self.objective!r}")

    def key(self) -> dict:
        return {
            "k": self.k,
            "budget": self.budget,
            "forbid_four_collinear": self.forbid_four_collinear,
            "symmetric_exclusion": self.symmetric_exclusion,
            "gap": self.gap,
            "objective": self.objective,
            "radius": self.radius,
        }


@dataclass(frozen=True)
class SolveResult:
    pattern: PilotPattern | None
    radius_bound: int | None
    objective: int | None
    status: str
    gap: float
    nodes_explored: int
    wall_time: float
    config: SolverConfig = field(repr=False)

    @property
    def proven_optimal(self) -> bool:
        return self.status in (OPTIMAL, GAP)

    @property
    def feasible(self) -> bool:
        return self.pattern is not None


# --- problem data ---------------------------------------------------------------

@lru_cache(maxsize=None)
def _line_arrays(k):
    lines = enumerate_modular_lines(k)
    per_point = [[] for _ in range(k * k)]
    for i, line in enumerate(lines):
        for f, t in line.points:
            per_point[f * k + t].append(i)
    width = max(len(p) for p in per_point)
    arr = np.full((k * k, width), -1, dtype=np.int64)
    for p, ids in enumerate(per_point):
        arr[p, : len(ids)] = ids
    arr.setflags(write=False)
    return arr, len(lines)


@lru_cache(maxsize=None)
def _triple_arrays(k):
    triples = sorted({tuple(f * k + t for f, t in tri) for _, tri in symmetric_triple_table(k)})
    per_point = [[] for _ in range(k * k)]
    for tri in triples:
        for x in range(3):
            others = [tri[y] for y in range(3) if y != x]
            per_point[tri[x]].append(others)
    width = max(1, max(len(p) for p in per_point))
    arr = np.full((k * k, width, 2), -1, dtype=np.int64)
    for p, rows in enumerate(per_point):
        if rows:
            arr[p, : len(rows)] = rows
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=8)
def _tables(k, r):
    W = min(r + 1, k)
    if k**W > TABLE_LIMIT:
        raise ValueError(
            f"column table for k={k}, radius {r} has {k ** W} entries (limit {TABLE_LIMIT})"
        )
    table = np.asarray(kernels.column_table(k, W, r))
    flat, offsets = kernels.reduced_tables(table, k, W)
    chain = np.asarray(kernels.chain_table(table, k, W, k - 1))
    # root bound: the k - W + 1 chained columns plus the W - 1 wrapped ones
    c_min = int(table.min())
    root = int(chain[k - W + 1].min()) + (W - 1) * c_min if W <= k else k * c_min
    for a in (flat, offsets, chain):
        a.setflags(write=False)
    return W, flat, offsets, chain, root


_EMPTY_LINES = np.full((1, 1), -1, dtype=np.int64)
_EMPTY_TRIPLES = np.full((1, 1, 2), -1, dtype=np.int64)
_EMPTY_TABLE = np.zeros(1, dtype=np.int16)
_EMPTY_CHAIN = np.zeros((1, 1), dtype=np.int16)
_EMPTY_OFFSETS = np.zeros(2, dtype=np.int64)


@dataclass
class _Search:
    status: str
    best_sched: np.ndarray | None
    best_value: int | None
    nodes: int
    wall_time: float
    root_bound: int


def _search(k, mode, *, radius=None, use_lines=False, budget=0, forbid_four=True,
            use_triples=False, fix_first=True, gap=0.0, time_limit=60.0, upper_bound=None):
    if k == 1:
        return _Search(OPTIMAL, np.zeros(1, dtype=np.int64), 0, 1, 0.0, 0)
    if radius is not None:
        W, flat, offsets, chain, root = _tables(k, radius)
        use_table = True
    else:
        W, flat, offsets, chain, root = 1, _EMPTY_TABLE, _EMPTY_OFFSETS, _EMPTY_CHAIN, 0
        use_table = False
    if use_lines:
        point_lines, n_lines = _line_arrays(k)
    else:
        point_lines, n_lines = _EMPTY_LINES, 1
    point_triples = _triple_arrays(k) if use_triples else _EMPTY_TRIPLES

    num = int(round((1.0 - gap) * GAP_DEN))
    prune_at = np.array([num, GAP_DEN], dtype=np.int64)
    state = np.zeros(6, dtype=np.int64)
    state[1] = kernels.BIG if upper_bound is None else upper_bound + 1
    sched = np.zeros(k, dtype=np.int64)
    nxt = np.zeros(k + 1, dtype=np.int64)
    cum = np.zeros(k + 1, dtype=np.int64)
    line_count = np.zeros(n_lines, dtype=np.int64)
    occupied = np.zeros(k * k, dtype=np.bool_)
    used = np.zeros(k, dtype=np.bool_)
    best_sched = np.zeros(k, dtype=np.int64)

    start = time.perf_counter()
    if upper_bound is None and mode != kernels.MODE_FEASIBLE and k >= WARM_START_MIN_K:
        upper_bound = _warm_start(k, mode, W, flat, offsets, use_table, point_lines, n_lines,
                                  use_lines, budget, forbid_four, point_triples, use_triples)
    if upper_bound is not None:
        state[1] = upper_bound + 1
    nodes = 0
    status = kernels.STATUS_BUDGET
    while True:
        status, n = kernels.bnb_kernel(
            k, W, mode, flat, offsets, chain, use_table,
            point_lines, use_lines, budget, forbid_four,
            point_triples, use_triples, fix_first,
            prune_at, state, sched, nxt, cum, line_count, occupied, used, best_sched,
            CHUNK_NODES,
        )
        nodes += int(n)
        if status == kernels.STATUS_DONE:
            break
        if time.perf_counter() - start > time_limit:
            break
    elapsed = time.perf_counter() - start
    found = bool(state[3])
    if status == kernels.STATUS_DONE:
        if mode == kernels.MODE_FEASIBLE or gap == 0.0:
            verdict = OPTIMAL if found else INFEASIBLE
        else:
            verdict = GAP if found else INFEASIBLE
    else:
        verdict = TIMEOUT
    return _Search(
        verdict,
        best_sched.copy() if found else None,
        int(state[1]) if found else None,
        nodes,
        elapsed,
        root,
    )


def _warm_start(k, mode, W, flat, offsets, use_table, point_lines, n_lines, use_lines,
                budget, forbid_four, point_triples, use_triples):
    """Objective of a feasible schedule found by annealing, or None.

    The exact search then keeps only schedules at least as good, so the
    warm start never changes which optimum is returned.
    """
    table = flat[offsets[(1 << W) - 1]:] if use_table else flat
    w_red = 1 if mode == kernels.MODE_COLLINEAR else 0
    sched, obj, viol = kernels.anneal_kernel(
        k, W, table, use_table, w_red, point_lines, n_lines, use_lines, budget,
        forbid_four, point_triples, use_triples, k, ANNEAL_ITERS, ANNEAL_RESTARTS,
    )
    if viol != 0:
        return None
    log.debug("warm start for k=%d: objective %d", k, obj)
    return int(obj)


# --- stage one -----------------------------------------------------------------

@dataclass(frozen=True)
class RadiusResult:
    radius: int
    proven_optimal: bool
    pattern: PilotPattern
    nodes_explored: int
    wall_time: float


def radius_lower_bound(k: int) -> int:
    """A column is covered by at most ``(r + 1)**2`` cells within radius ``r``."""
    return math.isqrt(k - 1) if k > 1 else 0


_RADIUS_CACHE: dict[int, RadiusResult] = {}


def covering_radius_search(k: int, time_limit: float = 60.0) -> RadiusResult:
    """Ascending feasibility search for the minimum covering radius."""
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    cached = _RADIUS_CACHE.get(k)
    if cached is not None and cached.proven_optimal:
        return cached
    if k == 1:
        res = RadiusResult(0, True, PilotPattern(1, (0,)), 1, 0.0)
        _RADIUS_CACHE[k] = res
        return res
    start = time.perf_counter()
    nodes = 0
    r = radius_lower_bound(k)
    fallback = baseline_3gpp(k)
    fallback_r = coverage(fallback).radius
    while r < fallback_r:
        remaining = time_limit - (time.perf_counter() - start)
        if remaining <= 0:
            break
        sched = _anneal_radius(k, r) if k >= WARM_START_MIN_K else None
        if sched is None:
            s = _search(k, kernels.MODE_FEASIBLE, radius=r, time_limit=remaining)
            nodes += s.nodes
            status, sched = s.status, s.best_sched
        else:
            status = OPTIMAL
        if status == OPTIMAL:
            res = RadiusResult(r, True, PilotPattern(k, tuple(sched.tolist())),
                               nodes, time.perf_counter() - start)
            _RADIUS_CACHE[k] = res
            return res
        if status == TIMEOUT:
            log.warning("radius search for k=%d timed out at r=%d", k, r)
            return RadiusResult(fallback_r, False, fallback, nodes, time.perf_counter() - start)
        r += 1
    proven = r >= fallback_r
    res = RadiusResult(fallback_r, proven, fallback, nodes, time.perf_counter() - start)
    if proven:
        _RADIUS_CACHE[k] = res
    return res


def _anneal_radius(k, r):
    """A schedule with covering radius <= r found by annealing, or None."""
    W, flat, offsets, _, _ = _tables(k, r)
    table = flat[offsets[(1 << W) - 1]:]
    sched, _, viol = kernels.anneal_kernel(
        k, W, table, True, 0, _EMPTY_LINES, 1, False, 0, True, _EMPTY_TRIPLES, False,
        k, ANNEAL_ITERS // 4, ANNEAL_RESTARTS,
    )
    return np.asarray(sched, dtype=np.int64) if viol == 0 else None


def min_covering_radius(k: int, time_limit: float = 60.0) -> int:
    """Smallest covering radius over all permutation patterns."""
    return covering_radius_search(k, time_limit).radius


# --- stage two -----------------------------------------------------------------

def solve_mcc(config: SolverConfig) -> SolveResult:
    """Minimise the coverage total (or the redundant-line count) under ``config``."""
    start = time.perf_counter()
    k = config.k
    radius = config.radius
    if config.objective == "coverage" and radius is None:
        rr = covering_radius_search(k, config.time_limit)
        radius = rr.radius
        if not rr.proven_optimal:
            # stage two needs the exact r_k as its cap
            return SolveResult(None, radius, None, TIMEOUT, math.inf, rr.nodes_explored,
                               time.perf_counter() - start, config)
    use_lines = config.budget is not None or config.objective == "collinearity"
    if k >= 2 and use_lines:
        _, n_lines = _line_arrays(k)
        budget = n_lines if config.budget is None else config.budget
    else:
        budget = 0
    remaining = config.time_limit - (time.perf_counter() - start)
    if config.objective == "coverage":
        mode = kernels.MODE_COVERAGE
        search_radius = radius
    else:
        mode = kernels.MODE_COLLINEAR
        search_radius = config.radius
    s = _search(
        k, mode,
        radius=search_radius,
        use_lines=use_lines and k >= 2,
        budget=budget,
        forbid_four=config.forbid_four_collinear,
        use_triples=config.symmetric_exclusion and k >= 3,
        fix_first=config.symmetry_breaking,
        gap=config.gap,
        time_limit=max(remaining, 1e-3),
    )
    pattern = None if s.best_sched is None else PilotPattern(k, tuple(s.best_sched.tolist()))
    if s.status == OPTIMAL:
        gap = 0.0
    elif s.best_value is None:
        gap = math.inf if s.status == TIMEOUT else 0.0
    elif s.status == GAP:
        gap = config.gap
    else:
        gap = (s.best_value - s.root_bound) / s.best_value if s.best_value > 0 else 0.0
    return SolveResult(
        pattern=pattern,
        radius_bound=radius,
        objective=s.best_value,
        status=s.status,
        gap=float(gap),
        nodes_explored=s.nodes,
        wall_time=time.perf_counter() - start,
        config=replace(config, radius=radius),
    )


def tighten_budget(k: int, start: int | None = None, threshold: float = 0.05,
                   base: SolverConfig | None = None, bisect: bool = False):
    """Lower the redundant-line budget until it turns infeasible or costly.

    Returns ``(budget, result)`` for the smallest budget whose coverage total
    stays within ``(1 + threshold)`` of the unconstrained stage-two optimum.
    ``start=None`` begins at the redundant-line count of the best pattern
    under an unlimited budget. The objective is non-increasing in the budget,
    so ``bisect=True`` reaches the same budget with logarithmically many solves.
    """
    base = base or SolverConfig(k)
    base = replace(base, k=k, objective="coverage")
    reference = solve_mcc(replace(base, budget=None, symmetric_exclusion=False))
    if reference.objective is None:
        raise RuntimeError(f"coverage-only solve for k={k} found no pattern ({reference.status})")
    limit = reference.objective * (1.0 + threshold)
    radius = reference.radius_bound
    base = replace(base, radius=radius)
    best = None
    if start is None:
        n_lines = len(enumerate_modular_lines(k))
        free = solve_mcc(replace(base, budget=n_lines))
        if free.pattern is None:
            raise RuntimeError(f"no pattern for k={k} under the line constraints ({free.status})")
        start = collinearity_census(free.pattern).redundant_lines
        if free.objective <= limit:
            best = (start, free)

    def admissible(L):
        res = solve_mcc(replace(base, budget=L))
        log.info("budget %d: %s objective=%s", L, res.status, res.objective)
        return res if res.objective is not None and res.objective <= limit else None

    if bisect:
        if best is None:
            res = admissible(start)
            if res is None:
                raise RuntimeError(f"budget {start} is already infeasible or above the threshold for k={k}")
            best = (start, res)
        lo, hi = -1, best[0]  # lo inadmissible (or -1), hi admissible
        while hi - lo > 1:
            mid = (lo + hi) // 2
            res = admissible(mid)
            if res is None:
                lo = mid
            else:
                hi, best = mid, (mid, res)
        return best
    L = start if best is None else start - 1
    while L >= 0:
        res = admissible(L)
        if res is None:
            break
        best = (L, res)
        L -= 1
    if best is None:
        raise RuntimeError(f"budget {start} is already infeasible or above the threshold for k={k}")
    return best


def check_result(result: SolveResult) -> list[str]:
    """Re-check a result's pattern against its configuration; returns problems."""
    problems = []
    p = result.pattern
    cfg = result.config
    if p is None:
        return problems
    if not p.is_permutation:
        problems.append("not a permutation")
    cov = coverage(p)
    if cfg.objective == "coverage":
        if result.radius_bound is not None and cov.radius > result.radius_bound:
            problems.append(f"radius {cov.radius} > bound {result.radius_bound}")
        if cov.total != result.objective:
            problems.append(f"coverage total {cov.total} != objective {result.objective}")
    if p.k >= 2 and (cfg.budget is not None or cfg.objective == "collinearity"):
        census = collinearity_census(p)
        if cfg.forbid_four_collinear and census.has_four_collinear:
            problems.append("four collinear pilots")
        if cfg.budget is not None and census.redundant_lines > cfg.budget:
            problems.append(f"{census.redundant_lines} redundant lines > budget {cfg.budget}")
        if cfg.objective == "collinearity" and census.redundant_lines != result.objective:
            problems.append("redundant-line count differs from objective")
    if cfg.symmetric_exclusion and p.k >= 3 and symmetric_triples(p):
        problems.append("symmetric triple present")
    return problems
