"""Geometry surrogates of a pilot pattern.

Grid points are ``(f, t)`` with subband ``f`` and slot ``t``. The grid metric
is ``|f - f'| + ((t - t') mod k)``: a pilot at slot ``t'`` serves slot ``t``
only looking backwards in time, wrapping around the period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .kernels import coverage_kernel
from .patterns import PilotPattern, validate

DIRICHLET_EPS = 1e-9


def metric_cost(f: int, t: int, f2: int, t2: int, k: int) -> int:
    """Cost for pilot ``(f2, t2)`` to serve grid point ``(f, t)``."""
    for name, v in (("f", f), ("t", t), ("f2", f2), ("t2", t2)):
        if not 0 <= v < k:
            raise ValueError(f"{name}={v} outside 0..{k - 1}")
    return abs(f - f2) + (t - t2) % k


@dataclass(frozen=True)
class CoverageReport:
    a: np.ndarray
    radius: int
    total: int


def coverage(pattern: PilotPattern, dims=None) -> CoverageReport:
    """Nearest-pilot distance ``a[f, t]`` for every grid point.

    ``dims`` is accepted for symmetry with the simulator; only ``k`` matters.
    """
    if not validate(pattern, require_permutation=False):
        raise ValueError("pattern must place exactly one in-range subband per slot")
    if dims is not None and dims.k != pattern.k:
        raise ValueError(f"dims.k={dims.k} does not match pattern k={pattern.k}")
    a = np.asarray(coverage_kernel(pattern.as_array(), pattern.k), dtype=np.int64)
    return CoverageReport(a=a, radius=int(a.max()), total=int(a.sum()))


# --- modular lines ------------------------------------------------------------

@dataclass(frozen=True)
class ModularLine:
    """Points with ``u*f + v*t == c (mod k)``; equality is by point set."""

    u: int = field(compare=False)
    v: int = field(compare=False)
    c: int = field(compare=False)
    points: tuple[tuple[int, int], ...]

    def __contains__(self, point):
        return tuple(point) in self._point_set

    @property
    def _point_set(self):
        return frozenset(self.points)


@lru_cache(maxsize=None)
def enumerate_modular_lines(k: int) -> tuple[ModularLine, ...]:
    """All distinct lines along primitive directions ``gcd(u, v, k) == 1``.

    Lines are deduplicated by their point sets, which stays correct for
    composite ``k`` where coefficient normalisation does not.
    """
    if k < 2:
        raise ValueError(f"modular lines need k >= 2, got {k}")
    F, T = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
    seen = set()
    lines = []
    for u in range(k):
        for v in range(k):
            if math.gcd(math.gcd(u, v), k) != 1:
                continue
            val = (u * F + v * T) % k
            for c in range(k):
                fs, ts = np.nonzero(val == c)
                pts = tuple(zip(fs.tolist(), ts.tolist()))
                if pts in seen:
                    continue
                seen.add(pts)
                lines.append(ModularLine(u, v, c, pts))
    return tuple(lines)


@lru_cache(maxsize=None)
def line_incidence(k: int) -> np.ndarray:
    """Boolean (n_lines, k*k) matrix; column index is ``f*k + t``."""
    lines = enumerate_modular_lines(k)
    inc = np.zeros((len(lines), k * k), dtype=bool)
    for i, line in enumerate(lines):
        for f, t in line.points:
            inc[i, f * k + t] = True
    inc.setflags(write=False)
    return inc


@dataclass(frozen=True)
class Census:
    counts: np.ndarray
    redundant_lines: int
    has_four_collinear: bool
    max_count: int


def _occupancy(pattern):
    k = pattern.k
    occ = np.zeros(k * k, dtype=np.int64)
    for f, t in pattern.pilots():
        occ[f * k + t] += 1
    return occ


def collinearity_census(pattern: PilotPattern, lines=None) -> Census:
    if not validate(pattern, require_permutation=False):
        raise ValueError("pattern must place exactly one in-range subband per slot")
    k = pattern.k
    if lines is None:
        inc = line_incidence(k)
    else:
        inc = np.zeros((len(lines), k * k), dtype=bool)
        for i, line in enumerate(lines):
            for f, t in line.points:
                inc[i, f * k + t] = True
    counts = inc.astype(np.int64) @ _occupancy(pattern)
    return Census(
        counts=counts,
        redundant_lines=int((counts >= 3).sum()),
        has_four_collinear=bool((counts >= 4).any()),
        max_count=int(counts.max(initial=0)),
    )


def _line_triples(line, k):
    """Point triples on one line with subbands f-d, f, f+d."""
    by_f = {}
    for f, t in line.points:
        by_f.setdefault(f, []).append(t)
    out = []
    for f in sorted(by_f):
        for d in range(1, min(f, k - 1 - f) + 1):
            if f - d not in by_f or f + d not in by_f:
                continue
            for t1 in by_f[f - d]:
                for t2 in by_f[f]:
                    for t3 in by_f[f + d]:
                        out.append(((f - d, t1), (f, t2), (f + d, t3)))
    return out


@lru_cache(maxsize=None)
def symmetric_triple_table(k: int) -> tuple[tuple[int, tuple], ...]:
    """Every (line index, point triple) with symmetric subband spacing."""
    out = []
    for i, line in enumerate(enumerate_modular_lines(k)):
        for tri in _line_triples(line, k):
            out.append((i, tri))
    return tuple(out)


def symmetric_triples(pattern: PilotPattern, lines=None) -> list[tuple[ModularLine, tuple]]:
    """Pilot triples at subbands ``f-d, f, f+d`` (``d >= 1``) sharing a line.

    Frequency arithmetic is not modular: a triple needs all three subbands
    inside ``0..k-1``.
    """
    if not validate(pattern, require_permutation=False):
        raise ValueError("pattern must place exactly one in-range subband per slot")
    k = pattern.k
    pilots = set(pattern.pilots())
    if lines is None:
        all_lines = enumerate_modular_lines(k)
        candidates = ((all_lines[i], tri) for i, tri in symmetric_triple_table(k))
    else:
        candidates = ((line, tri) for line in lines for tri in _line_triples(line, k))
    return [(line, tri) for line, tri in candidates if all(p in pilots for p in tri)]


# --- coherence on the virtual delay-Doppler grid -------------------------------

@dataclass(frozen=True)
class CoherenceMap:
    rho_sq: np.ndarray
    pilot_count: int
    multiplicities: dict
    max_offpeak: float


def _antipodal_rep(a, b, k):
    na, nb = (-a) % k, (-b) % k
    return min((a, b), (na, nb))


def coherence_map(pattern: PilotPattern) -> CoherenceMap:
    """Squared correlation ``rho_sq[i, j]`` over virtual offsets.

    Row ``i`` is the delay offset (pairs with subband differences), column
    ``j`` the Doppler offset (pairs with slot differences). Differences are
    taken mod ``k`` and grouped into antipodal classes; each class holds the
    number of unordered pilot pairs falling into it.
    """
    if not validate(pattern, require_permutation=False):
        raise ValueError("pattern must place exactly one in-range subband per slot")
    pilots = pattern.pilots()
    P = len(pilots)
    if P == 0:
        raise ValueError("coherence needs at least one pilot")
    k = pattern.k
    mult = {}
    for x in range(P):
        fx, tx = pilots[x]
        for y in range(x + 1, P):
            fy, ty = pilots[y]
            rep = _antipodal_rep((fy - fx) % k, (ty - tx) % k, k)
            mult[rep] = mult.get(rep, 0) + 1
    i = np.arange(k)[:, None]
    j = np.arange(k)[None, :]
    rho_sq = np.full((k, k), 1.0 / P)
    for (df, dt), c in sorted(mult.items()):
        rho_sq += (2.0 * c / P**2) * np.cos(2 * np.pi * ((df * i + dt * j) % k) / k)
    off = np.sqrt(np.clip(rho_sq, 0.0, None))
    off[0, 0] = -np.inf
    max_off = float(off.max()) if k > 1 else 0.0
    return CoherenceMap(rho_sq=rho_sq, pilot_count=P, multiplicities=mult, max_offpeak=max_off)


# --- legacy block-hopping kernel ----------------------------------------------

def _dirichlet_abs(n, x):
    """``|sin(n*pi*x) / sin(pi*x)|`` with the removable singularity filled in."""
    s = math.sin(math.pi * x)
    if abs(s) < DIRICHLET_EPS:
        return float(n)
    return abs(math.sin(n * math.pi * x) / s)


def legacy_kernel(tau: float, nu: float, M: int, k: int, d: int) -> float:
    """Normalised delay-Doppler correlation of a uniformly hopped pattern.

    The pattern hops ``f_{t+1} - f_t = d (mod k)`` with ``M`` subcarriers per
    subband; ``tau`` is in cycles per subcarrier, ``nu`` in cycles per slot.
    """
    if M < 1 or k < 1:
        raise ValueError(f"M and k must be positive, got M={M}, k={k}")
    return _dirichlet_abs(k, nu - d * M * tau) * _dirichlet_abs(M, tau) / (M * k)


def kernel_peak(M: int, k: int) -> float:
    """Strongest off-origin value ``sin(pi/k) / (M sin(pi/(M k)))``."""
    if M < 1 or k < 1:
        raise ValueError(f"M and k must be positive, got M={M}, k={k}")
    if M == 1:
        return 1.0
    return math.sin(math.pi / k) / (M * math.sin(math.pi / (M * k)))


def hop_increment(pattern: PilotPattern):
    """The constant hop ``d`` if the schedule is an arithmetic progression mod k."""
    k = pattern.k
    if k < 2:
        return None
    s = pattern.schedule
    d = (s[1] - s[0]) % k
    if all((s[t + 1] - s[t]) % k == d for t in range(k - 1)):
        return d
    return None
