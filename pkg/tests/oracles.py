"""Independent brute-force references used by the tests.

Nothing here imports the package's kernels or geometry helpers: lines,
coverage and triples are rebuilt from their definitions.
"""

import itertools
import math
from functools import lru_cache

import numpy as np


def cost(f, t, g, s, k):
    return abs(f - g) + (t - s) % k


def coverage_direct(schedule, k):
    a = np.empty((k, k), dtype=np.int64)
    for f in range(k):
        for t in range(k):
            a[f, t] = min(cost(f, t, schedule[s], s, k) for s in range(k))
    return a


@lru_cache(maxsize=None)
def lines_direct(k):
    """Distinct point sets ``{u f + v t == c}`` over primitive directions."""
    seen = []
    keys = set()
    for u in range(k):
        for v in range(k):
            if math.gcd(math.gcd(u, v), k) != 1:
                continue
            for c in range(k):
                pts = frozenset((f, t) for f in range(k) for t in range(k) if (u * f + v * t) % k == c)
                if pts not in keys:
                    keys.add(pts)
                    seen.append(pts)
    return tuple(seen)


@lru_cache(maxsize=None)
def triples_direct(k):
    """Point triples with subbands f-d, f, f+d that share some line."""
    out = set()
    for line in lines_direct(k):
        by_f = {}
        for f, t in line:
            by_f.setdefault(f, []).append(t)
        for f in by_f:
            for d in range(1, k):
                if f - d in by_f and f + d in by_f:
                    for t1, t2, t3 in itertools.product(by_f[f - d], by_f[f], by_f[f + d]):
                        out.add(((f - d, t1), (f, t2), (f + d, t3)))
    return tuple(sorted(out))


@lru_cache(maxsize=None)
def all_permutations(k):
    """Every permutation schedule with its coverage total, radius and line data."""
    perms = np.array(list(itertools.permutations(range(k))), dtype=np.int64)
    n = len(perms)
    f = np.arange(k)
    # dist[n, f, s] = |f - schedule[s]|; lag[t, s] = (t - s) mod k
    dist = np.abs(f[None, :, None] - perms[:, None, :])
    lag = (np.arange(k)[:, None] - np.arange(k)[None, :]) % k
    a = (dist[:, :, None, :] + lag[None, None, :, :]).min(axis=3)
    totals = a.sum(axis=(1, 2))
    radii = a.max(axis=(1, 2))
    occ = np.zeros((n, k, k), dtype=np.int64)
    occ[np.arange(n)[:, None], perms, np.arange(k)[None, :]] = 1
    occ = occ.reshape(n, k * k)
    lines = lines_direct(k)
    inc = np.zeros((len(lines), k * k), dtype=np.int64)
    for i, pts in enumerate(lines):
        for ff, tt in pts:
            inc[i, ff * k + tt] = 1
    counts = occ @ inc.T
    tri = triples_direct(k)
    if tri:
        idx = np.array([[p[0] * k + p[1] for p in t] for t in tri])
        has_tri = (occ[:, idx].sum(axis=2) == 3).any(axis=1)
    else:
        has_tri = np.zeros(n, dtype=bool)
    return perms, totals, radii, counts, has_tri


def min_radius(k):
    return int(all_permutations(k)[2].min())


def brute_optimum(k, budget=None, forbid_four=True, symmetric_exclusion=True, radius=None,
                  objective="coverage"):
    """``(value, lexicographically smallest optimal schedule)`` or ``(None, None)``."""
    perms, totals, radii, counts, has_tri = all_permutations(k)
    ok = np.ones(len(perms), dtype=bool)
    if objective == "coverage":
        r = min_radius(k) if radius is None else radius
        ok &= radii <= r
    use_lines = budget is not None or objective == "collinearity"
    redundant = (counts >= 3).sum(axis=1)
    if use_lines:
        if forbid_four:
            ok &= (counts <= 3).all(axis=1)
        if budget is not None:
            ok &= redundant <= budget
    if symmetric_exclusion and k >= 3:
        ok &= ~has_tri
    if not ok.any():
        return None, None
    vals = totals if objective == "coverage" else redundant
    best = vals[ok].min()
    winners = perms[ok & (vals == best)]
    lex = min(tuple(int(x) for x in w) for w in winners)
    return int(best), lex


def ambiguity_dft(M, k, d):
    """Ambiguity of the hopped block pattern on the full DFT grid.

    ``out[p, q]`` is the normalised response at delay ``p / (M k)`` cycles
    per subcarrier and Doppler ``q / k`` cycles per slot, computed with a 2-D
    FFT of the pilot occupancy mask (subbands wrap modulo ``k``).
    """
    N = M * k
    mask = np.zeros((N, k))
    for t in range(k):
        f = (d * t) % k
        mask[f * M:(f + 1) * M, t] = 1.0
    spec = np.fft.fft(mask, axis=0)            # sum_n e^{-2 pi i p n / N}
    spec = np.fft.ifft(spec, axis=1) * k       # sum_t e^{+2 pi i q t / k}
    return np.abs(spec) / (M * k)
