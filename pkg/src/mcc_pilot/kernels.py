"""Hot loops, each with a numba body and a numpy twin.

The public names at the bottom pick one implementation per process based on
``MCC_PILOT_NUMBA``. Both variants of every kernel are importable so the
benchmark and the tests can compare them directly.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

BIG = np.int64(1) << 40
INF = np.int16(32767)  # sentinel in the int16 cost tables


# --- nearest-pilot distances ---------------------------------------------------

@njit(cache=True)
def coverage_numba(schedule, k):
    a = np.empty((k, k), dtype=np.int64)
    for t in range(k):
        for f in range(k):
            best = BIG
            for tp in range(k):
                df = f - schedule[tp]
                if df < 0:
                    df = -df
                c = df + (t - tp) % k
                if c < best:
                    best = c
            a[f, t] = best
    return a


def coverage_numpy(schedule, k):
    schedule = np.asarray(schedule, dtype=np.int64)
    f = np.arange(k)[:, None, None]
    t = np.arange(k)[None, :, None]
    tp = np.arange(k)[None, None, :]
    cost = np.abs(f - schedule[None, None, :]) + (t - tp) % k
    return cost.min(axis=2)


# --- column-cost tables for the branch-and-bound -------------------------------
#
# A column's cost under radius r depends only on the W = min(r + 1, k) most
# recent pilots (lags 0..W-1). table[g0 + k*g1 + k^2*g2 + ...] holds the cost
# of a column whose lag-d pilot sits at subband g_d, or INF when the window
# repeats a subband or leaves a cell farther than r from every pilot.

@njit(cache=True)
def column_table_numba(k, W, r):
    size = k ** W
    table = np.empty(size, dtype=np.int16)
    g = np.zeros(W, dtype=np.int64)
    for idx in range(size):
        rem = idx
        for d in range(W):
            g[d] = rem % k
            rem //= k
        ok = True
        for a in range(W):
            for b in range(a + 1, W):
                if g[a] == g[b]:
                    ok = False
        if not ok:
            table[idx] = INF
            continue
        total = 0
        for f in range(k):
            best = BIG
            for d in range(W):
                df = f - g[d]
                if df < 0:
                    df = -df
                c = df + d
                if c < best:
                    best = c
            if best > r:
                ok = False
                break
            total += best
        table[idx] = total if ok else INF
    return table


def column_table_numpy(k, W, r, chunk=1 << 20):
    size = k**W
    table = np.empty(size, dtype=np.int16)
    f = np.arange(k)[:, None]
    for lo in range(0, size, chunk):
        idx = np.arange(lo, min(lo + chunk, size))
        g = np.stack([(idx // k**d) % k for d in range(W)])
        best = np.full((k, idx.size), BIG, dtype=np.int64)
        for d in range(W):
            np.minimum(best, np.abs(f - g[d][None, :]) + d, out=best)
        total = best.sum(axis=0)
        bad = (best > r).any(axis=0)
        for a in range(W):
            for b in range(a + 1, W):
                bad |= g[a] == g[b]
        total[bad] = INF
        table[lo : lo + idx.size] = total
    return table


def reduced_tables(table, k, W):
    """Minimum of ``table`` over every subset of unknown lags.

    Returns ``(flat, offsets)``: for a bitmask ``m`` of known lags the reduced
    table lives at ``flat[offsets[m]:]`` and is indexed by the known subbands
    in increasing lag order, lowest lag least significant. The full-mask
    entry is ``table`` itself.
    """
    full = table.reshape((k,) * W)  # axis order: lag W-1 .. lag 0
    parts = []
    offsets = np.zeros(1 << W, dtype=np.int64)
    pos = 0
    for m in range(1 << W):
        unknown_axes = tuple(W - 1 - d for d in range(W) if not (m >> d) & 1)
        red = full.min(axis=unknown_axes) if unknown_axes else full
        offsets[m] = pos
        flat = np.ascontiguousarray(red, dtype=np.int16).reshape(-1)
        parts.append(flat)
        pos += flat.size
    return np.concatenate(parts), offsets


# Chain bound: chain[n, S] is the least cost of the next n columns when the
# W-1 most recent subbands are encoded in S (lag 1 least significant). Only
# distinctness inside each window is enforced, so it bounds any completion.

@njit(cache=True)
def chain_table_numba(table, k, W, n_max):
    ns = k ** (W - 1)
    tail = k ** (W - 2) if W >= 2 else 1
    chain = np.empty((n_max + 1, ns), dtype=np.int16)
    chain[0, :] = 0
    for n in range(1, n_max + 1):
        for S in range(ns):
            base = S % tail
            best = BIG
            for g in range(k):
                c = table[g + k * S]
                if c >= INF:
                    continue
                v = chain[n - 1, g + k * base]
                if v >= INF:
                    continue
                if c + v < best:
                    best = c + v
            chain[n, S] = best if best < INF else INF
    return chain


def chain_table_numpy(table, k, W, n_max):
    ns = k ** (W - 1)
    tail = k ** (W - 2) if W >= 2 else 1
    t2 = table.reshape(ns, k).astype(np.int32)
    base = np.arange(ns) % tail
    chain = np.empty((n_max + 1, ns), dtype=np.int16)
    chain[0] = 0
    for n in range(1, n_max + 1):
        prev = chain[n - 1].reshape(tail, k).astype(np.int32)
        cand = t2 + prev[base]
        cand[(t2 >= INF) | (prev[base] >= INF)] = INF
        chain[n] = np.minimum(cand.min(axis=1), INF)
    return chain


# --- depth-first branch-and-bound over permutation schedules ------------------

MODE_COVERAGE = 0     # minimise the coverage total under the radius cap
MODE_FEASIBLE = 1     # stop at the first schedule meeting every constraint
MODE_COLLINEAR = 2    # minimise the number of lines holding >= 3 pilots

STATUS_DONE = 0
STATUS_BUDGET = 1     # node budget for this call exhausted; call again to resume


@njit(cache=True)
def _column_bound(j, depth, sched, k, W, flat, offsets):
    mask = 0
    idx = 0
    mult = 1
    for d in range(W):
        slot = (j - d) % k
        if slot < depth:
            mask |= 1 << d
            idx += sched[slot] * mult
            mult *= k
    return np.int64(flat[offsets[mask] + idx])


@njit(cache=True)
def _coverage_bound(t, sched, k, W, flat, offsets, chain, cum):
    """Bound on the coverage total once slots 0..t are fixed; sets cum[t+1].

    Columns W-1..t are exact (running sum ``cum``), the wrapped columns
    0..W-2 use the partial-window tables and the open columns after t use
    the chain table. Returns BIG when no completion can meet the radius.
    """
    d = t + 1
    cum[d] = cum[t]
    if t >= W - 1:
        c = _column_bound(t, d, sched, k, W, flat, offsets)
        if c >= INF:
            return BIG
        cum[d] += c
    bound = cum[d]
    for j in range(min(W - 1, k)):
        c = _column_bound(j, d, sched, k, W, flat, offsets)
        if c >= INF:
            return BIG
        bound += c
    n = k - 1 - t
    if n > 0:
        if t >= W - 2:
            S = 0
            mult = 1
            for m in range(W - 1):
                S += sched[t - m] * mult
                mult *= k
            c = np.int64(chain[n, S])
            if c >= INF:
                return BIG
            bound += c
        else:
            for j in range(max(t + 1, W - 1), k):
                c = _column_bound(j, d, sched, k, W, flat, offsets)
                if c >= INF:
                    return BIG
                bound += c
    return bound


@njit(cache=True)
def _place(p, point_lines, line_count, use_lines, forbid_four, sign):
    """Add (sign=1) or remove (sign=-1) a pilot; return the change in the
    number of redundant lines and whether a four-collinear line appeared."""
    dred = 0
    four = False
    if not use_lines:
        return dred, four
    for q in range(point_lines.shape[1]):
        l = point_lines[p, q]
        if l < 0:
            break
        if sign > 0:
            line_count[l] += 1
            if line_count[l] == 3:
                dred += 1
            if line_count[l] >= 4 and forbid_four:
                four = True
        else:
            if line_count[l] == 3:
                dred -= 1
            line_count[l] -= 1
    return dred, four


@njit(cache=True)
def _makes_triple(p, occupied, point_triples):
    for q in range(point_triples.shape[1]):
        a = point_triples[p, q, 0]
        if a < 0:
            break
        if occupied[a] and occupied[point_triples[p, q, 1]]:
            return True
    return False


@njit(cache=True)
def bnb_numba(
    k, W, mode, flat, offsets, chain, use_table,
    point_lines, use_lines, budget, forbid_four,
    point_triples, use_triples, fix_first,
    prune_at, state, sched, nxt, cum, line_count, occupied, used, best_sched,
    max_nodes,
):
    """Resumable DFS; returns (status, nodes_this_call).

    ``state`` holds [depth, best_value, redundant_count, found, initialised]
    and is updated in place together with the per-depth arrays, so a call
    that runs out of ``max_nodes`` can be resumed by calling again.
    ``best_value`` starts at BIG or at a known upper bound plus one.
    ``prune_at`` is [num, den] with num / den = 1 - gap: nodes whose bound
    satisfies bound * den >= best * num are discarded.
    """
    num = prune_at[0]
    den = prune_at[1]
    nodes = 0
    if state[4] == 0:
        state[0] = 0
        state[2] = 0
        cum[0] = 0
        nxt[0] = 0
        state[4] = 1
    depth = state[0]
    red = state[2]
    while depth >= 0:
        if nodes >= max_nodes:
            state[0] = depth
            state[2] = red
            return STATUS_BUDGET, nodes
        t = depth
        if t == k:
            if mode == MODE_COLLINEAR:
                val = red
            else:
                val = state[5]
            if val < state[1]:
                state[1] = val
                state[3] = 1
                for s in range(k):
                    best_sched[s] = sched[s]
            if mode == MODE_FEASIBLE:
                state[0] = depth
                state[2] = red
                return STATUS_DONE, nodes
            depth -= 1
            p = sched[depth] * k + depth
            dr, _ = _place(p, point_lines, line_count, use_lines, forbid_four, -1)
            red += dr
            occupied[p] = False
            used[sched[depth]] = False
            continue
        g = nxt[t]
        if g >= k or (fix_first and t == 0 and g > 0):
            if t == 0:
                depth = -1
                break
            depth -= 1
            p = sched[depth] * k + depth
            dr, _ = _place(p, point_lines, line_count, use_lines, forbid_four, -1)
            red += dr
            occupied[p] = False
            used[sched[depth]] = False
            continue
        nxt[t] = g + 1
        if used[g]:
            continue
        nodes += 1
        p = g * k + t
        if use_triples and _makes_triple(p, occupied, point_triples):
            continue
        dr, four = _place(p, point_lines, line_count, use_lines, forbid_four, 1)
        if four or (use_lines and red + dr > budget):
            _place(p, point_lines, line_count, use_lines, forbid_four, -1)
            continue
        if mode == MODE_COLLINEAR and (red + dr) * den >= state[1] * num:
            _place(p, point_lines, line_count, use_lines, forbid_four, -1)
            continue
        sched[t] = g
        if use_table:
            bound = _coverage_bound(t, sched, k, W, flat, offsets, chain, cum)
            if bound >= BIG or (mode == MODE_COVERAGE and bound * den >= state[1] * num):
                _place(p, point_lines, line_count, use_lines, forbid_four, -1)
                continue
            if t == k - 1:
                state[5] = bound
        red += dr
        occupied[p] = True
        used[g] = True
        depth = t + 1
        if depth < k:
            nxt[depth] = 0
    state[0] = -1
    state[2] = red
    return STATUS_DONE, nodes


# --- local search for an initial incumbent -------------------------------------

@njit(cache=True)
def _lcg(state):
    return (1103515245 * state + 12345) % 2147483648


@njit(cache=True)
def _window_cost(j, sched, k, W, table):
    idx = 0
    mult = 1
    for d in range(W):
        idx += sched[(j - d) % k] * mult
        mult *= k
    return np.int64(table[idx])


@njit(cache=True)
def _toggle(p, sign, point_lines, line_count, use_lines, occupied, point_triples, use_triples, acc):
    """Add or remove pilot p, updating acc = [redundant, excess_over_3, triples]."""
    if use_triples and sign < 0:
        occupied[p] = False
    if use_triples:
        for q in range(point_triples.shape[1]):
            a = point_triples[p, q, 0]
            if a < 0:
                break
            if occupied[a] and occupied[point_triples[p, q, 1]]:
                acc[2] += sign
    if use_triples and sign > 0:
        occupied[p] = True
    if use_lines:
        for q in range(point_lines.shape[1]):
            l = point_lines[p, q]
            if l < 0:
                break
            c = line_count[l]
            if sign > 0:
                if c == 2:
                    acc[0] += 1
                if c >= 3:
                    acc[1] += 1
                line_count[l] = c + 1
            else:
                if c == 3:
                    acc[0] -= 1
                if c >= 4:
                    acc[1] -= 1
                line_count[l] = c - 1


@njit(cache=True)
def anneal_numba(k, W, table, use_table, w_red, point_lines, n_lines, use_lines, budget,
                 forbid_four, point_triples, use_triples, seed, iters, restarts):
    """Swap-move simulated annealing on a penalised objective.

    The objective is the coverage total read from the column table (radius
    violations show up as INF-valued columns) plus ``w_red`` times the number
    of redundant lines, plus a penalty per violated line or triple
    constraint. Uses its own 31-bit LCG so the interpreted and compiled
    paths agree. Returns (schedule, objective, violations) of the best
    schedule seen, preferring fewer violations.
    """
    penalty = np.int64(4 * k * k)
    line_count = np.zeros(max(n_lines, 1), dtype=np.int64)
    occupied = np.zeros(k * k, dtype=np.bool_)
    acc = np.zeros(3, dtype=np.int64)
    col = np.zeros(k, dtype=np.int64)
    state = seed % 2147483647 + 1
    cur = np.arange(k)
    best = cur.copy()
    best_obj = BIG
    best_viol = BIG
    for rs in range(restarts):
        for i in range(k - 1, 0, -1):
            state = _lcg(state)
            j = state % (i + 1)
            tmp = cur[i]
            cur[i] = cur[j]
            cur[j] = tmp
        line_count[:] = 0
        occupied[:] = False
        acc[:] = 0
        for t in range(k):
            _toggle(cur[t] * k + t, 1, point_lines, line_count, use_lines, occupied,
                    point_triples, use_triples, acc)
        cov = 0
        infeasible_cols = 0
        if use_table:
            for j in range(k):
                col[j] = _window_cost(j, cur, k, W, table)
                if col[j] >= INF:
                    infeasible_cols += 1
                else:
                    cov += col[j]
        for it in range(iters + 1):
            over = acc[0] - budget if acc[0] > budget else 0
            four = acc[1] if forbid_four else 0
            viol = infeasible_cols + over + four + acc[2]
            obj = cov + w_red * acc[0]
            energy = obj + penalty * viol
            if viol < best_viol or (viol == best_viol and obj < best_obj):
                best_viol = viol
                best_obj = obj
                best[:] = cur
            if it == iters:
                break
            temp = 2.0 * k * (0.001 ** (it / iters))
            state = _lcg(state)
            a = state % k
            state = _lcg(state)
            b = state % k
            if a == b:
                continue
            ga = cur[a]
            gb = cur[b]
            saved = acc.copy()
            _toggle(ga * k + a, -1, point_lines, line_count, use_lines, occupied,
                    point_triples, use_triples, acc)
            _toggle(gb * k + b, -1, point_lines, line_count, use_lines, occupied,
                    point_triples, use_triples, acc)
            cur[a] = gb
            cur[b] = ga
            _toggle(gb * k + a, 1, point_lines, line_count, use_lines, occupied,
                    point_triples, use_triples, acc)
            _toggle(ga * k + b, 1, point_lines, line_count, use_lines, occupied,
                    point_triples, use_triples, acc)
            new_cov = cov
            new_inf = infeasible_cols
            if use_table:
                # columns whose windows contain slot a or slot b
                for j in range(k):
                    da = (j - a) % k
                    db = (j - b) % k
                    if da < W or db < W:
                        c = _window_cost(j, cur, k, W, table)
                        if col[j] >= INF:
                            new_inf -= 1
                        else:
                            new_cov -= col[j]
                        if c >= INF:
                            new_inf += 1
                        else:
                            new_cov += c
            over = acc[0] - budget if acc[0] > budget else 0
            four = acc[1] if forbid_four else 0
            new_energy = new_cov + w_red * acc[0] + penalty * (new_inf + over + four + acc[2])
            state = _lcg(state)
            u = (state + 0.5) / 2147483648.0
            if new_energy <= energy or u < np.exp((energy - new_energy) / temp):
                cov = new_cov
                infeasible_cols = new_inf
                if use_table:
                    for j in range(k):
                        if (j - a) % k < W or (j - b) % k < W:
                            col[j] = _window_cost(j, cur, k, W, table)
            else:
                _toggle(gb * k + a, -1, point_lines, line_count, use_lines, occupied,
                        point_triples, use_triples, acc)
                _toggle(ga * k + b, -1, point_lines, line_count, use_lines, occupied,
                        point_triples, use_triples, acc)
                cur[a] = ga
                cur[b] = gb
                _toggle(ga * k + a, 1, point_lines, line_count, use_lines, occupied,
                        point_triples, use_triples, acc)
                _toggle(gb * k + b, 1, point_lines, line_count, use_lines, occupied,
                        point_triples, use_triples, acc)
                acc[:] = saved
    return best, best_obj, best_viol


bnb_numpy = getattr(bnb_numba, "py_func", bnb_numba)

if USE_NUMBA:
    coverage_kernel = coverage_numba
    column_table = column_table_numba
    chain_table = chain_table_numba
    bnb_kernel = bnb_numba
    anneal_kernel = anneal_numba
else:
    coverage_kernel = coverage_numpy
    column_table = column_table_numpy
    chain_table = chain_table_numpy
    bnb_kernel = bnb_numba  # plain Python function when JIT is off
    anneal_kernel = anneal_numba
