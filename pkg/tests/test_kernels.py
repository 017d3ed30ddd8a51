import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mcc_pilot import kernels
from mcc_pilot._accel import USE_NUMBA, njit


@given(st.integers(1, 12).flatmap(lambda k: st.tuples(st.just(k), st.lists(st.integers(0, k - 1), min_size=k, max_size=k))))
def test_coverage_twins(args):
    k, sched = args
    s = np.array(sched, dtype=np.int64)
    assert (kernels.coverage_numba(s, k) == kernels.coverage_numpy(s, k)).all()


@pytest.mark.parametrize("k,r", [(5, 2), (7, 3), (9, 3), (6, 5)])
def test_table_twins(k, r):
    W = min(r + 1, k)
    a = kernels.column_table_numba(k, W, r)
    b = kernels.column_table_numpy(k, W, r, chunk=97)
    assert a.dtype == b.dtype == np.int16
    assert (a == b).all()
    ca = kernels.chain_table_numba(a, k, W, k - 1)
    cb = kernels.chain_table_numpy(a, k, W, k - 1)
    assert (ca == cb).all()


def test_column_table_entry():
    # k=3, r=2: column with lag-0 pilot at subband 0, lag-1 at 1, lag-2 at 2
    k, W = 3, 3
    table = kernels.column_table_numpy(k, W, 2)
    idx = 0 + 1 * k + 2 * k * k
    # cell f is served by the pilot at lag d with cost |f - g_d| + d
    expect = sum(min(abs(f - g) + d for d, g in enumerate((0, 1, 2))) for f in range(k))
    assert table[idx] == expect
    assert table[0] == kernels.INF  # repeated subband inside the window


def test_reduced_tables_are_minima():
    k, W = 4, 3
    table = kernels.column_table_numpy(k, W, 2)
    flat, offsets = kernels.reduced_tables(table, k, W)
    full = table.reshape(k, k, k)  # axes: lag 2, lag 1, lag 0
    m = 0b001  # only lag 0 known
    red = flat[offsets[m]:offsets[m] + k]
    assert (red == full.min(axis=(0, 1))).all()
    m = 0b101  # lags 0 and 2 known; index g0 + k * g2
    red = flat[offsets[m]:offsets[m] + k * k].reshape(k, k)
    assert (red == full.min(axis=1)).all()


def test_njit_identity_when_disabled(monkeypatch):
    import mcc_pilot._accel as acc

    monkeypatch.setattr(acc, "USE_NUMBA", False)

    @acc.njit(cache=True)
    def f(x):
        return x + 1

    assert f(1) == 2 and not hasattr(f, "py_func")


SCRIPT = """
import json
from mcc_pilot import kernels
from mcc_pilot._accel import backend_name
from mcc_pilot.solver import SolverConfig, solve_mcc
out = {"backend": backend_name(), "cov": kernels.coverage_kernel.__name__}
for k, b in ((5, None), (6, 72), (7, 2)):
    r = solve_mcc(SolverConfig(k, budget=b, symmetric_exclusion=b is not None))
    out[str(k)] = [r.objective, list(r.pattern.schedule) if r.pattern else None, r.status]
print(json.dumps(out))
"""


def _run(flag):
    env = dict(os.environ, MCC_PILOT_NUMBA=flag)
    proc = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def test_numpy_fallback_agrees_with_numba():
    slow, fast = _run("0"), _run("1")
    assert slow["backend"] == "numpy" and slow["cov"] == "coverage_numpy"
    for k in ("5", "6", "7"):
        assert slow[k] == fast[k]
