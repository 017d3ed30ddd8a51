import json
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mcc_pilot import harness
from mcc_pilot.channel import SimConfig, sample_channel
from mcc_pilot.harness import (
    CSV_HEADER,
    SweepAborted,
    SweepSpec,
    apply_sweep_value,
    compare_patterns,
    design_pattern,
    evaluate_pattern,
    exact_median,
    run_sweep,
    shift_nmse,
    worst_count,
    worst_quarter,
)
from mcc_pilot.patterns import baseline_3gpp, baseline_random, cyclic_shift
from mcc_pilot.recovery import RecoveryConfig
from mcc_pilot.rng import make_rng

SMALL = SimConfig(k=5, M=4, N_tau=8, N_nu=8, num_paths=2, window=5, snr_db=20.0)
FAST = RecoveryConfig(iterations=40)


def test_worst_count():
    assert worst_count(17) == 4
    assert worst_count(8) == 2
    assert [worst_count(k) for k in (1, 2, 3)] == [1, 1, 1]


def test_worst_quarter_reducer():
    vals = [0.1, 0.9, 0.3, 0.7, 0.5, 0.2, 0.8, 0.4]
    assert worst_quarter(vals) == pytest.approx((0.9 + 0.8) / 2)
    assert worst_quarter([0.25] * 17) == 0.25
    assert worst_quarter([1.0, 3.0, 2.0]) == 3.0  # k < 4: single worst


@given(st.lists(st.floats(0, 1e3), min_size=1, max_size=30))
def test_median_is_order_statistic(vals):
    m = exact_median(vals)
    v = sorted(vals)
    n = len(v)
    assert m == (v[n // 2] if n % 2 else (v[n // 2 - 1] + v[n // 2]) / 2)


def test_median_even_count():
    assert exact_median([4.0, 1.0, 3.0, 2.0]) == 2.5
    with pytest.raises(ValueError):
        exact_median([])


def test_evaluate_averages_worst_quarter(monkeypatch):
    vals = list(np.linspace(0.01, 0.17, 17))
    monkeypatch.setattr(harness, "shift_nmse", lambda *a, **k: vals)
    out = evaluate_pattern(baseline_3gpp(17), None, SimConfig())
    assert out == pytest.approx(np.mean(sorted(vals)[-4:]), abs=1e-15)


def test_shift_errors_carry_index(monkeypatch):
    calls = {"n": 0}

    def boom(*a, **k):
        calls["n"] += 1
        if calls["n"] == 3:
            raise FloatingPointError("nan")
        return harness.recover.__wrapped__(*a, **k) if hasattr(harness.recover, "__wrapped__") else real(*a, **k)

    real = harness.recover
    monkeypatch.setattr(harness, "recover", boom)
    ch = sample_channel(SMALL, make_rng(0))
    with pytest.raises(harness.ShiftError) as info:
        shift_nmse(baseline_3gpp(5), ch, SMALL, FAST)
    assert info.value.shift == 2


def test_protocol_invariance_under_base_shift():
    cfg = replace(SMALL, snr_db=math.inf)
    ch = sample_channel(cfg, make_rng(3))
    p = baseline_random(5, 1)
    base = shift_nmse(p, ch, cfg, FAST)
    for s0 in (1, 3):
        moved = shift_nmse(cyclic_shift(p, s0), ch, cfg, FAST)
        assert sorted(moved) == sorted(base)


def test_k_sweep_bandwidth():
    assert apply_sweep_value(SimConfig(), "k", 16).M == 25
    assert apply_sweep_value(SimConfig(), "k", 17).M == 24
    assert apply_sweep_value(SimConfig(), "k", 13).M == 31
    assert apply_sweep_value(SimConfig(), "snr", 5).snr_db == 5.0
    assert apply_sweep_value(SimConfig(), "interval", 2).pilot_interval == 2.0
    assert apply_sweep_value(SimConfig(), "subwindow", 6).window == 6
    with pytest.raises(ValueError):
        apply_sweep_value(SimConfig(), "speed", 1)


def spec(**kw):
    base = dict(sweep_kind="snr", values=(20,), sim=SMALL, recovery=FAST, patterns=("3gpp",),
                realizations=1, seed=5)
    base.update(kw)
    return SweepSpec(**base)


def test_single_row_sweep(tmp_path):
    rows = run_sweep(spec(), out_dir=tmp_path)
    assert len(rows) == 1
    lines = (tmp_path / "sweep_snr.csv").read_text().splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert len(lines) == 2 and lines[1].startswith("3gpp,snr,20,median_worst_quarter_nmse,")
    raw = (tmp_path / "sweep_snr_raw.csv").read_text().splitlines()
    assert len(raw) == 2
    meta = json.loads((tmp_path / "sweep_snr_meta.json").read_text())
    assert meta["spec"]["seed"] == 5 and meta["patterns"]["5"]["3gpp"] == [0, 2, 4, 1, 3]


def test_sweep_is_deterministic(tmp_path):
    s = spec(values=(10, 30), patterns=("3gpp", "random", "chirp"), realizations=3)
    run_sweep(s, out_dir=tmp_path / "a")
    run_sweep(s, out_dir=tmp_path / "b", jobs=2)
    for name in ("sweep_snr.csv", "sweep_snr_raw.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_random_pattern_redrawn_per_realization(monkeypatch):
    seen = []
    real = harness.evaluate_pattern

    def spy(pattern, *a, **k):
        seen.append(pattern.schedule)
        return real(pattern, *a, **k)

    monkeypatch.setattr(harness, "evaluate_pattern", spy)
    run_sweep(spec(patterns=("random",), realizations=4))
    assert len(set(seen)) > 1


def test_failure_policy(monkeypatch):
    real = harness.evaluate_pattern

    def flaky(pattern, channel, config, recovery, noise_key):
        if noise_key[2] in bad:
            raise RuntimeError("diverged")
        return real(pattern, channel, config, recovery, noise_key)

    monkeypatch.setattr(harness, "evaluate_pattern", flaky)
    bad = {3}
    rows = run_sweep(spec(realizations=20))
    assert rows[0].realizations_used == 19
    bad = {1, 4, 7}
    with pytest.raises(SweepAborted):
        run_sweep(spec(realizations=20))


def test_spec_roundtrip_and_validation():
    s = spec(values=(1, 2.5))
    assert SweepSpec.from_dict(json.loads(json.dumps(s.to_dict()))) == s
    with pytest.raises(ValueError):
        spec(values=())
    with pytest.raises(ValueError):
        spec(patterns=("golden",))
    with pytest.raises(ValueError):
        spec(sweep_kind="speed")


def test_design_cache(tmp_path, monkeypatch):
    p = design_pattern("coverage_only", 7, cache_dir=tmp_path)
    files = list(tmp_path.glob("coverage_only_k7_*.json"))
    assert len(files) == 1
    monkeypatch.setattr(harness, "_solve_design", lambda *a: pytest.fail("cache was not used"))
    assert design_pattern("coverage_only", 7, cache_dir=tmp_path) == p


def test_bundled_designs_are_valid():
    from mcc_pilot.solver import SolverConfig, SolveResult, check_result
    from mcc_pilot.geometry import coverage

    for key, entry in harness._bundled_designs().items():
        assert key == harness.design_key(entry["name"], entry["k"], entry["threshold"], entry["gap"])
        p = harness.PilotPattern(entry["k"], tuple(entry["schedule"]))
        cfg = SolverConfig(entry["k"], budget=entry["budget"],
                           symmetric_exclusion=entry["name"] != "coverage_only",
                           objective="collinearity" if entry["name"] == "collinearity_only" else "coverage")
        res = SolveResult(p, entry["radius_bound"], entry["objective"], entry["status"], 0.0, 0, 0.0, cfg)
        assert check_result(res) == []
        if entry["name"] != "collinearity_only":
            assert coverage(p).total == entry["objective"]


def test_compare_invariants():
    reps = {r.name: r for r in compare_patterns(7, SMALL.__class__(k=7, M=4, N_tau=8, N_nu=8, window=5),
                                                 with_nmse=False)}
    assert set(reps) == set(harness.PATTERN_NAMES)
    perms = [r for r in reps.values() if r.name != "chirp"]
    assert reps["coverage_only"].coverage_total == min(r.coverage_total for r in perms)
    # the redundant-line minimum is over patterns meeting the same constraints:
    # permutations without four collinear pilots or symmetric triples
    admissible = [r for r in perms if not r.four_collinear and r.symmetric_triples == 0]
    assert reps["collinearity_only"].redundant_lines == min(r.redundant_lines for r in admissible)
    assert reps["3gpp"].collinear_triples == math.comb(7, 3)
    assert reps["mcc"].radius <= reps["3gpp"].radius


def test_compare_with_nmse():
    reps = compare_patterns(5, SMALL, FAST, patterns=("3gpp", "chirp"), realizations=2)
    assert all(r.nmse is not None and r.nmse >= 0 for r in reps)
