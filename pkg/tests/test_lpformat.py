import pytest

from mcc_pilot.geometry import enumerate_modular_lines, symmetric_triple_table
from mcc_pilot.lpformat import (
    build_lp,
    export_lp,
    incidence_solution,
    objective_value,
    parse_lp,
    violated_rows,
)
from mcc_pilot.patterns import PilotPattern
from mcc_pilot.solver import SolverConfig, solve_mcc
from oracles import cost


def link_count(k, r):
    return sum(1 for f in range(k) for t in range(k) for g in range(k) for s in range(k)
               if cost(f, t, g, s, k) <= r)


def test_k3_variable_count(tmp_path):
    n = len(enumerate_modular_lines(3))
    cfg = SolverConfig(3, budget=n, symmetric_exclusion=False)
    stats = export_lp(cfg, tmp_path / "m.lp")
    model = parse_lp((tmp_path / "m.lp").read_text())
    r3 = 2
    assert stats.n_vars == 9 + link_count(3, r3) + n
    assert len(model.variables) == stats.n_vars
    assert set(model.binaries) == set(model.variables)


@pytest.mark.parametrize("k", [4, 5, 7])
def test_cost_coefficients_are_metric(k):
    cfg = SolverConfig(k, budget=len(enumerate_modular_lines(k)))
    text, _ = build_lp(cfg, radius=3)
    model = parse_lp(text)
    for name in model.variables:
        if name.startswith("e_"):
            f, t, g, s = map(int, name.split("_")[1:])
            assert model.objective.get(name, 0) == cost(f, t, g, s, k)
            assert cost(f, t, g, s, k) <= 3


@pytest.mark.parametrize("k,extra", [(4, {}), (6, {}), (7, {}), (7, {"budget": 3}), (5, {"symmetric_exclusion": False})])
def test_roundtrip_solution_satisfies_rows(k, extra):
    kw = {"budget": len(enumerate_modular_lines(k))}
    kw.update(extra)
    res = solve_mcc(SolverConfig(k, **kw))
    assert res.pattern is not None
    model = parse_lp(build_lp(res.config, res.radius_bound)[0])
    vals = incidence_solution(res.pattern, res.radius_bound)
    assert violated_rows(model, vals) == []
    assert objective_value(model, vals) == res.objective


def test_checker_catches_violations():
    k = 5
    cfg = SolverConfig(k, budget=0)
    model = parse_lp(build_lp(cfg, radius=2)[0])
    bad = incidence_solution(PilotPattern(k, (0, 2, 4, 1, 3)), 2)
    rows = violated_rows(model, bad)
    assert "budget" in rows
    assert any(r.startswith("sym_") for r in rows)
    assert any(r.startswith("line_") for r in rows)


def test_row_families():
    k = 5
    cfg = SolverConfig(k, budget=4, forbid_four_collinear=False)
    model = parse_lp(build_lp(cfg, radius=2)[0])
    names = [r[0] for r in model.rows]
    assert sum(n.startswith("slot_") for n in names) == k
    assert sum(n.startswith("sub_") for n in names) == k
    assert sum(n.startswith("assign_") for n in names) == k * k
    assert sum(n.startswith("sym_") for n in names) == len(symmetric_triple_table(k))
    line0 = next(r for r in model.rows if r[0] == "line_0")
    assert line0[1]["z_0"] == -(k - 2)  # big-M form when four-collinear is allowed
    budget = next(r for r in model.rows if r[0] == "budget")
    assert budget[3] == 4


def test_long_rows_wrap_and_parse():
    k = 11
    text, stats = build_lp(SolverConfig(k, budget=3), radius=4)
    assert max(len(line) for line in text.splitlines()) <= 260
    model = parse_lp(text)
    assert len(model.rows) == stats.n_rows
