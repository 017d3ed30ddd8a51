import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mcc_pilot.geometry import (
    coherence_map,
    collinearity_census,
    coverage,
    enumerate_modular_lines,
    hop_increment,
    kernel_peak,
    legacy_kernel,
    line_incidence,
    metric_cost,
    symmetric_triples,
)
from mcc_pilot.patterns import PilotPattern, baseline_3gpp, baseline_chirp, cyclic_shift
from oracles import ambiguity_dft, coverage_direct, lines_direct, triples_direct

PRIMES = (2, 3, 5, 7, 11, 13, 17, 19)


@st.composite
def schedules(draw, min_k=2, max_k=11, permutation=True):
    k = draw(st.integers(min_k, max_k))
    if permutation:
        sched = draw(st.permutations(range(k)))
    else:
        sched = draw(st.lists(st.integers(0, k - 1), min_size=k, max_size=k))
    return PilotPattern(k, tuple(sched))


def full_difference_form(p):
    """|mean of pilot phasors|^2 on every virtual offset."""
    k = p.k
    i = np.arange(k)[:, None, None]
    j = np.arange(k)[None, :, None]
    f = np.array(p.schedule)[None, None, :]
    t = np.arange(k)[None, None, :]
    return np.abs(np.exp(2j * np.pi * (f * i + t * j) / k).mean(axis=2)) ** 2


def test_metric_is_backward_in_time():
    assert metric_cost(2, 3, 2, 3, 5) == 0
    assert metric_cost(0, 3, 2, 1, 5) == 4
    assert metric_cost(0, 1, 0, 3, 5) == 3  # wraps around the period
    with pytest.raises(ValueError):
        metric_cost(5, 0, 0, 0, 5)


@given(schedules(min_k=1, permutation=False))
def test_coverage_matches_direct(p):
    rep = coverage(p)
    a = coverage_direct(p.schedule, p.k)
    assert (rep.a == a).all()
    assert rep.radius == a.max() and rep.total == a.sum()
    for f, t in p.pilots():
        assert rep.a[f, t] == 0


@given(schedules(), st.integers(0, 20))
def test_coverage_and_census_shift_invariant(p, s):
    q = cyclic_shift(p, s)
    assert coverage(q).total == coverage(p).total
    assert coverage(q).radius == coverage(p).radius
    assert collinearity_census(q).redundant_lines == collinearity_census(p).redundant_lines
    assert len(symmetric_triples(q)) == len(symmetric_triples(p))


@pytest.mark.parametrize("k", [5, 7])
def test_census_shift_invariance_exhaustive(k):
    import itertools

    for sched in itertools.permutations(range(k)):
        p = PilotPattern(k, sched)
        base = sorted(collinearity_census(p).counts.tolist())
        for s in range(1, k):
            assert sorted(collinearity_census(cyclic_shift(p, s)).counts.tolist()) == base


def test_identity_k3():
    rep = coverage(PilotPattern(3, (0, 1, 2)))
    assert rep.radius == 2 and rep.total == 7


@pytest.mark.parametrize("k", PRIMES)
def test_prime_line_count(k):
    assert len(enumerate_modular_lines(k)) == k * (k + 1)


@pytest.mark.parametrize("k", range(2, 13))
def test_lines_match_direct_enumeration(k):
    ours = {frozenset(line.points) for line in enumerate_modular_lines(k)}
    assert ours == set(lines_direct(k))
    assert all(len(line.points) == k for line in enumerate_modular_lines(k))


@pytest.mark.parametrize("k", range(2, 10))
def test_every_point_on_same_number_of_lines(k):
    deg = line_incidence(k).sum(axis=0)
    assert (deg == deg[0]).all()


def test_line_equality_is_by_points():
    lines = enumerate_modular_lines(5)
    a = lines[3]
    assert type(a)(0, 0, 0, a.points) == a
    assert a.points[0] in a


@given(schedules(permutation=False, max_k=9))
def test_census_matches_direct(p):
    occ = {}
    for pt in p.pilots():
        occ[pt] = occ.get(pt, 0) + 1
    counts = sorted(sum(occ.get(pt, 0) for pt in line) for line in lines_direct(p.k))
    c = collinearity_census(p)
    assert sorted(c.counts.tolist()) == counts
    assert c.redundant_lines == sum(x >= 3 for x in counts)
    assert c.has_four_collinear == any(x >= 4 for x in counts)


@given(schedules(min_k=3, max_k=9))
def test_symmetric_triples_match_direct(p):
    pilots = set(p.pilots())
    expected = {t for t in triples_direct(p.k) if all(x in pilots for x in t)}
    assert {tri for _, tri in symmetric_triples(p)} == expected


def test_3gpp_k5_collinearity():
    p = baseline_3gpp(5)
    assert collinearity_census(p).redundant_lines == 1
    assert collinearity_census(p).max_count == 5
    assert len(symmetric_triples(p)) == 4


@given(schedules(min_k=2, max_k=13, permutation=False))
def test_coherence_forms_agree(p):
    m = coherence_map(p)
    assert abs(m.rho_sq[0, 0] - 1.0) <= 1e-12
    assert np.abs(m.rho_sq - full_difference_form(p)).max() <= 1e-10
    assert sum(m.multiplicities.values()) == p.k * (p.k - 1) // 2


def test_coherence_3gpp_k5_unit_line():
    m = coherence_map(baseline_3gpp(5))
    for i in range(5):
        for j in range(5):
            if (2 * i + j) % 5 == 0:
                assert abs(m.rho_sq[i, j] - 1.0) <= 1e-10
    assert m.max_offpeak == pytest.approx(1.0, abs=1e-10)


def test_chirp_coherence_below_3gpp():
    assert coherence_map(baseline_chirp(17)).max_offpeak < coherence_map(baseline_3gpp(17)).max_offpeak


def test_kernel_origin_and_peak():
    assert legacy_kernel(0.0, 0.0, 24, 17, 8) == 1.0
    M, k, d = 24, 17, 8
    assert legacy_kernel(1 / (M * k), d / k, M, k, d) == pytest.approx(kernel_peak(M, k), abs=1e-10)
    assert kernel_peak(24, 17) == pytest.approx(0.9943277232828599, abs=1e-12)
    assert kernel_peak(1, 5) == 1.0


@pytest.mark.parametrize("M,k", [(4, 5), (6, 7)])
def test_kernel_matches_dft(M, k):
    for d in range(k):
        A = ambiguity_dft(M, k, d)
        for p in range(M * k):
            for q in range(k):
                assert abs(A[p, q] - legacy_kernel(p / (M * k), q / k, M, k, d)) <= 1e-8


@given(st.integers(1, 40), st.integers(1, 40), st.floats(-1, 1), st.floats(-1, 1))
def test_kernel_bounded(M, k, tau, nu):
    v = legacy_kernel(tau, nu, M, k, 1)
    assert 0.0 <= v <= 1.0 + 1e-12


def test_hop_increment():
    assert hop_increment(baseline_3gpp(17)) == 8
    assert hop_increment(baseline_chirp(7)) is None
    assert hop_increment(PilotPattern(4, (0, 1, 2, 3))) == 1
