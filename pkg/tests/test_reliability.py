import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resilnet import oracles
from resilnet.errors import DomainError, StateError, TraceRangeError
from resilnet.reliability import (
    AttackImpactEntry,
    FailureModel,
    PerformanceTrace,
    SystemStructure,
    ThresholdParams,
    composite_reliability,
    dynamic_threshold,
    expected_attack_impact,
    k_out_of_n_heterogeneous,
    k_out_of_n_reliability,
    resilience_curve_area,
    resilience_index,
    response_time,
    select_mitigation_policy,
    subsystem_reliability,
    system_reliability,
    throughput_penalty,
)

# frozen from resilnet.oracles (exact rational sums), see test_oracle_values_match_frozen
EXP_NEG_01 = 0.9048374180359595
K2_OF_3 = 0.9745558178705098
COMPOSITE_1000 = 0.9704455335485082


def test_oracle_values_match_frozen():
    assert oracles.exp_neg_series(0.1) == pytest.approx(EXP_NEG_01, abs=1e-15)
    assert oracles.k_out_of_n_exact(3, 2, EXP_NEG_01) == pytest.approx(K2_OF_3, abs=1e-15)
    assert oracles.exp_neg_series(0.03) == pytest.approx(COMPOSITE_1000, abs=1e-15)


def test_subsystem_reliability_worked_value():
    assert subsystem_reliability(0.001, 100.0) == pytest.approx(EXP_NEG_01, abs=1e-12)


def test_two_of_three_worked_value():
    value = system_reliability(SystemStructure(3, 2), 0.001, 100.0)
    assert value == pytest.approx(0.97456, abs=1e-5)
    assert value == pytest.approx(K2_OF_3, abs=1e-12)


def test_composite_worked_value():
    model = FailureModel(lambda_ai=1e-5, lambda_phy=2e-5)
    assert composite_reliability(model, 1000.0) == pytest.approx(COMPOSITE_1000, abs=1e-12)


def test_trivial_reliability_edges():
    assert subsystem_reliability(0.0, 1e6) == 1.0
    assert subsystem_reliability(0.5, 0.0) == 1.0
    assert k_out_of_n_reliability(SystemStructure(4, 4), 1.0) == 1.0
    assert k_out_of_n_reliability(SystemStructure(4, 1), 0.0) == 0.0
    assert k_out_of_n_reliability(SystemStructure(5, 1), 0.5) == pytest.approx(1 - 0.5**5)


@pytest.mark.parametrize("case", range(20))
def test_k_out_of_n_random_against_exact(case):
    rng = np.random.default_rng(1000 + case)
    n = int(rng.integers(1, 13))
    k = int(rng.integers(1, n + 1))
    r = float(rng.uniform(0.5, 1.0))
    got = k_out_of_n_reliability(SystemStructure(n, k), r)
    assert got == pytest.approx(oracles.k_out_of_n_exact(n, k, r), abs=1e-12)


def test_heterogeneous_matches_count_dp():
    rng = np.random.default_rng(7)
    for _ in range(30):
        n = int(rng.integers(1, 11))
        k = int(rng.integers(1, n + 1))
        rs = rng.uniform(0, 1, n)
        assert k_out_of_n_heterogeneous(k, rs) == pytest.approx(
            oracles.k_out_of_n_count_dp(k, rs), abs=1e-12
        )


def test_heterogeneous_equals_homogeneous():
    assert k_out_of_n_heterogeneous(2, [EXP_NEG_01] * 3) == pytest.approx(K2_OF_3, abs=1e-12)


def test_domain_errors():
    with pytest.raises(DomainError):
        SystemStructure(3, 4)
    with pytest.raises(DomainError):
        SystemStructure(3, 0)
    with pytest.raises(DomainError):
        FailureModel(lambda_ai=-1.0)
    with pytest.raises(DomainError):
        FailureModel.from_mtbf(0.0)
    with pytest.raises(DomainError):
        k_out_of_n_reliability(SystemStructure(3, 2), 1.5)
    with pytest.raises(DomainError):
        subsystem_reliability(0.1, -1.0)
    with pytest.raises(DomainError):
        k_out_of_n_heterogeneous(1, [0.5] * 21)


def test_from_mtbf():
    assert FailureModel.from_mtbf(1000.0).lambda_hw == pytest.approx(0.001)


@settings(max_examples=200, deadline=None)
@given(
    n=st.integers(1, 30),
    data=st.data(),
    r1=st.floats(0, 1),
    r2=st.floats(0, 1),
)
def test_k_out_of_n_bounded_and_monotone(n, data, r1, r2):
    k = data.draw(st.integers(1, n))
    lo, hi = sorted((r1, r2))
    s = SystemStructure(n, k)
    a, b = k_out_of_n_reliability(s, lo), k_out_of_n_reliability(s, hi)
    assert 0.0 <= a <= b + 1e-12 <= 1.0 + 1e-12
    if k > 1:
        assert k_out_of_n_reliability(SystemStructure(n, k - 1), lo) >= a - 1e-12


@settings(max_examples=200, deadline=None)
@given(lam=st.floats(0, 10), t1=st.floats(0, 1e3), t2=st.floats(0, 1e3))
def test_subsystem_reliability_non_increasing(lam, t1, t2):
    lo, hi = sorted((t1, t2))
    a, b = subsystem_reliability(lam, lo), subsystem_reliability(lam, hi)
    assert 0.0 <= b <= a <= 1.0


@settings(max_examples=100, deadline=None)
@given(ai=st.floats(0, 1e-2), phy=st.floats(0, 1e-2), t=st.floats(0, 1e3))
def test_composite_is_product(ai, phy, t):
    both = composite_reliability(FailureModel(lambda_ai=ai, lambda_phy=phy), t)
    assert both == pytest.approx(subsystem_reliability(ai, t) * subsystem_reliability(phy, t), rel=1e-12)


# -- resilience index -----------------------------------------------------------


def _random_trace(rng, n=None, marks=False):
    n = int(rng.integers(3, 60)) if n is None else n
    tick = float(rng.uniform(0.1, 2.0))
    qn = float(rng.uniform(0.5, 5.0))
    q = rng.uniform(0, qn, n)
    t0 = float(rng.uniform(-5, 5))
    if not marks:
        return PerformanceTrace(tick, q, qn, t0)
    end = t0 + tick * (n - 1)
    a, b, c = sorted(rng.uniform(t0, end, 3))
    return PerformanceTrace(tick, q, qn, t0, a, b, c)


@pytest.mark.parametrize("case", range(50))
def test_resilience_index_against_quadrature(case):
    rng = np.random.default_rng(case)
    tr = _random_trace(rng)
    a, b = sorted(rng.uniform(tr.t_start, tr.t_end, 2))
    got = resilience_index(tr, a, b)
    ref = oracles.resilience_index_oracle(tr.times, tr.q, tr.q_nominal, a, b)
    assert got == pytest.approx(ref, abs=1e-9)


@pytest.mark.parametrize("case", range(50))
def test_curve_area_against_quadrature(case):
    rng = np.random.default_rng(500 + case)
    tr = _random_trace(rng, marks=True)
    got = resilience_curve_area(tr)
    ref = oracles.curve_area_oracle(tr.times, tr.q / tr.q_nominal, tr.t_threat, tr.t_recovery, tr.t_steady)
    assert got == pytest.approx(ref, abs=1e-9)


def test_constant_traces():
    full = PerformanceTrace(1.0, np.full(11, 2.0), 2.0)
    assert resilience_index(full, 0.0, 10.0) == 1.0
    half = PerformanceTrace(1.0, np.full(11, 1.0), 2.0)
    assert resilience_index(half, 0.0, 10.0) == 0.5


def test_linear_dip_example():
    # Q falls linearly from 1 to 0.5 over the window: mean 0.75
    tr = PerformanceTrace(0.01, np.linspace(1.0, 0.5, 1001), 1.0)
    assert resilience_index(tr, 0.0, 10.0) == pytest.approx(0.75, abs=1e-12)


def test_curve_area_zero_when_recovery_is_immediate():
    tr = PerformanceTrace(1.0, np.full(11, 0.5), 1.0, 0.0, 2.0, 2.0, 8.0)
    assert resilience_curve_area(tr) == 0.0


def test_curve_area_uses_throughput_when_given():
    q = np.full(11, 1.0)
    tp = np.full(11, 50.0)
    tr = PerformanceTrace(1.0, q, 1.0, 0.0, 0.0, 10.0, 10.0, baseline_throughput=100.0, throughput=tp)
    assert resilience_curve_area(tr) == pytest.approx(0.5)


def test_trace_errors():
    tr = PerformanceTrace(1.0, np.ones(5), 1.0)
    with pytest.raises(TraceRangeError):
        resilience_index(tr, 0.0, 10.0)
    with pytest.raises(DomainError):
        resilience_index(tr, 2.0, 2.0)
    with pytest.raises(StateError):
        resilience_curve_area(tr)
    with pytest.raises(DomainError):
        PerformanceTrace(1.0, np.array([0.5, 2.0]), 1.0)
    with pytest.raises(DomainError):
        PerformanceTrace(1.0, np.ones(5), 1.0, 0.0, 3.0, 2.0, 4.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=2, max_size=50), st.floats(0.01, 0.99))
def test_resilience_index_in_unit_interval(q, frac):
    tr = PerformanceTrace(1.0, np.array(q), 1.0)
    b = max(tr.t_end * frac, 1e-3)
    assert 0.0 <= resilience_index(tr, 0.0, b) <= 1.0


# -- threshold, impact and selection ---------------------------------------------------


def test_dynamic_threshold_worked_value():
    p = ThresholdParams(0.9999, 0.85, 0.1, 0.0005)
    assert dynamic_threshold(p, 0.85) == pytest.approx(0.9994, abs=1e-12)


@pytest.mark.parametrize("sign", [1, -1])
@pytest.mark.parametrize("resilience", [0.0, 0.5, 0.75, 0.85, 1.0])
def test_dynamic_threshold_against_oracle(sign, resilience):
    p = ThresholdParams(0.9999, 0.85, 0.1, 0.0005, alpha_sign=sign)
    ref = oracles.threshold_oracle(0.9999, 0.85, 0.1, 0.0005, resilience, sign)
    assert dynamic_threshold(p, resilience) == pytest.approx(ref, abs=1e-12)


def test_dynamic_threshold_directions():
    plus = ThresholdParams(alpha_sign=1)
    minus = ThresholdParams(alpha_sign=-1)
    assert dynamic_threshold(plus, 0.75) == pytest.approx(0.9894, abs=1e-12)
    assert dynamic_threshold(minus, 0.75) == pytest.approx(1.0094, abs=1e-12)


def test_threshold_param_errors():
    with pytest.raises(DomainError):
        ThresholdParams(delta=0.0)
    with pytest.raises(DomainError):
        ThresholdParams(r_min=1.5)
    with pytest.raises(DomainError):
        ThresholdParams(alpha_sign=0)


def test_expected_impact_worked_value():
    entries = [AttackImpactEntry("a", 0.5, 0.2), AttackImpactEntry("b", 0.25, 0.4)]
    assert expected_attack_impact(entries) == pytest.approx(0.2, abs=1e-15)
    with pytest.raises(DomainError):
        expected_attack_impact([])
    with pytest.raises(DomainError):
        AttackImpactEntry("x", 1.5, 0.1)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 10)), min_size=1, max_size=10))
def test_expected_impact_against_oracle(pairs):
    entries = [AttackImpactEntry(str(i), p, q) for i, (p, q) in enumerate(pairs)]
    assert expected_attack_impact(entries) == pytest.approx(
        oracles.expected_impact_oracle(pairs), rel=1e-12, abs=1e-300
    )


def test_select_policy_against_brute_force():
    rng = np.random.default_rng(3)
    params = ThresholdParams()
    for _ in range(300):
        m = int(rng.integers(1, 6))
        names = [f"P{i}" for i in rng.permutation(m)]
        rel = {c: float(rng.choice([0.9, 0.9999, 0.99995, 1.0])) for c in names}
        res = {c: float(rng.choice([0.5, 0.85, 0.9])) for c in names}
        imp = {c: float(rng.choice([0.0, 0.1, 0.2])) for c in names}
        entries = {c: [AttackImpactEntry("a", 1.0, imp[c])] for c in names}
        got = select_mitigation_policy(names, entries, rel, res, params)
        ref = oracles.select_policy_oracle(names, imp, rel, res, params.r_min, params.r_req)
        assert (got.policy_id, got.feasible) == ref


def test_select_policy_empty():
    with pytest.raises(DomainError):
        select_mitigation_policy([], {}, {}, {}, ThresholdParams())


def test_response_time_and_penalty():
    assert response_time(3.0, 480.0) == 483.0
    assert response_time(900.0, 2700.0) == 3600.0
    assert throughput_penalty(100.0, 90.0) == pytest.approx(10.0)
    assert throughput_penalty(100.0, 100.0) == 0.0
    with pytest.raises(DomainError):
        response_time(-1.0, 0.0)
    with pytest.raises(DomainError):
        throughput_penalty(0.0, 1.0)
