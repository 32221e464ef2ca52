import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resilnet.actuation import (
    Actuator,
    LogEntry,
    PolicyLog,
    RateLimiter,
    ShieldLimits,
    mitigate,
    rate_limit_check,
    rollback,
    shield_check,
)
from resilnet.decision import ControllerEnsemble, ControllerSpec, MitigationView
from resilnet.errors import ConfigError, StateError
from resilnet.network import NetworkPolicy, NetworkState, initial_policy


@pytest.fixture
def state(topo, flows):
    return NetworkState(topo, flows, initial_policy(topo, flows, {"urllc": 0.01}))


def _reroute(policy, flow_id, path):
    routes = dict(policy.routes)
    routes[flow_id] = (path,)
    return NetworkPolicy(0, routes, policy.slice_allocation)


def test_initial_policy_passes_shields(state):
    assert shield_check(state.policy, state.policy, state, ShieldLimits()).accepted


def test_utilization_shield(state):
    v = shield_check(state.policy, state.policy, state, ShieldLimits(u_max=0.01))
    assert (v.accepted, v.reason) == (False, "utilization")


def test_route_over_down_link_is_utilization_violation(state):
    state.topology.links["gnb_0--mec_0"].up = False
    v = shield_check(state.policy, state.policy, state, ShieldLimits())
    assert v.reason == "utilization"


def test_path_diversity_shield(state):
    single = _reroute(state.policy, "url_0", state.policy.routes["url_0"][0])
    v = shield_check(single, state.policy, state, ShieldLimits())
    assert v.reason == "path_diversity"
    # when the topology itself offers one path, one path is enough
    topo = state.topology
    for lid in topo.incident_links("iot_0", only_up=False):
        if lid != topo.path_links(single.routes["url_0"][0])[0]:
            topo.links[lid].up = False
    assert shield_check(single, single, state, ShieldLimits()).accepted


def test_delta_shield_and_rule_order(state):
    moved = _reroute(state.policy, "tel_1", ("iot_1", "gnb_1", "core_1", "mec_0"))
    assert shield_check(moved, state.policy, state, ShieldLimits()).accepted
    v = shield_check(moved, state.policy, state, ShieldLimits(delta_max=1e-6))
    assert v.reason == "delta"
    v = shield_check(moved, state.policy, state, ShieldLimits(u_max=0.01, delta_max=1e-6))
    assert v.reason == "utilization"


def test_shield_ignores_flows_with_down_endpoints(state):
    state.topology.nodes["iot_0"].up = False
    assert shield_check(state.policy, state.policy, state, ShieldLimits()).accepted


def test_limits_validation():
    with pytest.raises(ConfigError):
        ShieldLimits(u_max=0.0)
    with pytest.raises(ConfigError):
        ShieldLimits(min_disjoint_paths=0)
    with pytest.raises(ConfigError):
        RateLimiter(0)
    with pytest.raises(ConfigError):
        RateLimiter(5, 0.0)


# -- rate limiter ------------------------------------------------------------------


def test_rate_limiter_window_boundary():
    lim = RateLimiter(5, 60.0)
    for t in range(5):
        assert rate_limit_check(lim, float(t)) == "Allow"
        lim.record(float(t))
    assert rate_limit_check(lim, 4.0) == "Throttle"
    assert rate_limit_check(lim, 59.999) == "Throttle"
    # the record at t=0 leaves the half-open window (0, 60]
    assert rate_limit_check(lim, 60.0) == "Allow"
    with pytest.raises(StateError):
        lim.record(1.0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 3000), min_size=1, max_size=60), st.integers(1, 6))
def test_rate_limiter_never_exceeds_cap(ticks, cap):
    # timestamps on a 0.1 s tick grid, formed the way the simulator forms them
    lim = RateLimiter(cap, 60.0)
    accepted = []
    for t in (i * 0.1 for i in sorted(ticks)):
        if rate_limit_check(lim, t) == "Allow":
            lim.record(t)
            accepted.append(t)
    for s in accepted:
        assert sum(1 for u in accepted if s - 60.0 + 1e-9 < u <= s) <= cap


# -- log and rollback ----------------------------------------------------------------


def test_probation_promotes_or_blames(state):
    log = PolicyLog(state.policy)
    p1 = state.policy.with_identity(1, "c", 10.0)
    log.append(LogEntry(p1, 10.0, "suspect", "enact", probation_until=15.0))
    assert log.on_probation() and log.s_good is state.policy
    assert not log.observe(12.0, False)
    assert not log.observe(15.0, False)
    assert log.s_good is p1 and not log.on_probation()
    p2 = state.policy.with_identity(2, "c", 20.0)
    log.append(LogEntry(p2, 20.0, "suspect", "enact", probation_until=25.0))
    assert log.observe(21.0, True)
    assert log.latest.annotation == "slo_violation" and log.s_good is p1


def test_rollback_is_exact_and_idempotent(state):
    log = PolicyLog(state.policy)
    good = log.s_good
    bad = _reroute(state.policy, "tel_1", ("iot_1", "gnb_1", "core_1", "mec_0")).with_identity(7, "x", 1.0)
    state.apply_policy(bad)
    log.append(LogEntry(bad, 1.0, "suspect", "enact", probation_until=6.0))
    restored = rollback(log, state, 2.0, "test")
    assert restored.serialize() == good.serialize()
    assert state.policy.serialize() == good.serialize()
    assert log.latest.kind == "rollback" and log.latest.previous is bad
    again = rollback(log, state, 3.0, "test")
    assert again.serialize() == good.serialize() and state.policy is again
    assert [e.kind for e in log.entries] == ["initial", "enact", "rollback", "rollback"]


def test_rollback_to_infeasible_good_is_annotated(state):
    log = PolicyLog(state.policy)
    state.topology.links["gnb_0--mec_0"].up = False
    rollback(log, state, 1.0, "x")
    assert log.latest.annotation == "x;infeasible"
    assert log.latest.down_links == frozenset({"gnb_0--mec_0"})


# -- pipeline ------------------------------------------------------------------------


def _view(state, attacked):
    return MitigationView(state.topology, state.flows, state.policy, state.policy, frozenset(attacked),
                          {"urllc": 0.01}, {"urllc": 2.0, "telemetry": 1.25, "video": 1.25})


def _ens(*kinds):
    return ControllerEnsemble([ControllerSpec(f"c{i}", k) for i, k in enumerate(kinds)])


def test_pipeline_enacts_then_maintains(state):
    act = Actuator(state, _ens("shortest_path", "shortest_path", "conservative"), PolicyLog(state.policy),
                   RateLimiter(), ShieldLimits())
    assert act.mitigate(_view(state, {"gnb_0"}), 10.0) == "enact"
    assert state.policy.id == 1 and act.log.latest.tag == "suspect"
    assert act.mitigate(_view(state, {"gnb_0"}), 11.0) == "maintain"
    assert [a.kind for a in act.actions] == ["enact", "maintain"]


def test_pipeline_throttles_to_rollback(state):
    log = PolicyLog(state.policy)
    lim = RateLimiter(1, 60.0)
    lim.record(5.0)
    outcome, actions = mitigate(_view(state, {"gnb_0"}), state, _ens("shortest_path", "max_disjoint", "shortest_path"),
                                log, lim, ShieldLimits(), 10.0)
    assert outcome == "rollback"
    assert [a.kind for a in actions] == ["throttle", "rollback"]
    assert state.policy.serialize() == log.s_good.serialize()


def test_pipeline_shield_reject_rolls_back(state):
    log = PolicyLog(state.policy)
    outcome, actions = mitigate(_view(state, {"gnb_0"}), state, _ens("shortest_path", "shortest_path", "max_disjoint"),
                                log, RateLimiter(), ShieldLimits(delta_max=1e-6), 10.0)
    assert outcome == "rollback"
    assert actions[0].kind == "reject" and actions[0].detail.startswith("delta")
