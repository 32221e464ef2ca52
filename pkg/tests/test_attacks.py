import numpy as np
import pytest

from resilnet.attacks import (
    INJECTION_SIGMAS,
    AttackEvent,
    AttackSpec,
    CoordinatedAttack,
    apply_effects,
    corrupt_replica,
    measured_impact,
    schedule,
    validate_targets,
)
from resilnet.errors import ConfigError, TraceRangeError
from resilnet.network import NetworkState, initial_policy
from resilnet.reliability import PerformanceTrace


def _flood(**kw):
    d = dict(id="f", kind="ddos_flood", targets=("mec_0",), start=10.0, duration=20.0, intensity=4.0)
    d.update(kw)
    return AttackSpec(**d)


def test_spec_validation():
    with pytest.raises(ConfigError):
        _flood(kind="emp")
    with pytest.raises(ConfigError):
        _flood(targets=())
    with pytest.raises(ConfigError):
        _flood(duration=0.0)
    with pytest.raises(ConfigError):
        _flood(probability=1.5)
    with pytest.raises(ConfigError):
        AttackSpec("d", "data_injection", ("s",), 0.0, 1.0, intensity=2.0)
    with pytest.raises(ConfigError):
        CoordinatedAttack("c", _flood(kind="fiber_cut"), _flood(kind="fiber_cut"))


def test_event_level_with_ramp():
    ev = AttackEvent("f", "ddos_flood", ("mec_0",), 10.0, 30.0, 4.0, 5.0, "f")
    assert ev.level(9.9) == 0.0
    assert ev.level(10.0) == 0.0
    assert ev.level(12.5) == pytest.approx(0.5)
    assert ev.level(20.0) == 1.0
    assert ev.level(30.0) == 0.0
    assert not ev.active(30.0)


def test_schedule_draws_and_order():
    cut = _flood(id="cut", kind="fiber_cut", targets=("gnb_0--mec_0",), start=12.0)
    pair = CoordinatedAttack("pair", _flood(id="cy", start=50.0), cut, alignment=5.0)
    specs = [_flood(id="b", start=20.0), _flood(id="a", start=20.0), pair, _flood(id="never", probability=0.0)]
    events = schedule(specs, np.random.default_rng(0))
    assert [e.id for e in events] == ["a", "b", "cy", "cut"]
    assert events[3].start == 55.0 and events[3].unit == "pair"


def test_schedule_probability_frequency():
    rng = np.random.default_rng(1)
    hits = sum(bool(schedule([_flood(probability=0.3)], rng)) for _ in range(4000))
    assert abs(hits / 4000 - 0.3) < 0.03


def test_coordinated_pair_is_all_or_nothing():
    cut = _flood(id="cut", kind="fiber_cut", targets=("l",), probability=1.0)
    pair = CoordinatedAttack("pair", _flood(id="cy", probability=0.5), cut)
    rng = np.random.default_rng(2)
    for _ in range(200):
        assert len(schedule([pair], rng)) in (0, 2)


def test_apply_effects_reverses(topo, flows):
    state = NetworkState(topo, flows, initial_policy(topo, flows, {"urllc": 0.01}))
    cut = AttackEvent("c", "fiber_cut", ("gnb_0--mec_0",), 0.0, 10.0, 0.0, 0.0, "c")
    out = AttackEvent("o", "station_outage", ("gnb_1",), 0.0, 10.0, 0.0, 0.0, "o")
    fl = AttackEvent("f", "ddos_flood", ("mec_0",), 0.0, 10.0, 3.0, 0.0, "f")
    inj = AttackEvent("i", "data_injection", ("s",), 0.0, 10.0, 0.5, 0.0, "i")
    inj2 = AttackEvent("j", "data_injection", ("s",), 0.0, 10.0, 0.5, 0.0, "j")
    eff = apply_effects(state, [cut, out, fl, inj, inj2], 1.0, {"mec_0": 2e6})
    assert not topo.links["gnb_0--mec_0"].up and not topo.nodes["gnb_1"].up
    assert eff.flood == {"mec_0": 6e6}
    assert eff.injection["s"] == pytest.approx(0.75)
    apply_effects(state, [], 2.0, {"mec_0": 2e6})
    assert topo.up_flags() == ((), ())


def test_apply_effects_keeps_removed_nodes(topo, flows):
    state = NetworkState(topo, flows, initial_policy(topo, flows, {"urllc": 0.01}))
    state.remove_node("mec_4")
    apply_effects(state, [], 0.0, {})
    assert not topo.nodes["mec_4"].up


def test_corrupt_replica():
    vals = np.zeros(10000)
    out, mask = corrupt_replica(vals, 0.25, 1.0, 0.5, np.random.default_rng(0))
    assert abs(mask.mean() - 0.25) < 0.02
    assert np.all(out[mask] == 1.0 + INJECTION_SIGMAS * 0.5)
    assert np.all(out[~mask] == 0.0)


def test_measured_impact():
    q = np.ones(21)
    q[8:12] = 0.4
    tr = PerformanceTrace(1.0, q, 1.0)
    ev = AttackEvent("f", "ddos_flood", ("x",), 5.0, 15.0, 1.0, 0.0, "f")
    assert measured_impact(tr, ev) == pytest.approx(0.6)
    late = AttackEvent("f", "ddos_flood", ("x",), 50.0, 60.0, 1.0, 0.0, "f")
    with pytest.raises(TraceRangeError):
        measured_impact(tr, late)


def test_validate_targets():
    ok = [_flood(), AttackSpec("p", "ai_poisoning", ("det",), 0.0, 1.0, 1.0)]
    validate_targets(ok, ["mec_0"], [], [], ["det"])
    with pytest.raises(ConfigError):
        validate_targets([_flood(targets=("mec_9",))], ["mec_0"], [], [], [])
    with pytest.raises(ConfigError):
        validate_targets([AttackSpec("c", "fiber_cut", ("mec_0",), 0.0, 1.0)], ["mec_0"], [], [], [])
