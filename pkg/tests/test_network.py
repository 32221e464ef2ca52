import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from resilnet.errors import ConfigError, DomainError, EnactmentError, RouteError
from resilnet.network import (
    Flow,
    Link,
    NetworkPolicy,
    NetworkState,
    NodeSpec,
    Topology,
    build_topology,
    default_slices,
    edge_disjoint_paths,
    initial_policy,
    link_utilization,
    max_disjoint_subset,
    policy_delta,
    shortest_path,
)


def _nx(topo):
    g = nx.Graph()
    g.add_nodes_from(n for n, s in topo.nodes.items() if s.up)
    for lid, l in topo.links.items():
        a, b = l.endpoints
        if l.up and topo.nodes[a].up and topo.nodes[b].up:
            g.add_edge(a, b)
    return g


def _random_topology(seed, n=9, p=0.35):
    g = nx.gnp_random_graph(n, p, seed=seed)
    nodes = [NodeSpec(f"n{i}", "core_router") for i in range(n)]
    links = [Link(f"n{a}--n{b}", (f"n{a}", f"n{b}"), 1.0) for a, b in g.edges]
    return Topology(nodes, links)


def _check_disjoint(topo, paths, src, dst):
    used = set()
    for p in paths:
        assert p[0] == src and p[-1] == dst
        assert len(set(p)) == len(p)
        links = topo.path_links(p)
        assert topo.path_is_up(p)
        assert not used & set(links)
        used.update(links)


@pytest.mark.parametrize("seed", range(40))
def test_disjoint_path_count_matches_networkx(seed):
    topo = _random_topology(seed)
    rng = np.random.default_rng(seed)
    for lid in topo.links:
        if rng.random() < 0.15:
            topo.links[lid].up = False
    g = _nx(topo)
    for a, b in [("n0", "n1"), ("n2", "n7"), ("n3", "n8")]:
        paths = edge_disjoint_paths(topo, a, b, 10)
        _check_disjoint(topo, paths, a, b)
        expected = nx.edge_connectivity(g, a, b) if nx.has_path(g, a, b) else 0
        assert len(paths) == expected
        assert max_disjoint_subset(topo, paths) == len(paths)


def test_disjoint_limit_and_first_is_shortest(topo):
    paths = edge_disjoint_paths(topo, "iot_0", "mec_0", 2)
    assert len(paths) == 2
    sp = shortest_path(topo, "iot_0", "mec_0")
    assert len(paths[0]) == len(sp)
    assert edge_disjoint_paths(topo, "iot_0", "mec_0", 0) == []
    with pytest.raises(DomainError):
        edge_disjoint_paths(topo, "iot_0", "iot_0", 2)


def test_shortest_path_respects_down_elements(topo):
    assert shortest_path(topo, "iot_0", "mec_0") == ("iot_0", "gnb_0", "mec_0")
    topo.links["gnb_0--mec_0"].up = False
    p = shortest_path(topo, "iot_0", "mec_0")
    assert p is not None and topo.path_is_up(p)
    assert "gnb_0--mec_0" not in topo.path_links(p)
    topo.nodes["mec_0"].up = False
    assert shortest_path(topo, "iot_0", "mec_0") is None
    assert edge_disjoint_paths(topo, "iot_0", "mec_0", 2) == []


def test_reference_topology_census(topo):
    assert topo.census() == {"iot_device": 50, "mec_server": 5, "edge_controller": 3,
                             "core_router": 2, "gnb": 5}
    assert topo.is_connected()


def test_topology_validation():
    with pytest.raises(ConfigError):
        Topology([NodeSpec("a", "gnb"), NodeSpec("a", "gnb")], [])
    with pytest.raises(ConfigError):
        Topology([NodeSpec("a", "gnb")], [Link("l", ("a", "b"), 1.0)])
    with pytest.raises(ConfigError):
        NodeSpec("a", "satellite")
    with pytest.raises(ConfigError):
        Link("l", ("a", "a"), 1.0)
    with pytest.raises(ConfigError):
        build_topology({"nodes": [{"id": "a", "role": "gnb"}, {"id": "b", "role": "gnb"}], "links": []})
    with pytest.raises(ConfigError):
        Flow("f", "a", "a", "urllc", 1.0)


def test_path_links_error(topo):
    with pytest.raises(RouteError):
        topo.path_links(("iot_0", "mec_3"))
    assert not topo.path_is_up(("iot_0", "mec_3"))


def test_up_flags_roundtrip(topo):
    topo.set_up_flags(["mec_1"], ["gnb_0--mec_0"])
    assert topo.up_flags() == (("mec_1",), ("gnb_0--mec_0",))
    topo.set_up_flags()
    assert topo.up_flags() == ((), ())


# -- policies ----------------------------------------------------------------


def _policy(routes, slices=None, id=0):
    return NetworkPolicy(id, routes, slices or {"urllc": {"l1": 0.1}})


def test_canonical_ignores_identity_and_order():
    a = NetworkPolicy(1, {"f2": (("x", "y"),), "f1": (("a", "b"),)}, {"urllc": {"l2": 0.1, "l1": 0.2}}, "c1", 3.0)
    b = NetworkPolicy(9, {"f1": (("a", "b"),), "f2": (("x", "y"),)}, {"urllc": {"l1": 0.2, "l2": 0.1}}, "c2", 7.0)
    assert a.canonical == b.canonical and a.digest == b.digest
    assert a.serialize() != b.serialize()
    c = b.with_identity(1, "c1", 3.0)
    assert c.serialize() == a.serialize()


def test_canonical_drops_zero_fractions():
    a = _policy({"f": (("a", "b"),)}, {"urllc": {"l1": 0.1, "l2": 0.0}, "video": {}})
    b = _policy({"f": (("a", "b"),)}, {"urllc": {"l1": 0.1}})
    assert a.equivalent(b)


def test_policy_validation():
    with pytest.raises(DomainError):
        _policy({"f": ()})
    with pytest.raises(DomainError):
        _policy({"f": (("a", "b"),)}, {"urllc": {"l": 0.7}, "video": {"l": 0.5}})
    with pytest.raises(DomainError):
        _policy({"f": (("a", "b"),)}, {"gold": {"l": 0.1}})


def test_policy_delta_values():
    base = _policy({"f1": (("a", "b"),), "f2": (("a", "c"),)}, {"urllc": {"l": 0.2}})
    assert policy_delta(base, base) == 0.0
    moved = _policy({"f1": (("a", "c", "b"),), "f2": (("a", "c"),)}, {"urllc": {"l": 0.2}})
    assert policy_delta(moved, base) == pytest.approx(0.25)
    resliced = _policy({"f1": (("a", "b"),), "f2": (("a", "c"),)}, {"urllc": {"l": 0.6}})
    # slice vector (0, 0.2, 0, 0.8) -> (0, 0.6, 0, 0.4): total variation 0.4
    assert policy_delta(resliced, base) == pytest.approx(0.2)
    with pytest.raises(DomainError):
        policy_delta(_policy({"g": (("a", "b"),)}), base)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 0.5), min_size=2, max_size=2), st.lists(st.floats(0, 0.5), min_size=2, max_size=2),
       st.booleans())
def test_policy_delta_bounded_and_symmetric(x, y, reroute):
    a = _policy({"f": (("a", "b"),)}, {"urllc": {"l": x[0]}, "video": {"l": x[1]}})
    b = _policy({"f": (("a", "c", "b") if reroute else ("a", "b"),)}, {"urllc": {"l": y[0]}, "video": {"l": y[1]}})
    d = policy_delta(a, b)
    assert 0.0 <= d <= 1.0
    assert d == pytest.approx(policy_delta(b, a), abs=1e-12)


def test_initial_policy_and_utilization(topo, flows):
    pol = initial_policy(topo, flows, {"urllc": 0.01})
    for f in flows:
        paths = pol.routes[f.id]
        want = 2 if f.traffic_class == "urllc" else 1
        assert len(paths) == want
        assert max_disjoint_subset(topo, paths) == want
    util = link_utilization(topo, pol, flows)
    assert set(util) == set(topo.links)
    assert max(util.values()) < 0.9
    topo.links["gnb_0--mec_0"].up = False
    with pytest.raises(RouteError):
        link_utilization(topo, pol, flows)


def test_default_slices(topo):
    s = default_slices(topo, {"urllc": 0.01})
    assert set(s) == {"telemetry", "urllc", "video"}
    assert all(v == 0.01 for v in s["urllc"].values())


def test_state_apply_policy_atomic(topo, flows):
    pol = initial_policy(topo, flows, {"urllc": 0.01})
    state = NetworkState(topo, flows, pol)
    bad_routes = dict(pol.routes)
    bad_routes["tel_0"] = (("iot_0", "mec_3"),)
    with pytest.raises(EnactmentError):
        state.apply_policy(NetworkPolicy(5, bad_routes, pol.slice_allocation))
    assert state.policy is pol
    partial = {k: v for k, v in pol.routes.items() if k != "tel_0"}
    with pytest.raises(EnactmentError):
        state.apply_policy(NetworkPolicy(6, partial, pol.slice_allocation))
    state.remove_node("gnb_0")
    with pytest.raises(EnactmentError):
        state.apply_policy(pol)
    assert state.policy is pol
