"""Cyber-physical network state: topology, traffic, slices and routing policies."""

from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

from .errors import ConfigError, DomainError, EnactmentError, RouteError

NODE_ROLES = ("iot_device", "mec_server", "edge_controller", "core_router", "gnb")
TRAFFIC_CLASSES = ("telemetry", "urllc", "video")

Path = tuple[str, ...]


@dataclass
class NodeSpec:
    id: str
    role: str
    hosted_subsystems: tuple[str, ...] = ()
    buffer_capacity: int = 200
    up: bool = True

    def __post_init__(self) -> None:
        if self.role not in NODE_ROLES:
            raise ConfigError(f"node {self.id!r}: unknown role {self.role!r}")
        if self.buffer_capacity < 1:
            raise ConfigError(f"node {self.id!r}: buffer_capacity must be >= 1")
        self.hosted_subsystems = tuple(self.hosted_subsystems)


@dataclass
class Link:
    id: str
    endpoints: tuple[str, str]
    capacity: float
    propagation_delay: float = 0.001
    up: bool = True

    def __post_init__(self) -> None:
        self.endpoints = tuple(self.endpoints)
        if len(self.endpoints) != 2 or self.endpoints[0] == self.endpoints[1]:
            raise ConfigError(f"link {self.id!r}: endpoints must be two distinct nodes")
        if not self.capacity > 0:
            raise ConfigError(f"link {self.id!r}: capacity must be > 0")
        if self.propagation_delay < 0:
            raise ConfigError(f"link {self.id!r}: propagation_delay must be >= 0")

    def other(self, node: str) -> str:
        a, b = self.endpoints
        return b if node == a else a


@dataclass(frozen=True)
class Flow:
    id: str
    source: str
    destination: str
    traffic_class: str
    offered_rate: float
    packet_size: float = 8000.0

    def __post_init__(self) -> None:
        if self.traffic_class not in TRAFFIC_CLASSES:
            raise ConfigError(f"flow {self.id!r}: unknown traffic class {self.traffic_class!r}")
        if not self.offered_rate > 0:
            raise ConfigError(f"flow {self.id!r}: offered_rate must be > 0")
        if not self.packet_size > 0:
            raise ConfigError(f"flow {self.id!r}: packet_size must be > 0")
        if self.source == self.destination:
            raise ConfigError(f"flow {self.id!r}: source equals destination")


class Topology:
    """Undirected graph of nodes and capacitated links with up/down flags."""

    def __init__(self, nodes: Iterable[NodeSpec], links: Iterable[Link]):
        self.nodes: dict[str, NodeSpec] = {}
        self.links: dict[str, Link] = {}
        self._adj: dict[str, list[tuple[str, str]]] = {}
        self._pair: dict[frozenset, str] = {}
        for node in nodes:
            if node.id in self.nodes:
                raise ConfigError(f"duplicate node id {node.id!r}")
            self.nodes[node.id] = node
            self._adj[node.id] = []
        for link in links:
            if link.id in self.links:
                raise ConfigError(f"duplicate link id {link.id!r}")
            for end in link.endpoints:
                if end not in self.nodes:
                    raise ConfigError(f"link {link.id!r} references unknown node {end!r}")
            key = frozenset(link.endpoints)
            if key in self._pair:
                raise ConfigError(f"link {link.id!r} duplicates link {self._pair[key]!r}")
            self._pair[key] = link.id
            self.links[link.id] = link
            a, b = link.endpoints
            self._adj[a].append((b, link.id))
            self._adj[b].append((a, link.id))
        for nbrs in self._adj.values():
            nbrs.sort()

    # -- structure ---------------------------------------------------------

    def link_between(self, a: str, b: str) -> str | None:
        return self._pair.get(frozenset((a, b)))

    def neighbors(self, node: str, only_up: bool = True) -> list[tuple[str, str]]:
        """(neighbor, link id) pairs in deterministic order."""
        if not only_up:
            return list(self._adj[node])
        if not self.nodes[node].up:
            return []
        return [
            (nbr, lid)
            for nbr, lid in self._adj[node]
            if self.links[lid].up and self.nodes[nbr].up
        ]

    def incident_links(self, node: str, only_up: bool = True) -> list[str]:
        return [lid for _, lid in self.neighbors(node, only_up)]

    def path_links(self, path: Sequence[str]) -> list[str]:
        out = []
        for a, b in zip(path, path[1:]):
            lid = self.link_between(a, b)
            if lid is None:
                raise RouteError(f"no link between {a!r} and {b!r}")
            out.append(lid)
        return out

    def path_is_up(self, path: Sequence[str]) -> bool:
        if any(n not in self.nodes or not self.nodes[n].up for n in path):
            return False
        try:
            return all(self.links[lid].up for lid in self.path_links(path))
        except RouteError:
            return False

    def is_connected(self, only_up: bool = False) -> bool:
        start = next(iter(self.nodes), None)
        if start is None:
            return True
        seen = {start}
        todo = deque([start])
        while todo:
            u = todo.popleft()
            for v, _ in self.neighbors(u, only_up):
                if v not in seen:
                    seen.add(v)
                    todo.append(v)
        return len(seen) == len(self.nodes)

    def census(self) -> dict[str, int]:
        out = {role: 0 for role in NODE_ROLES}
        for node in self.nodes.values():
            out[node.role] += 1
        return out

    def up_flags(self) -> tuple[tuple[str, ...], tuple[str, ...]]:
        """Hashable summary of the current failure state: sorted down node and link ids."""
        return (
            tuple(sorted(n for n, s in self.nodes.items() if not s.up)),
            tuple(sorted(l for l, s in self.links.items() if not s.up)),
        )

    def set_up_flags(self, down_nodes: Iterable[str] = (), down_links: Iterable[str] = ()) -> None:
        dn, dl = set(down_nodes), set(down_links)
        for nid, node in self.nodes.items():
            node.up = nid not in dn
        for lid, link in self.links.items():
            link.up = lid not in dl


def build_topology(config: Mapping) -> Topology:
    """Build and validate a connected topology from a scenario ``topology`` section."""
    try:
        nodes = [
            NodeSpec(
                id=str(n["id"]),
                role=str(n["role"]),
                hosted_subsystems=tuple(n.get("hosted_subsystems", ())),
                buffer_capacity=int(n.get("buffer_capacity", 200)),
            )
            for n in config["nodes"]
        ]
        links = [
            Link(
                id=str(l["id"]),
                endpoints=(str(l["endpoints"][0]), str(l["endpoints"][1])),
                capacity=float(l["capacity"]),
                propagation_delay=float(l.get("propagation_delay", 0.001)),
            )
            for l in config["links"]
        ]
    except (KeyError, TypeError, IndexError) as exc:
        raise ConfigError(f"malformed topology element: {exc!r}") from exc
    topo = Topology(nodes, links)
    if not topo.is_connected():
        raise ConfigError("topology is not connected")
    return topo


# -- path algorithms -------------------------------------------------------


def shortest_path(
    topology: Topology,
    src: str,
    dst: str,
    avoid_nodes: Iterable[str] = (),
    avoid_links: Iterable[str] = (),
) -> Path | None:
    """Minimum-hop path over up elements, ties broken by neighbor id order."""
    avoid_n, avoid_l = set(avoid_nodes) - {src, dst}, set(avoid_links)
    if not (topology.nodes[src].up and topology.nodes[dst].up):
        return None
    prev: dict[str, str | None] = {src: None}
    todo = deque([src])
    while todo:
        u = todo.popleft()
        if u == dst:
            break
        for v, lid in topology.neighbors(u):
            if v in prev or v in avoid_n or lid in avoid_l:
                continue
            prev[v] = u
            todo.append(v)
    if dst not in prev:
        return None
    path = [dst]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    return tuple(reversed(path))


def edge_disjoint_paths(
    topology: Topology,
    src: str,
    dst: str,
    limit: int,
    avoid_nodes: Iterable[str] = (),
    avoid_links: Iterable[str] = (),
) -> list[Path]:
    """Up to ``limit`` pairwise edge-disjoint paths over up links.

    Unit-capacity max flow by repeated BFS augmentation; the first path found
    is a shortest one. Returns [] when ``dst`` is unreachable.
    """
    if src == dst:
        raise DomainError("src and dst must differ")
    if src not in topology.nodes or dst not in topology.nodes:
        raise DomainError("src and dst must be topology nodes")
    avoid_n, avoid_l = set(avoid_nodes) - {src, dst}, set(avoid_links)
    if limit < 1 or not (topology.nodes[src].up and topology.nodes[dst].up):
        return []

    def arcs(u: str):
        for v, lid in topology.neighbors(u):
            if v not in avoid_n and lid not in avoid_l:
                yield v, lid

    flow: dict[tuple[str, str, str], int] = {}  # (u, v, link) -> 1 when a unit goes u->v
    count = 0
    while count < limit:
        prev: dict[str, tuple[str, str] | None] = {src: None}
        todo = deque([src])
        while todo and dst not in prev:
            u = todo.popleft()
            for v, lid in arcs(u):
                if v in prev:
                    continue
                forward = flow.get((u, v, lid), 0)
                backward = flow.get((v, u, lid), 0)
                # residual: unused edge, or cancel a unit flowing v->u
                if forward == 0:
                    prev[v] = (u, lid)
                    todo.append(v)
                elif backward:
                    prev[v] = (u, lid)
                    todo.append(v)
        if dst not in prev:
            break
        v = dst
        while prev[v] is not None:
            u, lid = prev[v]
            if flow.get((v, u, lid)):
                del flow[(v, u, lid)]
            else:
                flow[(u, v, lid)] = 1
            v = u
        count += 1

    out_arcs: dict[str, list[tuple[str, str]]] = {}
    for (u, v, lid) in sorted(flow):
        out_arcs.setdefault(u, []).append((v, lid))
    paths: list[Path] = []
    for _ in range(count):
        path = [src]
        seen = {src: 0}
        while path[-1] != dst:
            v, lid = out_arcs[path[-1]].pop(0)
            if v in seen:  # drop a cycle left by the decomposition
                del path[seen[v] + 1 :]
                seen = {n: i for i, n in enumerate(path)}
                continue
            seen[v] = len(path)
            path.append(v)
        paths.append(tuple(path))
    paths.sort(key=lambda p: (len(p), p))
    return paths


def max_disjoint_subset(topology: Topology, paths: Sequence[Path]) -> int:
    """Largest number of pairwise edge-disjoint paths selectable from ``paths``."""
    link_sets = [frozenset(topology.path_links(p)) for p in paths]
    best = 0

    def grow(i: int, used: frozenset, size: int) -> None:
        nonlocal best
        best = max(best, size)
        for j in range(i, len(link_sets)):
            if size + (len(link_sets) - j) <= best:
                return
            if not (link_sets[j] & used):
                grow(j + 1, used | link_sets[j], size + 1)

    grow(0, frozenset(), 0)
    return best


# -- policies --------------------------------------------------------------


def _round(x: float) -> float:
    return round(float(x), 9)


@dataclass(frozen=True)
class NetworkPolicy:
    """A routing plus slice-allocation snapshot.

    ``routes`` maps flow id to an ordered tuple of node-sequence paths; traffic
    splits equally across them. ``slice_allocation`` maps traffic class to a
    per-link reserved capacity fraction; links absent from a class map get 0.
    """

    id: int
    routes: Mapping[str, tuple[Path, ...]]
    slice_allocation: Mapping[str, Mapping[str, float]]
    issued_by: str = "init"
    issued_at: float = 0.0

    def __post_init__(self) -> None:
        routes = {
            str(f): tuple(tuple(str(n) for n in p) for p in paths)
            for f, paths in self.routes.items()
        }
        slices = {
            str(c): {str(l): _round(v) for l, v in alloc.items() if _round(v) != 0.0}
            for c, alloc in self.slice_allocation.items()
        }
        for c in slices:
            if c not in TRAFFIC_CLASSES:
                raise DomainError(f"unknown traffic class in slices: {c!r}")
        for f, paths in routes.items():
            if not paths:
                raise DomainError(f"flow {f!r} has no path")
        object.__setattr__(self, "routes", routes)
        object.__setattr__(self, "slice_allocation", slices)
        totals: dict[str, float] = {}
        for alloc in slices.values():
            for lid, v in alloc.items():
                if v < 0:
                    raise DomainError(f"negative slice fraction on link {lid!r}")
                totals[lid] = totals.get(lid, 0.0) + v
        over = [lid for lid, tot in totals.items() if tot > 1.0 + 1e-9]
        if over:
            raise DomainError(f"slice fractions exceed 1 on links {sorted(over)}")

    def fraction(self, traffic_class: str, link_id: str) -> float:
        return self.slice_allocation.get(traffic_class, {}).get(link_id, 0.0)

    @cached_property
    def canonical(self) -> bytes:
        """Order-independent serialization of routes and slices (not id/issuer)."""
        body = {
            "routes": {f: [list(p) for p in self.routes[f]] for f in sorted(self.routes)},
            "slices": {
                c: {l: self.slice_allocation[c][l] for l in sorted(self.slice_allocation[c])}
                for c in sorted(self.slice_allocation)
                if self.slice_allocation[c]
            },
        }
        return json.dumps(body, sort_keys=True, separators=(",", ":")).encode()

    @cached_property
    def digest(self) -> str:
        return hashlib.sha256(self.canonical).hexdigest()[:16]

    def serialize(self) -> bytes:
        """Full serialization including identity fields."""
        head = json.dumps(
            {"id": self.id, "issued_by": self.issued_by, "issued_at": self.issued_at},
            sort_keys=True,
        ).encode()
        return head + b"|" + self.canonical

    def equivalent(self, other: "NetworkPolicy") -> bool:
        return self.canonical == other.canonical

    def with_identity(self, id: int, issued_by: str, issued_at: float) -> "NetworkPolicy":
        return NetworkPolicy(id, self.routes, self.slice_allocation, issued_by, issued_at)


def link_utilization(
    topology: Topology, policy: NetworkPolicy, flows: Sequence[Flow]
) -> dict[str, float]:
    """Offered load over capacity per link, with equal splitting across paths."""
    load = {lid: 0.0 for lid in topology.links}
    for flow in flows:
        paths = policy.routes.get(flow.id, ())
        if not paths:
            continue
        share = flow.offered_rate / len(paths)
        for path in paths:
            for lid in topology.path_links(path):
                if not topology.links[lid].up:
                    raise RouteError(f"flow {flow.id!r} routed over down link {lid!r}")
                load[lid] += share
    return {lid: load[lid] / topology.links[lid].capacity for lid in load}


def _slice_vector(policy: NetworkPolicy, link_id: str) -> list[float]:
    fr = [policy.fraction(c, link_id) for c in TRAFFIC_CLASSES]
    return fr + [max(0.0, 1.0 - sum(fr))]


def policy_delta(proposed: NetworkPolicy, active: NetworkPolicy) -> float:
    """Mix of route churn and slice total-variation distance, in [0, 1]."""
    if set(proposed.routes) != set(active.routes):
        raise DomainError("policies cover different flow sets")
    flows = proposed.routes.keys()
    route_part = (
        sum(proposed.routes[f] != active.routes[f] for f in flows) / len(flows) if flows else 0.0
    )
    links = set()
    for pol in (proposed, active):
        for alloc in pol.slice_allocation.values():
            links.update(alloc)
    if links:
        tv = 0.0
        for lid in links:
            a, b = _slice_vector(proposed, lid), _slice_vector(active, lid)
            tv += 0.5 * sum(abs(x - y) for x, y in zip(a, b))
        slice_part = tv / len(links)
    else:
        slice_part = 0.0
    return 0.5 * route_part + 0.5 * slice_part


def default_slices(topology: Topology, fractions: Mapping[str, float]) -> dict[str, dict[str, float]]:
    return {c: {lid: float(fractions.get(c, 0.0)) for lid in topology.links} for c in TRAFFIC_CLASSES}


def initial_policy(
    topology: Topology,
    flows: Sequence[Flow],
    slice_fractions: Mapping[str, float],
    urllc_paths: int = 2,
) -> NetworkPolicy:
    """Shortest-path routing, with ``urllc_paths`` disjoint paths per urllc flow."""
    routes: dict[str, tuple[Path, ...]] = {}
    for flow in flows:
        if flow.traffic_class == "urllc" and urllc_paths > 1:
            paths = edge_disjoint_paths(topology, flow.source, flow.destination, urllc_paths)
        else:
            p = shortest_path(topology, flow.source, flow.destination)
            paths = [p] if p else []
        if not paths:
            raise ConfigError(f"flow {flow.id!r} has no route")
        routes[flow.id] = tuple(paths)
    return NetworkPolicy(0, routes, default_slices(topology, slice_fractions), "init", 0.0)


@dataclass
class NetworkState:
    """Mutable per-run network state: topology flags, flows and the active policy."""

    topology: Topology
    flows: list[Flow]
    policy: NetworkPolicy
    enacted: list[NetworkPolicy] = field(default_factory=list)
    removed_nodes: set[str] = field(default_factory=set)

    def __post_init__(self) -> None:
        if not self.enacted:
            self.enacted.append(self.policy)

    @property
    def flow_ids(self) -> list[str]:
        return [f.id for f in self.flows]

    def remove_node(self, node_id: str) -> None:
        self.removed_nodes.add(node_id)
        self.topology.nodes[node_id].up = False

    def apply_policy(self, policy: NetworkPolicy) -> None:
        """Install ``policy`` atomically; on error nothing changes."""
        for fid, paths in policy.routes.items():
            for path in paths:
                for n in path:
                    if n not in self.topology.nodes or n in self.removed_nodes:
                        raise EnactmentError(f"flow {fid!r} references removed node {n!r}")
                try:
                    self.topology.path_links(path)
                except RouteError as exc:
                    raise EnactmentError(str(exc)) from exc
        missing = set(self.flow_ids) - set(policy.routes)
        if missing:
            raise EnactmentError(f"policy lacks routes for flows {sorted(missing)}")
        self.policy = policy
        self.enacted.append(policy)
