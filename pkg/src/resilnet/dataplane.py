"""Per-tick packet transport: slices, shared-pool contention, drop-tail queues.

Each routed path keeps a virtual queue at its bottleneck. Per link and class
the reserved slice serves backlog first, then new arrivals. Leftover capacity
forms a shared pool split between excess arrivals and flood traffic in
proportion to their sizes; whatever remains drains excess backlog. A path is
served at the worst fraction among its links, with fractional service carried
over between ticks. Flood traffic is fluid (bits, not packets) and does not
enter packet accounting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .network import TRAFFIC_CLASSES, Flow, NetworkPolicy, Topology

N_CLASSES = len(TRAFFIC_CLASSES)
URLLC = TRAFFIC_CLASSES.index("urllc")

HIST_LO_MS = 0.1
HIST_BINS = 240
HIST_DECADES = 6.0  # 0.1 ms .. 100 s
N_PHASES = 3

# indices into the per-tick scalar output
OUT_GEN, OUT_DELIV, OUT_DROP, OUT_QUEUE, OUT_GEN_BITS, OUT_DELIV_BITS = range(6)
OUT_P50, OUT_P95, OUT_P99 = 6, 7, 8
OUT_URLLC_GEN, OUT_URLLC_DROP = 9, 10
N_OUT = 11


def hist_edges_ms() -> np.ndarray:
    return HIST_LO_MS * 10.0 ** (np.arange(HIST_BINS + 1) * HIST_DECADES / HIST_BINS)


@numba.njit(cache=True)
def _weighted_quantile(vals, wts, n, q):
    # vals sorted ascending, first n entries valid
    total = 0.0
    for i in range(n):
        total += wts[i]
    target = q * total
    acc = 0.0
    for i in range(n):
        acc += wts[i]
        if acc >= target - 1e-12:
            return vals[i]
    return vals[n - 1]


@numba.njit(cache=True)
def _step(
    dt,
    flow_bits,        # (F,) offered bits this tick
    link_cap,         # (L,) bits per tick
    link_up,          # (L,) bool
    node_up,          # (N,) bool
    resv,             # (L, C) reserved fraction
    flood_link,       # (L,) flood bits this tick
    flood_node,       # (N,) flood bits this tick, for ingress telemetry
    path_flow, path_class, path_pkt, path_share, path_buf, path_prop,
    link_ptr, link_idx, node_ptr, node_idx,
    credit, service, queue,  # mutable path state
    phase, hist,      # hist: (phases, bins) urllc delay histogram, mutable
    out,              # (N_OUT,) per-tick scalars, overwritten
    class_out,        # (C, 3) generated, delivered, dropped per class, overwritten
    ingress,          # (N,) bits per tick, overwritten
):
    n_paths = path_flow.shape[0]
    n_links = link_cap.shape[0]
    n_cls = resv.shape[1]
    arrivals = np.zeros(n_paths, np.int64)
    up = np.ones(n_paths, np.bool_)
    dem_a = np.zeros((n_links, n_cls))
    dem_b = np.zeros((n_links, n_cls))
    for i in range(out.shape[0]):
        out[i] = 0.0
    for c in range(class_out.shape[0]):
        for j in range(3):
            class_out[c, j] = 0.0
    for n in range(ingress.shape[0]):
        ingress[n] = flood_node[n]

    for p in range(n_paths):
        credit[p] += flow_bits[path_flow[p]] * path_share[p]
        a = np.int64(np.floor(credit[p] / path_pkt[p] + 1e-9))
        credit[p] -= a * path_pkt[p]
        if credit[p] < 0.0:
            credit[p] = 0.0
        arrivals[p] = a
        c = path_class[p]
        out[OUT_GEN] += a
        out[OUT_GEN_BITS] += a * path_pkt[p]
        class_out[c, 0] += a
        # the source generates its own traffic regardless of path state
        ingress[node_idx[node_ptr[p]]] += a * path_pkt[p]
        ok = True
        for k in range(link_ptr[p], link_ptr[p + 1]):
            if not link_up[link_idx[k]]:
                ok = False
        for k in range(node_ptr[p], node_ptr[p + 1]):
            if not node_up[node_idx[k]]:
                ok = False
        up[p] = ok
        if not ok:
            lost = queue[p] + a
            out[OUT_DROP] += lost
            class_out[c, 2] += lost
            queue[p] = 0
            service[p] = 0.0
            arrivals[p] = 0
            continue
        for k in range(node_ptr[p] + 1, node_ptr[p + 1]):
            ingress[node_idx[k]] += a * path_pkt[p]
        for k in range(link_ptr[p], link_ptr[p + 1]):
            dem_a[link_idx[k], c] += a * path_pkt[p]
            dem_b[link_idx[k], c] += queue[p] * path_pkt[p]

    # per link and class: fraction of arrivals and of backlog that gets through
    fa = np.ones((n_links, n_cls))
    fb = np.ones((n_links, n_cls))
    ra = np.zeros(n_cls)
    rb = np.zeros(n_cls)
    for l in range(n_links):
        cap = link_cap[l]
        used = 0.0
        excess_a = 0.0
        excess_b = 0.0
        for c in range(n_cls):
            r = resv[l, c] * cap
            rb[c] = min(dem_b[l, c], r)
            ra[c] = min(dem_a[l, c], r - rb[c])
            used += ra[c] + rb[c]
            excess_a += dem_a[l, c] - ra[c]
            excess_b += dem_b[l, c] - rb[c]
        pool = max(0.0, cap - used)
        contenders = excess_a + flood_link[l]
        share_a = 1.0
        if contenders > pool:
            share_a = pool / contenders
        spare = max(0.0, pool - share_a * contenders)
        share_b = 1.0
        if excess_b > spare:
            share_b = spare / excess_b
        for c in range(n_cls):
            if dem_a[l, c] > 0.0:
                fa[l, c] = (ra[c] + (dem_a[l, c] - ra[c]) * share_a) / dem_a[l, c]
            if dem_b[l, c] > 0.0:
                fb[l, c] = (rb[c] + (dem_b[l, c] - rb[c]) * share_b) / dem_b[l, c]

    n_u = 0
    delays = np.empty(n_paths)
    weights = np.empty(n_paths)
    edges_scale = HIST_BINS / HIST_DECADES
    for p in range(n_paths):
        if not up[p]:
            continue
        c = path_class[p]
        f_a = 1.0
        f_b = 1.0
        for k in range(link_ptr[p], link_ptr[p + 1]):
            l = link_idx[k]
            if fa[l, c] < f_a:
                f_a = fa[l, c]
            if fb[l, c] < f_b:
                f_b = fb[l, c]
        q_before = queue[p]
        backlog = q_before + arrivals[p]
        service[p] += f_a * arrivals[p] + f_b * q_before
        served = np.int64(np.floor(service[p] + 1e-9))
        if served > backlog:
            served = backlog
        service[p] -= served
        if service[p] > 1.0:
            service[p] = 1.0
        rest = backlog - served
        dropped = rest - path_buf[p]
        if dropped < 0:
            dropped = 0
        queue[p] = rest - dropped
        out[OUT_DELIV] += served
        out[OUT_DELIV_BITS] += served * path_pkt[p]
        out[OUT_DROP] += dropped
        class_out[c, 1] += served
        class_out[c, 2] += dropped
        if c == URLLC and served > 0:
            delay_ms = 1000.0 * (path_prop[p] + dt * q_before / served)
            delays[n_u] = delay_ms
            weights[n_u] = served
            n_u += 1
            b = int(np.floor(np.log10(max(delay_ms, HIST_LO_MS) / HIST_LO_MS) * edges_scale))
            if b >= HIST_BINS:
                b = HIST_BINS - 1
            hist[phase, b] += served

    total_q = 0
    for p in range(n_paths):
        total_q += queue[p]
    out[OUT_QUEUE] = total_q
    out[OUT_URLLC_GEN] = class_out[URLLC, 0]
    out[OUT_URLLC_DROP] = class_out[URLLC, 2]
    if n_u > 0:
        order = np.argsort(delays[:n_u])
        sv = delays[:n_u][order]
        sw = weights[:n_u][order]
        out[OUT_P50] = _weighted_quantile(sv, sw, n_u, 0.50)
        out[OUT_P95] = _weighted_quantile(sv, sw, n_u, 0.95)
        out[OUT_P99] = _weighted_quantile(sv, sw, n_u, 0.99)
    else:
        out[OUT_P50] = np.nan
        out[OUT_P95] = np.nan
        out[OUT_P99] = np.nan


@dataclass
class PathTable:
    flow: np.ndarray
    klass: np.ndarray
    pkt: np.ndarray
    share: np.ndarray
    buf: np.ndarray
    prop: np.ndarray
    link_ptr: np.ndarray
    link_idx: np.ndarray
    node_ptr: np.ndarray
    node_idx: np.ndarray


class DataPlane:
    """Owns per-path queues and compiles policies into kernel arrays."""

    def __init__(self, topology: Topology, flows: list[Flow], policy: NetworkPolicy, dt: float):
        self.topology = topology
        self.flows = list(flows)
        self.dt = float(dt)
        self.node_ids = sorted(topology.nodes)
        self.link_ids = sorted(topology.links)
        self.node_index = {n: i for i, n in enumerate(self.node_ids)}
        self.link_index = {l: i for i, l in enumerate(self.link_ids)}
        self.flow_index = {f.id: i for i, f in enumerate(self.flows)}
        self.link_cap = np.array([topology.links[l].capacity * dt for l in self.link_ids])
        self.flood_link = np.zeros(len(self.link_ids))
        self.flood_node = np.zeros(len(self.node_ids))
        self.hist = np.zeros((N_PHASES, HIST_BINS))
        self.out = np.zeros(N_OUT)
        self.class_out = np.zeros((N_CLASSES, 3))
        self.ingress = np.zeros(len(self.node_ids))
        self.policy: NetworkPolicy | None = None
        self.table: PathTable | None = None
        self.credit = np.zeros(0)
        self.service = np.zeros(0)
        self.queue = np.zeros(0, np.int64)
        self.install(policy)

    def _compile(self, policy: NetworkPolicy) -> PathTable:
        topo = self.topology
        cols: dict[str, list] = {k: [] for k in ("flow", "klass", "pkt", "share", "buf", "prop")}
        link_ptr, link_idx, node_ptr, node_idx = [0], [], [0], []
        for fi, flow in enumerate(self.flows):
            paths = policy.routes[flow.id]
            for path in paths:
                lids = topo.path_links(path)
                cols["flow"].append(fi)
                cols["klass"].append(TRAFFIC_CLASSES.index(flow.traffic_class))
                cols["pkt"].append(flow.packet_size)
                cols["share"].append(1.0 / len(paths))
                cols["buf"].append(min(topo.nodes[n].buffer_capacity for n in path))
                cols["prop"].append(sum(topo.links[l].propagation_delay for l in lids))
                link_idx.extend(self.link_index[l] for l in lids)
                link_ptr.append(len(link_idx))
                node_idx.extend(self.node_index[n] for n in path)
                node_ptr.append(len(node_idx))
        return PathTable(
            np.array(cols["flow"], np.int64),
            np.array(cols["klass"], np.int64),
            np.array(cols["pkt"], float),
            np.array(cols["share"], float),
            np.array(cols["buf"], np.int64),
            np.array(cols["prop"], float),
            np.array(link_ptr, np.int64),
            np.array(link_idx, np.int64),
            np.array(node_ptr, np.int64),
            np.array(node_idx, np.int64),
        )

    def install(self, policy: NetworkPolicy) -> None:
        """Switch to ``policy``; queued packets and credit move to the new paths."""
        if self.policy is not None and policy.canonical == self.policy.canonical:
            self.policy = policy
            self._set_slices(policy)
            return
        table = self._compile(policy)
        n_flows = len(self.flows)
        q_flow = np.zeros(n_flows, np.int64)
        c_flow = np.zeros(n_flows)
        if self.table is not None:
            np.add.at(q_flow, self.table.flow, self.queue)
            np.add.at(c_flow, self.table.flow, self.credit)
        counts = np.bincount(table.flow, minlength=n_flows)
        queue = np.zeros(table.flow.size, np.int64)
        credit = np.zeros(table.flow.size)
        rank = np.zeros(table.flow.size, np.int64)
        seen = np.zeros(n_flows, np.int64)
        for p, f in enumerate(table.flow):
            rank[p] = seen[f]
            seen[f] += 1
        for p, f in enumerate(table.flow):
            k = counts[f]
            queue[p] = q_flow[f] // k + (1 if rank[p] < q_flow[f] % k else 0)
            credit[p] = c_flow[f] / k
        self.table, self.queue, self.credit, self.policy = table, queue, credit, policy
        self.service = np.zeros(table.flow.size)
        self._set_slices(policy)

    def _set_slices(self, policy: NetworkPolicy) -> None:
        resv = np.zeros((len(self.link_ids), N_CLASSES))
        for ci, c in enumerate(TRAFFIC_CLASSES):
            for lid, v in policy.slice_allocation.get(c, {}).items():
                resv[self.link_index[lid], ci] = v
        self.resv = resv

    def set_flood(self, flood: dict[str, float]) -> None:
        """Spread each target's flood rate (bit/s) over its up incident links."""
        self.flood_link[:] = 0.0
        self.flood_node[:] = 0.0
        topo = self.topology
        for node, rate in flood.items():
            bits = rate * self.dt
            self.flood_node[self.node_index[node]] += bits
            links = topo.incident_links(node)
            for lid in links:
                self.flood_link[self.link_index[lid]] += bits / len(links)

    def step(self, flow_bits: np.ndarray, link_up: np.ndarray, node_up: np.ndarray, phase: int) -> np.ndarray:
        t = self.table
        _step(
            self.dt, flow_bits, self.link_cap, link_up, node_up, self.resv,
            self.flood_link, self.flood_node,
            t.flow, t.klass, t.pkt, t.share, t.buf, t.prop,
            t.link_ptr, t.link_idx, t.node_ptr, t.node_idx,
            self.credit, self.service, self.queue, phase, self.hist,
            self.out, self.class_out, self.ingress,
        )
        return self.out

    def queued(self) -> int:
        return int(self.queue.sum())
