"""Anomaly detection, reliability scoring, the mitigation trigger and controller voting."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, DomainError, RouteError, WarmupError
from .network import (
    TRAFFIC_CLASSES,
    Flow,
    NetworkPolicy,
    Path,
    Topology,
    edge_disjoint_paths,
    shortest_path,
)
from .perception import MAD_SCALE, TimeSeriesBuffer
from .reliability import FailureModel, ThresholdParams, composite_reliability, dynamic_threshold

DETECTOR_KINDS = ("ewma_zscore", "rate_change")
CONTROLLER_KINDS = ("shortest_path", "max_disjoint", "slice_protection", "conservative", "adversarial")

TRUST_BETA = 0.5
TRUST_GAMMA = 0.05
TRUST_MIN = 0.05

# sigma floor in normalized units, keeps constant streams finite
SIGMA_FLOOR = 1e-3


def _logistic(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class AnomalyDetector:
    """Streaming one-sided z-score detector over all streams at once.

    ``ewma_zscore`` smooths each stream with an EWMA and scores its distance
    above the learned mean; ``rate_change`` scores the ``lag``-tick difference.
    Scores are ``logistic(gain * (z - z0))`` so they always lie in [0, 1].
    ``poison_drift`` shifts the learned mean by that many standard deviations.
    """

    def __init__(
        self,
        id: str,
        kind: str,
        n_streams: int,
        z0: float = 4.0,
        gain: float = 2.0,
        alert_threshold: float = 0.5,
        smoothing: float = 0.1,
        lag: int = 10,
        blend: float = 0.1,
    ):
        if kind not in DETECTOR_KINDS:
            raise ConfigError(f"detector {id!r}: unknown kind {kind!r}")
        if not 0.0 <= alert_threshold <= 1.0:
            raise ConfigError(f"detector {id!r}: alert_threshold outside [0, 1]")
        self.id = id
        self.kind = kind
        self.z0 = float(z0)
        self.gain = float(gain)
        self.alert_threshold = float(alert_threshold)
        self.smoothing = float(smoothing)
        self.lag = int(lag)
        self.blend = float(blend)
        self.mean = np.zeros(n_streams)
        self.var = np.zeros(n_streams)
        self.var_floor = np.zeros(n_streams)
        self.poison_drift = np.zeros(n_streams)
        self.fitted = False
        self._ewma = np.zeros(n_streams)
        self._hist = np.zeros((max(1, self.lag), n_streams))
        self._hist_pos = 0
        self._hist_count = 0

    # -- statistics ------------------------------------------------------

    def _statistic(self, series: np.ndarray, usable: np.ndarray | None = None):
        """Per-stream samples of the monitored statistic from a (T, S) series."""
        if self.kind == "ewma_zscore":
            return series, usable
        if series.shape[0] <= self.lag:
            empty = np.zeros((0, series.shape[1]))
            return empty, (None if usable is None else empty.astype(bool))
        diff = series[self.lag :] - series[: -self.lag]
        if usable is None:
            return diff, None
        return diff, usable[self.lag :] & usable[: -self.lag]

    @property
    def sigma(self) -> np.ndarray:
        return np.sqrt(self.var) + SIGMA_FLOOR

    def fit(self, series: np.ndarray) -> None:
        """Learn per-stream mean and variance from clean (T, S) warm-up data."""
        stat, _ = self._statistic(np.asarray(series, dtype=float))
        if stat.shape[0] < 2:
            raise WarmupError(f"detector {self.id!r}: not enough warm-up samples")
        self.mean = stat.mean(axis=0)
        self.var = stat.var(axis=0)
        # a short retrain window can miss slow on/off cycles, so never go below this
        self.var_floor = self.var.copy()
        self.fitted = True
        last = np.asarray(series[-1], dtype=float)
        self._ewma = self.mean.copy() if self.kind == "ewma_zscore" else last.copy()
        tail = np.asarray(series[-self.lag :], dtype=float)
        self._hist[: tail.shape[0]] = tail
        self._hist_pos = tail.shape[0] % self._hist.shape[0]
        self._hist_count = tail.shape[0]

    def shift(self, delta: np.ndarray) -> None:
        """Follow a known level change, such as traffic moved by an enacted policy."""
        delta = np.asarray(delta, dtype=float)
        if self.kind == "ewma_zscore":
            self.mean = self.mean + delta
            self._ewma = self._ewma + delta
        else:
            # differences against pre-change history would otherwise jump
            self._hist += delta

    def poison(self, bias: float) -> None:
        self.poison_drift = self.poison_drift + bias

    def score(self, x: np.ndarray) -> np.ndarray:
        """Consume one cleaned vector and return per-stream scores."""
        if not self.fitted:
            raise WarmupError(f"detector {self.id!r} has not been fitted")
        x = np.asarray(x, dtype=float)
        if not np.isfinite(x).all():
            x = np.nan_to_num(x, nan=0.0, posinf=1e12, neginf=-1e12)
        if self.kind == "ewma_zscore":
            self._ewma += self.smoothing * (x - self._ewma)
            stat = self._ewma
        else:
            if self._hist_count >= self.lag:
                stat = x - self._hist[self._hist_pos]
            else:
                stat = np.zeros_like(x) + self.mean
            self._hist[self._hist_pos] = x
            self._hist_pos = (self._hist_pos + 1) % self._hist.shape[0]
            self._hist_count += 1
        sigma = self.sigma
        z = (stat - (self.mean + self.poison_drift * sigma)) / sigma
        return _logistic(self.gain * (np.clip(z, -1e6, 1e6) - self.z0))

    def retrain(self, series: np.ndarray, flags: np.ndarray) -> None:
        """Refresh the baseline from a buffer window, skipping flagged samples."""
        stat, usable = self._statistic(series, ~flags)
        if stat.shape[0] == 0:
            return
        if usable.all():
            vals = stat
            med = np.median(vals, axis=0)
            mad = np.median(np.abs(vals - med), axis=0)
            mean, var = vals.mean(axis=0), vals.var(axis=0)
        else:
            vals = np.where(usable, stat, np.nan)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                med = np.nanmedian(vals, axis=0)
                mad = np.nanmedian(np.abs(vals - med), axis=0)
                mean, var = np.nanmean(vals, axis=0), np.nanvar(vals, axis=0)
        enough = usable.sum(axis=0) >= 5
        sigma = self.sigma
        spread = np.maximum(MAD_SCALE * mad, SIGMA_FLOOR)
        drifted = self.mean + self.poison_drift * sigma
        clear = enough & (self.poison_drift != 0.0) & (np.abs(med - drifted) > 3.0 * spread)
        self.poison_drift = np.where(clear, 0.0, self.poison_drift)
        consistent = enough & (np.abs(med - self.mean) <= 3.0 * sigma)
        new_var = np.maximum(self.var + self.blend * (var - self.var), self.var_floor)
        self.mean = np.where(consistent, self.mean + self.blend * (mean - self.mean), self.mean)
        self.var = np.where(consistent, new_var, self.var)


class DetectionResult(NamedTuple):
    status: str
    score: float
    stream_scores: np.ndarray


def detect(x_clean: np.ndarray, detectors: Sequence[AnomalyDetector]) -> DetectionResult:
    """Fuse detector scores by maximum; Alert when any exceeds its threshold."""
    if not detectors:
        raise WarmupError("no detectors configured")
    fused = None
    alert = False
    for det in detectors:
        s = det.score(x_clean)
        fused = s if fused is None else np.maximum(fused, s)
        alert = alert or bool(np.any(s > det.alert_threshold))
    score = float(fused.max()) if fused.size else 0.0
    return DetectionResult("Alert" if alert else "Normal", score, fused)


def retrain(detectors: Sequence[AnomalyDetector], buffer: TimeSeriesBuffer) -> None:
    if len(buffer) == 0:
        return
    series, flags = buffer.values(), buffer.flags()
    for det in detectors:
        det.retrain(series, flags)


# -- reliability -----------------------------------------------------------


class ReliabilityState:
    """Time since the last full-health checkpoint plus a trailing window of C."""

    def __init__(self, model: FailureModel, window: int = 200):
        if window < 2:
            raise ConfigError("resilience window must hold at least 2 ticks")
        self.model = model
        self.t_since_checkpoint = 0.0
        self.window = int(window)
        self._ring = np.ones(self.window)
        self._pos = 0
        self._count = 0

    def advance(self, dt: float) -> None:
        self.t_since_checkpoint += dt

    def checkpoint(self) -> None:
        self.t_since_checkpoint = 0.0

    def push(self, c: float) -> None:
        self._ring[self._pos] = c
        self._pos = (self._pos + 1) % self.window
        self._count = min(self._count + 1, self.window)

    def windowed_resilience(self) -> float:
        """Trapezoid mean of C over the trailing window; 1.0 until populated."""
        n = self._count
        if n < 2:
            return 1.0
        if n < self.window:
            vals = self._ring[:n]
            first, last = vals[0], vals[-1]
        else:
            vals = self._ring
            first, last = self._ring[self._pos], self._ring[self._pos - 1]
        total = float(vals.sum()) - 0.5 * (first + last)
        return min(1.0, max(0.0, total / (n - 1)))


def reliability_score(state: ReliabilityState) -> float:
    return composite_reliability(state.model, state.t_since_checkpoint)


def should_mitigate(status: str, state: ReliabilityState, params: ThresholdParams) -> bool:
    if status == "Alert":
        return True
    return reliability_score(state) < dynamic_threshold(params, state.windowed_resilience())


# -- controller ensemble ---------------------------------------------------


@dataclass
class ControllerSpec:
    id: str
    kind: str
    trust: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in CONTROLLER_KINDS:
            raise ConfigError(f"controller {self.id!r}: unknown kind {self.kind!r}")
        if not 0.0 <= self.trust <= 1.0:
            raise ConfigError(f"controller {self.id!r}: trust outside [0, 1]")


@dataclass
class ControllerEnsemble:
    members: list[ControllerSpec]
    history: dict[str, list[bool]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        ids = [m.id for m in self.members]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate controller ids")
        if len(self.members) < 3:
            raise ConfigError("ensemble needs at least 3 controllers")
        for cid in ids:
            self.history.setdefault(cid, [])

    def trust(self) -> dict[str, float]:
        return {m.id: m.trust for m in self.members}


@dataclass
class MitigationView:
    """Snapshot a controller sees when asked for a proposal."""

    topology: Topology
    flows: Sequence[Flow]
    active: NetworkPolicy
    last_good: NetworkPolicy
    attacked_nodes: frozenset[str]
    default_slices: Mapping[str, float]
    headroom: Mapping[str, float]
    urllc_paths: int = 2
    tick_index: int = 0
    rng_seed: int = 0


def _transit(path: Path) -> tuple[str, ...]:
    return path[1:-1]


def _path_ok(topo: Topology, path: Path, avoid: frozenset[str]) -> bool:
    return topo.path_is_up(path) and not any(n in avoid for n in _transit(path))


def _reroute(view: MitigationView, extra_urllc: int = 0) -> dict[str, tuple[Path, ...]] | None:
    topo, avoid = view.topology, view.attacked_nodes
    routes: dict[str, tuple[Path, ...]] = {}
    for flow in view.flows:
        cur = view.active.routes[flow.id]
        if not (topo.nodes[flow.source].up and topo.nodes[flow.destination].up):
            routes[flow.id] = cur
            continue
        if all(_path_ok(topo, p, avoid) for p in cur):
            routes[flow.id] = cur
            continue
        if flow.traffic_class == "urllc":
            want = view.urllc_paths + extra_urllc
            paths = edge_disjoint_paths(topo, flow.source, flow.destination, want, avoid)
            if len(paths) < want:
                # diversity matters more than avoiding a suspect transit node
                full = edge_disjoint_paths(topo, flow.source, flow.destination, want)
                if len(full) > len(paths):
                    paths = full
        else:
            p = shortest_path(topo, flow.source, flow.destination, avoid)
            if p is None:
                p = shortest_path(topo, flow.source, flow.destination)
            paths = [p] if p else []
        if not paths:
            return None
        routes[flow.id] = tuple(paths)
    return routes


def _class_loads(
    topo: Topology, flows: Sequence[Flow], routes: Mapping[str, tuple[Path, ...]]
) -> dict[str, dict[str, float]]:
    loads: dict[str, dict[str, float]] = {c: {} for c in TRAFFIC_CLASSES}
    for flow in flows:
        paths = routes[flow.id]
        share = flow.offered_rate / len(paths)
        for p in paths:
            try:
                lids = topo.path_links(p)
            except RouteError:
                continue
            for lid in lids:
                loads[flow.traffic_class][lid] = loads[flow.traffic_class].get(lid, 0.0) + share
    return loads


def _slices(
    view: MitigationView, routes: Mapping[str, tuple[Path, ...]], headroom: Mapping[str, float]
) -> dict[str, dict[str, float]]:
    topo = view.topology
    alloc = {c: {lid: view.default_slices.get(c, 0.0) for lid in topo.links} for c in TRAFFIC_CLASSES}
    guarded = sorted(
        {
            lid
            for n in view.attacked_nodes
            if topo.nodes[n].role != "iot_device"
            for lid in topo.incident_links(n, only_up=False)
        }
    )
    if not guarded:
        return alloc
    loads = _class_loads(topo, view.flows, routes)
    for lid in guarded:
        cap = topo.links[lid].capacity
        want = {}
        for c in TRAFFIC_CLASSES:
            base = alloc[c][lid]
            want[c] = max(base, headroom.get(c, 0.0) * loads[c].get(lid, 0.0) / cap)
        total = sum(want.values())
        scale = 1.0 if total <= 1.0 else 1.0 / total
        for c in TRAFFIC_CLASSES:
            alloc[c][lid] = math.floor(want[c] * scale * 1e6) / 1e6
    return alloc


def _adversarial(
    view: MitigationView,
    honest: NetworkPolicy | None,
    route: Callable[[str, str], Path | None] | None = None,
) -> NetworkPolicy:
    """A churning policy: random flows detoured through the core, URLLC reservations stripped.

    Colluding rogues share one seed, so every rogue proposes the same policy in a tick.
    """
    rng = np.random.default_rng([view.rng_seed, view.tick_index])
    topo = view.topology
    route = route or (lambda a, b: shortest_path(topo, a, b))
    routes = dict((honest or view.active).routes)
    cores = sorted(n for n, s in topo.nodes.items() if s.role == "core_router" and s.up)
    for flow in view.flows:
        if flow.traffic_class == "urllc" or not cores or rng.random() > 0.3:
            continue
        core = cores[int(rng.integers(len(cores)))]
        a = route(flow.source, core)
        b = route(core, flow.destination)
        if a and b and not (set(a[:-1]) & set(b[1:])):
            routes[flow.id] = (a + b[1:],)
    slices = {c: {lid: view.default_slices.get(c, 0.0) for lid in topo.links} for c in TRAFFIC_CLASSES}
    slices["urllc"] = {lid: 0.0 for lid in topo.links}
    return NetworkPolicy(0, routes, slices, "adversarial", 0.0)


def _propose(kind: str, view: MitigationView) -> NetworkPolicy | None:
    if kind == "conservative":
        return view.last_good
    extra = 1 if kind == "max_disjoint" else 0
    routes = _reroute(view, extra)
    if routes is None:
        return None
    if kind == "slice_protection":
        headroom = {"urllc": view.headroom.get("urllc", 2.0)}
    else:
        headroom = view.headroom
    return NetworkPolicy(0, routes, _slices(view, routes, headroom), kind, 0.0)


class ProposalCache:
    """Memoizes deterministic proposals on the inputs that determine them.

    Entries keyed by a tick (the rogue proposals) are dropped once a later tick is seen.
    """

    def __init__(self) -> None:
        self._store: dict[tuple, NetworkPolicy | None] = {}
        self._tick_store: dict[tuple, NetworkPolicy | None] = {}
        self._tick: int | None = None
        self._paths: dict[tuple, Path | None] = {}

    def get(self, key: tuple, make: Callable[[], NetworkPolicy | None]) -> NetworkPolicy | None:
        if key not in self._store:
            self._store[key] = make()
        return self._store[key]

    def get_for_tick(
        self, tick: int, key: tuple, make: Callable[[], NetworkPolicy | None]
    ) -> NetworkPolicy | None:
        if tick != self._tick:
            self._tick = tick
            self._tick_store.clear()
        if key not in self._tick_store:
            self._tick_store[key] = make()
        return self._tick_store[key]

    def shortest(self, topo: Topology, flags: tuple, a: str, b: str) -> Path | None:
        key = (flags, a, b)
        if key not in self._paths:
            self._paths[key] = shortest_path(topo, a, b)
        return self._paths[key]


def propose_policies(
    ensemble: ControllerEnsemble, view: MitigationView, cache: ProposalCache | None = None
) -> list[tuple[str, NetworkPolicy]]:
    """One proposal per non-abstaining controller, in member order."""
    topo = view.topology
    flags = topo.up_flags()
    key_base = (view.attacked_nodes, flags, view.active.digest, view.last_good.digest)
    if cache is None:
        cache = ProposalCache()
    out: list[tuple[str, NetworkPolicy]] = []
    for member in ensemble.members:
        if member.kind == "adversarial":
            honest = cache.get(("shortest_path",) + key_base, lambda: _propose("shortest_path", view))
            policy = cache.get_for_tick(
                view.tick_index, ("adversarial",) + key_base,
                lambda: _adversarial(view, honest, lambda a, b: cache.shortest(topo, flags, a, b)),
            )
        else:
            policy = cache.get((member.kind,) + key_base, lambda k=member.kind: _propose(k, view))
        if policy is not None:
            out.append((member.id, policy))
    return out


class VoteResult(NamedTuple):
    policy: NetworkPolicy
    members: tuple[str, ...]
    weight: float


def _heavier(a: float, b: float) -> bool:
    return a - b > 1e-12 * max(abs(a), abs(b), 1e-300)


def vote(
    proposals: Sequence[tuple[str, NetworkPolicy]], ensemble: ControllerEnsemble
) -> VoteResult | None:
    """Trust-weighted vote over groups of canonically equal proposals.

    Returns None (abstention) when there are no proposals. Ties go to the group
    holding the lexicographically smallest controller id.
    """
    if not proposals:
        return None
    trust = ensemble.trust()
    groups: dict[bytes, list[tuple[str, NetworkPolicy]]] = {}
    for cid, pol in proposals:
        if cid not in trust:
            raise DomainError(f"proposal from unknown controller {cid!r}")
        groups.setdefault(pol.canonical, []).append((cid, pol))
    best: VoteResult | None = None
    for members in groups.values():
        ids = tuple(sorted(cid for cid, _ in members))
        weight = math.fsum(trust[cid] for cid in ids)
        pol = dict(members)[ids[0]]
        cand = VoteResult(pol, ids, weight)
        if best is None or _heavier(weight, best.weight):
            best = cand
        elif not _heavier(best.weight, weight) and ids[0] < best.members[0]:
            best = cand
    return best


def update_trust(
    ensemble: ControllerEnsemble,
    proposals: Sequence[tuple[str, NetworkPolicy]],
    winner: VoteResult | None,
) -> ControllerEnsemble:
    """Penalize deviators multiplicatively, reward the winning group additively."""
    if winner is None:
        return ensemble
    proposed = dict(proposals)
    for member in ensemble.members:
        pol = proposed.get(member.id)
        if pol is None:
            continue
        agreed = pol.canonical == winner.policy.canonical
        if agreed:
            member.trust = min(1.0, member.trust + TRUST_GAMMA)
        else:
            member.trust = max(TRUST_MIN, TRUST_BETA * member.trust)
        ensemble.history[member.id].append(not agreed)
    return ensemble
