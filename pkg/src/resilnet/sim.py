"""The per-tick control loop, the two baseline strategies and batch execution."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import metrics as _metrics
from .actuation import Action, Actuator, LogEntry, PolicyLog, RateLimiter
from .attacks import AttackEvent, apply_effects, schedule
from .dataplane import (
    N_PHASES, OUT_DELIV, OUT_DELIV_BITS, OUT_DROP, OUT_GEN, OUT_GEN_BITS, OUT_P50, OUT_P95,
    OUT_P99, OUT_QUEUE, OUT_URLLC_DROP, OUT_URLLC_GEN, DataPlane,
)
from .decision import (
    AnomalyDetector, MitigationView, ReliabilityState, detect, reliability_score, retrain,
    should_mitigate,
)
from .errors import ConfigError
from .network import NetworkPolicy, NetworkState, initial_policy, shortest_path
from .perception import Perception
from .scenario import Scenario, load_scenario

STRATEGIES = ("proposed", "baseline_switching", "baseline_static")
PHASES = ("pre", "attack", "post")
VIDEO_DUTY = 0.5  # mean on-fraction of the symmetric on/off video model
MASK64 = (1 << 64) - 1


def mix_seed(master: int, i: int) -> int:
    """splitmix64 finalizer applied to ``master XOR i``."""
    z = ((int(master) ^ int(i)) + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


@dataclass
class RunConfig:
    scenario: Scenario | str
    strategy: str = "proposed"
    seed: int = 1
    duration: float | None = None
    tick: float | None = None
    warm_up: float | None = None

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if not 0 <= int(self.seed) <= MASK64:
            raise ConfigError("seed must be an unsigned 64-bit integer")

    def resolve(self) -> tuple[Scenario, float, float, float]:
        sc = self.scenario if isinstance(self.scenario, Scenario) else load_scenario(self.scenario)
        run = sc.run
        duration = float(self.duration if self.duration is not None else run["duration"])
        tick = float(self.tick if self.tick is not None else run["tick"])
        warm = float(self.warm_up if self.warm_up is not None else run["warm_up"])
        if not tick > 0 or not duration > warm >= 0:
            raise ConfigError("need tick > 0 and duration > warm_up >= 0")
        return sc, duration, tick, warm


@dataclass
class AttackRecord:
    """Phase timestamps for one scheduled attack unit (a coordinated pair counts once)."""

    unit: str
    t_threat: float
    t_end: float
    detected_at: float | None = None
    t_recovery: float | None = None
    t_steady: float | None = None
    delta_q: float = 0.0
    probability: float = 1.0


@dataclass
class MetricsTrace:
    tick_seconds: float
    t: np.ndarray
    C: np.ndarray
    generated: np.ndarray
    delivered: np.ndarray
    dropped: np.ndarray
    queued: np.ndarray
    generated_bits: np.ndarray
    delivered_bits: np.ndarray
    urllc_generated: np.ndarray
    urllc_dropped: np.ndarray
    p50: np.ndarray
    p95: np.ndarray
    p99: np.ndarray
    reliability: np.ndarray
    alert: np.ndarray
    phase: np.ndarray
    ri: np.ndarray | None = None
    latency_hist: np.ndarray | None = None

    @property
    def Q(self) -> np.ndarray:
        return self.C

    @property
    def plr_pct(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            v = 100.0 * self.dropped / self.generated
        return np.where(self.generated > 0, v, 0.0)

    @property
    def throughput_penalty_pct(self) -> np.ndarray:
        return 100.0 * (1.0 - self.C)


@dataclass
class RunResult:
    strategy: str
    seed: int
    scenario: str
    trace: MetricsTrace
    actions: list[Action]
    log: list[LogEntry]
    events: list[AttackEvent]
    attacks: list[AttackRecord]
    failure_time: float | None
    conservation_ok: bool
    trust: dict[str, float] = field(default_factory=dict)

    @property
    def t_threat(self) -> float | None:
        return self.attacks[0].t_threat if self.attacks else None

    def digest(self) -> str:
        """Hash of every recorded series and event, for determinism checks."""
        import hashlib

        h = hashlib.sha256()
        tr = self.trace
        for name in ("C", "generated", "delivered", "dropped", "queued", "p50", "p95", "p99",
                     "reliability", "alert", "phase", "ri"):
            arr = getattr(tr, name)
            h.update(np.ascontiguousarray(np.nan_to_num(arr, nan=-1.0)).tobytes())
        for a in self.actions:
            h.update(repr((a.t, a.kind, a.detail, a.policy_id, a.trigger_t)).encode())
        for e in self.log:
            h.update(e.policy.serialize())
            h.update(repr((e.enacted_at, e.tag, e.kind, e.annotation)).encode())
        for r in self.attacks:
            h.update(repr(r).encode())
        return h.hexdigest()


class _VideoSchedule:
    """Pre-drawn on/off state per video flow per tick."""

    def __init__(self, n_video: int, n_ticks: int, dt: float, cfg: dict, rng: np.random.Generator):
        self.on = np.zeros((n_ticks, n_video), dtype=bool)
        for v in range(n_video):
            t_idx = 0
            state = bool(rng.random() < 0.5)
            while t_idx < n_ticks:
                if state:
                    d = rng.uniform(cfg["video_on_min"], cfg["video_on_max"])
                else:
                    d = rng.uniform(cfg["video_off_min"], cfg["video_off_max"])
                n = max(1, int(round(d / dt)))
                self.on[t_idx : t_idx + n, v] = state
                t_idx += n
                state = not state


def _nominal_ingress(state: NetworkState) -> dict[str, float]:
    out = {n: 0.0 for n in state.topology.nodes}
    for flow in state.flows:
        for path in state.policy.routes[flow.id]:
            for n in path[1:]:
                out[n] += flow.offered_rate / len(state.policy.routes[flow.id])
    return out


def _sustained(mask: np.ndarray, start: int, length: int) -> int | None:
    """First index >= start beginning a run of ``length`` True values."""
    run = 0
    for i in range(start, mask.size):
        run = run + 1 if mask[i] else 0
        if run >= length:
            return i - length + 1
    return None


class Simulation:
    """One run; all randomness comes from per-component child seeds of ``seed``."""

    def __init__(self, config: RunConfig):
        self.config = config
        sc, duration, dt, warm = config.resolve()
        self.scenario, self.duration, self.dt, self.warm_up = sc, duration, dt, warm
        self.n_ticks = int(round(duration / dt))
        self.warm_ticks = int(round(warm / dt))
        self.strategy = config.strategy
        ss = np.random.SeedSequence(int(config.seed))
        traffic_ss, telem_ss, attack_ss, inject_ss, adv_ss = ss.spawn(5)
        self.rng_telem = np.random.default_rng(telem_ss)
        self.rng_inject = np.random.default_rng(inject_ss)
        self.adv_seed = int(adv_ss.generate_state(1)[0])

        topo = sc.topology()
        raw = sc.raw
        ens = raw["ensemble"]
        self.urllc_paths = int(ens["urllc_paths"])
        self.suspect_hold = float(ens["suspect_hold"])
        self.suspect_until: dict[str, float] = {}
        policy = initial_policy(topo, sc.flows, raw["slices"], self.urllc_paths)
        self.state = NetworkState(topo, list(sc.flows), policy)
        self.nominal = _nominal_ingress(self.state)
        self.events = [e for e in schedule(sc.attacks, np.random.default_rng(attack_ss))
                       if e.start < duration]
        self.plane = DataPlane(topo, sc.flows, policy, dt)

        self.video_ix = np.array([i for i, f in enumerate(sc.flows) if f.traffic_class == "video"], int)
        self.base_bits = np.array([f.offered_rate * dt for f in sc.flows])
        self.video = _VideoSchedule(len(self.video_ix), self.n_ticks, dt, raw["traffic"],
                                    np.random.default_rng(traffic_ss))
        self.node_pos = np.array([self.plane.node_index[n] for n in sc.stream_nodes], int)
        self.replicas = int(raw["telemetry"]["replicas"])
        self.noise = float(raw["telemetry"]["noise"])
        self.lo = np.array([sc.ranges[s][0] for s in sc.stream_ids])
        self.hi = np.array([sc.ranges[s][1] for s in sc.stream_ids])
        self.stream_index = {s: i for i, s in enumerate(sc.stream_ids)}
        self.stream_is_iot = np.array([topo.nodes[n].role == "iot_device" for n in sc.stream_nodes])

        self.thresholds = sc.thresholds
        self.rel = ReliabilityState(sc.failure, int(raw["thresholds"]["resilience_window"]))
        slo = raw["slo"]
        self.slo_latency = float(slo["latency_ms"])
        self.slo_plr = float(slo["plr"])
        self.slo_k = int(slo["consecutive"])
        self.slo_run = 0
        self.log = PolicyLog(policy, 0.0)
        rl = raw["rate_limiter"]
        self.actuator = Actuator(
            self.state, sc.ensemble(), self.log, RateLimiter(int(rl["lambda_max"]), float(rl["window"])),
            sc.shields, probation=int(slo["probation_ticks"]) * dt,
        )
        n_streams = len(sc.stream_ids)
        self.perception = Perception(sc.stream_ids, sc.ranges, int(raw["perception"]["window"]),
                                     int(raw["perception"]["refresh"]))
        self.detectors = [
            AnomalyDetector(str(d["id"]), str(d["kind"]), n_streams, float(d.get("z0", 4.0)),
                            float(d.get("gain", 2.0)), float(d.get("alert_threshold", 0.5)),
                            float(d.get("smoothing", 0.1)), int(d.get("lag", 10)))
            for d in raw["detectors"]
        ]
        st = raw["static_detector"]
        self.static_id = str(st["id"])
        self.static_z = float(st["z"])
        self.static_poll = max(1, int(round(float(st["poll_interval"]) / dt)))
        self.static_mean = np.zeros(n_streams)
        self.static_sigma = np.ones(n_streams)
        self.static_drift = np.zeros(n_streams)
        self.retrain_every = max(1, int(round(float(raw["retrain_interval"]) / dt)))
        self.warm_raw: list[np.ndarray] = []
        self.warm_clean: list[np.ndarray] = []
        self.inject_mean = np.zeros(n_streams)
        self.inject_std = np.zeros(n_streams)
        self.default_slices = dict(raw["slices"])
        self.headroom = dict(ens["headroom"])
        self.actions: list[Action] = self.actuator.actions
        self.next_policy_id = 1
        self._flags_version = 0
        self._broken_key: tuple | None = None
        self._broken = False

    # -- helpers -------------------------------------------------------------

    def _flags(self) -> tuple[np.ndarray, np.ndarray]:
        topo = self.state.topology
        link_up = np.array([topo.links[l].up for l in self.plane.link_ids])
        node_up = np.array([topo.nodes[n].up for n in self.plane.node_ids])
        return link_up, node_up

    def _route_broken(self) -> bool:
        key = (id(self.state.policy), self._flags_version)
        if key != self._broken_key:
            self._broken_key = key
            self._broken = self._route_broken_scan()
        return self._broken

    def _route_broken_scan(self) -> bool:
        topo = self.state.topology
        for flow in self.state.flows:
            if not (topo.nodes[flow.source].up and topo.nodes[flow.destination].up):
                continue
            for p in self.state.policy.routes[flow.id]:
                if not topo.path_is_up(p):
                    return True
        return False

    def _expected_ingress(self, policy: NetworkPolicy) -> np.ndarray:
        """Normalized per-stream ingress the routes of ``policy`` should produce."""
        out = {n: 0.0 for n in self.scenario.stream_nodes}
        for flow in self.state.flows:
            rate = flow.offered_rate * (VIDEO_DUTY if flow.traffic_class == "video" else 1.0)
            paths = policy.routes[flow.id]
            if flow.source in out:
                out[flow.source] += rate
            for p in paths:
                for n in p[1:]:
                    if n in out:
                        out[n] += rate / len(paths)
        vals = np.array([out[n] for n in self.scenario.stream_nodes])
        return vals / (self.hi - self.lo)

    def _install(self) -> None:
        if self.plane.policy is self.state.policy:
            return
        old = self.plane.policy
        self.plane.install(self.state.policy)
        if self.strategy == "proposed" and old.routes != self.state.policy.routes:
            delta = self._expected_ingress(self.state.policy) - self._expected_ingress(old)
            if np.any(delta != 0.0):
                self.perception.shift(delta)
                for det in self.detectors:
                    det.shift(delta)

    def _direct_enact(self, routes: dict, t: float, issuer: str, trigger: float) -> None:
        """Baseline enactment: no vote, no shields, no rate limit."""
        pol = NetworkPolicy(self.next_policy_id, routes, self.state.policy.slice_allocation, issuer, t)
        if pol.canonical == self.state.policy.canonical:
            return
        self.next_policy_id += 1
        previous = self.state.policy
        self.state.apply_policy(pol)
        self.log.append(LogEntry(pol, t, "good", "enact", previous=previous))
        self.actions.append(Action(t, "enact", issuer, pol.id, trigger))
        self._install()

    def _telemetry(self, true_vals: np.ndarray, injection: dict[str, float]) -> np.ndarray:
        noise = self.rng_telem.standard_normal((true_vals.size, self.replicas))
        raw = true_vals[:, None] * (1.0 + self.noise * noise)
        # the injection stream is drawn every tick so that strategies stay paired
        u = self.rng_inject.random(true_vals.size)
        for sid, frac in injection.items():
            i = self.stream_index[sid]
            if u[i] < frac:
                raw[i, 0] = self.inject_mean[i] + 8.0 * self.inject_std[i]
        return raw

    # -- strategies ------------------------------------------------------------

    def _proposed(self, i: int, t: float, x: np.ndarray, attack_started: bool) -> tuple[bool, bool]:
        det = detect(x, self.detectors)
        alerting = det.stream_scores > 0.5
        # a node stays suspect until it has been quiet for suspect_hold seconds,
        # so flickering scores do not turn into policy churn
        for j in np.flatnonzero(alerting & ~self.stream_is_iot):
            self.suspect_until[self.scenario.stream_nodes[j]] = t + self.suspect_hold
        attacked = frozenset(nd for nd, until in self.suspect_until.items() if until > t + 1e-9)
        status = det.status
        if self._route_broken():
            status = "Alert"
        self.rel.advance(self.dt)
        if should_mitigate(status, self.rel, self.thresholds):
            view = MitigationView(
                self.state.topology, self.state.flows, self.state.policy, self.log.s_good,
                attacked, self.default_slices, self.headroom, self.urllc_paths, i, self.adv_seed,
            )
            self.actuator.mitigate(view, t, t)
            self._install()
        return status == "Alert", False

    def _switching(self, t: float) -> bool:
        if not self._route_broken():
            return False
        topo = self.state.topology
        routes = {}
        for flow in self.state.flows:
            cur = self.state.policy.routes[flow.id]
            keep = tuple(p for p in cur if topo.path_is_up(p))
            if len(keep) == len(cur):
                routes[flow.id] = cur
                continue
            if not keep:
                p = shortest_path(topo, flow.source, flow.destination)
                keep = (p,) if p else cur
            routes[flow.id] = keep
        self._direct_enact(routes, t, "switching", t)
        return True

    def _static(self, i: int, t: float, raw_vals: np.ndarray) -> bool:
        if i % self.static_poll != 0:
            return False
        x = (raw_vals[:, 0] - self.lo) / (self.hi - self.lo)
        limit = self.static_mean + (self.static_z + self.static_drift) * self.static_sigma
        alerting = x > limit
        if not alerting.any():
            return False
        avoid = {self.scenario.stream_nodes[j] for j in np.flatnonzero(alerting & ~self.stream_is_iot)}
        topo = self.state.topology
        routes = {}
        for flow in self.state.flows:
            cur = self.state.policy.routes[flow.id]
            if not any(n in avoid for p in cur for n in p[1:-1]):
                routes[flow.id] = cur
                continue
            p = shortest_path(topo, flow.source, flow.destination, avoid)
            routes[flow.id] = (p,) if p else cur
        self._direct_enact(routes, t, "static", t)
        return True

    # -- main loop ---------------------------------------------------------------

    def run(self) -> RunResult:
        n, dt = self.n_ticks, self.dt
        cols = {k: np.zeros(n) for k in (
            "C", "generated", "delivered", "dropped", "queued", "generated_bits", "delivered_bits",
            "urllc_generated", "urllc_dropped", "p50", "p95", "p99", "reliability")}
        alert = np.zeros(n, dtype=bool)
        phase = np.zeros(n, dtype=np.int8)
        first_start = min((e.start for e in self.events), default=math.inf)
        last_end = max((e.end for e in self.events), default=math.inf)
        detections: dict[str, float] = {}
        units: dict[str, list[AttackEvent]] = {}
        for e in self.events:
            units.setdefault(e.unit, []).append(e)
        unit_start = {u: min(e.start for e in evs) for u, evs in units.items()}
        unit_end = {u: max(e.end for e in evs) for u, evs in units.items()}

        active: list[AttackEvent] = []
        flags_key = None
        link_up, node_up = self._flags()
        conservation_ok = True
        cum_gen = cum_del = cum_drop = 0
        flow_bits = self.base_bits.copy()
        eps = 1e-9

        effects = None
        for i in range(n):
            t = i * dt
            # (1) traffic and attack effects; recomputed only when something can change
            now_active = [e for e in self.events if e.start <= t + eps and t + eps < e.end]
            started = [e for e in now_active if e not in active]
            changed = now_active != active
            active = now_active
            ramping = any(e.kind == "ddos_flood" and t - eps <= e.start + e.ramp for e in active)
            if changed or ramping or effects is None:
                effects = apply_effects(self.state, active, t, self.nominal, started)
                key = (effects.down_nodes, effects.down_links)
                if key != flags_key:
                    flags_key = key
                    self._flags_version += 1
                    link_up, node_up = self._flags()
                self.plane.set_flood(effects.flood)
                poison_started = effects.poison_started
            else:
                poison_started = []
            for ev in poison_started:
                for det in self.detectors:
                    if det.id in ev.targets:
                        det.poison(ev.intensity)
                if self.static_id in ev.targets:
                    self.static_drift = self.static_drift + ev.intensity
            flow_bits[self.video_ix] = self.base_bits[self.video_ix] * self.video.on[i]
            ph = 0 if t + eps < first_start else (1 if t + eps < last_end else 2)
            phase[i] = ph

            # (2) transport
            out = self.plane.step(flow_bits, link_up, node_up, ph)
            gen, dlv, drp = int(out[OUT_GEN]), int(out[OUT_DELIV]), int(out[OUT_DROP])
            cum_gen += gen
            cum_del += dlv
            cum_drop += drp
            if cum_gen != cum_del + cum_drop + int(out[OUT_QUEUE]):
                conservation_ok = False
            gbits, dbits = out[OUT_GEN_BITS], out[OUT_DELIV_BITS]
            c = 1.0 if gbits <= 0 else min(1.0, dbits / gbits)
            cols["C"][i] = c
            cols["generated"][i] = gen
            cols["delivered"][i] = dlv
            cols["dropped"][i] = drp
            cols["queued"][i] = out[OUT_QUEUE]
            cols["generated_bits"][i] = gbits
            cols["delivered_bits"][i] = dbits
            cols["urllc_generated"][i] = out[OUT_URLLC_GEN]
            cols["urllc_dropped"][i] = out[OUT_URLLC_DROP]
            cols["p50"][i], cols["p95"][i], cols["p99"][i] = out[OUT_P50], out[OUT_P95], out[OUT_P99]

            # (3) perception
            true_vals = self.plane.ingress[self.node_pos] / dt
            raw = self._telemetry(true_vals, effects.injection)
            if self.strategy == "proposed":
                x, _ = self.perception.step(raw)
            else:
                x = None

            # SLO bookkeeping
            ugen = out[OUT_URLLC_GEN]
            uplr = out[OUT_URLLC_DROP] / ugen if ugen > 0 else 0.0
            p99 = out[OUT_P99]
            violated_now = (not np.isnan(p99) and p99 > self.slo_latency) or uplr > self.slo_plr
            self.slo_run = self.slo_run + 1 if violated_now else 0
            slo_violation = self.slo_run >= self.slo_k

            # (4)-(5) decision and actuation
            if i < self.warm_ticks:
                self.warm_raw.append(raw[:, 0].copy())
                if x is not None:
                    self.warm_clean.append(x)
                self.rel.push(c)
                self.rel.checkpoint()
            else:
                if i == self.warm_ticks:
                    self._fit()
                if self.strategy == "proposed":
                    self.rel.push(c)
                    is_alert, _ = self._proposed(i, t, x, bool(started))
                    alert[i] = is_alert
                    if self.log.observe(t, slo_violation):
                        self.actuator.blame(t)
                        self._install()
                    if (not is_alert and not slo_violation
                            and self.rel.windowed_resilience() >= self.thresholds.r_req):
                        self.rel.checkpoint()
                    # (6) periodic retraining
                    if (i - self.warm_ticks) % self.retrain_every == 0 and i > self.warm_ticks:
                        retrain(self.detectors, self.perception.buffer)
                elif self.strategy == "baseline_switching":
                    alert[i] = self._switching(t)
                else:
                    alert[i] = self._static(i, t, raw)
                if alert[i]:
                    for u, s in unit_start.items():
                        if u not in detections and s <= t + eps < unit_end[u]:
                            detections[u] = t
            cols["reliability"][i] = reliability_score(self.rel)

        trace = MetricsTrace(dt, np.arange(n) * dt, alert=alert, phase=phase, **cols)
        trace.latency_hist = self.plane.hist.copy()
        raw_cfg = self.scenario.raw["metrics"]
        trace.ri = _metrics.ri_from_c(
            trace.C, raw_cfg["ri_weights"], int(raw_cfg["ri_window"]),
            int(raw_cfg["ri_recovery_window"]), float(raw_cfg["recovered_level"]),
        )
        records = self._records(trace, units, unit_start, unit_end, detections)
        fail_mask = trace.C < float(raw_cfg["failure_level"])
        onset = _sustained(fail_mask, 0, int(raw_cfg["failure_ticks"]))
        return RunResult(
            self.strategy, int(self.config.seed), self.scenario.name, trace, list(self.actions),
            list(self.log.entries), list(self.events), records,
            None if onset is None else onset * dt, conservation_ok,
            self.actuator.ensemble.trust(),
        )

    def _fit(self) -> None:
        warm_raw = np.array(self.warm_raw)
        self.inject_mean = warm_raw.mean(axis=0)
        self.inject_std = warm_raw.std(axis=0)
        norm = (warm_raw - self.lo) / (self.hi - self.lo)
        self.static_mean = norm.mean(axis=0)
        self.static_sigma = norm.std(axis=0) + 1e-3
        if self.strategy == "proposed":
            clean = np.array(self.warm_clean)
            for det in self.detectors:
                det.fit(clean)
        self.warm_raw, self.warm_clean = [], []

    def _records(self, trace, units, unit_start, unit_end, detections) -> list[AttackRecord]:
        cfg = self.scenario.raw["metrics"]
        level, hold = float(cfg["recovered_level"]), int(cfg["recovered_ticks"])
        ok = trace.C >= level
        out = []
        for u in sorted(units, key=lambda k: (unit_start[k], k)):
            s, e = unit_start[u], unit_end[u]
            i0 = min(trace.C.size - 1, int(math.ceil(s / self.dt - 1e-9)))
            i1 = min(trace.C.size, int(math.ceil(e / self.dt - 1e-9)))
            rec_i = _sustained(ok, i0, hold)
            t_rec = self.duration if rec_i is None else rec_i * self.dt
            t_steady = self.duration if rec_i is None else min(self.duration, (rec_i + hold) * self.dt)
            window = trace.C[i0:max(i1, i0 + 1)]
            dq = float(max(0.0, 1.0 - window.min()))
            prob = min(self._probability(ev) for ev in units[u])
            out.append(AttackRecord(u, s, e, detections.get(u), t_rec, t_steady, dq, prob))
        return out

    def _probability(self, ev: AttackEvent) -> float:
        for spec in self.scenario.attacks:
            if spec.id == ev.unit:
                return spec.probability
        return 1.0


def run(config: RunConfig) -> RunResult:
    """Execute one deterministic run."""
    return Simulation(config).run()


def _run_seed(args: tuple[Any, str, int, dict]) -> RunResult:
    scenario, strategy, seed, overrides = args
    return run(RunConfig(scenario, strategy, seed, **overrides))


def run_batch(
    config: RunConfig, n_runs: int | None = None, workers: int = 1
) -> list[RunResult]:
    """Independent runs with seeds ``mix_seed(master, i)``, returned in seed order."""
    sc, _, _, _ = config.resolve()
    n = int(n_runs if n_runs is not None else sc.run["runs"])
    if n < 1:
        raise ConfigError("n_runs must be >= 1")
    overrides = {k: getattr(config, k) for k in ("duration", "tick", "warm_up")
                 if getattr(config, k) is not None}
    jobs = [(sc, config.strategy, mix_seed(config.seed, i), overrides) for i in range(n)]
    if workers <= 1:
        return [_run_seed(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_seed, jobs))


def baseline_switching_step(sim: Simulation, t: float) -> bool:
    """Reroute flows whose path crosses a down element; True when a reroute was needed."""
    return sim._switching(t)


def baseline_static_step(sim: Simulation, i: int, t: float, raw: np.ndarray) -> bool:
    """Poll the frozen fixed-threshold detector; True when it alerted."""
    return sim._static(i, t, raw)
