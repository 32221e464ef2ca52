"""Cyber and physical attack injection with per-run occurrence draws."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, TraceRangeError
from .reliability import PerformanceTrace

CYBER_KINDS = ("ddos_flood", "data_injection", "ai_poisoning")
PHYSICAL_KINDS = ("fiber_cut", "station_outage")
ATTACK_KINDS = CYBER_KINDS + PHYSICAL_KINDS

# sigma multiple used for injected telemetry values
INJECTION_SIGMAS = 8.0


@dataclass(frozen=True)
class AttackSpec:
    """One parameterized disruption.

    ``intensity`` is the flood multiplier, the corruption fraction or the
    detector bias in baseline standard deviations, depending on ``kind``.
    ``ramp`` (floods only) is the time in seconds to reach full intensity.
    """

    id: str
    kind: str
    targets: tuple[str, ...]
    start: float
    duration: float
    intensity: float = 0.0
    probability: float = 1.0
    ramp: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "targets", tuple(self.targets))
        if self.kind not in ATTACK_KINDS:
            raise ConfigError(f"attack {self.id!r}: unknown kind {self.kind!r}")
        if not self.targets:
            raise ConfigError(f"attack {self.id!r}: no targets")
        if self.start < 0 or not self.duration > 0:
            raise ConfigError(f"attack {self.id!r}: need start >= 0 and duration > 0")
        if not 0.0 <= self.probability <= 1.0:
            raise ConfigError(f"attack {self.id!r}: probability outside [0, 1]")
        if self.ramp < 0 or self.intensity < 0:
            raise ConfigError(f"attack {self.id!r}: negative ramp or intensity")
        if self.kind == "data_injection" and self.intensity > 1.0:
            raise ConfigError(f"attack {self.id!r}: corruption fraction above 1")

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class CoordinatedAttack:
    """A cyber component paired with a physical fault offset by ``alignment``.

    The pair occurs or not as a unit, drawn with the cyber component's
    probability.
    """

    id: str
    cyber: AttackSpec
    physical: AttackSpec
    alignment: float = 0.0

    def __post_init__(self) -> None:
        if self.cyber.kind not in CYBER_KINDS:
            raise ConfigError(f"coordinated {self.id!r}: cyber part has kind {self.cyber.kind!r}")
        if self.physical.kind not in PHYSICAL_KINDS:
            raise ConfigError(
                f"coordinated {self.id!r}: physical part has kind {self.physical.kind!r}"
            )

    @property
    def probability(self) -> float:
        return self.cyber.probability


@dataclass(frozen=True)
class AttackEvent:
    """A scheduled occurrence; ``unit`` groups the parts of a coordinated attack."""

    id: str
    kind: str
    targets: tuple[str, ...]
    start: float
    end: float
    intensity: float
    ramp: float
    unit: str

    def active(self, t: float) -> bool:
        return self.start <= t < self.end

    def level(self, t: float) -> float:
        """Fraction of full intensity at time ``t`` (0 outside the window)."""
        if not self.active(t):
            return 0.0
        if self.ramp <= 0:
            return 1.0
        return min(1.0, (t - self.start) / self.ramp)


def _event(spec: AttackSpec, start: float, unit: str) -> AttackEvent:
    return AttackEvent(
        spec.id, spec.kind, spec.targets, start, start + spec.duration,
        spec.intensity, spec.ramp, unit,
    )


def schedule(
    specs: Sequence[AttackSpec | CoordinatedAttack], rng: np.random.Generator
) -> list[AttackEvent]:
    """One Bernoulli draw per spec, in list order; events sorted by (start, id)."""
    events: list[AttackEvent] = []
    for spec in specs:
        if rng.random() >= spec.probability:
            continue
        if isinstance(spec, CoordinatedAttack):
            events.append(_event(spec.cyber, spec.cyber.start, spec.id))
            events.append(_event(spec.physical, spec.cyber.start + spec.alignment, spec.id))
        else:
            events.append(_event(spec, spec.start, spec.id))
    events.sort(key=lambda e: (e.start, e.id))
    return events


@dataclass
class AttackEffects:
    """Per-tick effect summary handed to the data plane and telemetry."""

    down_nodes: frozenset[str] = frozenset()
    down_links: frozenset[str] = frozenset()
    flood: dict[str, float] = field(default_factory=dict)  # node -> extra bits/s
    injection: dict[str, float] = field(default_factory=dict)  # stream -> fraction
    poison_started: list[AttackEvent] = field(default_factory=list)


def apply_effects(
    state,
    active: Iterable[AttackEvent],
    tick: float,
    nominal_ingress: Mapping[str, float],
    started: Iterable[AttackEvent] = (),
) -> AttackEffects:
    """Set up/down flags from active physical events and summarize cyber effects.

    ``state`` is a NetworkState; flags are recomputed from scratch each call so
    effects reverse as soon as their events leave ``active``. ``started`` lists
    events whose first tick this is, used for one-shot poisoning.
    """
    down_n: set[str] = set(state.removed_nodes)
    down_l: set[str] = set()
    flood: dict[str, float] = {}
    injection: dict[str, float] = {}
    for ev in active:
        if ev.kind == "fiber_cut":
            down_l.update(ev.targets)
        elif ev.kind == "station_outage":
            down_n.update(ev.targets)
        elif ev.kind == "ddos_flood":
            lvl = ev.level(tick)
            for node in ev.targets:
                flood[node] = flood.get(node, 0.0) + ev.intensity * lvl * nominal_ingress[node]
        elif ev.kind == "data_injection":
            for stream in ev.targets:
                # overlapping injections combine as independent corruptions
                prev = injection.get(stream, 0.0)
                injection[stream] = 1.0 - (1.0 - prev) * (1.0 - ev.intensity)
    state.topology.set_up_flags(down_n, down_l)
    poison = [ev for ev in started if ev.kind == "ai_poisoning"]
    return AttackEffects(frozenset(down_n), frozenset(down_l), flood, injection, poison)


def corrupt_replica(
    values: np.ndarray, fraction: float, mean: float, std: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Replace each sample with probability ``fraction`` by mean + 8 std.

    Returns the corrupted copy and the boolean corruption mask.
    """
    mask = rng.random(values.shape) < fraction
    out = np.where(mask, mean + INJECTION_SIGMAS * std, values)
    return out, mask


def measured_impact(trace: PerformanceTrace, event: AttackEvent) -> float:
    """Worst-case normalized degradation of Q over the event window."""
    t0, t1 = event.start, event.end
    if t0 < trace.t_start - 1e-9 or t0 > trace.t_end + 1e-9:
        raise TraceRangeError(f"event window [{t0}, {t1}] outside trace")
    times = trace.times
    sel = (times >= t0 - 1e-9) & (times < min(t1, trace.t_end + trace.tick_seconds) - 1e-9)
    if not sel.any():
        raise TraceRangeError(f"event window [{t0}, {t1}] holds no samples")
    qmin = float(np.min(trace.q[sel]))
    return max(0.0, (trace.q_nominal - qmin) / trace.q_nominal)


def validate_targets(
    specs: Sequence[AttackSpec | CoordinatedAttack],
    nodes: Iterable[str],
    links: Iterable[str],
    streams: Iterable[str],
    detectors: Iterable[str],
) -> None:
    """Type-check attack targets against the loaded scenario."""
    universe = {
        "ddos_flood": set(nodes),
        "station_outage": set(nodes),
        "fiber_cut": set(links),
        "data_injection": set(streams),
        "ai_poisoning": set(detectors),
    }
    flat: list[AttackSpec] = []
    for spec in specs:
        if isinstance(spec, CoordinatedAttack):
            flat.extend([spec.cyber, spec.physical])
        else:
            flat.append(spec)
    for spec in flat:
        bad = [t for t in spec.targets if t not in universe[spec.kind]]
        if bad:
            raise ConfigError(f"attack {spec.id!r} ({spec.kind}): unknown targets {bad}")

