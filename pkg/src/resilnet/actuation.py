"""Safety shields, policy log with rollback, intent-rate limiting and the mitigation pipeline."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .decision import (
    ControllerEnsemble,
    MitigationView,
    ProposalCache,
    propose_policies,
    update_trust,
    vote,
)
from .errors import ConfigError, RouteError, StateError
from .network import (
    Flow,
    NetworkPolicy,
    NetworkState,
    Topology,
    edge_disjoint_paths,
    link_utilization,
    max_disjoint_subset,
    policy_delta,
)

SHIELD_RULES = ("utilization", "path_diversity", "delta")


@dataclass(frozen=True)
class ShieldLimits:
    u_max: float = 0.9
    min_disjoint_paths: int = 2
    delta_max: float = 0.3

    def __post_init__(self) -> None:
        if not 0.0 < self.u_max <= 1.0:
            raise ConfigError("u_max must lie in (0, 1]")
        if self.min_disjoint_paths < 1:
            raise ConfigError("min_disjoint_paths must be >= 1")
        if not 0.0 < self.delta_max <= 1.0:
            raise ConfigError("delta_max must lie in (0, 1]")


class Verdict(NamedTuple):
    accepted: bool
    reason: str | None = None
    detail: str = ""


ACCEPT = Verdict(True)


def _live_flows(topo: Topology, flows: Sequence[Flow]) -> list[Flow]:
    """Flows whose endpoints are up; the others carry no traffic."""
    return [f for f in flows if topo.nodes[f.source].up and topo.nodes[f.destination].up]


def shield_check(
    proposed: NetworkPolicy,
    active: NetworkPolicy,
    state: NetworkState,
    limits: ShieldLimits,
) -> Verdict:
    """Evaluate utilization, path diversity and delta in that order.

    A route over a down element counts as a utilization violation, since the
    element has no usable capacity.
    """
    topo = state.topology
    live = _live_flows(topo, state.flows)
    for flow in live:
        for path in proposed.routes[flow.id]:
            if not topo.path_is_up(path):
                return Verdict(False, "utilization", f"flow {flow.id} routed over a down element")
    try:
        util = link_utilization(topo, proposed, live)
    except RouteError as exc:
        return Verdict(False, "utilization", str(exc))
    worst = max(util, key=lambda lid: (util[lid], lid), default=None)
    if worst is not None and util[worst] > limits.u_max:
        return Verdict(False, "utilization", f"link {worst} at {util[worst]:.3f}")

    for flow in live:
        if flow.traffic_class != "urllc":
            continue
        available = len(
            edge_disjoint_paths(topo, flow.source, flow.destination, limits.min_disjoint_paths)
        )
        required = min(limits.min_disjoint_paths, available)
        have = max_disjoint_subset(topo, proposed.routes[flow.id])
        if have < required:
            return Verdict(False, "path_diversity", f"flow {flow.id} has {have} < {required}")

    delta = policy_delta(proposed, active)
    if delta > limits.delta_max:
        return Verdict(False, "delta", f"delta {delta:.3f}")
    return ACCEPT


# -- policy log --------------------------------------------------------------


@dataclass
class LogEntry:
    policy: NetworkPolicy
    enacted_at: float
    tag: str  # "good" or "suspect"
    kind: str  # "initial", "enact" or "rollback"
    probation_until: float | None = None
    annotation: str = ""
    down_nodes: frozenset[str] = frozenset()
    down_links: frozenset[str] = frozenset()
    previous: NetworkPolicy | None = None


class PolicyLog:
    """Append-only record of enacted policies with a pointer to the last good one."""

    def __init__(self, initial: NetworkPolicy, t: float = 0.0):
        self.entries: list[LogEntry] = [LogEntry(initial, t, "good", "initial")]
        self.good_index = 0

    @property
    def s_good(self) -> NetworkPolicy:
        return self.entries[self.good_index].policy

    @property
    def latest(self) -> LogEntry:
        return self.entries[-1]

    def append(self, entry: LogEntry) -> None:
        self.entries.append(entry)
        if entry.tag == "good":
            self.good_index = len(self.entries) - 1

    def on_probation(self) -> bool:
        e = self.latest
        return e.kind == "enact" and e.tag == "suspect" and e.probation_until is not None

    def observe(self, now: float, slo_violated: bool) -> bool:
        """Advance probation; returns True when the policy on probation is blamed."""
        if not self.on_probation():
            return False
        e = self.latest
        if slo_violated:
            e.probation_until = None
            e.annotation = "slo_violation"
            return True
        if now >= e.probation_until - 1e-9:
            e.tag = "good"
            e.probation_until = None
            self.good_index = len(self.entries) - 1
        return False


class RateLimiter:
    """Sliding count of accepted policies over (now - window, now]."""

    def __init__(self, lambda_max: int = 5, window: float = 60.0):
        if lambda_max < 1:
            raise ConfigError("lambda_max must be >= 1")
        if not window > 0:
            raise ConfigError("rate window must be > 0")
        self.lambda_max = int(lambda_max)
        self.window = float(window)
        self.accepted: deque[float] = deque()

    def count(self, now: float) -> int:
        while self.accepted and self.accepted[0] <= now - self.window + 1e-9:
            self.accepted.popleft()
        return sum(1 for t in self.accepted if t <= now + 1e-9)

    def record(self, now: float) -> None:
        if self.accepted and now < self.accepted[-1]:
            raise StateError("rate limiter timestamps must not decrease")
        self.accepted.append(now)


def rate_limit_check(limiter: RateLimiter, now: float) -> str:
    return "Allow" if limiter.count(now) < limiter.lambda_max else "Throttle"


def rollback(log: PolicyLog, state: NetworkState, now: float, reason: str = "") -> NetworkPolicy:
    """Re-enact S_good unconditionally and append a rollback record."""
    good = log.s_good
    topo = state.topology
    feasible = all(topo.path_is_up(p) for paths in good.routes.values() for p in paths)
    previous = state.policy
    state.apply_policy(good)
    note = reason if feasible else (reason + ";infeasible").lstrip(";")
    log.append(
        LogEntry(
            good, now, "good", "rollback", annotation=note,
            down_nodes=frozenset(n for n, s in topo.nodes.items() if not s.up),
            down_links=frozenset(l for l, s in topo.links.items() if not s.up),
            previous=previous,
        )
    )
    return good


# -- mitigation pipeline -------------------------------------------------------


@dataclass
class Action:
    t: float
    kind: str  # propose, vote, enact, maintain, rollback, throttle, reject, abstain
    detail: str = ""
    policy_id: int | None = None
    trigger_t: float | None = None


@dataclass
class Actuator:
    """Sole gateway through which proposals reach the network."""

    state: NetworkState
    ensemble: ControllerEnsemble
    log: PolicyLog
    limiter: RateLimiter
    limits: ShieldLimits
    probation: float = 5.0
    actions: list[Action] = field(default_factory=list)
    cache: ProposalCache = field(default_factory=ProposalCache)
    next_id: int = 1
    _shield_memo: dict = field(default_factory=dict)

    def _shield(self, proposed: NetworkPolicy) -> Verdict:
        key = (proposed.digest, self.state.policy.digest, self.state.topology.up_flags())
        if key not in self._shield_memo:
            self._shield_memo[key] = shield_check(proposed, self.state.policy, self.state, self.limits)
        return self._shield_memo[key]

    def _rollback(self, now: float, reason: str, trigger_t: float | None) -> str:
        pol = rollback(self.log, self.state, now, reason)
        self.actions.append(Action(now, "rollback", reason, pol.id, trigger_t))
        return "rollback"

    def blame(self, now: float) -> str:
        """SLO violation during probation: fall back to S_good."""
        return self._rollback(now, "slo_violation", now)

    def mitigate(self, view: MitigationView, now: float, trigger_t: float | None = None) -> str:
        """Propose, vote, rate-limit, shield, then enact or roll back.

        Returns "enact", "maintain" (the winning proposal is already active)
        or "rollback".
        """
        trigger_t = now if trigger_t is None else trigger_t
        proposals = propose_policies(self.ensemble, view, self.cache)
        winner = vote(proposals, self.ensemble)
        update_trust(self.ensemble, proposals, winner)
        if winner is None:
            self.actions.append(Action(now, "abstain", "", None, trigger_t))
            return self._rollback(now, "abstain", trigger_t)
        if winner.policy.canonical == self.state.policy.canonical:
            self.actions.append(Action(now, "maintain", ",".join(winner.members), self.state.policy.id, trigger_t))
            return "maintain"
        if rate_limit_check(self.limiter, now) == "Throttle":
            self.actions.append(Action(now, "throttle", "", None, trigger_t))
            return self._rollback(now, "throttle", trigger_t)
        verdict = self._shield(winner.policy)
        if not verdict.accepted:
            self.actions.append(Action(now, "reject", f"{verdict.reason}: {verdict.detail}", None, trigger_t))
            return self._rollback(now, f"shield:{verdict.reason}", trigger_t)
        policy = winner.policy.with_identity(self.next_id, winner.members[0], now)
        self.next_id += 1
        topo = self.state.topology
        previous = self.state.policy
        self.state.apply_policy(policy)
        self.limiter.record(now)
        self.log.append(
            LogEntry(
                policy, now, "suspect", "enact", probation_until=now + self.probation,
                down_nodes=frozenset(n for n, s in topo.nodes.items() if not s.up),
                down_links=frozenset(l for l, s in topo.links.items() if not s.up),
                previous=previous,
            )
        )
        self.actions.append(Action(now, "enact", ",".join(winner.members), policy.id, trigger_t))
        return "enact"


def mitigate(
    view: MitigationView,
    state: NetworkState,
    ensemble: ControllerEnsemble,
    log: PolicyLog,
    limiter: RateLimiter,
    limits: ShieldLimits,
    now: float,
    probation: float = 5.0,
) -> tuple[str, list[Action]]:
    """One-shot form of :meth:`Actuator.mitigate` returning the outcome and actions."""
    act = Actuator(state, ensemble, log, limiter, limits, probation)
    act.next_id = max(e.policy.id for e in log.entries) + 1
    outcome = act.mitigate(view, now)
    return outcome, act.actions
