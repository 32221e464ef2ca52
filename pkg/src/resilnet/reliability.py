"""Closed-form reliability and resilience mathematics.

Everything here is a pure function of immutable inputs. Time is in seconds,
rates in failures per second, throughput in bits per second.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, StateError, TraceRangeError

__all__ = [
    "FailureModel",
    "SystemStructure",
    "ThresholdParams",
    "AttackImpactEntry",
    "PerformanceTrace",
    "PolicyChoice",
    "subsystem_reliability",
    "k_out_of_n_reliability",
    "k_out_of_n_heterogeneous",
    "system_reliability",
    "composite_reliability",
    "resilience_index",
    "expected_attack_impact",
    "dynamic_threshold",
    "select_mitigation_policy",
    "response_time",
    "throughput_penalty",
    "resilience_curve_area",
]


def _check_rate(value: float, name: str) -> None:
    if not math.isfinite(value) or value < 0:
        raise DomainError(f"{name} must be finite and >= 0, got {value!r}")


@dataclass(frozen=True)
class FailureModel:
    lambda_hw: float = 0.0
    lambda_ai: float = 0.0
    lambda_phy: float = 0.0

    def __post_init__(self) -> None:
        _check_rate(self.lambda_hw, "lambda_hw")
        _check_rate(self.lambda_ai, "lambda_ai")
        _check_rate(self.lambda_phy, "lambda_phy")

    @classmethod
    def from_mtbf(cls, mtbf: float, lambda_ai: float = 0.0, lambda_phy: float = 0.0) -> "FailureModel":
        if not mtbf > 0:
            raise DomainError(f"MTBF must be > 0, got {mtbf!r}")
        return cls(lambda_hw=1.0 / mtbf, lambda_ai=lambda_ai, lambda_phy=lambda_phy)


@dataclass(frozen=True)
class SystemStructure:
    n: int
    k: int
    subsystem_ids: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not 1 <= self.k <= self.n:
            raise DomainError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        ids = tuple(self.subsystem_ids) or tuple(f"S{i + 1}" for i in range(self.n))
        if len(ids) != self.n or len(set(ids)) != self.n:
            raise DomainError("subsystem_ids must hold exactly n distinct entries")
        object.__setattr__(self, "subsystem_ids", ids)


@dataclass(frozen=True)
class ThresholdParams:
    """Design floors and tuning of the adaptive mitigation trigger.

    ``alpha_sign`` selects the direction of the resilience term. The default
    ``+1`` gives ``r_min + alpha*(R - r_req) - delta``, which lowers the bar
    when resilience falls. ``-1`` makes the threshold rise as resilience
    falls, so mitigation fires earlier on a degraded system; the shipped
    scenarios use ``-1``.
    """

    r_min: float = 0.9999
    r_req: float = 0.85
    alpha: float = 0.1
    delta: float = 0.0005
    alpha_sign: int = 1

    def __post_init__(self) -> None:
        if not 0 < self.r_min <= 1:
            raise DomainError(f"r_min must lie in (0, 1], got {self.r_min}")
        if not 0 < self.r_req <= 1:
            raise DomainError(f"r_req must lie in (0, 1], got {self.r_req}")
        if not self.delta > 0:
            raise DomainError(f"delta must be > 0, got {self.delta}")
        if not self.alpha >= 0:
            raise DomainError(f"alpha must be >= 0, got {self.alpha}")
        if self.alpha_sign not in (1, -1):
            raise DomainError(f"alpha_sign must be +1 or -1, got {self.alpha_sign}")


@dataclass(frozen=True)
class AttackImpactEntry:
    attack_id: str
    probability: float
    delta_q: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.probability <= 1.0:
            raise DomainError(f"probability must lie in [0, 1], got {self.probability}")
        if not self.delta_q >= 0.0:
            raise DomainError(f"delta_q must be >= 0, got {self.delta_q}")


@dataclass(frozen=True)
class PerformanceTrace:
    """Uniformly sampled performance Q(t), sample i at ``t_start + i*tick``.

    ``throughput`` optionally holds measured throughput in bit/s; when it is
    absent the normalized curve is taken to be ``q / q_nominal``.
    """

    tick_seconds: float
    q: np.ndarray
    q_nominal: float = 1.0
    t_start: float = 0.0
    t_threat: float | None = None
    t_recovery: float | None = None
    t_steady: float | None = None
    baseline_throughput: float | None = None
    throughput: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        q = np.asarray(self.q, dtype=float)
        object.__setattr__(self, "q", q)
        if self.tick_seconds <= 0:
            raise DomainError("tick_seconds must be > 0")
        if self.q_nominal <= 0:
            raise DomainError("q_nominal must be > 0")
        if q.ndim != 1 or q.size < 2:
            raise DomainError("q must be a 1-D series with at least two samples")
        if np.any(q < -1e-12) or np.any(q > self.q_nominal * (1 + 1e-12)):
            raise DomainError("q values must lie in [0, q_nominal]")
        marks = [m for m in (self.t_threat, self.t_recovery, self.t_steady) if m is not None]
        if len(marks) == 3 and not (marks[0] <= marks[1] <= marks[2]):
            raise DomainError("need t_threat <= t_recovery <= t_steady")
        if self.throughput is not None:
            tp = np.asarray(self.throughput, dtype=float)
            if tp.shape != q.shape:
                raise DomainError("throughput must align with q")
            object.__setattr__(self, "throughput", tp)

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.tick_seconds * np.arange(self.q.size)

    @property
    def t_end(self) -> float:
        return self.t_start + self.tick_seconds * (self.q.size - 1)


def _integrate(times: np.ndarray, values: np.ndarray, a: float, b: float) -> float:
    """Exact integral over [a, b] of the linear interpolant through the samples."""
    lo = np.searchsorted(times, a, side="right")
    hi = np.searchsorted(times, b, side="left")
    xs = np.concatenate(([a], times[lo:hi], [b]))
    ys = np.interp(xs, times, values)
    return float(np.trapezoid(ys, xs))


def _check_window(trace: PerformanceTrace, t0: float, t1: float) -> None:
    eps = 1e-9 * max(1.0, abs(trace.t_end))
    if t0 < trace.t_start - eps or t1 > trace.t_end + eps:
        raise TraceRangeError(
            f"window [{t0}, {t1}] outside trace [{trace.t_start}, {trace.t_end}]"
        )


def subsystem_reliability(lam: float, t: float) -> float:
    """Survival probability ``exp(-lam*t)`` of one exponentially failing unit."""
    _check_rate(lam, "lambda")
    _check_rate(t, "t")
    return math.exp(-lam * t)


def k_out_of_n_reliability(structure: SystemStructure, r_unit: float) -> float:
    """Probability that at least k of n identical, independent units are up."""
    if not 0.0 <= r_unit <= 1.0:
        raise DomainError(f"r_unit must lie in [0, 1], got {r_unit}")
    n, k = structure.n, structure.k
    q = 1.0 - r_unit
    coef = float(math.comb(n, k))
    total = 0.0
    for j in range(k, n + 1):
        total += coef * r_unit**j * q ** (n - j)
        coef *= (n - j) / (j + 1)
    return min(1.0, total)


def k_out_of_n_heterogeneous(k: int, reliabilities: Sequence[float]) -> float:
    """k-out-of-n reliability for units with distinct survival probabilities.

    Enumerates all 2**n up/down states, so n is capped at 20.
    """
    r = np.asarray(reliabilities, dtype=float)
    n = r.size
    if not 1 <= k <= n:
        raise DomainError(f"need 1 <= k <= n, got k={k}, n={n}")
    if n > 20:
        raise DomainError("state enumeration is limited to n <= 20")
    if np.any((r < 0) | (r > 1)):
        raise DomainError("unit reliabilities must lie in [0, 1]")
    total = 0.0
    chunk = 1 << 16
    bits = np.arange(n)
    for start in range(0, 1 << n, chunk):
        states = np.arange(start, min(start + chunk, 1 << n))
        up = ((states[:, None] >> bits) & 1).astype(bool)
        ok = up.sum(axis=1) >= k
        probs = np.where(up[ok], r, 1.0 - r).prod(axis=1)
        total += float(probs.sum())
    return min(1.0, total)


def system_reliability(structure: SystemStructure, lam: float, t: float) -> float:
    """k-out-of-n reliability at time t for units sharing failure rate ``lam``."""
    return k_out_of_n_reliability(structure, subsystem_reliability(lam, t))


def composite_reliability(model: FailureModel, t: float) -> float:
    """Joint survival of the AI logic and the physical infrastructure."""
    _check_rate(t, "t")
    return subsystem_reliability(model.lambda_ai + model.lambda_phy, t)


def resilience_index(trace: PerformanceTrace, t0: float, t1: float) -> float:
    """Normalized area under Q(t) over [t0, t1]; 1.0 means no degradation."""
    if not t0 < t1:
        raise DomainError(f"need t0 < t1, got [{t0}, {t1}]")
    _check_window(trace, t0, t1)
    area = _integrate(trace.times, trace.q, t0, t1)
    value = area / ((t1 - t0) * trace.q_nominal)
    return min(1.0, max(0.0, value))


def expected_attack_impact(entries: Sequence[AttackImpactEntry]) -> float:
    if not entries:
        raise DomainError("expected_attack_impact needs at least one entry")
    return math.fsum(e.probability * e.delta_q for e in entries)


def dynamic_threshold(params: ThresholdParams, resilience_now: float) -> float:
    return (
        params.r_min
        + params.alpha_sign * params.alpha * (resilience_now - params.r_req)
        - params.delta
    )


class PolicyChoice(NamedTuple):
    policy_id: str
    feasible: bool


def select_mitigation_policy(
    candidates: Sequence[str],
    impact_estimates: Mapping[str, Sequence[AttackImpactEntry]],
    reliability_estimates: Mapping[str, float],
    resilience_estimates: Mapping[str, float],
    params: ThresholdParams,
) -> PolicyChoice:
    """Pick the lowest expected-impact policy that meets both design floors.

    Ties go to the lexicographically smallest identifier. When no candidate
    is feasible, the most reliable one is returned with ``feasible=False``.
    """
    if not candidates:
        raise DomainError("candidate policy set is empty")
    ordered = sorted(set(candidates))
    feasible = [
        c
        for c in ordered
        if reliability_estimates[c] >= params.r_min and resilience_estimates[c] >= params.r_req
    ]
    if feasible:
        best = min(feasible, key=lambda c: (expected_attack_impact(impact_estimates[c]), c))
        return PolicyChoice(best, True)
    best = min(ordered, key=lambda c: (-reliability_estimates[c], c))
    return PolicyChoice(best, False)


def response_time(t_detect: float, t_mitigate: float) -> float:
    if t_detect < 0 or t_mitigate < 0:
        raise DomainError("detection and mitigation times must be >= 0")
    return t_detect + t_mitigate


def throughput_penalty(t_baseline: float, t_current: float) -> float:
    """Percentage throughput loss relative to the baseline."""
    if not t_baseline > 0:
        raise DomainError(f"t_baseline must be > 0, got {t_baseline}")
    if t_current < 0:
        raise DomainError(f"t_current must be >= 0, got {t_current}")
    return (t_baseline - t_current) / t_baseline * 100.0


def resilience_curve_area(trace: PerformanceTrace) -> float:
    """Area under the normalized throughput curve from threat to recovery,
    divided by the threat-to-steady-state span."""
    if trace.t_threat is None or trace.t_recovery is None or trace.t_steady is None:
        raise StateError("t_threat, t_recovery and t_steady must all be set")
    if not trace.t_threat < trace.t_steady:
        raise DomainError("need t_threat < t_steady")
    _check_window(trace, trace.t_threat, trace.t_steady)
    if trace.throughput is not None:
        if not trace.baseline_throughput or trace.baseline_throughput <= 0:
            raise StateError("baseline_throughput must be set when throughput is given")
        curve = trace.throughput / trace.baseline_throughput
    else:
        curve = trace.q / trace.q_nominal
    if trace.t_recovery == trace.t_threat:
        area = 0.0
    else:
        area = _integrate(trace.times, curve, trace.t_threat, trace.t_recovery)
    return area / (trace.t_steady - trace.t_threat)

