"""Independent reference computations for the test-suite and the ``oracle`` CLI verb.

Every function here reaches its answer by a different route than the library
code it checks: exact rational sums instead of running products, explicit
lifetimes instead of closed forms, fine midpoint sums instead of trapezoids,
brute-force enumeration instead of grouped tallies. Nothing in the simulator
imports this module.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np


# -- reliability -------------------------------------------------------------


def exp_neg_series(x: float, terms: int = 80) -> float:
    """e^(-x) by its Taylor series in exact rationals; fine for moderate x."""
    xf = Fraction(x)
    total = Fraction(0)
    term = Fraction(1)
    for k in range(terms):
        total += term
        term = term * (-xf) / (k + 1)
    return float(total)


def k_out_of_n_exact(n: int, k: int, r: float) -> float:
    """Binomial tail with exact integer coefficients and rational arithmetic."""
    rf = Fraction(r)
    return float(sum(math.comb(n, j) * rf**j * (1 - rf) ** (n - j) for j in range(k, n + 1)))


def k_out_of_n_count_dp(k: int, reliabilities: Sequence[float]) -> float:
    """Distribution of the number of working units, built one unit at a time."""
    dist = [Fraction(1)]
    for r in (Fraction(x) for x in reliabilities):
        nxt = [Fraction(0)] * (len(dist) + 1)
        for up, p in enumerate(dist):
            nxt[up] += p * (1 - r)
            nxt[up + 1] += p * r
        dist = nxt
    return float(sum(dist[k:]))


def k_out_of_n_monte_carlo(
    n: int, k: int, lam: float, t: float, trials: int, rng: np.random.Generator
) -> tuple[float, float]:
    """Fraction of trials where at least k of n exponential lifetimes exceed t.

    Returns (estimate, standard error).
    """
    if lam == 0:
        return 1.0, 0.0
    life = rng.exponential(1.0 / lam, size=(trials, n))
    ok = (life > t).sum(axis=1) >= k
    p = float(ok.mean())
    return p, math.sqrt(max(p * (1 - p), 1e-300) / trials)


def threshold_oracle(r_min: float, r_req: float, alpha: float, delta: float, resilience: float,
                     sign: int = 1) -> float:
    """Direct substitution in exact decimals."""
    f = Fraction
    value = (f(str(r_min)) + sign * f(str(alpha)) * (f(str(resilience)) - f(str(r_req)))
             - f(str(delta)))
    return float(value)


def expected_impact_oracle(entries: Iterable[tuple[float, float]]) -> float:
    return float(sum(Fraction(p) * Fraction(dq) for p, dq in entries))


def select_policy_oracle(
    candidates: Sequence[str],
    impact: Mapping[str, float],
    reliability: Mapping[str, float],
    resilience: Mapping[str, float],
    r_min: float,
    r_req: float,
) -> tuple[str, bool]:
    """Enumerate, filter, then sort; infeasible sets fall back to the most reliable."""
    feasible = [c for c in candidates if reliability[c] >= r_min and resilience[c] >= r_req]
    if feasible:
        return sorted(feasible, key=lambda c: (impact[c], c))[0], True
    return sorted(candidates, key=lambda c: (-reliability[c], c))[0], False


# -- quadrature --------------------------------------------------------------


def midpoint_area(times: Sequence[float], values: Sequence[float], a: float, b: float,
                  factor: int = 100) -> float:
    """Integral of the piecewise-linear interpolant over [a, b].

    Each segment between breakpoints is split into ``factor`` pieces and summed
    with the midpoint rule, which is exact on linear pieces.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    inner = [float(t) for t in times if a < t < b]
    knots = [a] + inner + [b]
    total = 0.0
    for lo, hi in zip(knots, knots[1:]):
        h = (hi - lo) / factor
        mids = lo + h * (np.arange(factor) + 0.5)
        total += float(np.interp(mids, times, values).sum() * h)
    return total


def resilience_index_oracle(times, q, q_nominal: float, t0: float, t1: float) -> float:
    value = midpoint_area(times, q, t0, t1) / ((t1 - t0) * q_nominal)
    return min(1.0, max(0.0, value))


def curve_area_oracle(times, c, t_threat: float, t_recovery: float, t_steady: float) -> float:
    if t_recovery == t_threat:
        return 0.0
    return midpoint_area(times, c, t_threat, t_recovery) / (t_steady - t_threat)


# -- voting ------------------------------------------------------------------


def vote_oracle(
    proposals: Sequence[tuple[str, Hashable]], trust: Mapping[str, float]
) -> tuple[Hashable, tuple[str, ...]] | None:
    """Try every distinct proposal as the candidate winner and keep the best.

    Support is tallied in exact rationals. Equal support goes to the candidate
    whose backers include the smallest controller id.
    """
    if not proposals:
        return None
    best = None
    for cand in dict.fromkeys(key for _, key in proposals):
        backers = tuple(sorted(cid for cid, key in proposals if key == cand))
        support = sum((Fraction(trust[c]) for c in backers), Fraction(0))
        if best is None or _beats(support, backers[0], best[0], best[1]):
            best = (support, backers[0], cand, backers)
    return best[2], best[3]


def _beats(support: Fraction, low_id: str, best_support: Fraction, best_low: str) -> bool:
    tol = Fraction(1, 10**12) * max(abs(support), abs(best_support))
    if support - best_support > tol:
        return True
    if best_support - support > tol:
        return False
    return low_id < best_low


# -- metrics -----------------------------------------------------------------


def ri_oracle(c: Sequence[float], weights: Sequence[float], window: int, recovery_window: int,
              level: float) -> np.ndarray:
    """RI(t) by explicit per-tick loops over the trailing window."""
    c = [min(1.0, max(0.0, float(v))) for v in c]
    out = np.empty(len(c))
    run = 0
    for i, v in enumerate(c):
        run = run + 1 if v < level else 0
        lo = max(0, i - window + 1)
        win = c[lo : i + 1]
        avail = math.fsum(win) / len(win)
        recov = 1.0 - min(1.0, run / recovery_window)
        impact = min(win)
        out[i] = min(1.0, max(0.0, weights[0] * avail + weights[1] * recov + weights[2] * impact))
    return out


def survival_oracle(failure_times: Sequence[float | None], t: float) -> float:
    alive = [ft for ft in failure_times if ft is None or ft > t]
    return len(alive) / len(failure_times)


def first_sustained(mask: Sequence[bool], start: int, length: int) -> int | None:
    """First index >= start that begins ``length`` consecutive True values (slice scan)."""
    for i in range(start, len(mask) - length + 1):
        if all(mask[i : i + length]):
            return i
    return None


def sliding_max_count(times: Sequence[float], window: float) -> int:
    """Largest number of timestamps inside any half-open window (s - window, s]."""
    ts = sorted(times)
    best = 0
    for s in ts:
        best = max(best, sum(1 for u in ts if s - window < u <= s))
    return best


# -- CLI summary -------------------------------------------------------------


def reference_values(mc_trials: int = 1_000_000, seed: int = 12345) -> dict[str, float]:
    """The worked values the test-suite freezes, recomputed from scratch."""
    rng = np.random.default_rng(seed)
    mc, se = k_out_of_n_monte_carlo(3, 2, 0.001, 100.0, mc_trials, rng)
    trust = {"a": 0.5, "b": 0.3, "c": 0.4}
    winner, _ = vote_oracle([("a", "P_a"), ("b", "P_b"), ("c", "P_b")], trust)
    return {
        "exp(-0.1)": exp_neg_series(0.1),
        "k_of_n(n=3,k=2,r=exp(-0.1))": k_out_of_n_exact(3, 2, exp_neg_series(0.1)),
        "k_of_n monte carlo": mc,
        "k_of_n monte carlo stderr": se,
        "composite(1e-5,2e-5,1000)": exp_neg_series(0.03),
        "threshold(R=0.85)": threshold_oracle(0.9999, 0.85, 0.1, 0.0005, 0.85),
        "threshold(R=0.75, sign=+1)": threshold_oracle(0.9999, 0.85, 0.1, 0.0005, 0.75, 1),
        "threshold(R=0.75, sign=-1)": threshold_oracle(0.9999, 0.85, 0.1, 0.0005, 0.75, -1),
        "expected impact [(0.5,0.2),(0.25,0.4)]": expected_impact_oracle([(0.5, 0.2), (0.25, 0.4)]),
        "vote {a:0.5 -> P_a, b:0.3 + c:0.4 -> P_b} wins P_b": float(winner == "P_b"),
    }
