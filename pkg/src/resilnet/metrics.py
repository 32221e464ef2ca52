"""KPIs over run results: reliability curves, RI(t), MTTD/MTTR, reports."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .dataplane import hist_edges_ms
from .errors import ConfigError, StateError
from .reliability import AttackImpactEntry, PerformanceTrace, expected_attack_impact, resilience_curve_area

SERIES_COLUMNS = (
    "tick_s", "strategy", "Q", "C", "latency_p50_ms", "latency_p95_ms", "latency_p99_ms",
    "plr_pct", "throughput_penalty_pct", "reliability_score", "ri", "phase",
)
PHASE_NAMES = ("pre", "attack", "post")
PENALTY_SMOOTH_TICKS = 10
PENALTY_LEVEL_PCT = 5.0


def _check_weights(weights: Sequence[float]) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.shape != (3,) or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ConfigError("RI weights must be three non-negative numbers summing to 1")
    return w


def _trailing_mean(x: np.ndarray, window: int) -> np.ndarray:
    cs = np.concatenate(([0.0], np.cumsum(x)))
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(0, idx - window)
    return (cs[idx] - cs[lo]) / (idx - lo)


def _trailing_min(x: np.ndarray, window: int) -> np.ndarray:
    padded = np.concatenate((np.full(window - 1, np.inf), x))
    return np.lib.stride_tricks.sliding_window_view(padded, window).min(axis=1)


def _degraded_run(x: np.ndarray, level: float) -> np.ndarray:
    """Length of the current run of ticks with x < level, ending at each tick."""
    bad = x < level
    idx = np.arange(x.size)
    last_good = np.where(~bad, idx, -1)
    last_good = np.maximum.accumulate(last_good)
    return np.where(bad, idx - last_good, 0)


def ri_from_c(
    c: np.ndarray,
    weights: Sequence[float] = (1 / 3, 1 / 3, 1 / 3),
    window: int = 300,
    recovery_window: int = 3000,
    level: float = 0.98,
) -> np.ndarray:
    """RI(t) from the normalized service curve.

    availability = trailing mean of C; recovery = 1 - degraded run length over
    ``recovery_window``; impact mitigation = trailing minimum of C.
    """
    w = _check_weights(weights)
    c = np.clip(np.asarray(c, dtype=float), 0.0, 1.0)
    avail = _trailing_mean(c, window)
    recov = 1.0 - np.minimum(1.0, _degraded_run(c, level) / recovery_window)
    impact = _trailing_min(c, window)
    return np.clip(w[0] * avail + w[1] * recov + w[2] * impact, 0.0, 1.0)


def resilience_index_series(result, weights: Sequence[float] | None = None) -> np.ndarray:
    """RI(t) for a RunResult, using the scenario's windows."""
    if weights is None:
        return result.trace.ri
    return ri_from_c(result.trace.C, weights)


def empirical_reliability(results: Sequence, t: float) -> float:
    """Fraction of runs with no service failure in [0, t]."""
    if not results:
        raise StateError("empirical_reliability needs at least one run")
    alive = sum(1 for r in results if r.failure_time is None or r.failure_time > t)
    return alive / len(results)


def reliability_curve(results: Sequence, times: np.ndarray) -> np.ndarray:
    fails = np.array([np.inf if r.failure_time is None else r.failure_time for r in results])
    return (fails[None, :] > np.asarray(times)[:, None]).mean(axis=1)


@dataclass
class DetectionTimes:
    mttd: float | None
    mttr: float | None
    t_resp: float | None
    detected: int
    undetected: int


def detection_and_repair_times(result) -> DetectionTimes:
    """Mean detection delay and mean repair time over the run's attacks."""
    if not result.attacks:
        raise StateError("run has no attacks")
    ttd, ttr = [], []
    for rec in result.attacks:
        if rec.detected_at is None:
            continue
        ttd.append(rec.detected_at - rec.t_threat)
        ttr.append(max(0.0, rec.t_recovery - rec.detected_at))
    undetected = len(result.attacks) - len(ttd)
    if not ttd:
        return DetectionTimes(None, None, None, 0, undetected)
    mttd, mttr = float(np.mean(ttd)), float(np.mean(ttr))
    return DetectionTimes(mttd, mttr, mttd + mttr, len(ttd), undetected)


def hist_quantile(hist: np.ndarray, q: float) -> float | None:
    total = hist.sum()
    if total <= 0:
        return None
    cum = np.cumsum(hist)
    b = int(np.searchsorted(cum, q * total - 1e-9))
    return float(hist_edges_ms()[min(b + 1, hist.size)])


def _smoothed_penalty(trace) -> np.ndarray:
    return _trailing_mean(trace.throughput_penalty_pct, PENALTY_SMOOTH_TICKS)


def run_kpis(result) -> dict[str, Any]:
    """Scalar KPIs of one run; None marks a KPI that is undefined for this run."""
    tr = result.trace
    dt = tr.tick_seconds
    attack = tr.phase == 1
    t_threat = result.t_threat
    after = tr.t >= t_threat if t_threat is not None else np.zeros(tr.t.size, bool)

    def plr(mask):
        g = tr.generated[mask].sum()
        return float(100.0 * tr.dropped[mask].sum() / g) if g > 0 else 0.0

    pen = _smoothed_penalty(tr)
    out: dict[str, Any] = {
        "seed": result.seed,
        "ri_mean": float(tr.ri.mean()),
        "ri_mean_after_threat": float(tr.ri[after].mean()) if after.any() else None,
        "ri_std_after_threat": float(tr.ri[after].std()) if after.any() else None,
        "plr_pct": plr(np.ones(tr.t.size, bool)),
        "plr_attack_pct": plr(attack) if attack.any() else None,
        "urllc_p99_attack_ms": hist_quantile(tr.latency_hist[1], 0.99) if attack.any() else None,
        "urllc_p99_peak_attack_ms": (float(np.nanmax(tr.p99[attack]))
                                     if attack.any() and np.isfinite(tr.p99[attack]).any() else None),
        "peak_penalty_pct": float(pen[after].max()) if after.any() else 0.0,
        "penalty_window_s": float((pen[after] > PENALTY_LEVEL_PCT).sum() * dt) if after.any() else 0.0,
        "failure_time_s": result.failure_time,
        "enacted": sum(1 for e in result.log if e.kind == "enact"),
        "rollbacks": sum(1 for e in result.log if e.kind == "rollback"),
    }
    if result.attacks:
        d = detection_and_repair_times(result)
        out.update(mttd_s=d.mttd, mttr_s=d.mttr, t_resp_s=d.t_resp, undetected=d.undetected)
        entries = [AttackImpactEntry(r.unit, r.probability, r.delta_q) for r in result.attacks]
        out["expected_impact"] = expected_attack_impact(entries)
        first = result.attacks[0]
        pt = PerformanceTrace(dt, tr.C, 1.0, 0.0, first.t_threat,
                              min(first.t_recovery, tr.t[-1]), min(first.t_steady, tr.t[-1]))
        out["resilience_area"] = (resilience_curve_area(pt) if pt.t_steady > pt.t_threat else 1.0)
    else:
        out.update(mttd_s=None, mttr_s=None, t_resp_s=None, undetected=0,
                   expected_impact=0.0, resilience_area=1.0)
    return out


def aggregate(rows: Sequence[Mapping[str, Any]]) -> dict[str, dict[str, float | None]]:
    """Mean and population standard deviation per KPI, skipping undefined values."""
    keys = [k for k in rows[0] if k != "seed"] if rows else []
    out = {}
    for k in keys:
        vals = [float(r[k]) for r in rows if r.get(k) is not None]
        if vals:
            out[k] = {"mean": math.fsum(vals) / len(vals), "std": float(np.std(vals)), "n": len(vals)}
        else:
            out[k] = {"mean": None, "std": None, "n": 0}
    return out


@dataclass
class KpiReport:
    scenario: str
    strategy: str
    runs: int
    reliability_times_s: list[float]
    reliability_curve: list[float]
    ri_series: list[float]
    latency_ms: dict[str, dict[str, float | None]]
    plr_pct: dict[str, float | None]
    throughput_penalty_series: list[float]
    resilience_area: float | None
    mttd_s: float | None
    mttr_s: float | None
    t_resp_s: float | None
    undetected: int
    expected_impact: float
    kpis: dict[str, dict[str, float | None]]
    per_run: list[dict[str, Any]] = field(default_factory=list)
    series_step_s: float = 1.0


def build_report(results: Sequence, series_step_s: float = 1.0) -> KpiReport:
    """Summarize a batch of runs sharing one scenario and strategy."""
    if not results:
        raise StateError("no results to report")
    # fixed order so float sums do not depend on how the batch was collected
    results = sorted(results, key=lambda r: r.seed)
    first = results[0]
    tr0 = first.trace
    dt = tr0.tick_seconds
    step = max(1, int(round(series_step_s / dt)))
    times = np.arange(0.0, tr0.t[-1] + dt / 2, 10.0)
    rows = [run_kpis(r) for r in results]
    stats = aggregate(rows)
    hist = sum(r.trace.latency_hist for r in results)
    latency = {}
    plr = {}
    for ph, name in enumerate(PHASE_NAMES):
        latency[name] = {f"p{int(q * 100)}": hist_quantile(hist[ph], q) for q in (0.5, 0.95, 0.99)}
        gen = sum(r.trace.generated[r.trace.phase == ph].sum() for r in results)
        drop = sum(r.trace.dropped[r.trace.phase == ph].sum() for r in results)
        plr[name] = float(100.0 * drop / gen) if gen > 0 else None
    ri = np.mean([r.trace.ri for r in results], axis=0)[::step]
    pen = np.mean([r.trace.throughput_penalty_pct for r in results], axis=0)[::step]

    def mean_of(k):
        return stats[k]["mean"] if k in stats else None

    return KpiReport(
        scenario=first.scenario, strategy=first.strategy, runs=len(results),
        reliability_times_s=[float(t) for t in times],
        reliability_curve=[float(v) for v in reliability_curve(results, times)],
        ri_series=[float(v) for v in ri], latency_ms=latency, plr_pct=plr,
        throughput_penalty_series=[float(v) for v in pen],
        resilience_area=mean_of("resilience_area"), mttd_s=mean_of("mttd_s"),
        mttr_s=mean_of("mttr_s"), t_resp_s=mean_of("t_resp_s"),
        undetected=int(sum(r.get("undetected") or 0 for r in rows)),
        expected_impact=float(mean_of("expected_impact") or 0.0),
        kpis=stats, per_run=rows, series_step_s=step * dt,
    )


def _fmt(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "" if not np.isfinite(v) else f"{float(v):.9g}"
    return str(v)


def series_rows(result) -> list[list[str]]:
    tr = result.trace
    plr = tr.plr_pct
    pen = tr.throughput_penalty_pct
    rows = []
    for i in range(tr.t.size):
        rows.append([
            _fmt(float(tr.t[i])), result.strategy, _fmt(float(tr.C[i])), _fmt(float(tr.C[i])),
            _fmt(float(tr.p50[i])), _fmt(float(tr.p95[i])), _fmt(float(tr.p99[i])),
            _fmt(float(plr[i])), _fmt(float(pen[i])), _fmt(float(tr.reliability[i])),
            _fmt(float(tr.ri[i])), PHASE_NAMES[int(tr.phase[i])],
        ])
    return rows


def series_csv(results: Sequence) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SERIES_COLUMNS)
    for r in results:
        w.writerows(series_rows(r))
    return buf.getvalue()


def _clean(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def report_json(report: KpiReport) -> str:
    return json.dumps(_clean(asdict(report)), indent=2, sort_keys=True) + "\n"


def paired_deltas(a: KpiReport, b: KpiReport) -> list[dict[str, Any]]:
    """Per-seed KPI differences ``a - b`` for runs sharing a seed."""
    by_seed = {r["seed"]: r for r in b.per_run}
    out = []
    for ra in a.per_run:
        rb = by_seed.get(ra["seed"])
        if rb is None:
            continue
        row: dict[str, Any] = {"seed": ra["seed"]}
        for k, v in ra.items():
            if k == "seed":
                continue
            w = rb.get(k)
            row[k] = None if v is None or w is None else float(v) - float(w)
        out.append(row)
    return out


def _rows_csv(rows: Sequence[Mapping[str, Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if rows:
        keys = list(rows[0])
        w.writerow(keys)
        for r in rows:
            w.writerow([_fmt(r.get(k)) for k in keys])
    return buf.getvalue()


def emit_report(
    reports: Sequence[KpiReport],
    fmt: str,
    destination: str | Path,
    series: Mapping[str, Sequence] | None = None,
) -> list[Path]:
    """Write summaries, per-run KPI tables, optional per-tick series and paired deltas.

    ``series`` maps strategy name to the run results whose per-tick series to
    write. Raises OSError when the destination is not writable.
    """
    if fmt not in ("csv", "json"):
        raise ConfigError(f"unknown format {fmt!r}")
    dest = Path(destination)
    dest.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def put(name: str, text: str) -> None:
        p = dest / name
        p.write_text(text)
        written.append(p)

    for rep in reports:
        stem = f"{rep.scenario}_{rep.strategy}"
        put(f"{stem}_summary.json", report_json(rep))
        if fmt == "csv":
            put(f"{stem}_runs.csv", _rows_csv(rep.per_run))
        else:
            put(f"{stem}_runs.json", json.dumps(_clean(rep.per_run), indent=2, sort_keys=True) + "\n")
        if series and rep.strategy in series:
            runs = series[rep.strategy]
            if fmt == "csv":
                put(f"{stem}_series.csv", series_csv(runs))
            else:
                body = [dict(zip(SERIES_COLUMNS, row)) for r in runs for row in series_rows(r)]
                put(f"{stem}_series.json", json.dumps(body, indent=1) + "\n")
    if len(reports) >= 2:
        base = reports[0]
        for other in reports[1:]:
            rows = paired_deltas(base, other)
            name = f"{base.scenario}_compare_{base.strategy}_vs_{other.strategy}"
            if fmt == "csv":
                put(f"{name}.csv", _rows_csv(rows))
            else:
                put(f"{name}.json", json.dumps(_clean(rows), indent=2, sort_keys=True) + "\n")
    return written
