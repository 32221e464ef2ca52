"""Run the DDoS scenario once per strategy on a shared seed and compare.

All three strategies see identical traffic, noise and attack draws, so the
differences below come from how each one reacts.

    python demos/ddos_three_strategies.py [seed]
"""

import sys

import numpy as np

from resilnet import metrics
from resilnet.sim import STRATEGIES, RunConfig, mix_seed, run


def sparkline(values: np.ndarray, width: int = 60) -> str:
    blocks = " .:-=+*#%@"
    chunks = np.array_split(values, width)
    return "".join(blocks[min(9, int(round(float(c.mean()) * 9)))] for c in chunks)


def main() -> None:
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else mix_seed(1, 0)
    results = {s: run(RunConfig("ddos", s, seed=seed)) for s in STRATEGIES}

    print("normalized service C(t) over the run (flood from 500 s to 1500 s)")
    for s, r in results.items():
        print(f"  {s:<19} |{sparkline(r.trace.C)}|")

    rows = {s: metrics.run_kpis(r) for s, r in results.items()}
    keys = [("ri_mean", "RI mean", "{:.3f}"),
            ("plr_attack_pct", "PLR under attack %", "{:.2f}"),
            ("urllc_p99_attack_ms", "URLLC p99 ms", "{:.1f}"),
            ("peak_penalty_pct", "peak penalty %", "{:.1f}"),
            ("penalty_window_s", "penalty window s", "{:.0f}"),
            ("mttd_s", "detection delay s", "{:.1f}")]
    print()
    print(f"{'':<20}" + "".join(f"{s:>21}" for s in STRATEGIES))
    for k, label, fmt in keys:
        cells = ["-" if rows[s][k] is None else fmt.format(rows[s][k]) for s in STRATEGIES]
        print(f"{label:<20}" + "".join(f"{c:>21}" for c in cells))

    prop = results["proposed"]
    kinds = {}
    for a in prop.actions:
        kinds[a.kind] = kinds.get(a.kind, 0) + 1
    print("\nproposed controller actions:", ", ".join(f"{k} {v}" for k, v in sorted(kinds.items())))
    print("the rerouted policy is voted in once; later alerts resolve to 'maintain'")


if __name__ == "__main__":
    main()
