"""Simulate full sessions for three operator styles and tabulate metrics.

Each profile runs the standard session protocol (3 familiarization trials
at 71 kg, then 4 randomized blocks of 55/85/115 kg test trials) and the
per-trial metrics table is computed straight from the records.
"""

import numpy as np

from epidusim import PROFILES, SessionConfig, metrics_table
from epidusim.agent import run_session


def main():
    config = SessionConfig(rng_seed=7)
    print(f"protocol: {config.n_familiarization} familiarization + "
          f"{config.blocks} blocks x {len(config.test_masses)} masses")
    for name in ("novice", "intermediate", "expert"):
        records = run_session(PROFILES[name], config, seed=100, participant=name)
        rows = [r for r in metrics_table(records) if r["kind"] == "test"]
        n = len(rows)
        success = sum(r["outcome"] == "success" for r in rows) / n
        punctures = sum(r["outcome"] == "dural_puncture" for r in rows) / n
        counts = [r["probe_count"] for r in rows]
        depths = [r["probe_mean_depth_mm"] for r in rows if r["probe_mean_depth_mm"]]
        rates = [r["probe_mean_rate_hz"] for r in rows if r["probe_mean_rate_hz"]]
        print(f"\n{name} ({n} test trials)")
        print(f"  success rate        {success:5.2f}")
        print(f"  dural punctures     {punctures:5.2f}")
        print(f"  mean |error|        {np.mean([r['abs_error_mm'] for r in rows]):5.2f} mm")
        print(f"  probes per trial    {np.mean(counts):5.1f}")
        print(f"  probe depth         {np.mean(depths):5.2f} mm")
        print(f"  probe rate          {np.mean(rates):5.2f} Hz")


if __name__ == "__main__":
    main()
