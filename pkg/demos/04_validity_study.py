"""Desk-scale validity study on a synthetic cohort.

Nine synthetic participants (three per competency level) run the test
protocol; the study report grades them, compares success rates and error
sizes across levels (Kruskal-Wallis with rank-sum post-hocs), contrasts the
two error types within levels, and summarizes probing strategies.  The
tables land in demos/output/study/ as CSV plus a JSON summary.
"""

from epidusim import ParticipantProfile, Position, build_study_report, metrics_table
from epidusim.agent import PROFILES, run_session
from epidusim.engine import SessionConfig

OUT = "demos/output/study"

COHORT = [
    ("novice", 0.5, 15, Position.RESIDENT),
    ("novice", 0.8, 25, Position.RESIDENT),
    ("novice", 1.0, 40, Position.RESIDENT),
    ("intermediate", 2.0, 120, Position.UNSPECIFIED),
    ("intermediate", 2.5, 180, Position.UNSPECIFIED),
    ("intermediate", 3.0, 250, Position.UNSPECIFIED),
    ("expert", 6.0, 700, Position.ATTENDING),
    ("expert", 9.0, 1200, Position.ATTENDING),
    ("expert", 14.0, 2500, Position.ATTENDING),
]


def main():
    config = SessionConfig(n_familiarization=0, blocks=4, rng_seed=0)
    rows, profiles = [], []
    for i, (style, years, epidurals, position) in enumerate(COHORT):
        pid = f"{style[0]}{i}"
        records = run_session(PROFILES[style], config, seed=1000 + i, participant=pid)
        rows.extend(metrics_table(records))
        profiles.append(
            ParticipantProfile(
                pid, years, epidurals, position,
                vas_responses={"loss_of_resistance": 60.0 + 3.0 * i, "overall": 55.0 + 3.5 * i},
            )
        )
        print(f"simulated {pid} ({style}, {len(records)} trials)")

    report = build_study_report(rows, profiles, n_resamples=5000)
    for path in report.write(OUT):
        print(f"wrote {path}")

    print("\noutcome rates by level:")
    header, table = report.tables["outcome_rates_by_level"]
    print("  " + "  ".join(header))
    for row in table:
        print("  " + "  ".join(f"{v:.3f}" if isinstance(v, float) else str(v) for v in row))

    success = report.stats["success_rate_by_level"]
    if "p_value" in success:
        print(f"\nsuccess rate across levels: H={success['statistic']:.3f}, "
              f"p={success['p_value']:.4f}")
        if "post_hoc" in success:
            for pair, p in success["post_hoc"].items():
                print(f"  post-hoc {pair}: adjusted p={p:.4f}")


if __name__ == "__main__":
    main()
