"""Study-level report: aggregates trial metrics into validity tables.

Consumes the per-trial metrics table and participant profiles, aggregates
per participant (test trials only), grades participants into levels, and
runs the assessment battery: outcome-rate breakdowns, success-rate and
error-size comparisons across levels (Kruskal-Wallis with rank-sum
post-hocs under Bonferroni), failed-epidural vs dural-puncture signed-rank
tests within levels, probing-strategy comparisons by level and by outcome,
exploratory per-layer probe densities and velocities, and questionnaire
summaries.  Everything is emitted as plain CSV tables plus one JSON summary
suitable for plotting.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import ProbeDetectionParams, metrics_table
from .stats import (
    ParticipantProfile,
    StatResult,
    assign_level,
    bonferroni,
    bootstrap_ci,
    kruskal_wallis,
    vas_report,
    wilcoxon_rank_sum,
    wilcoxon_signed_rank,
)
from .tissue import Tissue

__all__ = ["StudyReport", "build_study_report", "study_report"]

_OUTCOMES = ("failed_epidural", "success", "dural_puncture")
_LAYERS = tuple(t.value for t in Tissue)
_PROBE_KEYS = ("probe_count", "probe_mean_depth_mm", "probe_mean_rate_hz")


@dataclass
class StudyReport:
    """Tables (name -> header + rows) and test results, write-to-disk-able."""

    tables: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)
    stats: dict[str, dict] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def write(self, outdir: str | Path) -> list[Path]:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        written = []
        for name, (header, rows) in self.tables.items():
            path = outdir / f"{name}.csv"
            with path.open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(header)
                for row in rows:
                    writer.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
            written.append(path)
        summary = outdir / "summary.json"
        summary.write_text(
            json.dumps({"meta": self.meta, "stats": self.stats}, indent=2, sort_keys=True)
            + "\n"
        )
        written.append(summary)
        return written


def _mean_or_none(values) -> float | None:
    values = [v for v in values if v is not None]
    return float(np.mean(values)) if values else None


@dataclass
class _Participant:
    id: str
    level: int
    n_test_trials: int = 0
    rates: dict = field(default_factory=lambda: {k: 0.0 for k in _OUTCOMES})
    mean_abs_error: float | None = None
    probe_stats: dict = field(default_factory=dict)  # key -> mean over trials
    probe_by_outcome: dict = field(default_factory=dict)  # outcome -> key -> mean
    layer_density: dict = field(default_factory=dict)  # layer -> mean
    layer_speed: dict = field(default_factory=dict)  # layer -> mean or None


def _aggregate_participant(pid: str, level: int, rows: list[dict]) -> _Participant:
    test_rows = [r for r in rows if r["kind"] == "test"]
    part = _Participant(pid, level, n_test_trials=len(test_rows))
    if not test_rows:
        return part
    n = len(test_rows)
    for outcome in _OUTCOMES:
        part.rates[outcome] = sum(r["outcome"] == outcome for r in test_rows) / n
    part.mean_abs_error = _mean_or_none([r["abs_error_mm"] for r in test_rows])
    for key in _PROBE_KEYS:
        part.probe_stats[key] = _mean_or_none([r[key] for r in test_rows])
    for outcome in _OUTCOMES:
        subset = [r for r in test_rows if r["outcome"] == outcome]
        if subset:
            part.probe_by_outcome[outcome] = {
                key: _mean_or_none([r[key] for r in subset]) for key in _PROBE_KEYS
            }
    for layer in _LAYERS:
        part.layer_density[layer] = _mean_or_none(
            [r[f"probes_per_mm_{layer}"] for r in test_rows]
        )
        part.layer_speed[layer] = _mean_or_none(
            [r[f"mean_speed_mm_s_{layer}"] for r in test_rows]
        )
    return part


def _kw_across_levels(
    participants: list[_Participant], value_of, name: str, alpha: float
) -> dict:
    """Kruskal-Wallis across levels with rank-sum post-hocs when significant."""
    groups = {}
    for part in participants:
        value = value_of(part)
        if value is not None:
            groups.setdefault(part.level, []).append(value)
    levels = sorted(groups)
    if len(levels) < 2:
        return {"test": "kruskal-wallis", "skipped": "fewer than two levels with data"}
    try:
        result = kruskal_wallis([groups[lv] for lv in levels])
    except ValueError as exc:
        return {"test": "kruskal-wallis", "skipped": str(exc)}
    out = result.as_dict()
    out["groups"] = {f"level_{lv}": len(groups[lv]) for lv in levels}
    if result.p_value < alpha:
        pairs = [(a, b) for i, a in enumerate(levels) for b in levels[i + 1 :]]
        raw = [wilcoxon_rank_sum(groups[a], groups[b]).p_value for a, b in pairs]
        adjusted = bonferroni(raw, m=len(pairs))
        out["post_hoc"] = {
            f"level_{a}_vs_level_{b}": p for (a, b), p in zip(pairs, adjusted)
        }
    return out


def _kw_across_outcomes(participants: list[_Participant], key: str, alpha: float) -> dict:
    groups = {}
    for part in participants:
        for outcome, stats in part.probe_by_outcome.items():
            if stats.get(key) is not None:
                groups.setdefault(outcome, []).append(stats[key])
    present = [o for o in _OUTCOMES if o in groups]
    if len(present) < 2:
        return {"test": "kruskal-wallis", "skipped": "fewer than two outcomes with data"}
    result = kruskal_wallis([groups[o] for o in present])
    out = result.as_dict()
    out["groups"] = {o: len(groups[o]) for o in present}
    if result.p_value < alpha:
        pairs = [(a, b) for i, a in enumerate(present) for b in present[i + 1 :]]
        raw = [wilcoxon_rank_sum(groups[a], groups[b]).p_value for a, b in pairs]
        adjusted = bonferroni(raw, m=len(pairs))
        out["post_hoc"] = {f"{a}_vs_{b}": p for (a, b), p in zip(pairs, adjusted)}
    return out


def build_study_report(
    metrics_rows: list[dict],
    profiles: list[ParticipantProfile],
    seed: int = 2021,
    n_resamples: int = 10000,
    alpha: float = 0.05,
) -> StudyReport:
    """Assemble all validity tables and tests from a metrics table."""
    by_pid: dict[str, list[dict]] = {}
    for row in metrics_rows:
        by_pid.setdefault(row["participant"], []).append(row)
    profile_map = {p.id: p for p in profiles}
    missing = sorted(set(by_pid) - set(profile_map))
    if missing:
        raise ValueError(f"metrics reference participants without profiles: {missing}")

    participants = [
        _aggregate_participant(pid, assign_level(profile_map[pid]), rows)
        for pid, rows in sorted(by_pid.items())
    ]
    participants = [p for p in participants if p.n_test_trials > 0]
    if not participants:
        raise ValueError("no test trials to report on")

    report = StudyReport()
    report.meta = {
        "n_participants": len(participants),
        "n_test_trials": sum(p.n_test_trials for p in participants),
        "alpha": alpha,
        "bootstrap_resamples": n_resamples,
        "seed": seed,
    }
    ci_counter = [0]

    def ci(values) -> tuple[float | None, float | None]:
        values = [v for v in values if v is not None]
        if not values:
            return None, None
        lo, hi = bootstrap_ci(
            values, n_resamples=n_resamples, seed=np.random.SeedSequence([seed, ci_counter[0]])
        )
        ci_counter[0] += 1
        return lo, hi

    # per-participant flat table (the plotting points behind every figure)
    report.tables["participants"] = (
        [
            "participant", "level", "n_test_trials", "failed_epidural_rate",
            "success_rate", "dural_puncture_rate", "mean_abs_error_mm",
            "probe_count_mean", "probe_depth_mm_mean", "probe_rate_hz_mean",
        ],
        [
            [
                p.id, p.level, p.n_test_trials, p.rates["failed_epidural"],
                p.rates["success"], p.rates["dural_puncture"], p.mean_abs_error,
                p.probe_stats["probe_count"], p.probe_stats["probe_mean_depth_mm"],
                p.probe_stats["probe_mean_rate_hz"],
            ]
            for p in participants
        ],
    )

    levels = sorted({p.level for p in participants})

    # outcome-rate pies per level
    rows = []
    for lv in levels:
        members = [p for p in participants if p.level == lv]
        rows.append(
            [lv, len(members)]
            + [float(np.mean([p.rates[o] for p in members])) for o in _OUTCOMES]
        )
    report.tables["outcome_rates_by_level"] = (
        ["level", "n_participants", "failed_epidural_rate", "success_rate", "dural_puncture_rate"],
        rows,
    )

    # success-rate and error-size comparisons across levels
    report.stats["success_rate_by_level"] = _kw_across_levels(
        participants, lambda p: p.rates["success"], "success_rate", alpha
    )
    report.stats["abs_error_by_level"] = _kw_across_levels(
        participants, lambda p: p.mean_abs_error, "abs_error", alpha
    )

    # failed epidural vs dural puncture within each level
    fe_dp = {}
    for lv in levels:
        members = [p for p in participants if p.level == lv]
        diffs = [p.rates["failed_epidural"] - p.rates["dural_puncture"] for p in members]
        fe_dp[f"level_{lv}"] = wilcoxon_signed_rank(diffs).as_dict()
    report.stats["failed_epidural_vs_dural_puncture"] = fe_dp

    # probing strategy by level and by outcome
    for key, label in zip(_PROBE_KEYS, ("count", "depth", "rate")):
        report.stats[f"probe_{label}_by_level"] = _kw_across_levels(
            participants, lambda p, k=key: p.probe_stats.get(k), key, alpha
        )
        report.stats[f"probe_{label}_by_outcome"] = _kw_across_outcomes(
            participants, key, alpha
        )

    rows = []
    for lv in levels:
        members = [p for p in participants if p.level == lv]
        values = {k: [p.probe_stats[k] for p in members] for k in _PROBE_KEYS}
        row = [lv, len(members)]
        for k in _PROBE_KEYS:
            mean = _mean_or_none(values[k])
            lo, hi = ci(values[k])
            row += [mean, lo, hi]
        rows.append(row)
    report.tables["probe_stats_by_level"] = (
        ["level", "n_participants",
         "probe_count_mean", "probe_count_ci_lo", "probe_count_ci_hi",
         "probe_depth_mm_mean", "probe_depth_ci_lo", "probe_depth_ci_hi",
         "probe_rate_hz_mean", "probe_rate_ci_lo", "probe_rate_ci_hi"],
        rows,
    )

    rows = []
    for outcome in _OUTCOMES:
        values = {
            k: [p.probe_by_outcome[outcome][k] for p in participants if outcome in p.probe_by_outcome]
            for k in _PROBE_KEYS
        }
        n = len([p for p in participants if outcome in p.probe_by_outcome])
        if n == 0:
            continue
        row = [outcome, n]
        for k in _PROBE_KEYS:
            mean = _mean_or_none(values[k])
            lo, hi = ci(values[k])
            row += [mean, lo, hi]
        rows.append(row)
    report.tables["probe_stats_by_outcome"] = (
        ["outcome", "n_participants",
         "probe_count_mean", "probe_count_ci_lo", "probe_count_ci_hi",
         "probe_depth_mm_mean", "probe_depth_ci_lo", "probe_depth_ci_hi",
         "probe_rate_hz_mean", "probe_rate_ci_lo", "probe_rate_ci_hi"],
        rows,
    )

    # exploratory per-layer tables (no hypothesis tests)
    density_rows, speed_rows = [], []
    for lv in levels:
        members = [p for p in participants if p.level == lv]
        for layer in _LAYERS:
            densities = [p.layer_density[layer] for p in members]
            mean = _mean_or_none(densities)
            lo, hi = ci(densities)
            density_rows.append([lv, layer, len(members), mean, lo, hi])
            speeds = [p.layer_speed[layer] for p in members if p.layer_speed[layer] is not None]
            if speeds:
                lo, hi = ci(speeds)
                speed_rows.append([lv, layer, len(speeds), float(np.mean(speeds)), lo, hi])
    report.tables["layer_probe_density_by_level"] = (
        ["level", "layer", "n_participants", "probes_per_mm_mean", "ci_lo", "ci_hi"],
        density_rows,
    )
    report.tables["layer_velocity_by_level"] = (
        ["level", "layer", "n_participants", "mean_speed_mm_s", "ci_lo", "ci_hi"],
        speed_rows,
    )

    # questionnaire summary
    vas_rows = vas_report(profiles, n_resamples=n_resamples, seed=seed)
    report.tables["vas_by_group"] = (
        ["group", "question", "n", "mean_mm", "ci_lo", "ci_hi"],
        [[r["group"], r["question"], r["n"], r["mean"], r["ci_lo"], r["ci_hi"]] for r in vas_rows],
    )
    return report


def study_report(
    records,
    profiles: list[ParticipantProfile],
    params: ProbeDetectionParams = ProbeDetectionParams(),
    **kwargs,
) -> StudyReport:
    """Convenience wrapper: analyse records, then build the report bundle."""
    return build_study_report(metrics_table(records, params=params), profiles, **kwargs)
