"""Nonparametric statistics and participant-grading machinery.

Rank tests use midranks for ties.  Small samples get exact p-values from
the full conditional permutation distribution (computed by subset-sum
counting over the observed ranks); larger samples use the normal or
chi-square approximation with tie-corrected variance.  All tests are
two-sided.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import chi2, norm, rankdata

__all__ = [
    "Position",
    "ParticipantProfile",
    "StatResult",
    "assign_level",
    "bootstrap_ci",
    "kruskal_wallis",
    "wilcoxon_rank_sum",
    "wilcoxon_signed_rank",
    "bonferroni",
    "vas_report",
    "read_profiles_csv",
    "EXPERIENCED_EPIDURAL_THRESHOLD",
]


class Position(enum.Enum):
    RESIDENT = "resident"
    ATTENDING = "attending"
    UNSPECIFIED = "unspecified"


@dataclass(frozen=True)
class ParticipantProfile:
    """Background questionnaire data for one participant."""

    id: str
    years_experience: float | None = None
    n_epidurals_estimate: float | None = None
    position: Position = Position.UNSPECIFIED
    vas_responses: dict[str, float] | None = None

    def __post_init__(self) -> None:
        if self.years_experience is not None and self.years_experience < 0:
            raise ValueError("years_experience must be >= 0")
        if self.n_epidurals_estimate is not None and self.n_epidurals_estimate < 0:
            raise ValueError("n_epidurals_estimate must be >= 0")
        if self.vas_responses:
            for question, score in self.vas_responses.items():
                if not 0.0 <= score <= 100.0:
                    raise ValueError(f"VAS score for {question!r} outside [0, 100]: {score}")


@dataclass(frozen=True)
class StatResult:
    """One hypothesis-test outcome."""

    test: str
    statistic: float
    df: int | None
    p_value: float
    method: str = ""
    post_hoc: dict[str, float] | None = None

    def __post_init__(self) -> None:
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value outside [0, 1]: {self.p_value}")

    def as_dict(self) -> dict:
        out = {
            "test": self.test,
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "method": self.method,
        }
        if self.post_hoc is not None:
            out["post_hoc"] = dict(self.post_hoc)
        return out


# ---------------------------------------------------------------------------
# level assignment

def _years_level(years: float) -> int:
    if years <= 1.0:
        return 1
    if years <= 3.0:
        return 2
    return 3


def _epidurals_level(count: float) -> int:
    if count <= 50:
        return 1
    if count <= 300:
        return 2
    return 3


def assign_level(profile: ParticipantProfile) -> int:
    """Overall competency level 1-3: mean of category levels, half rounds up.

    Categories: years of experience (0-1, 1+-3, over 3), estimated epidurals
    performed (0-50, 50+-300, over 300), and position (resident -> 1,
    attending -> 3; unspecified contributes nothing).
    """
    levels = []
    if profile.years_experience is not None:
        levels.append(_years_level(profile.years_experience))
    if profile.n_epidurals_estimate is not None:
        levels.append(_epidurals_level(profile.n_epidurals_estimate))
    if profile.position is Position.RESIDENT:
        levels.append(1)
    elif profile.position is Position.ATTENDING:
        levels.append(3)
    if not levels:
        raise ValueError(f"participant {profile.id!r}: no gradable category")
    return int(math.floor(sum(levels) / len(levels) + 0.5))


# ---------------------------------------------------------------------------
# bootstrap

def bootstrap_ci(
    samples,
    statistic=np.mean,
    n_resamples: int = 10000,
    seed=None,
    confidence: float = 0.95,
) -> tuple[float, float]:
    """Percentile bootstrap confidence interval for a statistic.

    Resamples with replacement ``n_resamples`` times and returns the
    (alpha/2, 1-alpha/2) percentiles of the resampled statistics.
    Deterministic for a given seed.
    """
    data = np.asarray(samples, dtype=float)
    if data.size == 0:
        raise ValueError("bootstrap_ci needs at least one sample")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, data.size, size=(n_resamples, data.size))
    try:
        stats = np.asarray(statistic(data[idx], axis=1), dtype=float)
    except TypeError:
        stats = np.array([float(statistic(data[row])) for row in idx])
    alpha = (1.0 - confidence) / 2.0
    lo, hi = np.percentile(stats, [100.0 * alpha, 100.0 * (1.0 - alpha)])
    return float(lo), float(hi)


# ---------------------------------------------------------------------------
# rank tests

def _tie_term(values: np.ndarray) -> float:
    """Sum of t^3 - t over groups of tied values."""
    _, counts = np.unique(values, return_counts=True)
    return float(np.sum(counts.astype(float) ** 3 - counts))


def _doubled_ranks(values: np.ndarray) -> np.ndarray:
    """Midranks doubled to exact integers (midranks are multiples of 1/2)."""
    doubled = np.rint(2.0 * rankdata(values)).astype(np.int64)
    return doubled


def _subset_sum_counts(items: np.ndarray, size: int) -> np.ndarray:
    """counts[s] = number of ``size``-subsets of ``items`` with sum s."""
    total = int(items.sum())
    dp = np.zeros((size + 1, total + 1), dtype=np.int64)
    dp[0, 0] = 1
    for r in items:
        r = int(r)
        for j in range(size, 0, -1):
            dp[j, r:] += dp[j - 1, : total + 1 - r]
    return dp[size]


def _any_subset_sum_counts(items: np.ndarray) -> np.ndarray:
    """counts[s] = number of subsets (any size) of ``items`` with sum s."""
    total = int(items.sum())
    dp = np.zeros(total + 1, dtype=np.int64)
    dp[0] = 1
    for r in items:
        r = int(r)
        dp[r:] += dp[: total + 1 - r].copy()
    return dp


def _two_sided_from_counts(counts: np.ndarray, observed: int, total: int) -> float:
    below = int(counts[: observed + 1].sum())
    above = int(counts[observed:].sum())
    return min(1.0, 2.0 * min(below, above) / total)


def kruskal_wallis(groups) -> StatResult:
    """Kruskal-Wallis H test across two or more groups.

    H uses midranks with the standard tie correction; the p-value comes from
    the chi-square upper tail with k-1 degrees of freedom.
    """
    groups = [np.asarray(g, dtype=float) for g in groups]
    if len(groups) < 2:
        raise ValueError("kruskal_wallis needs at least two groups")
    if any(g.size == 0 for g in groups):
        raise ValueError("kruskal_wallis groups must be non-empty")
    pooled = np.concatenate(groups)
    n_total = pooled.size
    ranks = rankdata(pooled)
    h = 0.0
    offset = 0
    for g in groups:
        r_sum = ranks[offset : offset + g.size].sum()
        h += r_sum * r_sum / g.size
        offset += g.size
    h = 12.0 / (n_total * (n_total + 1.0)) * h - 3.0 * (n_total + 1.0)
    correction = 1.0 - _tie_term(pooled) / (n_total**3 - n_total)
    df = len(groups) - 1
    if correction <= 0.0:
        return StatResult("kruskal-wallis", 0.0, df, 1.0, method="degenerate")
    h /= correction
    p = float(chi2.sf(h, df))
    return StatResult("kruskal-wallis", float(h), df, p, method="chi-square")


def wilcoxon_rank_sum(a, b, exact_threshold: int = 10) -> StatResult:
    """Two-sided Wilcoxon rank-sum (Mann-Whitney) test.

    Exact p by counting over the conditional permutation distribution of the
    observed midranks when both groups have at most ``exact_threshold``
    observations; tie-corrected normal approximation otherwise.  The
    statistic is U for the first group.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size == 0 or b.size == 0:
        raise ValueError("wilcoxon_rank_sum groups must be non-empty")
    n, m = a.size, b.size
    pooled = np.concatenate([a, b])
    ranks = rankdata(pooled)
    r_a = float(ranks[:n].sum())
    u = r_a - n * (n + 1) / 2.0

    if max(n, m) <= exact_threshold:
        doubled = _doubled_ranks(pooled)
        counts = _subset_sum_counts(doubled, n)
        observed = int(round(2.0 * r_a))
        p = _two_sided_from_counts(counts, observed, math.comb(n + m, n))
        return StatResult("wilcoxon-rank-sum", u, None, p, method="exact")

    n_total = n + m
    sigma2 = n * m / 12.0 * ((n_total + 1.0) - _tie_term(pooled) / (n_total * (n_total - 1.0)))
    if sigma2 <= 0.0:
        return StatResult("wilcoxon-rank-sum", u, None, 1.0, method="degenerate")
    z = (u - n * m / 2.0) / math.sqrt(sigma2)
    p = float(2.0 * norm.sf(abs(z)))
    return StatResult("wilcoxon-rank-sum", u, None, min(p, 1.0), method="normal")


def wilcoxon_signed_rank(differences, exact_threshold: int = 12) -> StatResult:
    """Two-sided Wilcoxon signed-rank test on paired differences.

    Zero differences are dropped.  Exact p by counting over all sign
    assignments of the observed midranks when at most ``exact_threshold``
    non-zero differences remain; tie-corrected normal approximation
    otherwise.  The statistic is the smaller signed-rank sum.
    """
    d = np.asarray(differences, dtype=float)
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        return StatResult("wilcoxon-signed-rank", 0.0, None, 1.0, method="degenerate")
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    stat = min(w_plus, w_minus)

    if n <= exact_threshold:
        doubled = _doubled_ranks(np.abs(d))
        counts = _any_subset_sum_counts(doubled)
        total = 2**n
        below_plus = int(counts[: int(round(2 * w_plus)) + 1].sum())
        below_minus = int(counts[: int(round(2 * w_minus)) + 1].sum())
        p = min(1.0, 2.0 * min(below_plus, below_minus) / total)
        return StatResult("wilcoxon-signed-rank", stat, None, p, method="exact")

    mu = n * (n + 1) / 4.0
    sigma2 = n * (n + 1) * (2 * n + 1) / 24.0 - _tie_term(np.abs(d)) / 48.0
    if sigma2 <= 0.0:
        return StatResult("wilcoxon-signed-rank", stat, None, 1.0, method="degenerate")
    z = (w_plus - mu) / math.sqrt(sigma2)
    p = float(2.0 * norm.sf(abs(z)))
    return StatResult("wilcoxon-signed-rank", stat, None, min(p, 1.0), method="normal")


def bonferroni(p_values, m: int | None = None) -> list[float]:
    """Bonferroni adjustment: each p multiplied by m, capped at 1."""
    ps = list(p_values)
    if m is None:
        m = len(ps)
    if m < len(ps):
        raise ValueError("m must be at least the number of p-values")
    return [min(1.0, p * m) for p in ps]


# ---------------------------------------------------------------------------
# questionnaires

# Participants at or above this estimated case count form the experienced
# group for questionnaire analysis.
EXPERIENCED_EPIDURAL_THRESHOLD = 500


def vas_report(
    profiles,
    n_resamples: int = 10000,
    seed=0,
) -> list[dict]:
    """Group questionnaire means with bootstrap CIs.

    Participants with at least 500 estimated epidurals form the experienced
    group, the rest the inexperienced group; participants without responses
    are excluded.  One row per (group, question) with the mean score and its
    95% bootstrap confidence interval.
    """
    responding = [p for p in profiles if p.vas_responses]
    groups = {
        "inexperienced": [
            p for p in responding
            if (p.n_epidurals_estimate or 0) < EXPERIENCED_EPIDURAL_THRESHOLD
        ],
        "experienced": [
            p for p in responding
            if (p.n_epidurals_estimate or 0) >= EXPERIENCED_EPIDURAL_THRESHOLD
        ],
    }
    questions = sorted({q for p in responding for q in p.vas_responses})
    rows = []
    cell = 0
    for group_name, members in groups.items():
        for question in questions:
            scores = [
                p.vas_responses[question] for p in members if question in p.vas_responses
            ]
            if not scores:
                continue
            lo, hi = bootstrap_ci(
                scores,
                n_resamples=n_resamples,
                seed=np.random.SeedSequence([_entropy(seed), cell]),
            )
            rows.append(
                {
                    "group": group_name,
                    "question": question,
                    "n": len(scores),
                    "mean": float(np.mean(scores)),
                    "ci_lo": lo,
                    "ci_hi": hi,
                }
            )
            cell += 1
    return rows


def _entropy(seed) -> int:
    return int(seed) if seed is not None else 0


# ---------------------------------------------------------------------------
# profile CSV ingestion

def read_profiles_csv(path: str | Path) -> list[ParticipantProfile]:
    """Load participant profiles from CSV.

    Expected header: ``participant, years_experience, n_epidurals_estimate,
    position`` plus any number of ``vas_<question>`` score columns.  Blank
    cells mean "not reported".
    """
    profiles = []
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "participant" not in reader.fieldnames:
            raise ValueError(f"{path}: profiles CSV needs a 'participant' column")
        for raw in reader:
            vas = {}
            for key, value in raw.items():
                if key.startswith("vas_") and value not in (None, ""):
                    vas[key[len("vas_"):]] = float(value)
            position = (raw.get("position") or "").strip().lower()
            profiles.append(
                ParticipantProfile(
                    id=raw["participant"],
                    years_experience=_opt_float(raw.get("years_experience")),
                    n_epidurals_estimate=_opt_float(raw.get("n_epidurals_estimate")),
                    position=Position(position) if position in ("resident", "attending")
                    else Position.UNSPECIFIED,
                    vas_responses=vas or None,
                )
            )
    return profiles


def _opt_float(value) -> float | None:
    if value is None or value == "":
        return None
    return float(value)
