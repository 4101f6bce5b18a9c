"""Statistics tests against brute-force enumeration oracles.

The oracles below recompute exact p-values by enumerating every subset
assignment (rank-sum) or sign pattern (signed-rank) directly, independent of
the library's counting implementation.
"""

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epidusim.stats import (
    ParticipantProfile,
    Position,
    StatResult,
    assign_level,
    bonferroni,
    bootstrap_ci,
    kruskal_wallis,
    read_profiles_csv,
    vas_report,
    wilcoxon_rank_sum,
    wilcoxon_signed_rank,
)


def midranks(values):
    """Average ranks with ties, 1-based, computed by sorting."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def oracle_rank_sum_p(a, b):
    """Exact two-sided p by enumerating all C(n+m, n) group assignments."""
    pooled = list(a) + list(b)
    ranks = midranks(pooled)
    n = len(a)
    observed = sum(ranks[:n])
    sums = [sum(ranks[i] for i in combo) for combo in itertools.combinations(range(len(pooled)), n)]
    eps = 1e-9
    below = sum(s <= observed + eps for s in sums)
    above = sum(s >= observed - eps for s in sums)
    return min(1.0, 2.0 * min(below, above) / len(sums))


def oracle_signed_rank_p(diffs):
    """Exact two-sided p by enumerating all 2^n sign patterns."""
    d = [x for x in diffs if x != 0]
    if not d:
        return 1.0
    ranks = midranks([abs(x) for x in d])
    w_plus = sum(r for r, x in zip(ranks, d) if x > 0)
    w_minus = sum(r for r, x in zip(ranks, d) if x < 0)
    sums = [
        sum(r for r, sign in zip(ranks, pattern) if sign > 0)
        for pattern in itertools.product((1, -1), repeat=len(d))
    ]
    eps = 1e-9
    below_plus = sum(s <= w_plus + eps for s in sums)
    below_minus = sum(s <= w_minus + eps for s in sums)
    return min(1.0, 2.0 * min(below_plus, below_minus) / len(sums))


class TestKruskalWallis:
    def test_identical_groups(self):
        res = kruskal_wallis([[4.0, 4.0], [4.0, 4.0], [4.0, 4.0]])
        assert res.statistic == 0.0
        assert res.p_value == 1.0

    def test_textbook_three_groups(self):
        res = kruskal_wallis([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
        # hand rank computation: rank sums 6, 15, 24 over N=9
        h = 12.0 / (9 * 10) * (36 / 3 + 225 / 3 + 576 / 3) - 3 * 10
        assert res.statistic == pytest.approx(h, abs=1e-12)
        assert res.p_value == pytest.approx(math.exp(-h / 2.0), rel=1e-12)
        assert res.p_value < 0.05
        assert res.df == 2

    def test_two_groups_equals_squared_rank_sum_z(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            a = rng.integers(0, 6, size=12).astype(float)
            b = rng.integers(2, 8, size=15).astype(float)
            kw = kruskal_wallis([a, b])
            rs = wilcoxon_rank_sum(a, b, exact_threshold=0)  # force normal branch
            n, m = len(a), len(b)
            pooled = np.concatenate([a, b])
            from scipy.stats import rankdata

            u = rankdata(pooled)[:n].sum() - n * (n + 1) / 2
            _, counts = np.unique(pooled, return_counts=True)
            ties = float(np.sum(counts.astype(float) ** 3 - counts))
            nt = n + m
            sigma2 = n * m / 12.0 * ((nt + 1) - ties / (nt * (nt - 1)))
            z = (u - n * m / 2.0) / math.sqrt(sigma2)
            assert kw.df == 1
            assert kw.statistic == pytest.approx(z * z, abs=1e-12)
            assert kw.p_value == pytest.approx(rs.p_value, abs=1e-12)

    def test_rejects_empty_or_single(self):
        with pytest.raises(ValueError):
            kruskal_wallis([[1.0, 2.0]])
        with pytest.raises(ValueError):
            kruskal_wallis([[1.0], []])


class TestWilcoxonRankSum:
    def test_disjoint_small_groups(self):
        res = wilcoxon_rank_sum([1, 2, 3], [4, 5, 6])
        assert res.statistic == 0.0
        assert res.method == "exact"
        assert res.p_value == pytest.approx(0.1, abs=1e-15)

    def test_identical_samples(self):
        res = wilcoxon_rank_sum([2, 2, 2], [2, 2, 2])
        assert res.p_value == 1.0

    def test_exact_matches_enumeration_oracle(self):
        rng = np.random.default_rng(42)
        for n in range(2, 9):
            for m in range(2, 9):
                # integer data so ties occur often
                a = rng.integers(0, 5, size=n).astype(float).tolist()
                b = rng.integers(0, 5, size=m).astype(float).tolist()
                got = wilcoxon_rank_sum(a, b)
                assert got.method == "exact"
                assert got.p_value == pytest.approx(oracle_rank_sum_p(a, b), abs=1e-12), (a, b)

    def test_normal_branch_reasonable(self):
        rng = np.random.default_rng(0)
        a = rng.normal(0, 1, size=30)
        b = rng.normal(1.2, 1, size=35)
        res = wilcoxon_rank_sum(a, b)
        assert res.method == "normal"
        assert res.p_value < 0.01

    def test_bonferroni(self):
        assert bonferroni([0.02, 0.5], m=3) == [pytest.approx(0.06), 1.0]
        assert bonferroni([0.4, 0.5]) == [pytest.approx(0.8), 1.0]
        with pytest.raises(ValueError):
            bonferroni([0.1, 0.2, 0.3], m=2)


class TestWilcoxonSignedRank:
    def test_all_positive_small(self):
        res = wilcoxon_signed_rank([1.0, 2.0, 3.0])
        assert res.statistic == 0.0
        assert res.p_value == pytest.approx(0.25, abs=1e-15)

    def test_all_zero(self):
        res = wilcoxon_signed_rank([0.0, 0.0, 0.0])
        assert res.p_value == 1.0
        assert res.method == "degenerate"

    def test_antisymmetric_pair(self):
        res = wilcoxon_signed_rank([-1.0, 1.0])
        assert res.p_value == 1.0

    def test_exact_matches_enumeration_oracle(self):
        rng = np.random.default_rng(7)
        for n in range(1, 9):
            for _ in range(10):
                d = rng.integers(-4, 5, size=n).astype(float).tolist()
                got = wilcoxon_signed_rank(d)
                assert got.p_value == pytest.approx(oracle_signed_rank_p(d), abs=1e-12), d

    def test_normal_branch(self):
        rng = np.random.default_rng(3)
        d = rng.normal(0.8, 1.0, size=40)
        res = wilcoxon_signed_rank(d)
        assert res.method == "normal"
        assert res.p_value < 0.05


class TestMonotoneTransformInvariance:
    def test_cubic_transform_preserves_rank_tests(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            sizes = rng.integers(3, 7, size=3)
            groups = [rng.normal(rng.uniform(-1, 1), 1, size=s).tolist() for s in sizes]
            cubed = [[x**3 for x in g] for g in groups]
            kw_a, kw_b = kruskal_wallis(groups), kruskal_wallis(cubed)
            assert kw_a.statistic == kw_b.statistic
            assert kw_a.p_value == kw_b.p_value
            rs_a = wilcoxon_rank_sum(groups[0], groups[1])
            rs_b = wilcoxon_rank_sum(cubed[0], cubed[1])
            assert rs_a.statistic == rs_b.statistic
            assert rs_a.p_value == rs_b.p_value


class TestBootstrap:
    def test_constant_data(self):
        assert bootstrap_ci([5.0, 5.0, 5.0, 5.0], seed=0) == (5.0, 5.0)

    def test_two_point_support(self):
        lo, hi = bootstrap_ci([0.0, 10.0], n_resamples=200000, seed=1)
        assert lo == 0.0 and hi == 10.0

    def test_deterministic_under_seed(self):
        data = [1.0, 4.0, 2.0, 8.0, 5.0]
        assert bootstrap_ci(data, seed=99) == bootstrap_ci(data, seed=99)

    def test_endpoints_within_sample_range(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            data = rng.normal(0, 3, size=rng.integers(2, 30))
            lo, hi = bootstrap_ci(data, n_resamples=500, seed=0)
            assert data.min() <= lo <= hi <= data.max()

    def test_matches_reference_implementation(self):
        from scipy.stats import bootstrap as scipy_bootstrap

        data = np.array([2.1, 3.5, 1.2, 6.7, 4.4, 5.0, 2.8, 3.9, 7.1, 0.5])
        lo, hi = bootstrap_ci(data, n_resamples=20000, seed=3)
        ref = scipy_bootstrap(
            (data,),
            np.mean,
            n_resamples=20000,
            method="percentile",
            random_state=np.random.default_rng(17),
        ).confidence_interval
        assert lo == pytest.approx(ref.low, abs=0.1)
        assert hi == pytest.approx(ref.high, abs=0.1)

    def test_custom_statistic(self):
        data = [1.0, 2.0, 3.0, 4.0, 100.0]
        lo, hi = bootstrap_ci(data, statistic=np.median, n_resamples=2000, seed=5)
        assert 1.0 <= lo <= hi <= 100.0


class TestLevelAssignment:
    # the three grading-table rows, pure
    @pytest.mark.parametrize(
        "years,epidurals,position,expected",
        [
            (0.5, 30, Position.RESIDENT, 1),
            (2.0, 100, Position.UNSPECIFIED, 2),
            (5.0, 400, Position.ATTENDING, 3),
            # mixed cases, derived by the stated averaging rule
            (4.0, 100, Position.ATTENDING, 3),  # mean(3,2,3)=2.67 -> 3
            (0.5, 400, Position.RESIDENT, 2),  # mean(1,3,1)=1.67 -> 2
            (4.0, 30, Position.ATTENDING, 2),  # mean(3,1,3)=2.33 -> 2
        ],
    )
    def test_assignment_cases(self, years, epidurals, position, expected):
        profile = ParticipantProfile("x", years, epidurals, position)
        assert assign_level(profile) == expected

    def test_bin_boundaries(self):
        assert assign_level(ParticipantProfile("x", 1.0, 50)) == 1
        assert assign_level(ParticipantProfile("x", 1.0001, 51)) == 2
        assert assign_level(ParticipantProfile("x", 3.0, 300)) == 2
        assert assign_level(ParticipantProfile("x", 3.0001, 301)) == 3

    def test_half_rounds_up(self):
        # mean(1,2) = 1.5 -> 2
        assert assign_level(ParticipantProfile("x", 0.5, 100)) == 2

    def test_no_category_resolvable(self):
        with pytest.raises(ValueError, match="gradable"):
            assign_level(ParticipantProfile("x", None, None, Position.UNSPECIFIED))

    @given(
        years=st.floats(min_value=0, max_value=40, allow_nan=False),
        epidurals=st.integers(min_value=0, max_value=5000),
        position=st.sampled_from([Position.RESIDENT, Position.ATTENDING, Position.UNSPECIFIED]),
        bump_years=st.floats(min_value=0, max_value=10, allow_nan=False),
        bump_epidurals=st.integers(min_value=0, max_value=1000),
    )
    @settings(max_examples=200, deadline=None)
    def test_monotone_in_each_category(self, years, epidurals, position, bump_years, bump_epidurals):
        base = assign_level(ParticipantProfile("x", years, epidurals, position))
        assert assign_level(ParticipantProfile("x", years + bump_years, epidurals, position)) >= base
        assert assign_level(ParticipantProfile("x", years, epidurals + bump_epidurals, position)) >= base
        if position is Position.RESIDENT:
            assert assign_level(ParticipantProfile("x", years, epidurals, Position.ATTENDING)) >= base


class TestVasReport:
    def make_profiles(self):
        return [
            ParticipantProfile("a", 1, 20, Position.RESIDENT, {"skin": 60.0, "overall": 70.0}),
            ParticipantProfile("b", 2, 499, Position.UNSPECIFIED, {"skin": 50.0, "overall": 80.0}),
            ParticipantProfile("c", 10, 500, Position.ATTENDING, {"skin": 90.0, "overall": 85.0}),
            ParticipantProfile("d", 12, 2000, Position.ATTENDING, {"skin": 70.0}),
            ParticipantProfile("e", 3, 100, Position.UNSPECIFIED, None),  # no responses
        ]

    def test_grouping_and_means(self):
        rows = vas_report(self.make_profiles(), n_resamples=500, seed=0)
        by_key = {(r["group"], r["question"]): r for r in rows}
        assert by_key[("inexperienced", "skin")]["n"] == 2
        assert by_key[("inexperienced", "skin")]["mean"] == pytest.approx(55.0)
        assert by_key[("experienced", "skin")]["n"] == 2
        assert by_key[("experienced", "skin")]["mean"] == pytest.approx(80.0)
        assert by_key[("experienced", "overall")]["n"] == 1
        # participant e contributes nowhere
        assert sum(r["n"] for r in rows if r["question"] == "overall") == 3

    def test_ci_bounds_scores(self):
        rows = vas_report(self.make_profiles(), n_resamples=500, seed=0)
        for row in rows:
            assert 0.0 <= row["ci_lo"] <= row["mean"] <= row["ci_hi"] <= 100.0


class TestProfilesCsv:
    def test_roundtrip(self, tmp_path):
        path = tmp_path / "profiles.csv"
        path.write_text(
            "participant,years_experience,n_epidurals_estimate,position,vas_skin,vas_overall\n"
            "p1,0.5,30,resident,60,70\n"
            "p2,2,,\" \",50,\n"
            "p3,12,2000,Attending,,\n"
        )
        profiles = read_profiles_csv(path)
        assert profiles[0].position is Position.RESIDENT
        assert profiles[0].vas_responses == {"skin": 60.0, "overall": 70.0}
        assert profiles[1].n_epidurals_estimate is None
        assert profiles[1].position is Position.UNSPECIFIED
        assert profiles[1].vas_responses == {"skin": 50.0}
        assert profiles[2].position is Position.ATTENDING
        assert profiles[2].vas_responses is None

    def test_validation(self):
        with pytest.raises(ValueError):
            ParticipantProfile("x", -1, 10)
        with pytest.raises(ValueError):
            ParticipantProfile("x", 1, 10, vas_responses={"skin": 130.0})
        with pytest.raises(ValueError):
            StatResult("t", 0.0, None, 1.5)
