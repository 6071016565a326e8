import itertools
import math
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from src.analysis import (
    FixLocations, Sample, bug_correlation, coefficient_of_variation, load_samples, overlap, overlap_many,
    parse_unified_diff, pearson, sample_subsets,
)
from src.coverage_model import CoverageMap, CoverageUnit, Granularity
from src.errors import (
    InvalidSample, LengthMismatch, MalformedHunkHeader, SizeTooLarge, TooFewValues, WrongGranularity,
    ZeroMean, ZeroVariance,
)
from src.metamorphic import TestPair, mc_suite

FIXTURES = Path(__file__).parent / "fixtures"


def columns(name):
    return {s.label: s for s in load_samples(FIXTURES / name)}


@pytest.mark.parametrize("name,mc,line", [
    ("sizes_sqlite.csv", 0.25, 0.02),
    ("sizes_duckdb.csv", 0.24, 0.02),
])


def test_cv_recomputes_published_table(name, mc, line):
    samples = columns(name)
    assert coefficient_of_variation(samples["mc"]) == pytest.approx(mc, abs=0.01)
    assert coefficient_of_variation(samples["line"]) == pytest.approx(line, abs=0.01)


def test_cv_uses_sample_standard_deviation():
    assert coefficient_of_variation([2.0, 4.0]) == pytest.approx(math.sqrt(2) / 3)


def test_cv_errors():
    with pytest.raises(TooFewValues):
        coefficient_of_variation([3.0])
    with pytest.raises(ZeroMean):
        coefficient_of_variation([-1.0, 1.0])
    with pytest.raises(InvalidSample):
        Sample("nan", [1.0, float("nan")])


def test_pearson_exact_for_linear_data():
    x = [0.1, 0.7, 1.3, 2.9, 3.3]
    assert pearson(x, [3 * v + 1 for v in x]) == 1.0
    assert pearson(x, [-0.2 * v for v in x]) == -1.0


def test_pearson_errors():
    with pytest.raises(LengthMismatch):
        pearson([1, 2, 3], [1, 2])
    with pytest.raises(TooFewValues):
        pearson([1], [2])
    with pytest.raises(ZeroVariance):
        pearson([1, 2, 3], [5, 5, 5])


def test_pearson_matches_direct_formula():
    rng = np.random.default_rng(3)
    for _ in range(100):
        n = int(rng.integers(3, 30))
        x = rng.normal(size=n)
        y = 0.5 * x + rng.normal(size=n)
        dx, dy = x - x.mean(), y - y.mean()
        expected = float((dx * dy).sum() / math.sqrt((dx * dx).sum() * (dy * dy).sum()))
        assert pearson(x, y) == pytest.approx(expected, abs=1e-12)


@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=20).filter(lambda v: max(v) - min(v) > 1e-3))
def test_pearson_is_bounded_and_symmetric(x):
    y = list(reversed(x))
    if max(y) - min(y) > 0:
        r = pearson(x, y)
        assert -1.0 <= r <= 1.0
        assert r == pytest.approx(pearson(y, x))


@pytest.mark.parametrize("scale", [0.001, 0.5, 3.0, 1e6])
def test_cv_is_scale_invariant(scale):
    values = [3.0, 4.5, 2.25, 8.0, 5.5]
    assert coefficient_of_variation([scale * v for v in values]) == pytest.approx(
        coefficient_of_variation(values), rel=1e-9)


def test_pearson_is_invariant_under_positive_affine_maps():
    rng = np.random.default_rng(11)
    for _ in range(50):
        x = rng.normal(size=12)
        y = x + rng.normal(size=12)
        a, c = rng.uniform(0.1, 10.0, size=2)
        b, d = rng.uniform(-100.0, 100.0, size=2)
        assert pearson(a * x + b, c * y + d) == pytest.approx(pearson(x, y), abs=1e-9)
        assert pearson(-a * x + b, y) == pytest.approx(-pearson(x, y), abs=1e-9)


def test_subsets_are_reproducible_and_without_replacement():
    items = list(range(10))
    first = sample_subsets(items, [3, 5], repeats=4, seed=9)
    assert first == sample_subsets(items, [3, 5], repeats=4, seed=9)
    assert len(first) == 8
    for subset in first:
        assert len(set(subset)) == len(subset)
    assert first != sample_subsets(items, [3, 5], repeats=4, seed=10)
    with pytest.raises(SizeTooLarge):
        sample_subsets(items, [11], repeats=1, seed=0)


def test_subsets_are_uniform():
    items = list("abcde")
    counts = Counter(sample_subsets(items, [2], repeats=10000, seed=0))
    assert set(counts) == set(itertools.combinations(items, 2))
    for subset, count in counts.items():
        assert count / 10000 == pytest.approx(0.1, abs=0.01), subset


def test_subset_of_every_item():
    items = [4, 1, 3]
    assert sample_subsets(items, [3], repeats=5, seed=2) == [(4, 1, 3)] * 5
    assert sample_subsets(items, [0], repeats=2, seed=2) == [(), ()]


def test_overlapping_fix_diff():
    fix = parse_unified_diff((FIXTURES / "overlapping_fix.diff").read_text())
    assert fix.lines == {"src/expr.c": frozenset({5038})}
    report = mc_suite([TestPair("t", [CoverageMap.of_lines("src/expr.c", [5038, 5040], range(5000, 5100))],
                                [CoverageMap.of_lines("src/expr.c", [5040], range(5000, 5100))])])
    result = overlap(report, fix)
    assert result.verdict == "overlapping"
    assert [u.locator for u in result.units] == [5038]


def test_unrelated_fix_diff():
    fix = parse_unified_diff((FIXTURES / "unrelated_fix.diff").read_text())
    assert fix.lines == {"src/expr.c": frozenset({123, 124})}
    report = mc_suite([TestPair("t", [CoverageMap.of_lines("src/expr.c", [5038], range(1, 6000))],
                                [CoverageMap.of_lines("src/expr.c", [], range(1, 6000))])])
    assert overlap(report, fix).verdict == "non_overlapping"
    results, count = overlap_many(report, {"unrelated": fix, "overlapping": parse_unified_diff(
        (FIXTURES / "overlapping_fix.diff").read_text())})
    assert count == 1
    assert results["overlapping"].overlapping


def test_deletion_only_hunk_records_anchor():
    diff = "--- a/x.c\n+++ b/x.c\n@@ -10,4 +10,3 @@\n a\n-b\n c\n d\n"
    assert parse_unified_diff(diff).lines == {"x.c": frozenset({11})}


def test_deleted_file_contributes_nothing():
    diff = "--- a/x.c\n+++ /dev/null\n@@ -1,2 +0,0 @@\n-a\n-b\n"
    assert parse_unified_diff(diff).is_empty()


def test_several_hunks_and_files():
    diff = ("--- a/x.c\n+++ b/x.c\n@@ -1,2 +1,3 @@\n a\n+b\n c\n@@ -20,1 +21,2 @@\n z\n+y\n"
            "--- a/y.c\n+++ b/y.c\n@@ -5 +5 @@\n-old\n+new\n")
    assert parse_unified_diff(diff).lines == {"x.c": frozenset({2, 22}), "y.c": frozenset({5})}


@pytest.mark.parametrize("diff", [
    "--- a/x.c\n+++ b/x.c\n@@ -1,2 +1,two @@\n a\n",
    "--- a/x.c\n+++ b/x.c\n@@ -1,3 +1,3 @@\n a\n",
    "--- a/x.c\n+++ b/x.c\n@@ -1,3 +1,3 @@\n a\n?b\n c\n",
])


def test_malformed_diffs(diff):
    with pytest.raises(MalformedHunkHeader):
        parse_unified_diff(diff, source="fix.diff")


def test_overlap_needs_line_granularity():
    unit = CoverageUnit.branch("x.c", 1, 0, 0)
    m = CoverageMap(Granularity.BRANCH, {unit}, {unit})
    e = CoverageMap(Granularity.BRANCH, (), {unit})
    report = mc_suite([TestPair("t", [m], [e])])
    with pytest.raises(WrongGranularity):
        overlap(report, FixLocations({"x.c": frozenset({1})}))


def test_overlap_matches_brute_force():
    rng = np.random.default_rng(5)
    universe = range(1, 101)
    for _ in range(500):
        a = set((np.flatnonzero(rng.random(100) < 0.2) + 1).tolist())
        b = set((np.flatnonzero(rng.random(100) < 0.2) + 1).tolist())
        fixed = set((rng.choice(100, size=int(rng.integers(1, 6)), replace=False) + 1).tolist())
        report = mc_suite([TestPair("t", [CoverageMap.of_lines("f.c", a, universe)],
                                    [CoverageMap.of_lines("f.c", b, universe)])])
        result = overlap(report, FixLocations({"f.c": frozenset(fixed)}))
        assert result.overlapping == bool((a ^ b) & fixed)


def test_overlap_grows_with_the_suite():
    rng = np.random.default_rng(8)
    universe = range(1, 61)
    fix = FixLocations({"f.c": frozenset({7, 33, 52})})
    pairs = []
    previous = ()
    for i in range(30):
        a = (np.flatnonzero(rng.random(60) < 0.1) + 1).tolist()
        b = (np.flatnonzero(rng.random(60) < 0.1) + 1).tolist()
        pairs.append(TestPair(f"t{i}", [CoverageMap.of_lines("f.c", a, universe)],
                              [CoverageMap.of_lines("f.c", b, universe)]))
        result = overlap(mc_suite(pairs), fix)
        assert set(previous) <= set(result.units)
        assert result.overlapping or not previous
        previous = result.units
    assert previous


def test_bug_correlation_is_reproducible():
    universe = range(1, 31)
    bugs = {}
    for i in range(8):
        bugs[f"bug{i}"] = TestPair(f"bug{i}", [CoverageMap.of_lines("f.c", {1, 2, 3 + i}, universe)],
                                   [CoverageMap.of_lines("f.c", {1, 2}, universe)])
    first = bug_correlation(bugs, [1, 2, 4, 6], repeats=5, seed=1)
    assert first == bug_correlation(bugs, [1, 2, 4, 6], repeats=5, seed=1)
    assert len(first.rows) == 20
    # バグ一つにつき MC が 1 行増えるので完全相関
    assert first.pcc_mc == 1.0


def test_load_samples_json(tmp_path):
    path = tmp_path / "s.json"
    path.write_text('{"samples": [{"label": "a", "values": [1, 2, 3]}]}')
    assert load_samples(path) == [Sample("a", (1.0, 2.0, 3.0))]
    path.write_text('{"samples": [{"label": "a", "values": ["x"]}]}')
    with pytest.raises(InvalidSample):
        load_samples(path)


def test_load_samples_csv_with_percent_and_ragged_columns(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("a,b\n1%,2\n3%,\n")
    samples = {s.label: s.values for s in load_samples(path)}
    assert samples == {"a": (1.0, 3.0), "b": (2.0,)}
