from pathlib import Path

import numpy as np
import pytest

from src.coverage_model import CoverageMap, CoverageUnit, Granularity
from src.errors import EmptySide, EmptySuite, GranularityMismatch, SchemaError, UniverseMismatch
from src.metamorphic import (
    TestPair, build_pairs, load_manifest, mc_pair, mc_suite, pair_from_paths, report_from_dict,
    report_to_dict,
)

FIXTURES = Path(__file__).parent / "fixtures"
LISTING = range(2, 8)


def lines(covered, universe=LISTING):
    return CoverageMap.of_lines("src/listing1.c", covered, universe)


def two_pair_suite():
    return [
        TestPair("t1", [lines({2, 4, 5, 6, 7})], [lines({2, 3, 4, 6, 7})]),
        TestPair("t2", [lines({2, 4, 5, 6, 7})], [lines({2, 4, 6, 7})]),
    ]


def test_two_pair_example_per_pair_and_suite():
    t1, t2 = two_pair_suite()
    assert mc_pair(t1).locators() == [3, 5]
    assert mc_pair(t2).locators() == [5]
    report = mc_suite([t1, t2])
    assert sorted(u.locator for u in report.suite_mc) == [3, 5]
    assert report.universe_size == 6
    assert round(report.mc_percent, 2) == 33.33
    assert report.union_coverage_percent == 100.0


def test_two_pair_example_from_manifest():
    for name in ("example_manifest.json", "example_manifest.yaml"):
        pairs = build_pairs(load_manifest(FIXTURES / name))
        assert [p.id for p in pairs] == ["t1", "t2"]
        assert sorted(u.locator for u in mc_suite(pairs).suite_mc) == [3, 5]


def test_identical_sides_give_empty_mc():
    t = TestPair("same", [lines({2, 3})], [lines({2, 3})])
    assert not mc_pair(t).covered
    assert mc_suite([t]).mc_percent == 0.0


def test_side_with_several_inputs_is_a_union():
    t = TestPair("multi", [lines({2}), lines({3})], [lines({2, 3, 4})])
    assert mc_pair(t).locators() == [4]


def test_pair_is_order_independent():
    t1, _ = two_pair_suite()
    assert mc_pair(t1) == mc_pair(t1.swapped())


def test_suite_is_order_independent():
    pairs = two_pair_suite()
    assert mc_suite(pairs).suite_mc == mc_suite(pairs[::-1]).suite_mc


def test_empty_side_and_suite():
    with pytest.raises(EmptySide):
        TestPair("x", [], [lines({2})])
    with pytest.raises(EmptySuite):
        mc_suite([])


def test_mixed_granularity_pair():
    branch = CoverageMap(Granularity.BRANCH, (), {CoverageUnit.branch("a.c", 1, 0, 0)})
    with pytest.raises(GranularityMismatch):
        TestPair("x", [lines({2})], [branch])


def test_universe_mismatch_strict_and_lenient(caplog):
    t = TestPair("x", [lines({2}, [2, 3])], [lines({2}, [2, 3, 4])])
    with pytest.raises(UniverseMismatch):
        mc_pair(t)
    with caplog.at_level("WARNING"):
        assert not mc_pair(t, strict=False).covered
    assert "universes differ" in caplog.text


def test_suite_universe_mismatch_across_pairs():
    a = TestPair("a", [lines({2})], [lines({3})])
    b = TestPair("b", [lines({2}, [2, 3, 9])], [lines({9}, [2, 3, 9])])
    with pytest.raises(UniverseMismatch):
        mc_suite([a, b])
    assert mc_suite([a, b], strict=False).universe_size == 7


def test_per_pair_cap_marks_truncation():
    t = TestPair("wide", [lines(set(LISTING))], [lines(set())])
    entry = mc_suite([t], max_units_per_pair=2).pairs[0]
    assert entry.mc_size == 6
    assert len(entry.mc_units) == 2
    assert entry.truncated


def test_report_schema_and_round_trip():
    report = mc_suite(two_pair_suite())
    doc = report_to_dict(report)
    assert list(doc) == ["format", "version", "granularity", "universe_size", "mc_percent",
                         "union_coverage_percent", "suite_mc", "pairs", "provenance"]
    assert doc["mc_percent"] == 33.33
    assert doc["suite_mc"] == [{"path": "src/listing1.c", "loc": 3}, {"path": "src/listing1.c", "loc": 5}]
    assert doc["provenance"]["pair_order"] == "metadata-only"
    back = report_from_dict(doc)
    assert back.suite_mc == report.suite_mc
    assert [e.id for e in back.pairs] == ["t1", "t2"]


def test_report_from_dict_rejects_other_documents():
    with pytest.raises(SchemaError):
        report_from_dict({"format": "mccov", "version": 1})


@pytest.mark.parametrize("path, value", [
    (("pairs", 0, "mc_size"), "many"),
    (("pairs", 0, "mc_size"), 1),
    (("pairs", 0, "mc_units"), None),
    (("pairs", 0, "truncated"), "no"),
    (("universe_size",), "6"),
    (("mc_percent",), None),
    (("union_coverage_percent",), True),
    (("provenance",), []),
])
def test_report_from_dict_rejects_bad_fields(path, value):
    doc = report_to_dict(mc_suite(two_pair_suite()))
    target = doc
    for key in path[:-1]:
        target = target[key]
    target[path[-1]] = value
    with pytest.raises(SchemaError, match="saved.json"):
        report_from_dict(doc, source="saved.json")


def test_pair_from_paths_matches_manifest():
    single = pair_from_paths("t1", [FIXTURES / "example_t1a.info"], [FIXTURES / "example_t1b.info"])
    assert mc_pair(single).locators() == [3, 5]


def test_manifest_schema_errors(tmp_path):
    bad = tmp_path / "m.json"
    bad.write_text('{"pairs": [{"id": "x", "a": "one.info", "b": []}]}')
    with pytest.raises(SchemaError, match=r"pairs\[0\]\.a"):
        load_manifest(bad)
    bad.write_text('{"cases": []}')
    with pytest.raises(SchemaError):
        load_manifest(bad)


def test_suite_matches_brute_force_union():
    rng = np.random.default_rng(11)
    universe = range(1, 41)
    pairs, expected = [], set()
    for i in range(100):
        a = set((np.flatnonzero(rng.random(40) < 0.3) + 1).tolist())
        b = set((np.flatnonzero(rng.random(40) < 0.3) + 1).tolist())
        pairs.append(TestPair(f"p{i}", [CoverageMap.of_lines("x.c", a, universe)],
                              [CoverageMap.of_lines("x.c", b, universe)]))
        expected |= a ^ b
    assert {u.locator for u in mc_suite(pairs).suite_mc} == expected


def random_pair(rng, name, universe=range(1, 41)):
    a = (np.flatnonzero(rng.random(40) < 0.3) + 1).tolist()
    b = (np.flatnonzero(rng.random(40) < 0.3) + 1).tolist()
    return TestPair(name, [CoverageMap.of_lines("x.c", a, universe)], [CoverageMap.of_lines("x.c", b, universe)])


def test_suite_mc_grows_with_each_pair():
    rng = np.random.default_rng(12)
    pairs = []
    previous_units, previous_percent = frozenset(), 0.0
    for i in range(25):
        pairs.append(random_pair(rng, f"p{i}"))
        report = mc_suite(pairs)
        assert previous_units <= report.suite_mc
        assert report.mc_percent >= previous_percent
        assert report.mc_percent <= report.union_coverage_percent
        previous_units, previous_percent = report.suite_mc, report.mc_percent


def test_duplicate_pairs_leave_suite_mc_unchanged():
    rng = np.random.default_rng(13)
    pairs = [random_pair(rng, f"p{i}") for i in range(5)]
    base = mc_suite(pairs)
    again = mc_suite(pairs + [TestPair(f"{t.id}-again", t.side_a, t.side_b) for t in pairs])
    assert again.suite_mc == base.suite_mc
    assert again.mc_percent == base.mc_percent
    assert again.union_coverage_percent == base.union_coverage_percent
