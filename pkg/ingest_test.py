import json
from pathlib import Path

import numpy as np
import pytest

from src.coverage_model import CoverageMap, CoverageUnit, Granularity
from src.errors import (
    BadLength, GranularityMismatch, InputError, ParseError, SchemaError, UnsupportedGranularity,
)
from src.ingest import (
    ArtifactFormat, emit_mccov_json, infer_format, load_artifact, parse_bitmap, parse_lcov,
    parse_lcov_artifact, parse_mccov_json,
)

FIXTURES = Path(__file__).parent / "fixtures"


def test_golden_lcov_lines():
    m = parse_lcov((FIXTURES / "golden.info").read_text(), strip_prefix="/build/work")
    by_file = {}
    for u in m.universe:
        by_file.setdefault(u.file, set()).add(u.locator)
    assert by_file == {"src/util.c": {3, 4, 5, 10, 11}, "src/main.c": {1, 2}}
    # 重複した DA:5 はカウントを合算して covered
    assert m.locators() == [1, 3, 4, 5]


def test_golden_lcov_branches():
    m = parse_lcov((FIXTURES / "golden.info").read_text(), Granularity.BRANCH, strip_prefix="/build/work")
    assert len(m.universe) == 4
    assert m.locators() == [(4, 0, 0), (4, 0, 1)]


def test_golden_lcov_functions():
    m = parse_lcov((FIXTURES / "golden.info").read_text(), Granularity.FUNCTION, strip_prefix="/build/work")
    assert {(u.file, u.locator) for u in m.universe} == {
        ("src/util.c", "helper"), ("src/util.c", "unused"), ("src/main.c", "main")}
    assert {u.locator for u in m.covered} == {"helper", "main"}


def test_artifact_holds_every_granularity():
    artifact = parse_lcov_artifact((FIXTURES / "golden.info").read_text())
    assert artifact.get("line").granularity is Granularity.LINE
    assert artifact.get(Granularity.FUNCTION).granularity is Granularity.FUNCTION


def test_malformed_lcov_names_line_and_token():
    with pytest.raises(ParseError) as info:
        load_artifact(FIXTURES / "malformed.info")
    assert info.value.line == 4
    assert info.value.token == "three"
    assert "malformed.info:4" in str(info.value)


def test_lcov_has_no_edges():
    with pytest.raises(UnsupportedGranularity):
        parse_lcov("SF:a.c\nDA:1,1\nend_of_record\n", Granularity.EDGE)


@pytest.mark.parametrize("text", [
    "DA:1,1\n",
    "SF:a.c\nDA:1\n",
    "SF:a.c\nBRDA:1,0,x,1\n",
    "SF:a.c\nno separator here\n",
])
def test_lcov_errors(text):
    with pytest.raises(ParseError):
        parse_lcov(text)


def test_lcov_without_final_end_of_record():
    assert parse_lcov("SF:a.c\nDA:1,1\nDA:2,0\n").locators() == [1]


def test_da_order_inside_a_block_does_not_matter():
    rng = np.random.default_rng(11)
    records = [f"DA:{n},{int(rng.integers(0, 3))}" for n in range(1, 40)]
    base = parse_lcov("SF:a.c\n" + "\n".join(records) + "\nend_of_record\n")
    for _ in range(20):
        shuffled = list(rng.permutation(records))
        assert parse_lcov("SF:a.c\n" + "\n".join(shuffled) + "\nend_of_record\n") == base


def test_synthetic_tracefile_matches_a_rescan():
    rng = np.random.default_rng(12)
    lines = []
    for f in range(10):
        lines.append(f"SF:src/file{f}.c")
        lines += [f"DA:{int(n)},{int(rng.integers(0, 4))}" for n in rng.integers(1, 200, size=49)]
        lines.append("end_of_record")
    assert len(lines) == 510
    covered, universe = set(), set()
    path = None
    for line in lines:
        if line.startswith("SF:"):
            path = line[3:]
        elif line.startswith("DA:"):
            number, count = map(int, line[3:].split(","))
            universe.add((path, number))
            if count > 0:
                covered.add((path, number))
    m = parse_lcov("\n".join(lines) + "\n")
    assert {(u.file, u.locator) for u in m.universe} == universe
    assert {(u.file, u.locator) for u in m.covered} == covered


def test_crlf_tracefile():
    text = "TN:\r\nSF:a.c\r\nDA:1,1\r\nDA:2,0\r\nend_of_record\r\n"
    assert parse_lcov(text) == parse_lcov(text.replace("\r\n", "\n"))
    assert parse_lcov(text.encode()).locators() == [1]


def test_mccov_round_trip_on_random_maps():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        granularity = Granularity(str(rng.choice(["line", "branch", "function", "edge"])))
        n = int(rng.integers(0, 12))
        universe = set()
        for _ in range(n):
            f = f"src/f{int(rng.integers(3))}.c"
            if granularity is Granularity.LINE:
                universe.add(CoverageUnit.line(f, int(rng.integers(1, 500))))
            elif granularity is Granularity.BRANCH:
                universe.add(CoverageUnit.branch(f, int(rng.integers(1, 500)), int(rng.integers(3)),
                                                 int(rng.integers(2))))
            elif granularity is Granularity.FUNCTION:
                universe.add(CoverageUnit.function(f, f"fn{int(rng.integers(50))}"))
            else:
                universe.add(CoverageUnit.edge(int(rng.integers(0, 65536))))
        covered = {u for u in universe if rng.random() < 0.5}
        m = CoverageMap(granularity, covered, universe)
        assert parse_mccov_json(emit_mccov_json(m)) == m


def test_mccov_output_is_deterministic():
    m = CoverageMap.of_lines("b.c", [2], [2, 1])
    doc = json.loads(emit_mccov_json(m))
    assert doc == {
        "format": "mccov",
        "version": 1,
        "granularity": "line",
        "files": [{"path": "b.c", "units": [{"loc": 1, "count": 0}, {"loc": 2, "count": 1}]}],
    }


def test_mccov_schema_errors():
    with pytest.raises(SchemaError, match="format"):
        parse_mccov_json('{"format": "gcov", "version": 1, "granularity": "line", "files": []}')
    with pytest.raises(SchemaError, match=r"\$\.files\[0\]\.units\[0\]\.count"):
        parse_mccov_json('{"format": "mccov", "version": 1, "granularity": "line",'
                         ' "files": [{"path": "a.c", "units": [{"loc": 1}]}]}')
    with pytest.raises(SchemaError):
        parse_mccov_json("not json")


def test_mccov_granularity_must_match_request():
    text = emit_mccov_json(CoverageMap.of_lines("a.c", [1]))
    with pytest.raises(GranularityMismatch):
        parse_mccov_json(text, Granularity.BRANCH)


def test_bitmap():
    data = bytearray(64)
    data[3] = 1
    data[10] = 200
    m = parse_bitmap(bytes(data), map_size=64)
    assert m.locators() == [3, 10]
    assert len(m.universe) == 64
    with pytest.raises(BadLength):
        parse_bitmap(bytes(63), map_size=64)


def test_default_size_bitmap():
    m = parse_bitmap(bytes(65536))
    assert not m.covered
    assert len(m.universe) == 65536


def test_bitmap_counts_nonzero_bytes():
    rng = np.random.default_rng(13)
    for density in (0.0, 0.01, 0.3, 1.0):
        data = (rng.random(4096) < density) * rng.integers(1, 256, size=4096)
        raw = data.astype(np.uint8).tobytes()
        m = parse_bitmap(raw, map_size=4096)
        assert len(m.covered) == np.count_nonzero(data)
        assert {u.locator for u in m.covered} == set(np.flatnonzero(data).tolist())


def test_load_bitmap_needs_edge_granularity(tmp_path):
    path = tmp_path / "run.map"
    path.write_bytes(bytes(16))
    assert load_artifact(path, Granularity.EDGE, map_size=16).granularity is Granularity.EDGE
    with pytest.raises(GranularityMismatch):
        load_artifact(path, Granularity.LINE, map_size=16)
    with pytest.raises(BadLength, match="run.map"):
        load_artifact(path, Granularity.EDGE)


def test_format_inference():
    assert infer_format("x.info") is ArtifactFormat.LCOV
    assert infer_format("x.JSON") is ArtifactFormat.MCCOV_JSON
    assert infer_format("x.map") is ArtifactFormat.BITMAP
    with pytest.raises(InputError):
        infer_format("x.txt")


def test_missing_file_is_input_error(tmp_path):
    with pytest.raises(InputError, match="cannot read"):
        load_artifact(tmp_path / "nope.info")
