"""カバレッジ成果物の読み込みと mccov JSON の書き出し

対応形式:
- LCOV トレースファイル (TN/SF/FN/FNDA/DA/BRDA/end_of_record)
- mccov JSON v1（このツール独自のスキーマ）
- AFL 形式のエッジビットマップ（生バイト列）
"""

import json
import logging
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from pathlib import Path

import numpy as np

from .coverage_model import CoverageMap, CoverageUnit, Granularity, normalize_path
from .errors import (
    BadLength, GranularityMismatch, InputError, ParseError, SchemaError,
    UnsupportedGranularity,
)

logger = logging.getLogger(__name__)

DEFAULT_MAP_SIZE = 1 << 16
MCCOV_FORMAT = "mccov"
MCCOV_VERSION = 1

# 集計行は信用せず再計算する
_SUMMARY_TAGS = {"LF", "LH", "FNF", "FNH", "BRF", "BRH"}


class ArtifactFormat(str, Enum):
    LCOV = "lcov"
    MCCOV_JSON = "json"
    BITMAP = "bitmap"

    @classmethod
    def parse(cls, value):
        aliases = {"info": cls.LCOV, "mccov": cls.MCCOV_JSON, "map": cls.BITMAP}
        key = str(value).lower()
        if key in aliases:
            return aliases[key]
        try:
            return cls(key)
        except ValueError:
            raise InputError(f"unknown artifact format {value!r}") from None


_EXTENSIONS = {
    ".info": ArtifactFormat.LCOV,
    ".lcov": ArtifactFormat.LCOV,
    ".json": ArtifactFormat.MCCOV_JSON,
    ".map": ArtifactFormat.BITMAP,
}


@dataclass(frozen=True)
class CoverageArtifact:
    """一つの入力ファイルから得た粒度ごとのマップ"""

    source: str
    format: ArtifactFormat
    maps: dict = field(default_factory=dict)

    def get(self, granularity):
        return self.maps[Granularity.parse(granularity)]


def _decode(text):
    if isinstance(text, (bytes, bytearray, memoryview)):
        return bytes(text).decode("utf-8")
    return text


# ---------------------------------------------------------------- LCOV

class _FileRecord:
    """SF ブロック一つ分の生データ"""

    def __init__(self):
        self.lines = defaultdict(int)
        self.branches = {}
        self.functions = set()
        self.function_hits = defaultdict(int)


def _parse_int(value, lineno, source, what):
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ParseError(f"expected an integer {what}", source=source, line=lineno, token=value) from None


def _read_lcov(text, source, strip_prefix):
    records = {}
    current = None
    for lineno, raw in enumerate(_decode(text).splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line == "end_of_record":
            if current is None:
                raise ParseError("end_of_record outside of an SF block", source=source, line=lineno, token=line)
            current = None
            continue
        tag, sep, rest = line.partition(":")
        if not sep:
            raise ParseError("expected a <TAG>:<value> record", source=source, line=lineno, token=line)
        if tag == "TN":
            continue
        if tag == "SF":
            if not rest:
                raise ParseError("empty source file name", source=source, line=lineno, token=line)
            path = normalize_path(rest, strip_prefix)
            current = records.setdefault(path, _FileRecord())
            continue
        if tag in _SUMMARY_TAGS:
            continue
        if tag not in ("DA", "BRDA", "FN", "FNDA"):
            logger.debug("%s:%d: skipping unsupported LCOV record %s", source, lineno, tag)
            continue
        if current is None:
            raise ParseError(f"{tag} record before any SF record", source=source, line=lineno, token=line)

        if tag == "DA":
            fields = rest.split(",")
            if len(fields) < 2:
                raise ParseError("DA needs <line>,<count>", source=source, line=lineno, token=rest)
            number = _parse_int(fields[0], lineno, source, "line number")
            count = _parse_int(fields[1], lineno, source, "execution count")
            if number < 1 or count < 0:
                raise ParseError("line number must be >= 1 and count >= 0", source=source, line=lineno, token=rest)
            # 重複行はカウントを合算（lcov のマージと同じ）
            current.lines[number] += count
        elif tag == "BRDA":
            fields = rest.split(",")
            if len(fields) != 4:
                raise ParseError("BRDA needs <line>,<block>,<branch>,<taken>", source=source, line=lineno, token=rest)
            number = _parse_int(fields[0], lineno, source, "line number")
            block = _parse_int(fields[1], lineno, source, "block id")
            branch = _parse_int(fields[2], lineno, source, "branch id")
            if number < 1:
                raise ParseError("line number must be >= 1", source=source, line=lineno, token=rest)
            taken = 0 if fields[3] == "-" else _parse_int(fields[3], lineno, source, "taken count")
            if taken < 0:
                raise ParseError("taken count must be >= 0", source=source, line=lineno, token=rest)
            key = (number, block, branch)
            current.branches[key] = current.branches.get(key, 0) + taken
        elif tag == "FN":
            fields = rest.split(",", 1)
            if len(fields) != 2 or not fields[1]:
                raise ParseError("FN needs <line>,<name>", source=source, line=lineno, token=rest)
            _parse_int(fields[0], lineno, source, "line number")
            current.functions.add(fields[1])
        else:  # FNDA
            fields = rest.split(",", 1)
            if len(fields) != 2 or not fields[1]:
                raise ParseError("FNDA needs <count>,<name>", source=source, line=lineno, token=rest)
            count = _parse_int(fields[0], lineno, source, "execution count")
            if count < 0:
                raise ParseError("count must be >= 0", source=source, line=lineno, token=rest)
            current.functions.add(fields[1])
            current.function_hits[fields[1]] += count
    if current is not None:
        logger.debug("%s: last SF block has no end_of_record", source)
    return records


def _lcov_map(records, granularity):
    covered = set()
    universe = set()
    for path, rec in records.items():
        if granularity is Granularity.LINE:
            for number, count in rec.lines.items():
                unit = CoverageUnit.line(path, number)
                universe.add(unit)
                if count > 0:
                    covered.add(unit)
        elif granularity is Granularity.BRANCH:
            for (number, block, branch), taken in rec.branches.items():
                unit = CoverageUnit.branch(path, number, block, branch)
                universe.add(unit)
                if taken > 0:
                    covered.add(unit)
        elif granularity is Granularity.FUNCTION:
            for name in rec.functions:
                unit = CoverageUnit.function(path, name)
                universe.add(unit)
                if rec.function_hits.get(name, 0) > 0:
                    covered.add(unit)
    return CoverageMap(granularity, covered, universe)


def parse_lcov(text, granularity=Granularity.LINE, source="<lcov>", strip_prefix=None):
    """LCOV トレースファイルを指定粒度のマップに変換"""
    granularity = Granularity.parse(granularity)
    if granularity is Granularity.EDGE:
        raise UnsupportedGranularity("LCOV tracefiles carry no edge coverage")
    return _lcov_map(_read_lcov(text, source, strip_prefix), granularity)


def parse_lcov_artifact(text, granularities=(Granularity.LINE, Granularity.BRANCH, Granularity.FUNCTION),
                        source="<lcov>", strip_prefix=None):
    """一度だけ読み込んで複数粒度のマップを返す"""
    wanted = [Granularity.parse(g) for g in granularities]
    if Granularity.EDGE in wanted:
        raise UnsupportedGranularity("LCOV tracefiles carry no edge coverage")
    records = _read_lcov(text, source, strip_prefix)
    return CoverageArtifact(source, ArtifactFormat.LCOV, {g: _lcov_map(records, g) for g in wanted})


# ---------------------------------------------------------------- mccov JSON

def locator_to_json(unit):
    if unit.granularity is Granularity.BRANCH:
        return list(unit.locator)
    return unit.locator


def locator_from_json(loc, granularity, where):
    if granularity is Granularity.BRANCH:
        if (not isinstance(loc, list) or len(loc) != 3
                or not all(isinstance(v, int) and not isinstance(v, bool) for v in loc)):
            raise SchemaError(f"{where}.loc must be [line, block, branch] for branch coverage")
        if loc[0] < 1:
            raise SchemaError(f"{where}.loc line must be >= 1")
        return tuple(loc)
    if granularity is Granularity.FUNCTION:
        if not isinstance(loc, str) or not loc:
            raise SchemaError(f"{where}.loc must be a function name for function coverage")
        return loc
    if not isinstance(loc, int) or isinstance(loc, bool):
        raise SchemaError(f"{where}.loc must be an integer for {granularity.value} coverage")
    if granularity is Granularity.LINE and loc < 1:
        raise SchemaError(f"{where}.loc line must be >= 1")
    if loc < 0:
        raise SchemaError(f"{where}.loc must be >= 0")
    return loc


def require_field(obj, key, kind, where):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"missing field {where}.{key}")
    value = obj[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise SchemaError(f"field {where}.{key} has the wrong type ({type(value).__name__})")
    return value


def parse_mccov_json(text, granularity=None, strip_prefix=None):
    """mccov JSON v1 をマップに変換。granularity 指定時は文書と一致が必要"""
    try:
        doc = json.loads(_decode(text))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc.msg} at line {exc.lineno}") from None
    if not isinstance(doc, dict):
        raise SchemaError("top-level value must be an object")
    if require_field(doc, "format", str, "$") != MCCOV_FORMAT:
        raise SchemaError(f"field $.format must be {MCCOV_FORMAT!r}")
    if require_field(doc, "version", int, "$") != MCCOV_VERSION:
        raise SchemaError(f"unsupported $.version {doc['version']!r}")
    try:
        declared = Granularity(require_field(doc, "granularity", str, "$"))
    except ValueError:
        raise SchemaError(f"field $.granularity has an unknown value {doc['granularity']!r}") from None
    if granularity is not None and Granularity.parse(granularity) is not declared:
        raise GranularityMismatch(
            f"document holds {declared.value} coverage, {Granularity.parse(granularity).value} was requested")

    counts = defaultdict(int)
    for i, entry in enumerate(require_field(doc, "files", list, "$")):
        where = f"$.files[{i}]"
        path = require_field(entry, "path", str, where)
        if declared is not Granularity.EDGE:
            path = normalize_path(path, strip_prefix)
        for j, item in enumerate(require_field(entry, "units", list, where)):
            uwhere = f"{where}.units[{j}]"
            if not isinstance(item, dict) or "loc" not in item:
                raise SchemaError(f"missing field {uwhere}.loc")
            loc = locator_from_json(item["loc"], declared, uwhere)
            count = require_field(item, "count", int, uwhere)
            if count < 0:
                raise SchemaError(f"field {uwhere}.count must be non-negative")
            counts[CoverageUnit(declared, path, loc)] += count
    covered = {u for u, c in counts.items() if c > 0}
    return CoverageMap(declared, covered, counts.keys())


def emit_mccov_json(m):
    """マップを mccov JSON v1 に書き出す（ユニットはソート済みで決定的）"""
    by_file = defaultdict(list)
    for unit in sorted(m.universe):
        by_file[unit.file].append(unit)
    files = []
    for path in sorted(by_file):
        files.append({
            "path": path,
            "units": [{"loc": locator_to_json(u), "count": 1 if u in m.covered else 0}
                      for u in by_file[path]],
        })
    doc = {
        "format": MCCOV_FORMAT,
        "version": MCCOV_VERSION,
        "granularity": m.granularity.value,
        "files": files,
    }
    return (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


# ---------------------------------------------------------------- bitmap

@lru_cache(maxsize=4)
def _edge_universe(size):
    return frozenset(CoverageUnit.edge(i) for i in range(size))


def parse_bitmap(data, map_size=None):
    """エッジビットマップ。値 > 0 のインデックスを covered とする（バケット化なし）"""
    expected = DEFAULT_MAP_SIZE if map_size is None else int(map_size)
    raw = bytes(data)
    if len(raw) != expected:
        raise BadLength(f"bitmap has {len(raw)} bytes, expected {expected} (use --map-size to declare another size)")
    hit = np.flatnonzero(np.frombuffer(raw, dtype=np.uint8))
    covered = frozenset(CoverageUnit.edge(int(i)) for i in hit)
    return CoverageMap(Granularity.EDGE, covered, _edge_universe(expected))


# ---------------------------------------------------------------- files

def infer_format(path):
    suffix = Path(path).suffix.lower()
    try:
        return _EXTENSIONS[suffix]
    except KeyError:
        raise InputError(f"{path}: cannot infer the coverage format from {suffix or 'no extension'!r}; "
                         "pass --format") from None


def load_artifact(path, granularity=Granularity.LINE, fmt=None, map_size=None, strip_prefix=None):
    """ファイルを読み込んでマップを返す"""
    granularity = Granularity.parse(granularity)
    fmt = infer_format(path) if fmt is None else ArtifactFormat.parse(fmt)
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"{path}: cannot read ({exc.strerror})") from None
    logger.debug("loading %s as %s", path, fmt.value)
    try:
        if fmt is ArtifactFormat.LCOV:
            return parse_lcov(data, granularity, source=str(path), strip_prefix=strip_prefix)
        if fmt is ArtifactFormat.MCCOV_JSON:
            return parse_mccov_json(data, granularity, strip_prefix=strip_prefix)
        if granularity is not Granularity.EDGE:
            raise GranularityMismatch(f"{path}: bitmaps hold edge coverage, {granularity.value} was requested")
        return parse_bitmap(data, map_size)
    except UnicodeDecodeError:
        raise InputError(f"{path}: not UTF-8 text") from None
    except (SchemaError, BadLength) as exc:
        raise type(exc)(f"{path}: {exc}") from None
