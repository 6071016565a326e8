"""ペア・スイート単位のメタモルフィックカバレッジ (MC) 計算

MC(t) = Cov(t_a) △ Cov(t_b)、MC(T) = ∪ MC(t_i)。
片側が複数入力のときは全入力のカバレッジの和集合をその側のカバレッジとする。
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Tuple

from .coverage_model import (
    CoverageMap, CoverageUnit, Granularity, coverage_percent, symmetric_difference, union, union_all,
)
from .errors import (
    EmptySide, EmptySuite, GranularityMismatch, SchemaError, UniverseMismatch,
)
from .ingest import load_artifact, locator_from_json, locator_to_json, require_field
from .report_io import load_document

logger = logging.getLogger(__name__)

REPORT_FORMAT = "mc-report"
REPORT_VERSION = 1
DEFAULT_MAX_UNITS_PER_PAIR = 10_000


@dataclass(frozen=True)
class TestPair:
    """テスト入力のペア t = (t_a, t_b)。各側は 1 個以上のマップ"""

    __test__ = False  # pytest に収集させない

    id: str
    side_a: Tuple[CoverageMap, ...]
    side_b: Tuple[CoverageMap, ...]

    def __post_init__(self):
        object.__setattr__(self, "side_a", tuple(self.side_a))
        object.__setattr__(self, "side_b", tuple(self.side_b))
        if not self.side_a or not self.side_b:
            raise EmptySide(f"pair {self.id!r} has an empty side")
        granularities = {m.granularity for m in self.side_a + self.side_b}
        if len(granularities) > 1:
            names = ", ".join(sorted(g.value for g in granularities))
            raise GranularityMismatch(f"pair {self.id!r} mixes granularities: {names}")

    @property
    def granularity(self):
        return self.side_a[0].granularity

    def swapped(self):
        return TestPair(self.id, self.side_b, self.side_a)


@dataclass(frozen=True)
class PairEntry:
    id: str
    mc_size: int
    mc_units: tuple
    truncated: bool = False


@dataclass(frozen=True)
class McReport:
    granularity: Granularity
    pairs: Tuple[PairEntry, ...]
    suite_mc: frozenset
    universe_size: int
    mc_percent: float
    union_coverage_percent: float
    provenance: dict = field(default_factory=dict)


def side_coverage(side):
    """片側の全入力のカバレッジの和集合"""
    side = list(side)
    if not side:
        raise EmptySide("a pair side needs at least one coverage map")
    return union_all(side)


def _check_universe(a, b, strict, what):
    if a.universe == b.universe:
        return
    message = (f"{what}: coverage universes differ ({len(a.universe)} vs {len(b.universe)} units); "
               "the inputs were probably measured on different builds")
    if strict:
        raise UniverseMismatch(message)
    logger.warning("%s; using the union of both universes", message)


def mc_pair(t, strict=True):
    """ペアの差分カバレッジ MC(t)"""
    a = side_coverage(t.side_a)
    b = side_coverage(t.side_b)
    _check_universe(a, b, strict, f"pair {t.id!r}")
    return symmetric_difference(a, b)


def mc_suite(pairs, strict=True, max_units_per_pair=DEFAULT_MAX_UNITS_PER_PAIR):
    """スイート全体の MC(T) とレポートを作成"""
    pairs = list(pairs)
    if not pairs:
        raise EmptySuite("a suite needs at least one test pair")
    granularity = pairs[0].granularity
    for t in pairs[1:]:
        if t.granularity is not granularity:
            raise GranularityMismatch(
                f"pair {t.id!r} is {t.granularity.value} coverage, suite is {granularity.value}")

    entries = []
    suite = None
    covered = None
    reference = None
    for t in pairs:
        mc = mc_pair(t, strict=strict)
        if reference is None:
            reference = mc
        else:
            _check_universe(reference, mc, strict, f"suite (pair {t.id!r})")
        units = sorted(mc.covered)
        truncated = len(units) > max_units_per_pair
        entries.append(PairEntry(t.id, len(units), tuple(units[:max_units_per_pair]), truncated))
        sides = union(side_coverage(t.side_a), side_coverage(t.side_b))
        suite = mc if suite is None else union(suite, mc)
        covered = sides if covered is None else union(covered, sides)

    universe = suite.universe | covered.universe
    mc_map = CoverageMap(granularity, suite.covered, universe)
    union_map = CoverageMap(granularity, covered.covered, universe)
    return McReport(
        granularity=granularity,
        pairs=tuple(entries),
        suite_mc=suite.covered,
        universe_size=len(universe),
        mc_percent=coverage_percent(mc_map),
        union_coverage_percent=coverage_percent(union_map),
        provenance={
            "strict_universe": bool(strict),
            "max_units_per_pair": max_units_per_pair,
            "pair_count": len(entries),
            "pair_order": "metadata-only",
        },
    )


def unit_to_dict(unit):
    return {"path": unit.file, "loc": locator_to_json(unit)}


def report_to_dict(report, precision=2):
    """McReport スキーマ（キー順固定）の辞書に変換"""
    return {
        "format": REPORT_FORMAT,
        "version": REPORT_VERSION,
        "granularity": report.granularity.value,
        "universe_size": report.universe_size,
        "mc_percent": round(report.mc_percent, precision),
        "union_coverage_percent": round(report.union_coverage_percent, precision),
        "suite_mc": [unit_to_dict(u) for u in sorted(report.suite_mc)],
        "pairs": [
            {
                "id": e.id,
                "mc_size": e.mc_size,
                "mc_units": [unit_to_dict(u) for u in e.mc_units],
                "truncated": e.truncated,
            }
            for e in report.pairs
        ],
        "provenance": dict(report.provenance),
    }


def _unit_from_dict(item, granularity, where):
    if not isinstance(item, dict) or not isinstance(item.get("path"), str) or "loc" not in item:
        raise SchemaError(f"{where} must be an object with \"path\" and \"loc\"")
    return CoverageUnit(granularity, item["path"], locator_from_json(item["loc"], granularity, where))


def _field(obj, key, kind, where, source):
    try:
        return require_field(obj, key, kind, where)
    except SchemaError as exc:
        raise SchemaError(f"{source}: {exc}") from None


def report_from_dict(doc, source="<report>"):
    """保存済みレポートを McReport に戻す（overlap の入力用）"""
    if not isinstance(doc, dict) or doc.get("format") != REPORT_FORMAT:
        raise SchemaError(f"{source}: not an {REPORT_FORMAT} document")
    if doc.get("version") != REPORT_VERSION:
        raise SchemaError(f"{source}: unsupported report version {doc.get('version')!r}")
    try:
        granularity = Granularity(doc.get("granularity"))
    except ValueError:
        raise SchemaError(f"{source}: unknown granularity {doc.get('granularity')!r}") from None
    for key in ("suite_mc", "pairs"):
        if not isinstance(doc.get(key), list):
            raise SchemaError(f"{source}: field $.{key} must be an array")
    suite = frozenset(_unit_from_dict(u, granularity, f"{source}: $.suite_mc[{i}]")
                      for i, u in enumerate(doc["suite_mc"]))
    entries = []
    for i, p in enumerate(doc["pairs"]):
        path = f"$.pairs[{i}]"
        where = f"{source}: {path}"
        if not isinstance(p, dict) or not isinstance(p.get("id"), str):
            raise SchemaError(f"{where}.id must be a string")
        units = tuple(_unit_from_dict(u, granularity, f"{where}.mc_units[{j}]")
                      for j, u in enumerate(_field(p, "mc_units", list, path, source)))
        mc_size = _field(p, "mc_size", int, path, source)
        truncated = p.get("truncated", False)
        if mc_size < len(units) or not isinstance(truncated, bool):
            raise SchemaError(f"{where} has an inconsistent mc_size or truncated flag")
        entries.append(PairEntry(p["id"], mc_size, units, truncated))
    provenance = doc.get("provenance", {})
    if not isinstance(provenance, dict):
        raise SchemaError(f"{source}: field $.provenance must be an object")
    return McReport(
        granularity=granularity,
        pairs=tuple(entries),
        suite_mc=suite,
        universe_size=_field(doc, "universe_size", int, "$", source),
        mc_percent=float(_field(doc, "mc_percent", (int, float), "$", source)),
        union_coverage_percent=float(_field(doc, "union_coverage_percent", (int, float), "$", source)),
        provenance=dict(provenance),
    )


def load_report(path):
    return report_from_dict(load_document(path), source=str(path))


# ---------------------------------------------------------------- マニフェスト

@dataclass(frozen=True)
class ManifestEntry:
    id: str
    a: Tuple[Path, ...]
    b: Tuple[Path, ...]


def load_manifest(path):
    """ペアマニフェストを読み込み。パスはマニフェストからの相対パス"""
    path = Path(path)
    doc = load_document(path)
    if not isinstance(doc, dict) or not isinstance(doc.get("pairs"), list):
        raise SchemaError(f"{path}: manifest needs a top-level \"pairs\" array")
    base = path.parent
    entries = []
    for i, item in enumerate(doc["pairs"]):
        where = f"{path}: pairs[{i}]"
        if not isinstance(item, dict):
            raise SchemaError(f"{where} must be an object")
        pair_id = item.get("id")
        if not isinstance(pair_id, str):
            raise SchemaError(f"{where}.id must be a string")
        sides = []
        for key in ("a", "b"):
            paths = item.get(key)
            if not isinstance(paths, list) or not all(isinstance(p, str) for p in paths):
                raise SchemaError(f"{where}.{key} must be an array of paths")
            sides.append(tuple(base / p for p in paths))
        entries.append(ManifestEntry(pair_id, sides[0], sides[1]))
    return entries


def build_pairs(entries, granularity=Granularity.LINE, fmt=None, map_size=None, strip_prefix=None):
    """マニフェストの各成果物を一度ずつ読み込んで TestPair を作る"""
    cache = {}

    def load(p):
        key = Path(p).resolve()
        if key not in cache:
            cache[key] = load_artifact(p, granularity, fmt=fmt, map_size=map_size, strip_prefix=strip_prefix)
        return cache[key]

    return [TestPair(e.id, [load(p) for p in e.a], [load(p) for p in e.b]) for e in entries]


def pair_from_paths(pair_id, a_paths, b_paths, granularity=Granularity.LINE, fmt=None,
                    map_size=None, strip_prefix=None):
    entry = ManifestEntry(pair_id, tuple(Path(p) for p in a_paths), tuple(Path(p) for p in b_paths))
    return build_pairs([entry], granularity, fmt, map_size, strip_prefix)[0]

