"""カバレッジの値型と集合演算

CoverageMap は covered と universe（計装済みの全ユニット）を持つ不変値。
すべての演算は純粋関数で、粒度の異なるマップは結合できない。
"""

import numbers
import operator
import posixpath
from dataclasses import dataclass, field
from enum import Enum
from typing import FrozenSet, Iterable, Optional, Tuple, Union

from .errors import EmptyUniverse, GranularityMismatch, InputError

# Edge ユニットはファイルを持たないので仮の名前空間に置く
EDGE_NAMESPACE = "<bitmap>"

Locator = Union[int, Tuple[int, int, int], str]


class Granularity(str, Enum):
    LINE = "line"
    BRANCH = "branch"
    FUNCTION = "function"
    EDGE = "edge"

    @classmethod
    def parse(cls, value):
        """文字列から粒度を取得"""
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            choices = ", ".join(g.value for g in cls)
            raise InputError(f"unknown granularity {value!r} (expected one of {choices})") from None


@dataclass(frozen=True, order=True)
class CoverageUnit:
    """カバレッジの最小単位。(granularity, file, locator) の順で全順序"""

    granularity: Granularity
    file: str
    locator: Locator

    def __post_init__(self):
        g = self.granularity
        loc = self.locator
        if g is Granularity.LINE:
            n = _as_int(loc)
            if n is None or n < 1:
                raise ValueError(f"line number must be >= 1, got {loc!r}")
            object.__setattr__(self, "locator", n)
        elif g is Granularity.EDGE:
            n = _as_int(loc)
            if n is None or n < 0:
                raise ValueError(f"edge index must be >= 0, got {loc!r}")
            object.__setattr__(self, "locator", n)
        elif g is Granularity.BRANCH:
            parts = tuple(_as_int(v) for v in loc) if isinstance(loc, tuple) else ()
            if len(parts) != 3 or None in parts or parts[0] < 1:
                raise ValueError(f"branch locator must be (line>=1, block, branch), got {loc!r}")
            object.__setattr__(self, "locator", parts)
        elif g is Granularity.FUNCTION:
            if not isinstance(loc, str) or not loc:
                raise ValueError(f"function locator must be a non-empty name, got {loc!r}")

    @classmethod
    def line(cls, file, number):
        return cls(Granularity.LINE, file, number)

    @classmethod
    def branch(cls, file, line, block, branch):
        return cls(Granularity.BRANCH, file, (line, block, branch))

    @classmethod
    def function(cls, file, name):
        return cls(Granularity.FUNCTION, file, name)

    @classmethod
    def edge(cls, index, namespace=EDGE_NAMESPACE):
        return cls(Granularity.EDGE, namespace, index)

    def __str__(self):
        if self.granularity is Granularity.BRANCH:
            return f"{self.file}:{','.join(str(v) for v in self.locator)}"
        return f"{self.file}:{self.locator}"


def _as_int(value):
    """numpy 整数も含めて int に揃える。整数でなければ None"""
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        return None
    return operator.index(value)


@dataclass(frozen=True)
class CoverageMap:
    """一つの粒度における covered ⊆ universe の組"""

    granularity: Granularity
    covered: FrozenSet[CoverageUnit] = field(default_factory=frozenset)
    universe: FrozenSet[CoverageUnit] = field(default_factory=frozenset)

    def __post_init__(self):
        # set や list が渡されても frozenset に揃える
        if not isinstance(self.covered, frozenset):
            object.__setattr__(self, "covered", frozenset(self.covered))
        if not isinstance(self.universe, frozenset):
            object.__setattr__(self, "universe", frozenset(self.universe))
        for unit in self.universe:
            if unit.granularity is not self.granularity:
                raise GranularityMismatch(
                    f"unit {unit} has granularity {unit.granularity.value}, "
                    f"map is {self.granularity.value}")
        if not self.covered <= self.universe:
            stray = sorted(self.covered - self.universe)[:3]
            raise ValueError(f"covered units outside the universe: {', '.join(map(str, stray))}")

    @classmethod
    def of_lines(cls, file, covered, universe=None):
        """行番号のリストからマップを作る（universe 省略時は covered と同じ）"""
        covered_units = frozenset(CoverageUnit.line(file, n) for n in covered)
        if universe is None:
            universe_units = covered_units
        else:
            universe_units = frozenset(CoverageUnit.line(file, n) for n in universe)
        return cls(Granularity.LINE, covered_units, universe_units)

    def __len__(self):
        return len(self.covered)

    def locators(self):
        """covered の locator をソート済みで返す（テスト・表示用）"""
        return [u.locator for u in sorted(self.covered)]


def empty_map(granularity):
    """union の単位元"""
    return CoverageMap(Granularity.parse(granularity))


def _check_same_granularity(a, b):
    if a.granularity is not b.granularity:
        raise GranularityMismatch(
            f"cannot combine {a.granularity.value} coverage with {b.granularity.value} coverage")


def union(a, b):
    _check_same_granularity(a, b)
    return CoverageMap(a.granularity, a.covered | b.covered, a.universe | b.universe)


def intersect(a, b):
    _check_same_granularity(a, b)
    return CoverageMap(a.granularity, a.covered & b.covered, a.universe | b.universe)


def symmetric_difference(a, b):
    """差分カバレッジ Cov(a) △ Cov(b)"""
    _check_same_granularity(a, b)
    return CoverageMap(a.granularity, a.covered ^ b.covered, a.universe | b.universe)


def coverage_percent(m):
    if not m.universe:
        raise EmptyUniverse(f"{m.granularity.value} coverage map has an empty universe")
    return 100.0 * len(m.covered) / len(m.universe)


def union_all(maps: Iterable[CoverageMap], granularity: Optional[Granularity] = None):
    """マップ列の union。空なら granularity の空マップ"""
    result = None
    for m in maps:
        result = m if result is None else union(result, m)
    if result is None:
        if granularity is None:
            raise ValueError("union_all of nothing needs a granularity")
        return empty_map(granularity)
    return result


def normalize_path(path, strip_prefix=None):
    """マシン間で比較できるようにパスを正規化"""
    p = path.replace("\\", "/")
    if strip_prefix:
        prefix = strip_prefix.replace("\\", "/").rstrip("/") + "/"
        if p.startswith(prefix):
            p = p[len(prefix):]
    p = posixpath.normpath(p) if p else p
    while p.startswith("./"):
        p = p[2:]
    return p
