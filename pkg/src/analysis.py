"""統計と修正箇所との重なり分析

- 変動係数 CV = σ/μ（標本標準偏差、n−1）
- ピアソン相関係数
- 乱数による部分集合サンプリング（PCG64、シード固定で再現可能）
- unified diff からの修正行抽出と MC との重なり判定
"""

import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, Tuple

import numpy as np
from scipy import stats

from .coverage_model import CoverageUnit, Granularity, normalize_path
from .errors import (
    ContractError, InputError, InvalidSample, LengthMismatch, MalformedHunkHeader,
    SizeTooLarge, TooFewValues, WrongGranularity, ZeroMean, ZeroVariance,
)
from .metamorphic import mc_suite
from .report_io import read_csv_columns

logger = logging.getLogger(__name__)

# 完全な線形関係の丸め誤差をこの幅で ±1 に揃える
_UNIT_CORRELATION_TOLERANCE = 1e-12


@dataclass(frozen=True)
class Sample:
    label: str
    values: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise InvalidSample(f"sample {self.label!r} has no values")
        if not all(math.isfinite(v) for v in values):
            raise InvalidSample(f"sample {self.label!r} contains non-finite values")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)


def _as_sample(s, label="sample"):
    return s if isinstance(s, Sample) else Sample(label, tuple(s))


def coefficient_of_variation(s):
    s = _as_sample(s)
    if len(s) < 2:
        raise TooFewValues(f"sample {s.label!r} needs at least 2 values for a sample standard deviation")
    values = np.asarray(s.values)
    if np.mean(values) == 0:
        raise ZeroMean(f"sample {s.label!r} has mean 0; the coefficient of variation is undefined")
    return float(stats.variation(values, ddof=1))


def pearson(x, y):
    x = _as_sample(x, "x")
    y = _as_sample(y, "y")
    if len(x) != len(y):
        raise LengthMismatch(f"samples {x.label!r} and {y.label!r} differ in length ({len(x)} vs {len(y)})")
    if len(x) < 2:
        raise TooFewValues("correlation needs at least 2 points")
    xs = np.asarray(x.values)
    ys = np.asarray(y.values)
    for label, values in ((x.label, xs), (y.label, ys)):
        if np.ptp(values) == 0:
            raise ZeroVariance(f"sample {label!r} is constant; correlation is undefined")
    r = float(stats.pearsonr(xs, ys).statistic)
    if 1.0 - abs(r) < _UNIT_CORRELATION_TOLERANCE:
        r = math.copysign(1.0, r)
    return max(-1.0, min(1.0, r))


def sample_subsets(items, sizes, repeats, seed):
    """サイズごとに repeats 個の非復元一様抽出。シードで完全に決まる"""
    items = list(items)
    if repeats < 1:
        raise ContractError(f"repeats must be >= 1, got {repeats}")
    rng = np.random.Generator(np.random.PCG64(seed))
    subsets = []
    for size in sizes:
        if size < 0:
            raise ContractError(f"subset size must be >= 0, got {size}")
        if size > len(items):
            raise SizeTooLarge(f"cannot draw {size} of {len(items)} items without replacement")
        for _ in range(repeats):
            picked = np.sort(rng.choice(len(items), size=size, replace=False))
            subsets.append(tuple(items[int(i)] for i in picked))
    return subsets


# ---------------------------------------------------------------- diff

@dataclass(frozen=True)
class FixLocations:
    """修正後ファイルの行番号（1 始まり）"""

    lines: Dict[str, FrozenSet[int]] = field(default_factory=dict)

    def __post_init__(self):
        for path, numbers in self.lines.items():
            if any(n < 1 for n in numbers):
                raise ValueError(f"{path}: fix line numbers must be >= 1")

    def is_empty(self):
        return not any(self.lines.values())

    def __contains__(self, unit):
        return unit.locator in self.lines.get(unit.file, ())


_HUNK_HEADER = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")


def _diff_path(raw, strip_prefix):
    path = raw.split("\t", 1)[0].strip()
    if path == "/dev/null":
        return None
    if path.startswith(("a/", "b/")):
        path = path[2:]
    return normalize_path(path, strip_prefix)


def parse_unified_diff(text, strip_prefix=None, source="<diff>"):
    """unified diff から修正後の追加行を抽出。削除のみのハンクはアンカー行を記録"""
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8", errors="replace")
    found = {}
    current = None
    old_left = new_left = 0
    hunk = None

    def close_hunk():
        # 削除のみのハンクは修正後のアンカー行を記録
        if hunk is None or current is None or hunk["added"] or not hunk["deleted"]:
            return
        last = hunk["start"] + hunk["count"] - 1
        anchor = hunk["anchor"]
        if anchor is None or anchor > last:
            anchor = last
        found.setdefault(current, set()).add(max(anchor, hunk["start"], 1))

    for lineno, line in enumerate(text.splitlines(), start=1):
        if old_left > 0 or new_left > 0:
            tag = line[:1]
            if tag == " " or line == "":
                old_left -= 1
                new_left -= 1
                hunk["cursor"] += 1
            elif tag == "+":
                if current is not None:
                    found.setdefault(current, set()).add(hunk["cursor"])
                hunk["added"] = True
                hunk["cursor"] += 1
                new_left -= 1
            elif tag == "-":
                if hunk["anchor"] is None:
                    hunk["anchor"] = hunk["cursor"]
                hunk["deleted"] = True
                old_left -= 1
            elif tag == "\\":
                pass
            else:
                raise MalformedHunkHeader("hunk body ended early", source=source, line=lineno, token=line)
            if old_left <= 0 and new_left <= 0:
                close_hunk()
                hunk = None
            continue
        if line.startswith("+++ "):
            current = _diff_path(line[4:], strip_prefix)
            if current is None:
                logger.debug("%s:%d: file deleted by the fix; no post-image lines", source, lineno)
        elif line.startswith("@@"):
            m = _HUNK_HEADER.match(line)
            if m is None:
                raise MalformedHunkHeader("malformed hunk header", source=source, line=lineno, token=line)
            old_left = 1 if m.group(2) is None else int(m.group(2))
            new_start = int(m.group(3))
            new_left = 1 if m.group(4) is None else int(m.group(4))
            hunk = {"start": new_start, "count": new_left, "cursor": new_start,
                    "anchor": None, "added": False, "deleted": False}
            if old_left == 0 and new_left == 0:
                hunk = None
    if old_left > 0 or new_left > 0:
        raise MalformedHunkHeader("diff ends inside a hunk", source=source,
                                  line=len(text.splitlines()), token=None)
    return FixLocations({path: frozenset(numbers) for path, numbers in found.items() if numbers})


@dataclass(frozen=True)
class OverlapResult:
    overlapping: bool
    units: Tuple[CoverageUnit, ...]

    @property
    def verdict(self):
        return "overlapping" if self.overlapping else "non_overlapping"


def overlap(mc, fix):
    """MC が修正行を 1 行以上含めば overlapping"""
    if mc.granularity is not Granularity.LINE:
        raise WrongGranularity(f"overlap needs line coverage, the report is {mc.granularity.value}")
    hits = tuple(sorted(u for u in mc.suite_mc if u in fix))
    return OverlapResult(bool(hits), hits)


def overlap_many(mc, fixes):
    """複数の修正に対する判定と overlapping 件数"""
    results = {name: overlap(mc, fix) for name, fix in fixes.items()}
    return results, sum(1 for r in results.values() if r.overlapping)


# ---------------------------------------------------------------- バグ数との相関

@dataclass(frozen=True)
class CorrelationResult:
    rows: Tuple[Tuple[int, float, float], ...]
    pcc_mc: float
    pcc_line: float


def bug_correlation(bug_pairs, sizes, repeats, seed, strict=True):
    """バグ集合をランダムに作り、バグ数と MC% / カバレッジ% の相関を求める"""
    ids = sorted(bug_pairs)
    rows = []
    for subset in sample_subsets(ids, sizes, repeats, seed):
        if not subset:
            continue
        report = mc_suite([bug_pairs[i] for i in subset], strict=strict)
        rows.append((len(subset), report.mc_percent, report.union_coverage_percent))
    counts = Sample("bugs", [r[0] for r in rows])
    pcc_mc = pearson(counts, Sample("mc_percent", [r[1] for r in rows]))
    pcc_line = pearson(counts, Sample("coverage_percent", [r[2] for r in rows]))
    return CorrelationResult(tuple(rows), pcc_mc, pcc_line)


# ---------------------------------------------------------------- 入力

def load_samples(path):
    """CSV（ヘッダー = ラベル）または JSON {"samples": [...]} を読み込み"""
    path = Path(path)
    if path.suffix.lower() == ".json":
        try:
            doc = json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise InputError(f"{path}: cannot read ({e.strerror})") from None
        except json.JSONDecodeError as e:
            raise InputError(f"{path}: malformed JSON: {e.msg}") from None
        items = doc.get("samples") if isinstance(doc, dict) else None
        if not isinstance(items, list):
            raise InvalidSample(f"{path}: expected {{\"samples\": [...]}}")
        samples = []
        for i, item in enumerate(items):
            if not isinstance(item, dict) or not isinstance(item.get("label"), str) \
                    or not isinstance(item.get("values"), list):
                raise InvalidSample(f"{path}: samples[{i}] needs a label and a values array")
            try:
                samples.append(Sample(item["label"], tuple(float(v) for v in item["values"])))
            except (TypeError, ValueError):
                raise InvalidSample(f"{path}: samples[{i}] has non-numeric values") from None
        return samples

    samples = []
    for label, cells in read_csv_columns(path).items():
        values = []
        for lineno, cell in cells:
            try:
                values.append(float(cell.rstrip("%")))
            except ValueError:
                raise InvalidSample(f"{path}:{lineno}: column {label!r} has a non-numeric cell {cell!r}") from None
        samples.append(Sample(label, tuple(values)))
    return samples
