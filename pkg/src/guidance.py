"""カバレッジ / MC フィードバックによるテスト生成ループ

CCG はペア両側のカバレッジの和集合、MCG はペアごとの MC の和集合を累積し、
plateau_limit 回続けて増えなければターゲットの状態（入力領域など）を作り直す。
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Protocol, Tuple

import numpy as np

from .coverage_model import Granularity, empty_map, union
from .errors import ContractError, GranularityMismatch, InvalidBudget, TargetFailure
from .metamorphic import mc_pair, side_coverage
from .report_io import csv_text, jsonl_text, write_output
from .toytarget import run_relation_pair

logger = logging.getLogger(__name__)


class PolicyKind(str, Enum):
    CCG = "ccg"
    MCG = "mcg"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ContractError(f"unknown policy {value!r} (expected ccg or mcg)") from None


class FeedbackPolicy:
    """累積集合は単調増加する"""

    def __init__(self, kind, granularity=Granularity.BRANCH, strict=True):
        self.kind = PolicyKind.parse(kind)
        self.granularity = Granularity.parse(granularity)
        self.strict = strict
        self.cumulative = empty_map(self.granularity)

    def observe(self, pair):
        """新規ユニット数を返して累積集合を更新"""
        if pair.granularity is not self.granularity:
            raise GranularityMismatch(
                f"pair {pair.id!r} is {pair.granularity.value} coverage, "
                f"the {self.kind.value} policy tracks {self.granularity.value}")
        if self.kind is PolicyKind.CCG:
            candidate = union(side_coverage(pair.side_a), side_coverage(pair.side_b))
        else:
            candidate = mc_pair(pair, strict=self.strict)
        new_units = len(candidate.covered - self.cumulative.covered)
        self.cumulative = union(self.cumulative, candidate)
        return new_units


@dataclass(frozen=True)
class Finding:
    """関係違反。bug_ids は既知のバグ識別子（不明なら空）"""

    pair_id: str
    bug_ids: Tuple[str, ...] = ()


class TargetAdapter(Protocol):
    granularity: Granularity

    def initial_state(self, rng): ...

    def generate_pair(self, state, rng): ...

    def check(self, pair) -> Optional[Finding]: ...

    def mutate_state(self, state, rng): ...

    def describe(self) -> dict: ...


@dataclass(frozen=True)
class Event:
    iteration: int
    pair_id: str
    new_units: int
    violation: bool
    mutated_state: bool
    bug_ids: Tuple[str, ...] = ()

    def to_dict(self):
        return {
            "iteration": self.iteration,
            "pair_id": self.pair_id,
            "new_units": self.new_units,
            "violation": self.violation,
            "mutated_state": self.mutated_state,
            "bug_ids": list(self.bug_ids),
        }


@dataclass
class GuidanceState:
    seed: int
    policy: PolicyKind
    budget: int
    plateau_limit: int
    plateau_counter: int = 0
    snapshot: object = None
    events: list = field(default_factory=list)
    bugs: dict = field(default_factory=dict)  # bug id -> 最初に見つかった iteration
    violations_total: int = 0
    cumulative: object = None
    pairs: list = field(default_factory=list)

    @property
    def iterations(self):
        return len(self.events)

    @property
    def distinct_bugs(self):
        return len(self.bugs)

    def summary(self):
        return {
            "policy": self.policy.value,
            "seed": self.seed,
            "budget": self.budget,
            "plateau_limit": self.plateau_limit,
            "iterations": self.iterations,
            "distinct_bugs": self.distinct_bugs,
            "bugs": sorted(self.bugs),
            "violations_total": self.violations_total,
            "state_mutations": sum(1 for e in self.events if e.mutated_state),
            "cumulative_units": len(self.cumulative.covered) if self.cumulative is not None else 0,
        }


def drive(target, policy, budget, plateau_limit=20, seed=0, granularity=None, keep_pairs=False):
    """生成 → 観測 → 停滞ならば状態変異、を budget 回繰り返す"""
    if budget < 1:
        raise InvalidBudget(f"budget must be >= 1, got {budget}")
    if plateau_limit < 1:
        raise InvalidBudget(f"plateau_limit must be >= 1, got {plateau_limit}")
    kind = PolicyKind.parse(policy)
    feedback = FeedbackPolicy(kind, granularity or target.granularity)
    rng = np.random.default_rng(seed)
    state = GuidanceState(seed=seed, policy=kind, budget=budget, plateau_limit=plateau_limit)
    state.cumulative = feedback.cumulative

    try:
        state.snapshot = target.initial_state(rng)
    except Exception as exc:
        raise TargetFailure(f"target failed to initialise: {exc}", state) from exc

    for iteration in range(1, budget + 1):
        try:
            pair = target.generate_pair(state.snapshot, rng)
            finding = target.check(pair)
            new_units = feedback.observe(pair)
        except Exception as exc:
            state.cumulative = feedback.cumulative
            raise TargetFailure(f"iteration {iteration}: {exc}", state) from exc
        state.cumulative = feedback.cumulative
        if keep_pairs:
            state.pairs.append(pair)

        if new_units == 0:
            state.plateau_counter += 1
        else:
            state.plateau_counter = 0
        mutated = False
        if state.plateau_counter >= plateau_limit:
            try:
                state.snapshot = target.mutate_state(state.snapshot, rng)
            except Exception as exc:
                raise TargetFailure(f"iteration {iteration}: state mutation failed: {exc}", state) from exc
            state.plateau_counter = 0
            mutated = True
            logger.debug("iteration %d: no new %s units for %d iterations, state mutated",
                         iteration, kind.value, plateau_limit)

        bug_ids = ()
        if finding is not None:
            state.violations_total += 1
            bug_ids = tuple(finding.bug_ids)
            for bug in bug_ids:
                state.bugs.setdefault(bug, iteration)
        state.events.append(Event(iteration, pair.id, new_units, finding is not None, mutated, bug_ids))

    logger.info("%s seed=%d: %d distinct bug(s), %d violation(s) in %d iterations",
                kind.value, seed, state.distinct_bugs, state.violations_total, state.iterations)
    return state


def event_log_text(state):
    return jsonl_text(e.to_dict() for e in state.events)


def _tagged_events(states):
    for state in states:
        for event in state.events:
            yield {"policy": state.policy.value, "seed": state.seed, **event.to_dict()}


def write_event_log(states, out=None):
    """複数ランのイベントログを policy・seed 付きの JSON Lines で書き出し"""
    write_output(jsonl_text(_tagged_events(states)), out)


# ---------------------------------------------------------------- 比較実験

@dataclass(frozen=True)
class ComparisonRow:
    policy: PolicyKind
    seed: int
    budget: int
    distinct_bugs: int
    iterations: int
    violations_total: int


@dataclass(frozen=True)
class ComparisonResult:
    rows: Tuple[ComparisonRow, ...]
    target: dict
    plateau_limit: int
    states: tuple = field(default=(), compare=False, repr=False)


def compare(target, budgets, seeds, plateau_limit=20):
    """予算・シードごとに CCG と MCG を走らせて発見バグ数を集計"""
    seeds = list(seeds)
    budgets = [budgets] if isinstance(budgets, int) else list(budgets)
    if len(seeds) < 2:
        raise ContractError(f"compare needs at least 2 seeds, got {len(seeds)}")
    if not budgets:
        raise ContractError("compare needs at least one budget")
    rows = []
    states = []
    for budget in budgets:
        for seed in seeds:
            for kind in (PolicyKind.CCG, PolicyKind.MCG):
                state = drive(target, kind, budget, plateau_limit, seed)
                states.append(state)
                rows.append(ComparisonRow(kind, seed, budget, state.distinct_bugs,
                                          state.iterations, state.violations_total))
    return ComparisonResult(tuple(rows), target.describe(), plateau_limit, tuple(states))


COMPARISON_HEADER = ("policy", "seed", "distinct_bugs", "iterations", "violations_total")


def comparison_rows(result):
    return [(r.policy.value, r.seed, r.distinct_bugs, r.iterations, r.violations_total) for r in result.rows]


def comparison_csv(result):
    return csv_text(COMPARISON_HEADER, comparison_rows(result))


def comparison_summary(result):
    """ポリシーごとの平均と MCG 視点の勝敗"""
    by_key = {(r.budget, r.seed, r.policy): r for r in result.rows}
    means = {}
    for kind in PolicyKind:
        counts = [r.distinct_bugs for r in result.rows if r.policy is kind]
        means[kind.value] = float(np.mean(counts)) if counts else 0.0
    wins = ties = losses = 0
    for budget, seed, kind in by_key:
        if kind is not PolicyKind.MCG:
            continue
        mcg = by_key[(budget, seed, PolicyKind.MCG)].distinct_bugs
        ccg = by_key[(budget, seed, PolicyKind.CCG)].distinct_bugs
        if mcg > ccg:
            wins += 1
        elif mcg == ccg:
            ties += 1
        else:
            losses += 1
    return {
        "target": result.target,
        "plateau_limit": result.plateau_limit,
        "budgets": sorted({r.budget for r in result.rows}),
        "seeds": sorted({r.seed for r in result.rows}),
        "mean_distinct_bugs": means,
        "mcg_vs_ccg": {"wins": wins, "ties": ties, "losses": losses},
    }


# ---------------------------------------------------------------- トイターゲット

class ToyTargetAdapter:
    """組み込みフィクスチャをガイダンス対象にするアダプタ

    状態は入力領域の中心。region に半径を持つ引数はその近傍から、None の引数は毎回定義域全体から引く。
    停滞時の状態変異で中心を引き直す（データベースの作り直しに相当）。
    """

    def __init__(self, fixture, relation=None, granularity=Granularity.BRANCH, radius=None):
        if not fixture.domain:
            raise ContractError(f"{fixture.name} has no input domain to draw from")
        if radius is not None and radius < 0:
            raise ContractError(f"radius must be >= 0, got {radius}")
        self.fixture = fixture
        self.relation = fixture.relation(relation) if relation else next(iter(fixture.relations.values()))
        self.granularity = Granularity.parse(granularity)
        self.radii = self._radii(fixture, radius)
        self._serial = 0
        self._results = {}

    @staticmethod
    def _radii(fixture, radius):
        if fixture.region:
            radii = fixture.region
        else:
            radii = tuple(max(1, (hi - lo) // 8) for lo, hi in fixture.domain)
        if radius is None:
            return tuple(radii)
        return tuple(None if r is None else radius for r in radii)

    def _center(self, rng):
        return tuple(None if r is None else int(rng.integers(lo, hi, endpoint=True))
                     for r, (lo, hi) in zip(self.radii, self.fixture.domain))

    def draw_inputs(self, center, rng):
        """状態（領域の中心）からベース入力を一つ引く"""
        out = []
        for c, r, (lo, hi) in zip(center, self.radii, self.fixture.domain):
            if r is not None:
                lo, hi = max(lo, c - r), min(hi, c + r)
            out.append(int(rng.integers(lo, hi, endpoint=True)))
        return tuple(out)

    def initial_state(self, rng):
        self._serial = 0
        self._results.clear()
        return self._center(rng)

    def generate_pair(self, state, rng):
        base = self.draw_inputs(state, rng)
        pair_id = f"{self.fixture.name}:{self.relation.name}:{self._serial}"
        self._serial += 1
        pair, violation, traces = run_relation_pair(self.fixture.program, self.relation, base,
                                                    pair_id, self.granularity)
        # 直前のペアの結果だけを保持
        self._results = {pair_id: (violation, traces)}
        return pair

    def check(self, pair):
        violation, (trace_a, traces_b) = self._results[pair.id]
        if violation is None:
            return None
        side_b = frozenset().union(*(t.covered_lines for t in traces_b))
        bug_ids = self.fixture.bugs_on_lines(trace_a.covered_lines ^ side_b)
        if not bug_ids:
            bug_ids = self.fixture.bugs_on_lines(trace_a.covered_lines | side_b)
        return Finding(pair.id, tuple(sorted(bug_ids)))

    def mutate_state(self, state, rng):
        return self._center(rng)

    def describe(self):
        return {
            "fixture": self.fixture.name,
            "relation": self.relation.name,
            "granularity": self.granularity.value,
            "radius": list(self.radii),
            "seeded_bugs": len(self.fixture.bugs),
        }
