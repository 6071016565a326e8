"""組み込みの計装済みトイプログラム

整数変数・四則演算・比較・if/else・return だけの小さな言語。
ループなしなので実行は必ず停止し、実行した文の行番号がそのまま行カバレッジになる。
整数は 64 ビットで折り返し、オーバーフローはトレースの outcome で区別する。
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from typing import Callable, Dict, Optional, Tuple, Union

from .coverage_model import CoverageMap, CoverageUnit, Granularity
from .errors import (
    ArityMismatch, ContractError, MissingReturn, NoMutants, UnknownFixture,
)
from .metamorphic import TestPair

logger = logging.getLogger(__name__)

INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1


def _wrap(value):
    wrapped = ((value - INT64_MIN) % (1 << 64)) + INT64_MIN
    return wrapped, wrapped != value


# ---------------------------------------------------------------- 式

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    value: int


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # + - *
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Compare:
    op: str  # < <= > >= == !=
    left: "Expr"
    right: "Expr"


Expr = Union[Var, Const, Neg, BinOp, Compare]

_PRECEDENCE = {"*": 2, "+": 1, "-": 1}
_COMPARE = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


def render(expr):
    """式を C 風の文字列にする"""
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Const):
        return str(expr.value)
    if isinstance(expr, Neg):
        inner = render(expr.operand)
        return f"-{inner}" if isinstance(expr.operand, (Var, Const)) else f"-({inner})"
    if isinstance(expr, Compare):
        return f"{render(expr.left)} {expr.op} {render(expr.right)}"
    prec = _PRECEDENCE[expr.op]
    left = render(expr.left)
    if isinstance(expr.left, BinOp) and _PRECEDENCE[expr.left.op] < prec:
        left = f"({left})"
    right = render(expr.right)
    if isinstance(expr.right, BinOp) and _PRECEDENCE[expr.right.op] <= prec:
        right = f"({right})"
    return f"{left} {expr.op} {right}"


# ---------------------------------------------------------------- 文

@dataclass(frozen=True)
class Assign:
    line: int
    name: str
    expr: Expr


@dataclass(frozen=True)
class Return:
    line: int
    expr: Expr


@dataclass(frozen=True)
class If:
    """else_line / end_line は `} else {` や `}` の構造行。if を評価すると必ずカバーされる"""

    line: int
    cond: Expr
    then: tuple
    orelse: tuple = ()
    else_line: Optional[int] = None
    end_line: Optional[int] = None


@dataclass(frozen=True)
class Mark:
    """単独の `else` のような構造行"""

    line: int


Stmt = Union[Assign, Return, If, Mark]


def _walk(stmts):
    for s in stmts:
        yield s
        if isinstance(s, If):
            yield from _walk(s.then)
            yield from _walk(s.orelse)


@dataclass(frozen=True)
class ToyProgram:
    name: str
    params: Tuple[str, ...]
    body: Tuple[Stmt, ...]
    listing: Tuple[str, ...] = ()
    closing_line: Optional[int] = None

    def statements(self):
        """ソース順（行番号順）の文リスト"""
        return sorted(_walk(self.body), key=lambda s: s.line)

    @cached_property
    def instrumented_lines(self):
        lines = set()
        for s in _walk(self.body):
            lines.add(s.line)
            if isinstance(s, If):
                lines.update(n for n in (s.else_line, s.end_line) if n is not None)
        if self.closing_line is not None:
            lines.add(self.closing_line)
        return frozenset(lines)

    @cached_property
    def _line_units(self):
        return {n: CoverageUnit.line(self.name, n) for n in self.instrumented_lines}

    @cached_property
    def _branch_units(self):
        units = {}
        for s in _walk(self.body):
            if isinstance(s, If):
                units[(s.line, True)] = CoverageUnit.branch(self.name, s.line, 0, 0)
                units[(s.line, False)] = CoverageUnit.branch(self.name, s.line, 0, 1)
        return units

    @cached_property
    def line_universe(self):
        return frozenset(self._line_units.values())

    @cached_property
    def branch_universe(self):
        return frozenset(self._branch_units.values())

    @cached_property
    def function_universe(self):
        return frozenset({CoverageUnit.function(self.name, self.name)})


# ---------------------------------------------------------------- 実行

class Outcome(str, Enum):
    OK = "ok"
    OVERFLOW = "overflow"


@dataclass(frozen=True)
class ExecutionTrace:
    program: ToyProgram = field(repr=False)
    inputs: Tuple[int, ...]
    output: int
    outcome: Outcome
    covered_lines: frozenset
    taken_branches: frozenset

    @property
    def overflow(self):
        return self.outcome is Outcome.OVERFLOW

    @cached_property
    def lines(self):
        units = self.program._line_units
        return CoverageMap(Granularity.LINE, frozenset(units[n] for n in self.covered_lines),
                           self.program.line_universe)

    @cached_property
    def branches(self):
        units = self.program._branch_units
        return CoverageMap(Granularity.BRANCH, frozenset(units[k] for k in self.taken_branches),
                           self.program.branch_universe)

    @cached_property
    def functions(self):
        universe = self.program.function_universe
        return CoverageMap(Granularity.FUNCTION, universe, universe)

    def coverage(self, granularity=Granularity.LINE):
        granularity = Granularity.parse(granularity)
        if granularity is Granularity.LINE:
            return self.lines
        if granularity is Granularity.BRANCH:
            return self.branches
        if granularity is Granularity.FUNCTION:
            return self.functions
        raise ContractError("toy programs are not instrumented for edge coverage")


class _Frame:
    def __init__(self, env):
        self.env = env
        self.overflow = False
        self.lines = set()
        self.branches = set()

    def eval(self, expr):
        if isinstance(expr, Var):
            return self.env[expr.name]
        if isinstance(expr, Const):
            return expr.value
        if isinstance(expr, Neg):
            return self._wrap(-self.eval(expr.operand))
        if isinstance(expr, Compare):
            return int(_COMPARE[expr.op](self.eval(expr.left), self.eval(expr.right)))
        left = self.eval(expr.left)
        right = self.eval(expr.right)
        if expr.op == "+":
            return self._wrap(left + right)
        if expr.op == "-":
            return self._wrap(left - right)
        return self._wrap(left * right)

    def _wrap(self, value):
        value, overflowed = _wrap(value)
        self.overflow = self.overflow or overflowed
        return value

    def run_block(self, stmts):
        """return に到達したら (True, 値)、そうでなければ (False, None)"""
        for s in stmts:
            self.lines.add(s.line)
            if isinstance(s, Assign):
                self.env[s.name] = self.eval(s.expr)
            elif isinstance(s, Return):
                return True, self.eval(s.expr)
            elif isinstance(s, If):
                for n in (s.else_line, s.end_line):
                    if n is not None:
                        self.lines.add(n)
                taken = bool(self.eval(s.cond))
                self.branches.add((s.line, taken))
                done, value = self.run_block(s.then if taken else s.orelse)
                if done:
                    return done, value
        return False, None


def run(p, inputs):
    """プログラムを実行してトレースを返す（純粋関数）"""
    inputs = tuple(inputs)
    if len(inputs) != len(p.params):
        raise ArityMismatch(f"{p.name} takes {len(p.params)} argument(s), got {len(inputs)}")
    for v in inputs:
        if not isinstance(v, int) or isinstance(v, bool) or not INT64_MIN <= v <= INT64_MAX:
            raise ContractError(f"{p.name}: input {v!r} is not a 64-bit integer")
    frame = _Frame(dict(zip(p.params, inputs)))
    if p.closing_line is not None:
        frame.lines.add(p.closing_line)
    done, value = frame.run_block(p.body)
    if not done:
        raise MissingReturn(f"{p.name}{inputs} finished without reaching a return statement")
    return ExecutionTrace(
        program=p,
        inputs=inputs,
        output=value,
        outcome=Outcome.OVERFLOW if frame.overflow else Outcome.OK,
        covered_lines=frozenset(frame.lines),
        taken_branches=frozenset(frame.branches),
    )


def dump_program(p):
    """行番号付きのソースリスト"""
    width = len(str(len(p.listing)))
    return "".join(f"{n:>{width}}  {text}\n" for n, text in enumerate(p.listing, start=1))


# ---------------------------------------------------------------- メタモルフィック関係

class Check(str, Enum):
    EQUAL = "equal"
    GREATER_OR_EQUAL = "greater_or_equal"
    CUSTOM = "custom"


@dataclass(frozen=True)
class MetamorphicRelation:
    """derive(inputs, seed) は後続入力のタプル（1 個以上）を返す"""

    name: str
    derive: Callable = field(compare=False)
    check: Check = Check.EQUAL
    predicate: Optional[Callable[[int, int], bool]] = field(default=None, compare=False)
    predicate_name: str = ""
    description: str = ""
    seed: int = 0

    def follow_ups(self, inputs):
        derived = self.derive(tuple(inputs), self.seed)
        if derived and all(isinstance(v, int) for v in derived):
            derived = (derived,)
        return tuple(tuple(d) for d in derived)

    def holds(self, output_a, output_b):
        if self.check is Check.EQUAL:
            return output_a == output_b
        if self.check is Check.GREATER_OR_EQUAL:
            return output_a >= output_b
        return bool(self.predicate(output_a, output_b))

    @property
    def check_name(self):
        return self.predicate_name if self.check is Check.CUSTOM else self.check.value


@dataclass(frozen=True)
class Violation:
    pair_id: str
    inputs_a: Tuple[int, ...]
    inputs_b: Tuple[Tuple[int, ...], ...]
    output_a: int
    outputs_b: Tuple[int, ...]


@dataclass
class RelationOutcome:
    violations: list = field(default_factory=list)
    pairs: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def violated(self):
        return bool(self.violations)


def run_relation_pair(p, r, inputs, pair_id, granularity=Granularity.LINE):
    """1 ペア分を実行して (TestPair, Violation or None, traces) を返す"""
    trace_a = run(p, inputs)
    traces_b = [run(p, f) for f in r.follow_ups(inputs)]
    pair = TestPair(pair_id, [trace_a.coverage(granularity)], [t.coverage(granularity) for t in traces_b])
    violation = None
    if not all(r.holds(trace_a.output, t.output) for t in traces_b):
        violation = Violation(pair_id, trace_a.inputs, tuple(t.inputs for t in traces_b),
                              trace_a.output, tuple(t.output for t in traces_b))
    return pair, violation, (trace_a, traces_b)


def evaluate_relation(p, r, seeds, granularity=Granularity.LINE):
    seeds = list(seeds)
    if not seeds:
        raise ContractError("evaluate_relation needs at least one seed input")
    outcome = RelationOutcome()
    for i, seed in enumerate(seeds):
        pair_id = f"{p.name}:{r.name}:{i}"
        try:
            pair, violation, _ = run_relation_pair(p, r, seed, pair_id, granularity)
        except ContractError as exc:
            # 1 ペアの失敗でバッチ全体は止めない
            logger.debug("%s failed: %s", pair_id, exc)
            outcome.failures.append((pair_id, exc))
            continue
        outcome.pairs.append(pair)
        if violation is not None:
            outcome.violations.append(violation)
    return outcome


# ---------------------------------------------------------------- ミューテーション

class MutationOperator(str, Enum):
    ARITH_SWAP = "arith_swap"
    REL_SWAP = "rel_swap"
    CONST_OFF = "const_off"


_ARITH_SWAP = {"+": "-", "-": "+"}
_REL_SWAP = {"<": "<=", "<=": "<", ">": ">=", ">=": ">", "==": "!=", "!=": "=="}


@dataclass(frozen=True)
class Mutant:
    id: str
    program: str
    line: int
    operator: MutationOperator
    site: int  # ARITH/REL: 式中の何番目の演算子か、CONST_OFF: ±1
    detail: str = ""


def _stmt_expr(s):
    if isinstance(s, If):
        return s.cond
    if isinstance(s, (Assign, Return)):
        return s.expr
    return None


def _preorder(expr):
    yield expr
    if isinstance(expr, (BinOp, Compare)):
        yield from _preorder(expr.left)
        yield from _preorder(expr.right)
    elif isinstance(expr, Neg):
        yield from _preorder(expr.operand)


def _is_arith_site(e):
    return isinstance(e, BinOp) and e.op in _ARITH_SWAP


def _is_rel_site(e):
    return isinstance(e, Compare)


def _rewrite_nth(expr, match, change, target):
    counter = [0]

    def visit(e):
        hit = False
        if match(e):
            hit = counter[0] == target
            counter[0] += 1
        if isinstance(e, (BinOp, Compare)):
            e = replace(e, left=visit(e.left), right=visit(e.right))
        elif isinstance(e, Neg):
            e = replace(e, operand=visit(e.operand))
        return change(e) if hit else e

    return visit(expr)


def enumerate_mutants(p):
    """ソース順、次に演算子順で全ミュータントを列挙（ID は program:line:op）"""
    mutants = []
    for s in p.statements():
        expr = _stmt_expr(s)
        if expr is None:
            continue
        arith = [e for e in _preorder(expr) if _is_arith_site(e)]
        for k, e in enumerate(arith):
            mutants.append(Mutant(f"{p.name}:{s.line}:arith_swap@{k}", p.name, s.line,
                                  MutationOperator.ARITH_SWAP, k, f"{e.op} -> {_ARITH_SWAP[e.op]}"))
        rel = [e for e in _preorder(expr) if _is_rel_site(e)]
        for k, e in enumerate(rel):
            mutants.append(Mutant(f"{p.name}:{s.line}:rel_swap@{k}", p.name, s.line,
                                  MutationOperator.REL_SWAP, k, f"{e.op} -> {_REL_SWAP[e.op]}"))
        if isinstance(s, Return):
            for delta in (1, -1):
                sign = "+" if delta > 0 else "-"
                mutants.append(Mutant(f"{p.name}:{s.line}:const_off{sign}1", p.name, s.line,
                                      MutationOperator.CONST_OFF, delta, f"return e {sign} 1"))
    return mutants


def _mutate_stmt(s, m):
    if m.operator is MutationOperator.CONST_OFF:
        if not isinstance(s, Return):
            raise ContractError(f"{m.id}: const_off applies to return statements only")
        op = "+" if m.site > 0 else "-"
        return replace(s, expr=BinOp(op, s.expr, Const(abs(m.site))))
    if m.operator is MutationOperator.ARITH_SWAP:
        match, change = _is_arith_site, (lambda e: replace(e, op=_ARITH_SWAP[e.op]))
    else:
        match, change = _is_rel_site, (lambda e: replace(e, op=_REL_SWAP[e.op]))
    expr = _stmt_expr(s)
    if expr is None or sum(1 for e in _preorder(expr) if match(e)) <= m.site:
        raise ContractError(f"{m.id}: no mutation site {m.site} on line {m.line}")
    mutated = _rewrite_nth(expr, match, change, m.site)
    return replace(s, cond=mutated) if isinstance(s, If) else replace(s, expr=mutated)


def _replace_line(stmts, line, fn):
    out = []
    for s in stmts:
        if s.line == line:
            s = fn(s)
        elif isinstance(s, If):
            s = replace(s, then=_replace_line(s.then, line, fn), orelse=_replace_line(s.orelse, line, fn))
        out.append(s)
    return tuple(out)


def apply_mutant(p, m):
    """ちょうど 1 文だけ書き換えたプログラムを返す"""
    if m.line not in {s.line for s in _walk(p.body)}:
        raise ContractError(f"{m.id}: {p.name} has no statement on line {m.line}")
    return replace(p, body=_replace_line(p.body, m.line, lambda s: _mutate_stmt(s, m)))


@dataclass(frozen=True)
class MutationResult:
    killed: Tuple[str, ...]
    survived: Tuple[str, ...]

    @property
    def total(self):
        return len(self.killed) + len(self.survived)

    @property
    def score(self):
        return len(self.killed) / self.total


def mutation_analysis(p, r, seeds, mutants=None):
    """関係違反が出たミュータントを killed とする"""
    seeds = list(seeds)
    mutants = enumerate_mutants(p) if mutants is None else list(mutants)
    if not mutants:
        raise NoMutants(f"no mutants for {p.name}")
    killed, survived = [], []
    for m in mutants:
        outcome = evaluate_relation(apply_mutant(p, m), r, seeds)
        (killed if outcome.violated else survived).append(m.id)
    return MutationResult(tuple(killed), tuple(survived))


def mutation_score(p, r, seeds, mutants=None):
    return mutation_analysis(p, r, seeds, mutants).score


# ---------------------------------------------------------------- フィクスチャ

@dataclass(frozen=True)
class SeededBug:
    id: str
    line: int
    description: str


@dataclass(frozen=True)
class Fixture:
    program: ToyProgram
    relations: Dict[str, MetamorphicRelation] = field(compare=False)
    bugs: Tuple[SeededBug, ...] = ()
    seeds: Tuple[Tuple[int, ...], ...] = ()
    domain: Tuple[Tuple[int, int], ...] = ()
    region: Tuple[Optional[int], ...] = ()  # 引数ごとの領域半径。None は毎回定義域全体から
    fixed_variant: Optional[str] = None
    bug_mutants: Tuple[str, ...] = ()
    description: str = ""

    @property
    def name(self):
        return self.program.name

    def relation(self, name):
        try:
            return self.relations[name]
        except KeyError:
            known = ", ".join(self.relations) or "none"
            raise ContractError(f"{self.name} has no relation {name!r} (known: {known})") from None

    def bugs_on_lines(self, lines):
        return {b.id for b in self.bugs if b.line in lines}


class _Source:
    """ソース行を追加しながら行番号を払い出す"""

    def __init__(self):
        self.lines = []

    def emit(self, text):
        self.lines.append(text)
        return len(self.lines)


def _swap_pair(inputs, seed):
    x, y = inputs
    return ((y, x),)


def _shift_both(inputs, seed):
    c = 1 + abs(seed) % 10
    x, y = inputs
    return ((x + c, y + c),)


def _negate(inputs, seed):
    (x,) = inputs
    return ((-x,),)


def _zero(inputs, seed):
    return ((0,),)


def _halve(inputs, seed):
    (x,) = inputs
    return ((x // 2,),)


def _swap_operands(inputs, seed):
    op, a, b = inputs
    return ((op, b, a),)


def _same(inputs, seed):
    return (tuple(inputs),)


def _strictly_greater(output_a, output_b):
    return output_a > output_b


def _listing1(fixed):
    x, y = Var("x"), Var("y")
    src = _Source()
    src.emit("int calculate_difference(int x, int y) {")
    if_line = src.emit("    if (x > y) {")
    then_line = src.emit("        return x - y;")
    else_line = src.emit("    } else {")
    if fixed:
        ret_line = src.emit("        return y - x;")
        ret = BinOp("-", y, x)
    else:
        ret_line = src.emit("        return y - x + 1; // bug: y - x")
        ret = BinOp("+", BinOp("-", y, x), Const(1))
    end_line = src.emit("    }")
    closing = src.emit("}")
    body = (If(if_line, Compare(">", x, y), (Return(then_line, BinOp("-", x, y)),),
               (Return(ret_line, ret),), else_line=else_line, end_line=end_line),)
    name = "listing1_fixed" if fixed else "listing1"
    program = ToyProgram(name, ("x", "y"), body, tuple(src.lines), closing)
    relations = {
        "R1": MetamorphicRelation("R1", _swap_pair, Check.EQUAL,
                                  description="f(x, y) == f(y, x)"),
        "R2": MetamorphicRelation("R2", _shift_both, Check.EQUAL,
                                  description="f(x, y) == f(x + c, y + c), c = 1"),
    }
    bugs = () if fixed else (SeededBug("listing1-plus-one", ret_line, "else branch returns y - x + 1"),)
    return Fixture(program, relations, bugs, seeds=((2, 3), (6, 2)), domain=((-50, 50), (-50, 50)),
                   fixed_variant="listing1_fixed", bug_mutants=("listing1_fixed:5:const_off+1",),
                   description="absolute difference of two integers")


def _abs(fixed):
    x = Var("x")
    src = _Source()
    src.emit("int abs(int x) {")
    outer = src.emit("    if (x < 0)")
    neg = src.emit("        return -x;")
    inner = src.emit("    else if (x == 0)")
    zero = src.emit("        return 0;" if fixed else "        return 3; // bug")
    else_mark = src.emit("    else")
    pos = src.emit("        return x;")
    closing = src.emit("}")
    body = (If(outer, Compare("<", x, Const(0)), (Return(neg, Neg(x)),), (
        If(inner, Compare("==", x, Const(0)), (Return(zero, Const(0 if fixed else 3)),),
           (Mark(else_mark), Return(pos, x))),
    )),)
    name = "abs_fixed" if fixed else "abs_mr"
    program = ToyProgram(name, ("x",), body, tuple(src.lines), closing)
    relations = {
        "MR1": MetamorphicRelation("MR1", _negate, Check.EQUAL, description="abs(x) == abs(-x)"),
        "MR2": MetamorphicRelation("MR2", _zero, Check.GREATER_OR_EQUAL, description="abs(x) >= abs(0)"),
    }
    bugs = () if fixed else (SeededBug("abs-zero-returns-3", zero, "abs(0) returns 3"),)
    return Fixture(program, relations, bugs, seeds=((3,), (-5,), (0,), (2,)), domain=((-10, 10),),
                   fixed_variant="abs_fixed", description="absolute value")


def _offset():
    x = Var("x")
    src = _Source()
    src.emit("int offset(int x) {")
    ret = src.emit("    return x + 1000;")
    closing = src.emit("}")
    program = ToyProgram("offset", ("x",), (Return(ret, BinOp("+", x, Const(1000))),), tuple(src.lines), closing)
    relations = {
        "halve": MetamorphicRelation("halve", _halve, Check.CUSTOM, predicate=_strictly_greater,
                                     predicate_name="strictly_greater",
                                     description="x > x // 2 implies f(x) > f(x // 2) for x > 0"),
    }
    bugs = (SeededBug("offset-overflow", ret, "x + 1000 wraps around for x near INT64_MAX"),)
    return Fixture(program, relations, bugs,
                   seeds=((10,), (1 << 62,), (INT64_MAX - 807,)), domain=((1, INT64_MAX),),
                   description="one-line program whose only bug is an overflow")


def _minieval(seeded):
    op, a, b, r, d = Var("op"), Var("a"), Var("b"), Var("r"), Var("d")
    src = _Source()
    bugs = []
    body = []

    def bug_block(depth, guards, text, target, expr, bug_id, description):
        # guards を入れ子の if にしてバグ文を置く（修正版では何も出力しない）
        if not seeded:
            return []
        pad = "    " * depth
        guard_lines = [src.emit(f"{pad}{'    ' * i}if ({cond_text}) {{")
                       for i, (_, cond_text) in enumerate(guards)]
        bug_line = src.emit(f"{pad}{'    ' * len(guards)}{text} // bug")
        for i in reversed(range(len(guards))):
            src.emit(f"{pad}{'    ' * i}}}")
        bugs.append(SeededBug(bug_id, bug_line, description))
        stmt = Assign(bug_line, target, expr)
        for (cond, _), line in reversed(list(zip(guards, guard_lines))):
            stmt = If(line, cond, (stmt,))
        return [stmt]

    def section(k, title, build):
        line = src.emit(f"    if (op == {k}) {{ // {title}")
        stmts = build()
        src.emit("    }")
        body.append(If(line, Compare("==", op, Const(k)), tuple(stmts)))

    def if_else(depth, cond, cond_text, then_stmt, then_text, else_stmt, else_text):
        pad = "    " * depth
        line = src.emit(f"{pad}if ({cond_text}) {{")
        t = src.emit(f"{pad}    {then_text}")
        src.emit(f"{pad}}} else {{")
        e = src.emit(f"{pad}    {else_text}")
        src.emit(f"{pad}}}")
        return If(line, cond, (then_stmt(t),), (else_stmt(e),))

    def if_then(depth, cond, cond_text, then_stmt, then_text):
        pad = "    " * depth
        line = src.emit(f"{pad}if ({cond_text}) {{")
        t = src.emit(f"{pad}    {then_text}")
        src.emit(f"{pad}}}")
        return If(line, cond, (then_stmt(t),))

    def ret(var):
        return Return(src.emit(f"        return {var.name};"), var)

    src.emit("int minieval(int op, int a, int b) {")

    def add():
        s = [Assign(src.emit("        r = a + b;"), "r", BinOp("+", a, b))]
        s += bug_block(2, [(Compare(">", a, b), "a > b"),
                           (Compare(">", BinOp("-", a, b), Const(9)), "a - b > 9")],
                       "r = r + 1;", "r", BinOp("+", r, Const(1)),
                       "add-wide-gap", "add is off by one when a exceeds b by more than 9")
        return s + [ret(r)]

    def mul():
        s = [Assign(src.emit("        r = a * b;"), "r", BinOp("*", a, b))]
        s += bug_block(2, [(Compare("<", a, Const(0)), "a < 0"), (Compare(">", b, Const(4)), "b > 4")],
                       "r = r - 1;", "r", BinOp("-", r, Const(1)),
                       "mul-negative-left", "mul is off by one for a < 0 and b > 4")
        return s + [ret(r)]

    def maximum():
        s = [if_else(2, Compare(">", a, b), "a > b",
                     lambda n: Assign(n, "r", a), "r = a;",
                     lambda n: Assign(n, "r", b), "r = b;")]
        s += bug_block(2, [(Compare(">", r, Const(5)), "r > 5"), (Compare("<", a, Const(0)), "a < 0")],
                       "r = r + 2;", "r", BinOp("+", r, Const(2)),
                       "max-large-right", "max is too large when b > 5 and a < 0")
        return s + [ret(r)]

    def minimum():
        s = [if_else(2, Compare("<", a, b), "a < b",
                     lambda n: Assign(n, "r", a), "r = a;",
                     lambda n: Assign(n, "r", b), "r = b;")]
        s += bug_block(2, [(Compare("<", r, Const(-5)), "r < -5"), (Compare(">", b, Const(0)), "b > 0")],
                       "r = r - 2;", "r", BinOp("-", r, Const(2)),
                       "min-small-left", "min is too small when a < -5 and b > 0")
        return s + [ret(r)]

    def absdiff():
        s = [Assign(src.emit("        d = a - b;"), "d", BinOp("-", a, b)),
             if_then(2, Compare("<", d, Const(0)), "d < 0",
                     lambda n: Assign(n, "d", BinOp("-", Const(0), d)), "d = 0 - d;")]
        s += bug_block(2, [(Compare(">", a, Const(3)), "a > 3"), (Compare("<", b, Const(-3)), "b < -3")],
                       "d = d + 1;", "d", BinOp("+", d, Const(1)),
                       "absdiff-opposite-signs", "absdiff is off by one for a > 3 and b < -3")
        return s + [ret(d)]

    def equal():
        s = [Assign(src.emit("        r = 0;"), "r", Const(0)),
             if_then(2, Compare("==", a, b), "a == b", lambda n: Assign(n, "r", Const(1)), "r = 1;")]
        s += bug_block(2, [(Compare("==", BinOp("-", a, b), Const(1)), "a - b == 1")],
                       "r = 1;", "r", Const(1),
                       "eq-adjacent", "eq reports a == b when a is b + 1")
        return s + [ret(r)]

    def squares():
        s = [Assign(src.emit("        r = a * a + b * b;"), "r",
                    BinOp("+", BinOp("*", a, a), BinOp("*", b, b)))]
        s += bug_block(2, [(Compare("==", a, Const(0)), "a == 0"), (Compare("!=", b, Const(0)), "b != 0")],
                       "r = r + 3;", "r", BinOp("+", r, Const(3)),
                       "squares-zero-left", "sum of squares is off by three when only a is zero")
        return s + [ret(r)]

    def clamp():
        s = [Assign(src.emit("        r = a + b;"), "r", BinOp("+", a, b)),
             if_then(2, Compare(">", r, Const(8)), "r > 8", lambda n: Assign(n, "r", Const(8)), "r = 8;"),
             if_then(2, Compare("<", r, Const(-8)), "r < -8", lambda n: Assign(n, "r", Const(-8)), "r = -8;")]
        s += bug_block(2, [(Compare(">", a, Const(5)), "a > 5"), (Compare("<", b, Const(0)), "b < 0")],
                       "r = r - 1;", "r", BinOp("-", r, Const(1)),
                       "clamp-mixed-signs", "clamped sum is off by one for a > 5 and b < 0")
        return s + [ret(r)]

    for k, (title, build) in enumerate([("add", add), ("mul", mul), ("max", maximum), ("min", minimum),
                                         ("absdiff", absdiff), ("eq", equal), ("squares", squares),
                                         ("clamp", clamp)]):
        section(k, title, build)
    body.append(Return(src.emit("    return 0;"), Const(0)))
    closing = src.emit("}")

    name = "minieval" if seeded else "minieval_fixed"
    program = ToyProgram(name, ("op", "a", "b"), tuple(body), tuple(src.lines), closing)
    relations = {
        "swap": MetamorphicRelation("swap", _swap_operands, Check.EQUAL,
                                    description="every operation is symmetric in a and b"),
        "identity": MetamorphicRelation("identity", _same, Check.EQUAL,
                                        description="re-running the same input gives the same output"),
    }
    seeds = ((0, 8, -2), (1, -2, 6), (2, -3, 7), (3, -7, 2), (4, 5, -5), (5, 3, 2), (6, 0, 4), (7, 7, -2))
    return Fixture(program, relations, tuple(bugs), seeds=seeds, domain=((0, 7), (-8, 8), (-8, 8)),
                   region=(None, 2, 2),
                   fixed_variant="minieval_fixed",
                   description="eight symmetric integer operations selected by op")


_CELL = 24
_CELLS = (
    ("cell-high-low", 70, -94),
    ("cell-high-mid", 70, -44),
    ("cell-high-zero", 70, 6),
    ("cell-high-top", 70, 40),
    ("cell-mid-low", 20, -94),
    ("cell-mid-mid", 20, -44),
    ("cell-mid-zero", 20, -10),
    ("cell-neg-low", -30, -94),
)


def _minidb(seeded):
    # q は 128 通りのクエリ形状、(a, b) は格納された行
    q, a, b, f, r = Var("q"), Var("a"), Var("b"), Var("f"), Var("r")
    src = _Source()
    bugs = []
    src.emit("int minidb(int q, int a, int b) {")

    def dispatch(lo, hi, depth):
        pad = "    " * depth
        if hi - lo == 1:
            weight = (lo * 7) % 32
            return Assign(src.emit(f"{pad}f = {weight};"), "f", Const(weight))
        mid = (lo + hi) // 2
        line = src.emit(f"{pad}if (q < {mid}) {{")
        then = dispatch(lo, mid, depth + 1)
        src.emit(f"{pad}}} else {{")
        orelse = dispatch(mid, hi, depth + 1)
        src.emit(f"{pad}}}")
        return If(line, Compare("<", q, Const(mid)), (then,), (orelse,))

    body = [dispatch(0, 128, 1),
            Assign(src.emit("    r = a + b + f;"), "r", BinOp("+", BinOp("+", a, b), f))]

    # どのセルも a > b の側にあるので、a と b を入れ替えた行はセルに入らない
    for bug_id, a_lo, b_lo in _CELLS if seeded else ():
        guards = [(Compare(">=", a, Const(a_lo)), f"a >= {a_lo}"),
                  (Compare("<", a, Const(a_lo + _CELL)), f"a < {a_lo + _CELL}"),
                  (Compare(">=", b, Const(b_lo)), f"b >= {b_lo}"),
                  (Compare("<", b, Const(b_lo + _CELL)), f"b < {b_lo + _CELL}")]
        guard_lines = [src.emit(f"    {'    ' * i}if ({text}) {{") for i, (_, text) in enumerate(guards)]
        bug_line = src.emit(f"    {'    ' * len(guards)}r = r + 1; // bug")
        for i in reversed(range(len(guards))):
            src.emit(f"    {'    ' * i}}}")
        bugs.append(SeededBug(bug_id, bug_line,
                              f"off by one for rows with {a_lo} <= a < {a_lo + _CELL} "
                              f"and {b_lo} <= b < {b_lo + _CELL}"))
        stmt = Assign(bug_line, "r", BinOp("+", r, Const(1)))
        for (cond, _), line in reversed(list(zip(guards, guard_lines))):
            stmt = If(line, cond, (stmt,))
        body.append(stmt)

    body.append(Return(src.emit("    return r;"), r))
    closing = src.emit("}")

    name = "minidb" if seeded else "minidb_fixed"
    program = ToyProgram(name, ("q", "a", "b"), tuple(body), tuple(src.lines), closing)
    relations = {
        "swap": MetamorphicRelation("swap", _swap_operands, Check.EQUAL,
                                    description="a query result does not depend on the column order"),
    }
    seeds = tuple((k * 16 + 3, a_lo + _CELL // 2, b_lo + _CELL // 2)
                  for k, (_, a_lo, b_lo) in enumerate(_CELLS))
    return Fixture(program, relations, tuple(bugs), seeds=seeds,
                   domain=((0, 127), (-100, 100), (-100, 100)), region=(None, 6, 6),
                   fixed_variant="minidb_fixed",
                   description="128 query shapes over a stored row; bugs sit in small row cells")


_BUILDERS = {
    "listing1": lambda: _listing1(fixed=False),
    "listing1_fixed": lambda: _listing1(fixed=True),
    "abs_mr": lambda: _abs(fixed=False),
    "abs_fixed": lambda: _abs(fixed=True),
    "minieval": lambda: _minieval(seeded=True),
    "minieval_fixed": lambda: _minieval(seeded=False),
    "minidb": lambda: _minidb(seeded=True),
    "minidb_fixed": lambda: _minidb(seeded=False),
    "offset": _offset,
}

FIXTURE_NAMES = tuple(_BUILDERS)


def builtin(name):
    """組み込みフィクスチャを取得"""
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise UnknownFixture(f"unknown fixture {name!r} (known: {', '.join(FIXTURE_NAMES)})") from None
