"""コマンドラインインターフェース

    mc pair --a A.info --b B.info
    mc suite --manifest pairs.json
    mc overlap --report report.json --diff fix.diff
    mc analyze cv|pcc|correlate ...
    mc demo listing1
    mc guide --target minidb --policy both --seeds 1,2,3
    mc dump-program minieval

終了コード: 0 成功 / 1 入力エラー / 2 契約違反 / 3 --fail-if-empty
"""

import argparse
import logging
import sys
import time
import traceback

from . import analysis, guidance, toytarget
from .config import config
from .coverage_model import Granularity, coverage_percent, union_all
from .errors import EmptyMetamorphicCoverage, InputError, McError
from .ingest import ArtifactFormat
from .metamorphic import (
    build_pairs, load_manifest, load_report, mc_suite, pair_from_paths, report_to_dict,
)
from .report_io import (
    csv_text, dump_json, render_table, use_color, write_output,
)

logger = logging.getLogger(__name__)

PROG = "mc"


def _int_list(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("expected at least one integer")
    return values


def _fmt_percent(value, precision):
    return "-" if value is None else f"{value:.{precision}f}"


def _units_text(units, limit=8):
    if not units:
        return "∅"
    shown = ", ".join(str(u.locator) if not isinstance(u.locator, str) else u.locator for u in units[:limit])
    more = f", … (+{len(units) - limit})" if len(units) > limit else ""
    return "{" + shown + more + "}"


def _emit(args, json_text, table_text):
    """--pretty の表は JSON と別のチャネルに出す"""
    out = getattr(args, "out", None)
    write_output(json_text, out)
    if getattr(args, "pretty", False) and table_text:
        stream = sys.stderr if out in (None, "-") else sys.stdout
        write_output(table_text, stream=stream)


# ---------------------------------------------------------------- pair / suite

def _report_table(report, precision, stream):
    rows = [(e.id, e.mc_size, _units_text(list(e.mc_units))) for e in report.pairs]
    text = render_table(("pair", "|MC|", "units"), rows, color=use_color(stream))
    text += (f"\nsuite MC: {_units_text(sorted(report.suite_mc))}\n"
             f"MC%: {_fmt_percent(report.mc_percent, precision)}  "
             f"union coverage%: {_fmt_percent(report.union_coverage_percent, precision)}  "
             f"universe: {report.universe_size}\n")
    return text


def _finish_report(args, report):
    precision = args.precision
    stream = sys.stderr if args.out in (None, "-") else sys.stdout
    _emit(args, dump_json(report_to_dict(report, precision)), _report_table(report, precision, stream))
    if args.fail_if_empty and not report.suite_mc:
        raise EmptyMetamorphicCoverage("metamorphic coverage is empty")
    return 0


def cmd_pair(args):
    pair = pair_from_paths(args.id, args.a, args.b, args.granularity, args.format,
                           args.map_size, args.strip_prefix)
    report = mc_suite([pair], strict=args.strict, max_units_per_pair=args.max_units)
    return _finish_report(args, report)


def cmd_suite(args):
    pairs = build_pairs(load_manifest(args.manifest), args.granularity, args.format,
                        args.map_size, args.strip_prefix)
    report = mc_suite(pairs, strict=args.strict, max_units_per_pair=args.max_units)
    return _finish_report(args, report)


# ---------------------------------------------------------------- overlap

def _read_diff(path, strip_prefix):
    try:
        with open(path, 'rb') as f:
            data = f.read()
    except OSError as e:
        raise InputError(f"{path}: cannot read ({e.strerror})") from None
    return analysis.parse_unified_diff(data, strip_prefix=strip_prefix, source=str(path))


def cmd_overlap(args):
    if args.report:
        report = load_report(args.report)
    else:
        pairs = build_pairs(load_manifest(args.manifest), Granularity.LINE, args.format,
                            args.map_size, args.strip_prefix)
        report = mc_suite(pairs, strict=args.strict)
    fixes = {str(path): _read_diff(path, args.strip_prefix) for path in args.diff}
    results, count = analysis.overlap_many(report, fixes)
    doc = {
        "fixes": [
            {
                "diff": name,
                "verdict": r.verdict,
                "units": [{"path": u.file, "loc": u.locator} for u in r.units],
            }
            for name, r in results.items()
        ],
        "overlapping": count,
        "total": len(results),
    }
    rows = [(name, r.verdict, _units_text(list(r.units))) for name, r in results.items()]
    table = render_table(("diff", "verdict", "lines"), rows) + f"\n{count}/{len(results)} overlapping\n"
    _emit(args, dump_json(doc), table)
    return 0


# ---------------------------------------------------------------- analyze

def _pick(samples, label, path):
    for s in samples:
        if s.label == label:
            return s
    known = ", ".join(s.label for s in samples)
    raise InputError(f"{path}: no column {label!r} (known: {known})")


def cmd_cv(args):
    samples = analysis.load_samples(args.input)
    if args.column:
        samples = [_pick(samples, c, args.input) for c in args.column]
    values = {s.label: round(analysis.coefficient_of_variation(s), args.precision) for s in samples}
    rows = [(label, f"{v:.{args.precision}f}") for label, v in values.items()]
    _emit(args, dump_json({"cv": values}), render_table(("sample", "CV"), rows))
    return 0


def cmd_pcc(args):
    samples = analysis.load_samples(args.input)
    if args.x and args.y:
        x, y = _pick(samples, args.x, args.input), _pick(samples, args.y, args.input)
    elif len(samples) >= 2:
        x, y = samples[0], samples[1]
    else:
        raise InputError(f"{args.input}: pcc needs two columns")
    r = analysis.pearson(x, y)
    doc = {"x": x.label, "y": y.label, "pcc": round(r, args.precision)}
    _emit(args, dump_json(doc), render_table(("x", "y", "PCC"), [(x.label, y.label, f"{r:.{args.precision}f}")]))
    return 0


def cmd_correlate(args):
    entries = load_manifest(args.manifest)
    pairs = build_pairs(entries, Granularity.parse(args.granularity), args.format,
                        args.map_size, args.strip_prefix)
    result = analysis.bug_correlation({p.id: p for p in pairs}, args.sizes, args.repeats, args.seed,
                                      strict=args.strict)
    p = args.precision
    doc = {
        "seed": args.seed,
        "repeats": args.repeats,
        "sizes": args.sizes,
        "pcc_mc": round(result.pcc_mc, p),
        "pcc_coverage": round(result.pcc_line, p),
        "rows": [{"bugs": n, "mc_percent": round(mc, p), "coverage_percent": round(cov, p)}
                 for n, mc, cov in result.rows],
    }
    table = render_table(("metric", "PCC with #bugs"),
                         [("MC%", f"{result.pcc_mc:.{p}f}"), ("coverage%", f"{result.pcc_line:.{p}f}")])
    _emit(args, dump_json(doc), table)
    return 0


# ---------------------------------------------------------------- demo / dump-program

def demo_rows(fixture, seeds=None, timing=False):
    """関係ごとのカバレッジ%・MC%・違反数・ミューテーションスコア。timing なら各指標の計測時間も"""
    seeds = list(seeds or fixture.seeds)
    fixed = toytarget.builtin(fixture.fixed_variant) if fixture.fixed_variant else None
    mutants = None
    if fixed is not None:
        mutants = toytarget.enumerate_mutants(fixed.program)
        if fixture.bug_mutants:
            mutants = [m for m in mutants if m.id in fixture.bug_mutants]
    rows = []
    for name, relation in fixture.relations.items():
        started = time.perf_counter()
        outcome = toytarget.evaluate_relation(fixture.program, relation, seeds)
        executed = time.perf_counter()
        coverage = None
        if outcome.pairs:
            sides = [m for t in outcome.pairs for m in t.side_a + t.side_b]
            coverage = coverage_percent(union_all(sides))
        covered = time.perf_counter()
        report = mc_suite(outcome.pairs) if outcome.pairs else None
        measured = time.perf_counter()
        score = None
        if mutants:
            score = toytarget.mutation_score(fixed.program, fixed.relation(name), seeds, mutants)
        mutated = time.perf_counter()
        row = {
            "relation": name,
            "check": relation.check_name,
            "mc_lines": sorted(u.locator for u in report.suite_mc) if report else [],
            "coverage_percent": coverage,
            "mc_percent": report.mc_percent if report else None,
            "violations": len(outcome.violations),
            "failures": len(outcome.failures),
            "bug_found": bool(outcome.violations),
            "mutation_score": score,
        }
        if timing:
            # 実行はカバレッジと MC の共通コスト
            row["seconds"] = {
                "execution": executed - started,
                "coverage": covered - executed,
                "mc": measured - covered,
                "mutation": mutated - measured if score is not None else None,
            }
        rows.append(row)
    return rows


def cmd_demo(args):
    fixture = toytarget.builtin(args.fixture)
    rows = demo_rows(fixture, timing=args.timing)
    if args.json:
        doc = {"fixture": fixture.name, "seeds": [list(s) for s in fixture.seeds], "relations": rows}
        write_output(dump_json(doc), args.out)
        return 0
    header = ("relation", "check", "MC", "line cov%", "MC%", "violations", "bug", "mutation score")
    if args.timing:
        header += ("run ms", "cov ms", "MC ms", "mutation ms")
    table_rows = []
    for r in rows:
        mc = "∅" if not r["mc_lines"] else "{" + ",".join(map(str, r["mc_lines"])) + "}"
        score = "-" if r["mutation_score"] is None else f"{r['mutation_score']:.2f}"
        row = (r["relation"], r["check"], mc, _fmt_percent(r["coverage_percent"], args.precision),
               _fmt_percent(r["mc_percent"], args.precision), r["violations"],
               "found" if r["bug_found"] else "missed", score)
        if args.timing:
            row += tuple("-" if s is None else f"{1000 * s:.1f}"
                         for s in (r["seconds"][k] for k in ("execution", "coverage", "mc", "mutation")))
        table_rows.append(row)
    text = render_table(header, table_rows, color=use_color(sys.stdout))
    write_output(text, args.out)
    return 0


def cmd_dump_program(args):
    write_output(toytarget.dump_program(toytarget.builtin(args.fixture).program), args.out)
    return 0


# ---------------------------------------------------------------- guide

def cmd_guide(args):
    seeds = args.seeds or [config.get('analysis', 'seed')]
    target = guidance.ToyTargetAdapter(toytarget.builtin(args.target), args.relation,
                                       args.granularity, args.radius)
    if args.policy == "both":
        result = guidance.compare(target, [args.budget], seeds, args.plateau)
        states = result.states
        csv = guidance.comparison_csv(result)
        summary = guidance.comparison_summary(result)
    else:
        states = [guidance.drive(target, args.policy, args.budget, args.plateau, s) for s in seeds]
        rows = [(s.policy.value, s.seed, s.distinct_bugs, s.iterations, s.violations_total) for s in states]
        csv = csv_text(guidance.COMPARISON_HEADER, rows)
        summary = {"target": target.describe(), "runs": [s.summary() for s in states]}
    write_output(csv, args.out)
    if args.events:
        guidance.write_event_log(states, args.events)
    if args.summary:
        write_output(dump_json(summary), args.summary)
    return 0


# ---------------------------------------------------------------- parser

def _add_output(p):
    p.add_argument("--out", default=None, help="output path ('-' or omitted: stdout)")
    p.add_argument("--pretty", action="store_true", help="also print a human-readable table")
    p.add_argument("--precision", type=int, default=config.get('report', 'precision'),
                   help="decimal places for percentages and statistics")


def _add_ingest(p, granularity=True):
    if granularity:
        p.add_argument("--granularity", default=config.get('coverage', 'granularity'),
                       choices=[g.value for g in Granularity], help="coverage granularity (default: %(default)s)")
    p.add_argument("--format", default=None, choices=[f.value for f in ArtifactFormat],
                   help="artifact format (default: inferred from the extension)")
    p.add_argument("--map-size", type=int, default=config.get('coverage', 'map_size'),
                   help="edge bitmap size in bytes (default: %(default)s)")
    p.add_argument("--strip-prefix", default=config.get('coverage', 'strip_prefix'),
                   help="path prefix removed from source file names")
    p.add_argument("--no-strict", dest="strict", action="store_false",
                   default=config.get('report', 'strict_universe'),
                   help="warn instead of failing when coverage universes differ")


def _add_report_flags(p):
    p.add_argument("--max-units", type=int, default=config.get('report', 'max_units_per_pair'),
                   help="cap on MC units listed per pair (default: %(default)s)")
    p.add_argument("--fail-if-empty", action="store_true", help="exit 3 when the suite MC is empty")


def build_parser():
    parser = argparse.ArgumentParser(prog=PROG, description="Metamorphic coverage toolkit")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v: info, -vv: debug")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("pair", help="MC of one test pair")
    p.add_argument("--a", nargs="+", required=True, help="coverage artifact(s) of t_a")
    p.add_argument("--b", nargs="+", required=True, help="coverage artifact(s) of t_b")
    p.add_argument("--id", default="pair-0", help="pair id used in the report")
    _add_ingest(p)
    _add_report_flags(p)
    _add_output(p)
    p.set_defaults(func=cmd_pair)

    p = sub.add_parser("suite", help="MC(T) of every pair in a manifest")
    p.add_argument("--manifest", required=True, help="JSON or YAML pair manifest")
    _add_ingest(p)
    _add_report_flags(p)
    _add_output(p)
    p.set_defaults(func=cmd_suite)

    p = sub.add_parser("overlap", help="does the MC touch the lines a fix adds?")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--report", help="saved line-granularity MC report")
    source.add_argument("--manifest", help="pair manifest (line coverage is computed first)")
    p.add_argument("--diff", nargs="+", required=True, help="unified diff(s) of the fix")
    _add_ingest(p, granularity=False)
    _add_output(p)
    p.set_defaults(func=cmd_overlap)

    p = sub.add_parser("analyze", help="statistics")
    asub = p.add_subparsers(dest="analysis", required=True)
    a = asub.add_parser("cv", help="coefficient of variation per column")
    a.add_argument("--input", required=True, help="CSV (header = labels) or JSON samples")
    a.add_argument("--column", nargs="+", default=None, help="only these columns")
    _add_output(a)
    a.set_defaults(func=cmd_cv)
    a = asub.add_parser("pcc", help="Pearson correlation of two columns")
    a.add_argument("--input", required=True)
    a.add_argument("--x", default=None)
    a.add_argument("--y", default=None)
    _add_output(a)
    a.set_defaults(func=cmd_pcc)
    a = asub.add_parser("correlate", help="correlation of bug count with MC% and coverage%")
    a.add_argument("--manifest", required=True, help="manifest with one pair per bug")
    a.add_argument("--sizes", type=_int_list, required=True, help="subset sizes, e.g. 2,4,6")
    a.add_argument("--repeats", type=int, default=config.get('analysis', 'repeats'))
    a.add_argument("--seed", type=int, default=config.get('analysis', 'seed'))
    _add_ingest(a)
    _add_output(a)
    a.set_defaults(func=cmd_correlate)

    p = sub.add_parser("demo", help="relation comparison table for a built-in fixture")
    p.add_argument("fixture", choices=toytarget.FIXTURE_NAMES)
    p.add_argument("--json", action="store_true", help="print JSON instead of the table")
    p.add_argument("--timing", action="store_true",
                   help="also measure the wall time of each metric (output is no longer deterministic)")
    p.add_argument("--precision", type=int, default=config.get('report', 'precision'),
                   help="decimal places for percentages")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("guide", help="CCG / MCG guidance runs on a built-in fixture")
    p.add_argument("--target", default="minidb", choices=toytarget.FIXTURE_NAMES)
    p.add_argument("--relation", default=None, help="relation name (default: the fixture's first)")
    p.add_argument("--policy", default=config.get('guidance', 'policy'), choices=["ccg", "mcg", "both"])
    p.add_argument("--seed", dest="seeds", type=int, action="append", default=None,
                   help="seed (repeatable)")
    p.add_argument("--seeds", dest="seeds", type=_int_list, action="extend", help="comma-separated seeds")
    p.add_argument("--budget", type=int, default=config.get('guidance', 'budget'))
    p.add_argument("--plateau", type=int, default=config.get('guidance', 'plateau_limit'))
    p.add_argument("--granularity", default=config.get('guidance', 'granularity'),
                   choices=[g.value for g in Granularity if g is not Granularity.EDGE])
    p.add_argument("--radius", type=int, default=config.get('guidance', 'radius'),
                   help="input region radius (default: the fixture's own)")
    p.add_argument("--events", default=None, help="write the event log as JSON Lines")
    p.add_argument("--summary", default=None, help="write a JSON summary")
    p.add_argument("--out", default=None, help="CSV output path")
    p.set_defaults(func=cmd_guide)

    p = sub.add_parser("dump-program", help="numbered listing of a built-in fixture")
    p.add_argument("fixture", choices=toytarget.FIXTURE_NAMES)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_dump_program)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(format="[%(levelname)s] %(message)s", level=level, stream=sys.stderr, force=True)
    try:
        return args.func(args)
    except McError as e:
        if args.verbose >= 2:
            traceback.print_exc()
        print(f"{PROG}: error: {e}", file=sys.stderr)
        return e.exit_code
