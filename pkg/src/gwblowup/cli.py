"""Command-line front end.

Commands: ``invariant`` evaluates a single query, ``transform`` applies one
rewrite rule and prints the report row, ``verify`` sweeps a rule (or all of
them) over its parameter range and exits 2 when any row misses its expected
verdict, ``table`` tabulates the curve counts, and ``cache`` manages the
persistent memo store.

Output is deterministic: rows are emitted in parameter order, values are
exact, and nothing environment-dependent reaches stdout.  Cache I/O
problems are reported on stderr and never abort a run.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor

from .lattice import LatticeError, manifold_from_name, parse_curve_class, proj_space
from .oracle import (
    Insertion,
    InvariantQuery,
    MemoConflictError,
    MemoTable,
    OracleError,
    divisor_insertion,
    evaluate,
    exc_dual,
    kontsevich_p2,
    point,
    pullback,
    wdvv_f1,
)
from .rules import (
    BlowupLocus,
    NotApplicableError,
    Rule,
    RulesError,
    all_verification_tasks,
    apply_lemma_1_1,
    corollary_exceptional_value,
    transform_1_2,
    transform_1_3,
    transform_1_4,
    transform_1_5,
    transform_1_6,
    verification_tasks,
)

DEFAULT_CACHE = "gw_cache.json"
CACHE_ENV_VAR = "GW_CACHE"

_REPORT_FIELDS = (
    "rule",
    "params",
    "gates",
    "verdict",
    "expected",
    "ok",
    "source_value",
    "target_value",
    "source",
    "target",
    "index_budget",
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--cache", help="memo cache file (default: $GW_CACHE or gw_cache.json)")
    parser.add_argument("--jobs", type=int, default=1, help="parallel workers for verify")
    fmt = parser.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="emit JSON lines")
    fmt.add_argument("--csv", action="store_true", help="emit CSV")


def build_parser() -> _Parser:
    parser = _Parser(
        prog="gwblowup",
        description="Exact genus-zero curve counts and checked blow-up rewrite rules.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    inv = sub.add_parser(
        "invariant",
        help="evaluate one invariant query",
        description=(
            "Evaluate an invariant. Manifolds: P<n> or BlP<n>. Classes are "
            "whitespace-free signed integer coefficients on basis letters, "
            "e.g. 3l on P2 or 3f-1e on BlP2 (bare letters mean coefficient 1)."
        ),
    )
    inv.add_argument("manifold")
    inv.add_argument("curve_class")
    inv.add_argument("--points", type=int, default=0, help="number of point insertions")
    inv.add_argument("--exc-dual", type=int, default=0, help="number of PD(E) insertions")
    inv.add_argument(
        "--divisor",
        action="append",
        default=[],
        metavar="SPEC",
        help="divisor insertion, e.g. H on P2 or h / E on BlP2 (repeatable)",
    )
    inv.add_argument("--pullback-points", type=int, default=0, help="pulled-back point insertions")
    inv.add_argument("--genus", type=int, default=0)
    _common_options(inv)

    tra = sub.add_parser("transform", help="apply one rewrite rule to a query")
    tra.add_argument("rule", choices=[r.value for r in Rule])
    tra.add_argument("manifold", nargs="?", help="not needed for corollary-e")
    tra.add_argument("curve_class", nargs="?")
    tra.add_argument("--points", type=int, default=0)
    tra.add_argument("--pullback-points", type=int, default=0)
    tra.add_argument("--divisor", action="append", default=[], metavar="SPEC")
    tra.add_argument("--away", action="store_true", help="mark divisor insertions supported away from the centre")
    tra.add_argument("--genus", type=int, default=0)
    tra.add_argument("--locus-genus", type=int, default=1, help="genus of a curve centre")
    tra.add_argument("--locus-c1", type=int, default=0, help="ambient Chern degree of a curve centre")
    tra.add_argument("--shape", choices=["product-positive-genus", "K3", "torus"], default="K3")
    _common_options(tra)

    ver = sub.add_parser("verify", help="sweep a rule over its parameter range")
    ver.add_argument("rule", choices=[r.value for r in Rule] + ["all"])
    ver.add_argument("--max-degree", type=int, default=6)
    ver.add_argument("--r", default="1..5", help="range of exceptional multiples, e.g. 1..5")
    _common_options(ver)

    tab = sub.add_parser("table", help="tabulate the curve counts")
    tab.add_argument("--max-degree", type=int, default=6)
    _common_options(tab)

    cac = sub.add_parser("cache", help="manage the memo cache")
    cac.add_argument("action", choices=["show", "export", "import", "clear"])
    cac.add_argument("file", nargs="?", help="file for export/import")
    _common_options(cac)

    return parser


def _parse_range(text: str) -> tuple[int, ...]:
    if ".." in text:
        lo_text, _, hi_text = text.partition("..")
        try:
            lo, hi = int(lo_text), int(hi_text)
        except ValueError:
            raise UsageError(f"cannot parse range token {text!r}") from None
        if lo < 1 or hi < lo:
            raise UsageError(f"range {text!r} must be 1 <= lo <= hi")
        return tuple(range(lo, hi + 1))
    try:
        return (int(text),)
    except ValueError:
        raise UsageError(f"cannot parse range token {text!r}") from None


def _parse_divisor_spec(manifold, text: str):
    coeffs: dict[str, int] = {}
    token = text.replace(" ", "")
    pos = 0
    pattern = re.compile(r"([+-]?\d*)([A-Za-z])")
    while pos < len(token):
        m = pattern.match(token, pos)
        if not m or m.group(2) not in manifold.divisor_basis:
            raise UsageError(f"cannot parse divisor token {text!r} on {manifold.name}")
        raw, letter = m.groups()
        coeff = int(raw) if raw not in ("", "+", "-") else (-1 if raw == "-" else 1)
        coeffs[letter] = coeffs.get(letter, 0) + coeff
        pos = m.end()
    if not coeffs:
        raise UsageError(f"empty divisor token {text!r}")
    return coeffs


def _build_query(args) -> InvariantQuery:
    if not args.manifold or not args.curve_class:
        raise UsageError("manifold and class arguments are required")
    manifold = manifold_from_name(args.manifold)
    curve = parse_curve_class(manifold, args.curve_class)
    insertions = []
    for spec in args.divisor:
        coeffs = _parse_divisor_spec(manifold, spec)
        ins = divisor_insertion(manifold, **coeffs)
        if getattr(args, "away", False):
            from .oracle import Insertion

            ins = Insertion("divisor", 2, divisor=ins.divisor, away_from_locus=True)
        insertions.append(ins)
    insertions.extend(exc_dual(manifold) for _ in range(getattr(args, "exc_dual", 0)))
    insertions.extend(point(manifold) for _ in range(args.points))
    if args.pullback_points:
        if manifold.kind != "blowup-point":
            raise UsageError("--pullback-points needs a blow-up manifold")
        from .lattice import proj_space

        base = proj_space(manifold.n)
        insertions.extend(pullback(point(base)) for _ in range(args.pullback_points))
    return InvariantQuery(manifold, curve, args.genus, tuple(insertions))


def _emit_rows(rows: list[dict], args, summary: str | None = None) -> None:
    def flat(value) -> str:
        if isinstance(value, dict):
            return ";".join(f"{k}={v}" for k, v in value.items())
        return str(value)

    if args.json:
        for row in rows:
            sys.stdout.write(json.dumps(row, sort_keys=True) + "\n")
    elif args.csv:
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=_REPORT_FIELDS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: flat(row.get(k, "")) for k in _REPORT_FIELDS})
        sys.stdout.write(buffer.getvalue())
    else:
        for row in rows:
            pieces = [row["rule"]]
            pieces += [f"{k}={v}" for k, v in row["params"].items()]
            pieces.append(f"verdict={row['verdict']}")
            if "expected" in row:
                pieces.append(f"expected={row['expected']}")
                pieces.append("ok" if row["ok"] else "FAIL")
            if row.get("source_value"):
                pieces.append(f"source={row['source_value']}")
            if row.get("target_value"):
                pieces.append(f"target={row['target_value']}")
            failing = [name for name, state in row["gates"].items() if state == "fail"]
            if failing:
                pieces.append(f"failed-gates={','.join(failing)}")
            sys.stdout.write(" ".join(pieces) + "\n")
        if summary is not None:
            sys.stdout.write(summary + "\n")


def _cache_path(args) -> str:
    if args.cache:
        return args.cache
    return os.environ.get(CACHE_ENV_VAR) or DEFAULT_CACHE


def _load_memo(path: str) -> MemoTable:
    memo = MemoTable(path=path)
    try:
        memo.load()
    except (OSError, ValueError, MemoConflictError) as exc:
        print(f"warning: could not read cache {path}: {exc}; starting cold", file=sys.stderr)
        memo = MemoTable(path=path)
    return memo


def _save_memo(memo: MemoTable) -> None:
    if not memo.dirty:
        return
    try:
        memo.save()
    except OSError as exc:
        print(f"warning: could not write cache {memo.path}: {exc}", file=sys.stderr)


def _cmd_invariant(args) -> int:
    memo = _load_memo(_cache_path(args))
    result = evaluate(_build_query(args), memo)
    if args.json:
        payload = {
            "status": result.status,
            "value": str(result.value) if result.value is not None else None,
            "reason": result.reason,
        }
        sys.stdout.write(json.dumps(payload, sort_keys=True) + "\n")
    elif args.csv:
        sys.stdout.write("status,value,reason\n")
        sys.stdout.write(
            f"{result.status},{result.value if result.value is not None else ''},{result.reason or ''}\n"
        )
    else:
        if result.status == "exact":
            sys.stdout.write(f"{result.value}\n")
        elif result.status == "zero":
            sys.stdout.write(f"0 [{result.reason}]\n")
        else:
            sys.stdout.write(f"symbolic: {result.query.describe()}\n")
    _save_memo(memo)
    return 0


def _cmd_transform(args) -> int:
    memo = _load_memo(_cache_path(args))
    rule = Rule(args.rule)
    if rule is Rule.COROLLARY_E:
        app = corollary_exceptional_value(memo)
    elif rule is Rule.LEMMA_1_1:
        query = _build_query(args)
        outcome = apply_lemma_1_1(query)
        _save_memo(memo)
        text = "zero" if outcome is not None else "not-applicable"
        if args.json:
            sys.stdout.write(json.dumps({"rule": rule.value, "outcome": text}) + "\n")
        else:
            sys.stdout.write(text + "\n")
        return 0
    else:
        query = _build_query(args)
        if rule is Rule.THM_1_2:
            app = transform_1_2(query, memo)
        elif rule is Rule.THM_1_3:
            app = transform_1_3(query, memo)
        elif rule is Rule.THM_1_4:
            app = transform_1_4(query, memo)
        elif rule is Rule.THM_1_5:
            locus = BlowupLocus(
                "curve", query.manifold.n, g0=args.locus_genus, c1m_on_locus=args.locus_c1
            )
            app = transform_1_5(query, locus, memo)
        else:
            locus = BlowupLocus("surface", query.manifold.n, shape=args.shape)
            app = transform_1_6(query, locus, memo)
    _emit_rows([app.to_row()], args)
    _save_memo(memo)
    return 0


def _cmd_verify(args) -> int:
    if args.rule == "all":
        tasks = all_verification_tasks(max_degree=args.max_degree, r_values=_parse_range(args.r))
    else:
        tasks = verification_tasks(
            Rule(args.rule), max_degree=args.max_degree, r_values=_parse_range(args.r)
        )
    memo = _load_memo(_cache_path(args))
    if args.jobs > 1:
        def run_task(task):
            worker_memo = MemoTable()
            row = task.run(worker_memo)
            return row, worker_memo

        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(run_task, tasks))
        rows = []
        for row, worker_memo in outcomes:
            rows.append(row)
            memo.merge(worker_memo)
    else:
        rows = [task.run(memo) for task in tasks]
    dicts = [row.to_dict() for row in rows]
    ok = sum(1 for row in rows if row.ok)
    summary = f"rows={len(rows)} ok={ok} failed={len(rows) - ok}"
    _emit_rows(dicts, args, summary=summary)
    _save_memo(memo)
    return 0 if ok == len(rows) else 2


def _cmd_table(args) -> int:
    if args.max_degree < 1:
        raise UsageError(f"--max-degree must be >= 1, got {args.max_degree}")
    memo = _load_memo(_cache_path(args))
    rows = []
    for d in range(1, args.max_degree + 1):
        rows.append(
            {
                "d": d,
                "plane": str(kontsevich_p2(d, memo)),
                "blowup_df": str(wdvv_f1(d, 0, memo)),
                "blowup_df_minus_e": str(wdvv_f1(d, -1, memo)),
            }
        )
    if args.json:
        for row in rows:
            sys.stdout.write(json.dumps(row, sort_keys=True) + "\n")
    elif args.csv:
        sys.stdout.write("d,plane,blowup_df,blowup_df_minus_e\n")
        for row in rows:
            sys.stdout.write(f"{row['d']},{row['plane']},{row['blowup_df']},{row['blowup_df_minus_e']}\n")
    else:
        sys.stdout.write("d plane blowup(df) blowup(df-e)\n")
        for row in rows:
            sys.stdout.write(
                f"{row['d']} {row['plane']} {row['blowup_df']} {row['blowup_df_minus_e']}\n"
            )
    _save_memo(memo)
    return 0


def _cmd_cache(args) -> int:
    path = _cache_path(args)
    if args.action == "show":
        memo = _load_memo(path)
        sys.stdout.write(f"entries={len(memo)}\n")
        for key_text, value in sorted(memo.to_json().items()):
            sys.stdout.write(f"{key_text} {value}\n")
        return 0
    if args.action == "clear":
        if os.path.exists(path):
            os.remove(path)
            sys.stdout.write("cleared\n")
        else:
            sys.stdout.write("empty\n")
        return 0
    if not args.file:
        raise UsageError(f"cache {args.action} needs a file argument")
    if args.action == "export":
        memo = _load_memo(path)
        MemoTable(path=args.file, entries=dict(memo.entries)).save()
        sys.stdout.write(f"exported={len(memo)}\n")
        return 0
    # import
    incoming = _load_memo(args.file)
    memo = _load_memo(path)
    memo.merge(incoming)
    memo.dirty = True
    _save_memo(memo)
    sys.stdout.write(f"imported={len(incoming)}\n")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be >= 1")
        handler = {
            "invariant": _cmd_invariant,
            "transform": _cmd_transform,
            "verify": _cmd_verify,
            "table": _cmd_table,
            "cache": _cmd_cache,
        }[args.command]
        return handler(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (LatticeError, OracleError, RulesError, NotApplicableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
