"""``rlqdag`` command-line driver.

Subcommands::

    rlqdag expand -q QUERY [--mode rlqdag|baseline] [--budget-ms N|unlimited] [--emit ...]
    rlqdag bench [--from 1] [--to 6] [--budget-ms 2000]
    rlqdag check -q QUERY [--samples 20] [--seed 0]

``-q`` takes a query, ``@path`` to a query file (one ``name: query`` per line)
or the name of a bundled query.  Exit codes: 0 success, 1 a check failed,
2 unparsable input, 3 the budget ran out (partial results are still printed).

CSV metrics columns: ``query,mode,budget_ms,plans,elapsed_ms,plans_per_ms,complete``.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import random
import sys
from pathlib import Path

from .baseline import enumerate_plans
from .cost import best_plan, term_cost
from .dag import Dag
from .errors import ParseError, RLQDagError
from .evaluator import evaluate, load_edges, load_stats, random_database
from .frontend import bundled_queries, parse_query, qr, query_catalog, query_constants, read_queries
from .syntax import print_term
from .terms import Fix, Join, count_ops
from .transforms import ExpansionConfig, completeness_scan, expand, parse_rules

log = logging.getLogger("rlqdag")

CSV_COLUMNS = ("query", "mode", "budget_ms", "plans", "elapsed_ms", "plans_per_ms", "complete")
EXIT_OK, EXIT_FAILED, EXIT_PARSE, EXIT_BUDGET = 0, 1, 2, 3


def _budget(text: str):
    if text.lower() in ("unlimited", "none", "inf"):
        return None
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"budget must be a number of ms or 'unlimited', not {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("budget must be non-negative")
    return value


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("true", "1", "yes"):
        return True
    if low in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, not {text!r}")


def _rules(text: str):
    try:
        return parse_rules(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def load_queries(arg: str) -> list:
    """``(name, text)`` pairs named by a ``-q`` argument."""
    if arg.startswith("@"):
        path = Path(arg[1:])
        return read_queries(path.read_text(encoding="utf-8"))
    if arg == "bundled":
        return bundled_queries()
    bundled = dict(bundled_queries())
    if arg in bundled:
        return [(arg, bundled[arg])]
    return [("query", arg)]


def _catalog(term, db):
    cat = query_catalog(term)
    if db is not None:
        for name, schema in db.catalog().items():
            cat.setdefault(name, schema)
    return cat


def _load_data(args):
    db = load_edges(args.data, args.stats) if args.data else None
    stats = None
    if args.stats:
        stats = load_stats(args.stats)
    elif db is not None:
        stats = db.stats
    return db, stats


def _fmt_budget(b):
    return "unlimited" if b is None else f"{b:g}"


def _row(name, mode, budget, plans, elapsed, complete) -> dict:
    ms = elapsed * 1000.0
    return {
        "query": name,
        "mode": mode,
        "budget_ms": _fmt_budget(budget),
        "plans": plans,
        "elapsed_ms": f"{ms:.3f}",
        "plans_per_ms": f"{plans / ms:.3f}" if ms > 0 else "inf",
        "complete": str(complete).lower(),
    }


# --------------------------------------------------------------------------
# expand


def run_expand(name, term, args, db, stats, out) -> bool:
    """Run one enumeration and print what ``--emit`` asks for; returns completeness."""
    catalog = _catalog(term, db)
    if args.mode == "rlqdag":
        dag = Dag(catalog)
        root = dag.add_term(term)
        res = expand(dag, root, ExpansionConfig(budget_ms=args.budget_ms, rep=args.rep, rules=args.rules))
        plans, elapsed, complete = dag.count_plans(res.root), res.elapsed, res.complete
        log.info("%s: %d classes, %d nodes, %d passes, firings %s", name, dag.n_classes(), dag.n_nodes(),
                 res.passes, dict(res.firings))
    else:
        dag = res = None
        en = enumerate_plans(term, catalog, budget_ms=args.budget_ms, rules=args.rules, rep=args.rep)
        plans, elapsed, complete = len(en.plans), en.elapsed, en.complete
        log.info("%s: visited %d terms", name, en.visited)

    if args.emit == "count":
        print(plans, file=out)
    elif args.emit == "rate":
        print(f"{plans / (elapsed * 1000.0):.3f}" if elapsed > 0 else "inf", file=out)
    elif args.emit == "csv":
        writer = csv.DictWriter(out, fieldnames=CSV_COLUMNS, lineterminator="\n")
        if not getattr(args, "_header_done", False):
            writer.writeheader()
            args._header_done = True
        writer.writerow(_row(name, args.mode, args.budget_ms, plans, elapsed, complete))
    elif args.emit == "dag":
        if dag is not None:
            print(dag.dumps(res.root), file=out)
        else:
            print(json.dumps({"schema_version": 1, "plans": sorted(print_term(p) for p in en.plans)}, indent=1),
                  file=out)
    elif args.emit == "best":
        if dag is not None:
            best = best_plan(dag, res.root, stats)
            plan, cost = best.term, best.cost
        else:
            scored = sorted((term_cost(p, stats, catalog), print_term(p), p) for p in en.plans)
            cost, _, plan = scored[0]
        print(f"# {name} cost={cost:.1f}", file=out)
        print(print_term(plan), file=out)
        if args.eval:
            if db is None:
                raise RLQDagError("--eval needs --data")
            out.write(evaluate(plan, db).to_tsv())
    return complete


def cmd_expand(args, out) -> int:
    db, stats = _load_data(args)
    queries = load_queries(args.query)
    all_complete = True
    for name, text in queries:
        term = parse_query(text)
        all_complete &= run_expand(name, term, args, db, stats, out)
    return EXIT_OK if all_complete else EXIT_BUDGET


# --------------------------------------------------------------------------
# bench


def cmd_bench(args, out) -> int:
    writer = csv.DictWriter(out, fieldnames=("i",) + CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for i in range(args.start, args.stop + 1):
        term = parse_query(qr(i))
        fixes, joins = count_ops(term, Fix), count_ops(term, Join)
        if fixes != i or joins != 2 * i - 1:
            raise RLQDagError(f"Q_r{i} has {fixes} fixpoints and {joins} joins")
        catalog = query_catalog(term)
        dag = Dag(catalog)
        res = expand(dag, dag.add_term(term), ExpansionConfig(budget_ms=args.budget_ms, rules=args.rules))
        row = _row(f"Q_r{i}", "rlqdag", args.budget_ms, dag.count_plans(res.root), res.elapsed, res.complete)
        writer.writerow({"i": i, **row})
        en = enumerate_plans(term, catalog, budget_ms=args.budget_ms, rules=args.rules)
        row = _row(f"Q_r{i}", "baseline", args.budget_ms, en.visited, en.elapsed, en.complete)
        writer.writerow({"i": i, **row})
        out.flush()
    return EXIT_OK


# --------------------------------------------------------------------------
# check


def check_query(term, args, db, out) -> bool:
    catalog = _catalog(term, db)
    rng = random.Random(args.seed)
    dag = Dag(catalog)
    root = dag.add_term(term)
    res = expand(dag, root, ExpansionConfig(budget_ms=args.budget_ms, rules=args.rules))
    root = res.root
    if args.corrupt_annotation:
        # debug hook: store a wrong annotation on the first annotated class
        cls = min(dag.ann)
        d, r = dag.ann[cls]
        dag.ann[cls] = (d | {"corrupted"}, r)
    ok = True

    def report(label, verdict, detail=""):
        nonlocal ok
        ok &= verdict in (True, None)
        status = "SKIP" if verdict is None else ("PASS" if verdict else "FAIL")
        print(f"{status} {label}{': ' + detail if detail else ''}", file=out)

    dbs = [db] if db is not None else []
    consts = query_constants(term)
    while len(dbs) < args.databases:
        dbs.append(random_database(catalog, rng, constants=consts))
    wf = dag.check_well_formed(root, dbs, samples=args.samples, rng=rng)
    report("well-formedness", wf.ok, wf.message)
    cons = dag.check_consistency(root, samples=args.samples)
    report("consistency", cons.ok, cons.message)
    scans = completeness_scan(dag, root, args.rules, rep=False)
    for prop in ("P1", "P2", "P3", "P4", "P5"):
        found = scans.get(prop)
        report(f"completeness {prop}", None if found is None else not found,
               "" if not found else f"{len(found)} violations")
    if res.complete and dag.count_plans(root) <= args.max_diff:
        grouped = set(dag.iter_terms(root))
        en = enumerate_plans(term, catalog, rules=args.rules)
        same = grouped == en.plans and len(grouped) == dag.count_plans(root)
        report("grouped = term-by-term", same,
               f"{len(grouped)} plans" if same else f"{len(grouped ^ en.plans)} plans differ")
    else:
        report("grouped = term-by-term", None)
    return ok


def cmd_check(args, out) -> int:
    db, _ = _load_data(args)
    ok = True
    for name, text in load_queries(args.query):
        print(f"# {name}", file=out)
        ok &= check_query(parse_query(text), args, db, out)
    return EXIT_OK if ok else EXIT_FAILED


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rlqdag", description="Recursive query plan enumeration with RLQDAGs.")
    ap.add_argument("--verbose", "-v", action="store_true", help="log expansion statistics to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, budget="unlimited"):
        p.add_argument("--data", type=Path, help="edge list: source<TAB>label<TAB>target")
        p.add_argument("--stats", type=Path, help="statistics JSON; computed from --data when absent")
        p.add_argument("--budget-ms", type=_budget, default=_budget(budget), metavar="N|unlimited")
        p.add_argument("--rules", type=_rules, default=parse_rules("all"),
                       help="comma list of rule names, or all, fix, codd")
        p.add_argument("--verbose", "-v", action="store_true", default=argparse.SUPPRESS)

    p = sub.add_parser("expand", help="enumerate the plan space of a query")
    p.add_argument("--query", "-q", required=True, help="query text, @file, a bundled query name, or \"bundled\" for all of them")
    common(p)
    p.add_argument("--mode", choices=("rlqdag", "baseline"), default="rlqdag")
    p.add_argument("--rep", type=_bool, default=False, metavar="true|false",
                   help="keep only plans whose pushable filters and antiprojections were pushed")
    p.add_argument("--emit", choices=("count", "rate", "dag", "best", "csv"), default="count")
    p.add_argument("--eval", action="store_true", help="with --emit best, evaluate the plan on --data")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("bench", help="compare both enumerators on the a1+/.../ai+ family")
    p.add_argument("--from", dest="start", type=int, default=1)
    p.add_argument("--to", dest="stop", type=int, default=6)
    common(p, budget="2000")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("check", help="verify well-formedness, consistency and completeness")
    p.add_argument("--query", "-q", required=True, help="query text, @file, a bundled query name, or \"bundled\" for all of them")
    common(p)
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--databases", type=int, default=5, help="random databases used for well-formedness")
    p.add_argument("--max-diff", type=int, default=10**5, help="largest space compared plan by plan")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corrupt-annotation", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_check)
    return ap


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if getattr(args, "start", 1) < 1:
        parser.error("--from must be at least 1")
    try:
        return args.func(args, out)
    except ParseError as exc:
        print(f"rlqdag: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (RLQDagError, OSError) as exc:
        print(f"rlqdag: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    raise SystemExit(main())
