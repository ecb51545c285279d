"""Acceptance criteria 1 to 9.

Each test prints a single ``PASS criterion N: ...`` or ``FAIL criterion N: ...``
line; the lines are repeated in the terminal summary.
"""

import os
import random
import statistics
import subprocess
import sys

import pytest

from rlqdag.annotations import node_destab, node_rigid
from rlqdag.baseline import enumerate_plans
from rlqdag.cost import best_plan, term_cost
from rlqdag.dag import Dag
from rlqdag.evaluator import Database, Relation, bfs_closure, evaluate, load_stats, random_database
from rlqdag.frontend import bundled_stats_path, parse_query, qr, query_catalog, query_constants
from rlqdag.syntax import print_term
from rlqdag.terms import Join, Rel
from rlqdag.transforms import ExpansionConfig, completeness_scan, expand

from conftest import BUNDLED, EDGE_CATALOG, SIGMA, SIGMA_REV, expanded

RESULTS = []


def report(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


# 1 -------------------------------------------------------------------------


def test_criterion_1_well_formed():
    bad = []
    for name in BUNDLED:
        term, catalog, dag, res = expanded(name)
        rng = random.Random(sum(map(ord, name)))
        dbs = [random_database(catalog, rng, nodes=8, rows=15, constants=query_constants(term)) for _ in range(5)]
        verdict = dag.check_well_formed(res.root, dbs, samples=20, rng=rng)
        if not verdict.ok:
            bad.append(f"{name}: {verdict.reason}")
    report(1, not bad, "; ".join(bad) or f"{len(BUNDLED)} queries, 5 databases, 20 samples per class")


# 2 -------------------------------------------------------------------------


def test_criterion_2_consistency():
    bad = []
    for name in BUNDLED:
        _, _, dag, res = expanded(name)
        verdict = dag.check_consistency(res.root)
        if not verdict.ok:
            bad.append(f"{name}: {verdict.reason}")
        # second look, bypassing check_consistency: every stored annotation
        for rec, stored in dag.ann.items():
            if dag.find(rec) == rec and stored != (node_destab(dag, rec), node_rigid(dag, rec)):
                bad.append(f"{name}: class {rec} annotation is stale")
    report(2, not bad, "; ".join(bad) or "stored annotations match recomputation")


# 3 -------------------------------------------------------------------------


def test_criterion_3_completeness_scans():
    bad = []
    for name in BUNDLED:
        _, _, dag, res = expanded(name)
        scan = completeness_scan(dag, res.root)
        assert sorted(scan) == ["P1", "P2", "P3", "P4", "P5"]
        bad += [f"{name} {p}: {len(v)}" for p, v in scan.items() if v]
    report(3, not bad, "; ".join(bad) or "no violations of P1 to P5")


# 4 -------------------------------------------------------------------------


def test_criterion_4_grouped_equals_term_by_term():
    bad = []
    for name in BUNDLED:
        term, catalog, dag, res = expanded(name)
        n = dag.count_plans(res.root)
        assert res.complete and n <= 10 ** 6
        grouped = set(dag.iter_terms(res.root))
        single = enumerate_plans(term, catalog)
        assert single.complete
        if grouped != single.plans or not n == len(grouped) == len(single.plans):
            bad.append(f"{name}: dag {n}/{len(grouped)}, baseline {len(single.plans)}, "
                       f"diff {len(grouped ^ single.plans)}")
    report(4, not bad, "; ".join(bad) or "plan sets equal on every bundled query")


# 5 -------------------------------------------------------------------------


def test_criterion_5_worked_examples():
    abc = {"A": frozenset("ab"), "B": frozenset("bc"), "C": frozenset("cd")}
    start = Join(Join(Rel("A"), Rel("B")), Rel("C"))

    dag = Dag(abc)
    res = expand(dag, dag.add_term(start), ExpansionConfig(rules={"jassoc"}))
    trees = {print_term(t) for t in dag.iter_terms(res.root)}
    ok = len(dag.members[res.root]) == 3 and trees == {
        "(join (join (rel A) (rel B)) (rel C))",
        "(join (rel A) (join (rel B) (rel C)))",
        "(join (rel B) (join (rel A) (rel C)))",
    }

    dag = Dag(abc)
    res = expand(dag, dag.add_term(start), ExpansionConfig(rules={"jassoc", "jcomm"}))
    ok &= dag.count_plans(res.root) == 12

    anns = []
    for t in (SIGMA, SIGMA_REV):
        dag = Dag(EDGE_CATALOG)
        (key,) = dag.fix_members(dag.add_term(t))
        anns.append(dag.ann[dag.find(key[2])])
    ok &= anns == [(frozenset("sm"), frozenset("stm")), (frozenset("tm"), frozenset("stm"))]
    report(5, ok, f"3 join trees, 12 with commutativity, annotations {[tuple(map(sorted, a)) for a in anns]}")


# 6 -------------------------------------------------------------------------

BUDGET_MS = 2000


def _bench(i):
    term = parse_query(qr(i))
    catalog = query_catalog(term)
    dag = Dag(catalog)
    res = expand(dag, dag.add_term(term), ExpansionConfig(budget_ms=BUDGET_MS))
    ours = dag.count_plans(res.root)
    base = enumerate_plans(term, catalog, budget_ms=BUDGET_MS)
    return ours, res.elapsed, base.visited, base.elapsed


@pytest.fixture(scope="module")
def bench_runs():
    """Three runs of Q_r2 to Q_r6: i -> list of (ours, t_ours, base, t_base)."""
    return {i: [_bench(i) for _ in range(3)] for i in range(2, 7)}


def test_criterion_6a_plan_count_ratio(bench_runs):
    ratios = {i: statistics.median(o / b for o, _, b, _ in bench_runs[i]) for i in range(3, 7)}
    ok = all(r >= 10 for r in ratios.values())
    report("6a", ok, ", ".join(f"Q_r{i} {r:.3g}x" for i, r in ratios.items()) + " (need >= 10x)")


def test_criterion_6b_speed_ratio_grows(bench_runs):
    def speed_ratio(o, to, b, tb):
        return (o / to) / (b / tb)

    med = {i: statistics.median(speed_ratio(*run) for run in bench_runs[i]) for i in bench_runs}
    drops = [i for i in range(3, 7) if med[i] < 0.8 * med[i - 1]]
    report("6b", not drops, ", ".join(f"Q_r{i} {r:.3g}" for i, r in med.items())
           + (f"; drops at {drops}" if drops else ""))


# 7 -------------------------------------------------------------------------


def _cli(*argv, hashseed):
    env = dict(os.environ, PYTHONHASHSEED=str(hashseed))
    proc = subprocess.run([sys.executable, "-m", "rlqdag.cli", *argv], capture_output=True, text=True, env=env)
    assert proc.returncode == 0, proc.stderr
    return proc.stdout


def test_criterion_7_determinism():
    # separate processes with different string hashing
    dags = [_cli("expand", "-q", "bundled", "--emit", "dag", hashseed=s) for s in (1, 2)]
    counts = [_cli("expand", "-q", "bundled", "--emit", "count", hashseed=s) for s in (3, 4)]
    ok = dags[0] == dags[1] and counts[0] == counts[1]
    report(7, ok, f"{len(counts[0].split())} queries, identical DAG JSON and counts")


# 8 -------------------------------------------------------------------------


def _random_edges(rng):
    nodes = [f"v{k}" for k in range(rng.randint(2, 40))]
    return {(rng.choice(nodes), rng.choice(nodes)) for _ in range(rng.randint(0, 200))}


def test_criterion_8_evaluator_oracles():
    queries = [SIGMA, SIGMA_REV] + [parse_query(q) for q in (
        "?s,?t <- ?s isLocatedIn+/dealsWith+ ?t",
        "?s,?t <- ?s (isLocatedIn|dealsWith)+ ?t",
        "?s <- ?s isLocatedIn+ v0",
    )]
    rng = random.Random(8)
    mismatches = bfs_mismatches = 0
    for k in range(100):
        db_rels = {name: Relation.make(("s", "t"), _random_edges(rng)) for name in EDGE_CATALOG}
        db = Database(db_rels)
        q = queries[k % len(queries)]
        mismatches += evaluate(q, db) != evaluate(q, db, naive=True)
        if q in (SIGMA, SIGMA_REV):
            bfs_mismatches += set(evaluate(q, db).rows) != bfs_closure(db["isLocatedIn"].rows)
    report(8, mismatches == bfs_mismatches == 0,
           f"100 pairs, {mismatches} semi-naive/naive mismatches, {bfs_mismatches} closure/BFS mismatches")


# 9 -------------------------------------------------------------------------


def test_criterion_9_best_plan_monotone():
    stats = load_stats(bundled_stats_path())
    bad = []
    for name in BUNDLED:
        term, catalog, _, _ = expanded(name)
        prev = float("inf")
        for budget in (50, 200, 1000):
            dag = Dag(catalog)
            res = expand(dag, dag.add_term(term), ExpansionConfig(budget_ms=budget))
            ours = best_plan(dag, res.root, stats).cost
            base = enumerate_plans(term, catalog, budget_ms=budget)
            theirs = min(term_cost(p, stats, dag=dag) for p in base.plans)
            if ours > prev + 1e-9:
                bad.append(f"{name}@{budget}: cost rose {prev:.1f} -> {ours:.1f}")
            if ours > theirs + 1e-9:
                bad.append(f"{name}@{budget}: {ours:.1f} > baseline {theirs:.1f}")
            prev = ours
    report(9, not bad, "; ".join(bad) or "costs non-increasing and never above the baseline")
