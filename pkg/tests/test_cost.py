import json

import pytest

from rlqdag.cost import DEFAULT_ROWS, CostModel, best_plan, estimate, term_cost
from rlqdag.dag import Dag
from rlqdag.evaluator import evaluate, load_edges
from rlqdag.frontend import bundled_graph_path, bundled_stats_path
from rlqdag.syntax import print_term
from rlqdag.terms import AntiProject, Eq, Filter, Fix, Join, Rel, Rename
from rlqdag.transforms import ExpansionConfig, expand

from conftest import EDGE_CATALOG, SIGMA, expanded

STATS = {
    "domain": 100,
    "relations": {
        "isLocatedIn": {"rows": 400, "distinct": {"s": 300, "t": 40}},
        "dealsWith": {"rows": 50, "distinct": {"s": 20, "t": 20}},
    },
}


@pytest.fixture(scope="module")
def desk():
    return load_edges(bundled_graph_path())


def test_base_relation_estimate_is_row_count():
    dag = Dag(EDGE_CATALOG)
    root = dag.add_term(Rel("isLocatedIn"))
    assert estimate(dag, root, STATS).card(root) == 400
    assert best_plan(dag, root, STATS).cost == 400


def test_join_uses_larger_distinct_count():
    m = CostModel(STATS)
    left = m.rel("isLocatedIn", {"s", "t"})
    right = m.rename("s", "t", m.rename("t", "u", m.rel("dealsWith", {"s", "t"})))
    # 400 * 50 / max(40, 20)
    assert m.join(left, right).card == pytest.approx(500)


def test_join_estimate_on_bundled_graph(desk):
    t = Join(Rename("t", "c", Rel("livesIn")), Rename("s", "c", Rel("isLocatedIn")))
    dag = Dag(desk.catalog())
    root = dag.add_term(t)
    est = estimate(dag, root, desk.stats).card(root)
    true = len(evaluate(t, desk))
    # independence estimates stay within a factor of two here
    assert true / 2 <= est <= true * 2


def test_filter_selectivity():
    m = CostModel(STATS)
    rel = m.rel("isLocatedIn", {"s", "t"})
    assert m.filter(Eq("t", "x"), rel).card == pytest.approx(10)


def test_fixpoint_cardinality_is_capped():
    m = CostModel(STATS, fix_factor=3)
    assert m.fix(m.rel("isLocatedIn", {"s", "t"})).card == 1200
    small = CostModel({"domain": 10, "relations": STATS["relations"]})
    assert small.fix(small.rel("isLocatedIn", {"s", "t"})).card == 100


def test_missing_stats_use_defaults():
    dag = Dag(EDGE_CATALOG)
    root = dag.add_term(Rel("dealsWith"))
    assert estimate(dag, root).card(root) == DEFAULT_ROWS


def test_members_share_a_cardinality():
    _, _, dag, res = expanded("e3")
    est = estimate(dag, res.root, STATS)
    for cls in dag.reachable(res.root):
        if dag.xschema[cls] is None and len(dag.members[cls]) > 1:
            card = est.card(cls)
            for key in dag.members[cls]:
                if key[0] != "fix":
                    # own work is the class cardinality, whatever the member
                    kids = sum(est.cost(c) for c in key[1:] if isinstance(c, int))
                    assert est.op_cost(cls, key, None) == pytest.approx(card + kids)
            assert est.cost(cls) == min(est.op_cost(cls, k, None) for k in dag.members[cls])


def test_singleton_dag_returns_its_plan():
    dag = Dag(EDGE_CATALOG)
    root = dag.add_term(SIGMA)
    best = best_plan(dag, root, STATS)
    assert best.term == SIGMA
    assert best.cost == pytest.approx(term_cost(SIGMA, STATS, EDGE_CATALOG))


def test_selective_filter_is_pushed_in_best_plan():
    t = Filter(Eq("t", "Sweden"), SIGMA)
    dag = Dag(EDGE_CATALOG)
    res = expand(dag, dag.add_term(t), ExpansionConfig())
    best = best_plan(dag, res.root, STATS)
    assert isinstance(best.term, Fix) and best.term.const == Filter(Eq("t", "Sweden"), Rel("isLocatedIn"))
    assert best.cost < term_cost(t, STATS, dag=dag)


@pytest.mark.parametrize("name", ["e2", "e3", "anbn", "minus_dealing"])
def test_best_plan_is_a_member_and_no_worse_than_the_input(name):
    term, catalog, dag, res = expanded(name)
    best = best_plan(dag, res.root, STATS)
    assert best.term in set(dag.iter_terms(res.root))
    assert best.cost <= term_cost(term, STATS, dag=dag) + 1e-9
    assert best.cost == pytest.approx(term_cost(best.term, STATS, dag=dag))


def test_larger_budget_never_costs_more():
    term, catalog, _, _ = expanded("e4")
    costs = []
    for budget in (0, 1, 5, None):
        dag = Dag(catalog)
        res = expand(dag, dag.add_term(term), ExpansionConfig(budget_ms=budget))
        costs.append(best_plan(dag, res.root, STATS).cost)
    assert costs == sorted(costs, reverse=True)


def test_term_cost_without_dag_matches_structure():
    t = AntiProject("t", Filter(Eq("t", "x"), Rel("isLocatedIn")))
    # filter 10 rows, antiprojection 10 rows, scan 400 rows
    assert term_cost(t, STATS, EDGE_CATALOG) == pytest.approx(420)


def test_cost_dump(tmp_path):
    _, _, dag, res = expanded("e2")
    est = estimate(dag, res.root, STATS)
    doc = json.loads(est.dumps(res.root))
    assert doc["schema_version"] == 1 and doc["root"] == dag.find(res.root)
    root_entry = [n for n in doc["nodes"] if n["id"] == doc["root"]][0]
    assert root_entry["cost"] == pytest.approx(est.cost(res.root), rel=1e-6)
    assert len(root_entry["members"]) == len(dag.members[dag.find(res.root)])


def test_bundled_stats_match_graph(desk):
    assert json.loads(bundled_stats_path().read_text(encoding="utf-8")) == desk.stats


def test_best_plan_printable():
    _, _, dag, res = expanded("e1")
    assert print_term(best_plan(dag, res.root).term).startswith("(")
