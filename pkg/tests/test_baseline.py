import pytest

from rlqdag.baseline import EnumerationResult, enumerate_plans, plans_per_second, rewrites
from rlqdag.terms import Eq, Filter, Fix, Join, Rel

from conftest import EDGE_CATALOG, SIGMA, SIGMA_REV, expanded

ABC = {"A": frozenset("ab"), "B": frozenset("bc"), "C": frozenset("cd")}


def test_one_step_rewrites_of_sigma():
    out = rewrites(SIGMA, EDGE_CATALOG)
    assert SIGMA_REV in out
    # commuting the join inside the recursive part is also one step away
    assert len(out) == 2


def test_filter_push_is_one_step():
    t = Filter(Eq("t", "v"), SIGMA)
    assert Fix("X", Filter(Eq("t", "v"), Rel("isLocatedIn")), SIGMA.rec) in rewrites(t, EDGE_CATALOG)
    assert Fix("X", Filter(Eq("s", "v"), Rel("isLocatedIn")), SIGMA.rec) not in rewrites(
        Filter(Eq("s", "v"), SIGMA), EDGE_CATALOG)


def test_three_way_join_space():
    res = enumerate_plans(Join(Join(Rel("A"), Rel("B")), Rel("C")), ABC, rules={"jassoc", "jcomm"})
    assert res.complete and len(res.plans) == 12


@pytest.mark.parametrize("name, n", [("e1", 4), ("e2", 6), ("e3", 12), ("anbn", 32)])
def test_pinned_space_sizes(name, n):
    term, catalog, _, _ = expanded(name)
    res = enumerate_plans(term, catalog)
    assert res.complete and len(res.plans) == n == res.visited


def test_zero_budget_returns_the_input():
    term, catalog, _, _ = expanded("e4")
    res = enumerate_plans(term, catalog, budget_ms=0)
    assert not res.complete and res.plans == {term}


def test_max_plans_truncates():
    term, catalog, _, _ = expanded("e4")
    res = enumerate_plans(term, catalog, max_plans=10)
    assert not res.complete and 10 <= res.visited < 96


def test_rep_filters_unpushed_plans():
    term, catalog, _, _ = expanded("e2")
    full = enumerate_plans(term, catalog)
    rep = enumerate_plans(term, catalog, rep=True)
    assert rep.plans < full.plans
    assert rep.visited == full.visited


def test_plans_per_second():
    assert plans_per_second({"plans": 10, "elapsed": 2.0}) == 5.0
    assert plans_per_second(EnumerationResult(set(), 4, 0.5, True)) == 8.0
    with pytest.raises(ValueError):
        plans_per_second({"plans": 1, "elapsed": 0})
