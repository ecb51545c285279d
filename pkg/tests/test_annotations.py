import pytest

from rlqdag.annotations import (
    annotate_fixpoint, check_node, member_annotations, node_destab, node_rigid, update_after_filter_push,
    update_after_merge,
)
from rlqdag.dag import Dag
from rlqdag.errors import InconsistentNode, RestrictionError
from rlqdag.terms import Eq, term_destab, term_rigid

from conftest import BUNDLED, EDGE_CATALOG, SIGMA, SIGMA_REV, expanded


def rec_class(dag, fix_cls):
    (key,) = dag.fix_members(fix_cls)
    return dag.find(key[2])


def test_node_values_match_term_values_on_sigma():
    dag = Dag(EDGE_CATALOG)
    rec = rec_class(dag, dag.add_term(SIGMA))
    assert node_destab(dag, rec) == term_destab(SIGMA.rec) == {"s", "m"}
    assert node_rigid(dag, rec) == term_rigid(SIGMA.rec, "X", EDGE_CATALOG) == {"s", "t", "m"}


def test_reversed_closure_annotation():
    dag = Dag(EDGE_CATALOG)
    rec = rec_class(dag, dag.add_term(SIGMA_REV))
    assert dag.ann[rec] == (frozenset({"t", "m"}), frozenset({"s", "t", "m"}))


def test_check_node_rejects_disagreeing_members():
    dag = Dag(EDGE_CATALOG)
    a = rec_class(dag, dag.add_term(SIGMA))
    b = rec_class(dag, dag.add_term(SIGMA_REV))
    check_node(dag, a)
    dag.merge(a, b)  # deliberately wrong: the two steps are not equivalent
    dag.rebuild()
    assert len(member_annotations(dag, a)) == 2
    with pytest.raises(InconsistentNode):
        check_node(dag, a)


def test_annotate_fixpoint_requires_the_variable():
    dag = Dag(EDGE_CATALOG)
    c = dag.add(("rel", "isLocatedIn"))
    with pytest.raises(RestrictionError):
        annotate_fixpoint(dag, c, c)


def test_incremental_updates():
    ann = (frozenset("sm"), frozenset("stm"))
    assert update_after_filter_push(ann, Eq("u", "v")) == (frozenset("sm"), frozenset("stmu"))
    assert update_after_merge(ann, (frozenset("t"), frozenset("k"))) == (frozenset("smt"), frozenset("stmk"))


@pytest.mark.parametrize("name", BUNDLED)
def test_every_member_agrees_after_expansion(name):
    _, _, dag, res = expanded(name)
    for cls in dag.reachable(res.root):
        if dag.xschema[cls] is not None:
            check_node(dag, cls)
