import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rlqdag.errors import ParseError
from rlqdag.evaluator import Database, Relation, evaluate
from rlqdag.frontend import (
    bundled_queries, parse_query, qr, query_catalog, query_constants, read_queries, rename_columns,
)
from rlqdag.syntax import parse_term, print_term
from rlqdag.terms import AntiJoin, Fix, Join, Rel, count_ops, restriction_violations, type_of

from conftest import SIGMA

LABELS = ("isLocatedIn", "dealsWith", "hasChild", "livesIn", "owns", "a", "b", "p")


# --------------------------------------------------------------------------
# set-based path oracles, independent of the term translation


def comp(r, s):
    by_src = {}
    for a, b in s:
        by_src.setdefault(a, set()).add(b)
    return {(a, c) for a, b in r for c in by_src.get(b, ())}


def plus(r):
    out = set(r)
    while True:
        nxt = out | comp(out, r)
        if nxt == out:
            return out
        out = nxt


def inv(r):
    return {(b, a) for a, b in r}


def nested(a, b):
    """a^n b^n for n >= 1; also serves same-generation with a = p^-1, b = p."""
    out = comp(a, b)
    while True:
        nxt = out | comp(comp(a, out), b)
        if nxt == out:
            return out
        out = nxt


def graph(seed, nodes=7, edges=10):
    rng = random.Random(seed)
    names = [f"n{i}" for i in range(nodes)] + ["Sweden"]
    rels = {}
    for label in LABELS:
        rows = {(rng.choice(names), rng.choice(names)) for _ in range(rng.randint(0, edges))}
        rels[label] = Relation.make(("s", "t"), rows)
    return Database(rels)


def pairs(db, label):
    return set(db[label].rows)


def answers(query, db):
    rel = evaluate(parse_query(query), db)
    if rel.columns == ("s", "t"):
        return set(rel.rows)
    return {r[0] for r in rel.rows}


ORACLES = {
    "?s,?t <- ?s isLocatedIn+ ?t": lambda g: plus(pairs(g, "isLocatedIn")),
    "?s <- ?s isLocatedIn+ Sweden": lambda g: {a for a, b in plus(pairs(g, "isLocatedIn")) if b == "Sweden"},
    "?t <- Sweden isLocatedIn+ ?t": lambda g: {b for a, b in plus(pairs(g, "isLocatedIn")) if a == "Sweden"},
    "?s,?t <- ?s hasChild+/livesIn ?t": lambda g: comp(plus(pairs(g, "hasChild")), pairs(g, "livesIn")),
    "?s,?t <- ?s isLocatedIn+/dealsWith+ ?t":
        lambda g: comp(plus(pairs(g, "isLocatedIn")), plus(pairs(g, "dealsWith"))),
    "?s,?t <- ?s (isLocatedIn|dealsWith)+ ?t": lambda g: plus(pairs(g, "isLocatedIn") | pairs(g, "dealsWith")),
    "?s,?t <- ?s isLocatedIn+|dealsWith+ ?t":
        lambda g: plus(pairs(g, "isLocatedIn")) | plus(pairs(g, "dealsWith")),
    "?s,?t <- ?s ^owns/livesIn ?t": lambda g: comp(inv(pairs(g, "owns")), pairs(g, "livesIn")),
    "?s,?t <- ?s isLocatedIn+ ?t minus ?t dealsWith _":
        lambda g: {(a, b) for a, b in plus(pairs(g, "isLocatedIn")) if b not in {x for x, _ in pairs(g, "dealsWith")}},
    "?s <- ?s hasChild+/livesIn Sweden":
        lambda g: {a for a, b in comp(plus(pairs(g, "hasChild")), pairs(g, "livesIn")) if b == "Sweden"},
    "?s <- ?s isLocatedIn+ ?s": lambda g: {a for a, b in plus(pairs(g, "isLocatedIn")) if a == b},
    # output columns follow the subject/object roles, not the head order
    "?t,?s <- ?s owns ?t": lambda g: pairs(g, "owns"),
    "anbn(a,b)": lambda g: nested(pairs(g, "a"), pairs(g, "b")),
    "samegen(p)": lambda g: nested(inv(pairs(g, "p")), pairs(g, "p")),
}


@pytest.mark.parametrize("query", list(ORACLES))
def test_translation_matches_path_oracle(query):
    for seed in range(8):
        g = graph(seed)
        assert answers(query, g) == ORACLES[query](g), seed


# --------------------------------------------------------------------------
# shapes of the initial plans


def test_closure_query_is_the_right_recursive_form():
    assert parse_query("?s,?t <- ?s isLocatedIn+ ?t") == SIGMA


def test_constant_becomes_an_unpushed_filter():
    assert print_term(parse_query("?s <- ?s isLocatedIn+ Sweden")) == (
        '(antiproject t (filter (= t "Sweden") ' + print_term(SIGMA) + "))"
    )


def test_anbn_builtin_shape():
    assert print_term(parse_query("anbn(a,b)")) == (
        "(fix X (antiproject m (join (rename t m (rel a)) (rename s m (rel b))))"
        " (antiproject m2 (antiproject m1 (join (join (rename t m1 (rel a))"
        " (rename t m2 (rename s m1 (var X)))) (rename s m2 (rel b))))))"
    )


@pytest.mark.parametrize("i", range(1, 7))
def test_chain_family_shape(i):
    t = parse_query(qr(i))
    assert count_ops(t, Fix) == i
    assert count_ops(t, Join) == 2 * i - 1


def test_chain_family_rejects_zero():
    with pytest.raises(ValueError):
        qr(0)


def test_minus_builds_an_antijoin():
    t = parse_query("?s,?t <- ?s isLocatedIn+ ?t minus ?t dealsWith _")
    assert count_ops(t, AntiJoin) == 1


def test_rename_columns_handles_swaps():
    t = rename_columns(Rel("r"), {"s": "t", "t": "s"})
    assert type_of(t, {"r": frozenset("st")}) == {"s", "t"}
    db = Database({"r": Relation.make(("s", "t"), [("a", "b")])})
    assert evaluate(t, db).rows == {("b", "a")}


# --------------------------------------------------------------------------
# errors and helpers


@pytest.mark.parametrize("text, pos", [
    ("?s,?t <- ?s isLocatedIn+", 24),
    ("?s <- ?s (a|b ?t", 14),
    ("?s,?t ?s a ?t", 6),
    ("?s <- ?s a ?t $", 14),
    ("anbn(a)", 0),
])
def test_parse_errors_carry_positions(text, pos):
    with pytest.raises(ParseError) as info:
        parse_query(text)
    assert info.value.position == pos


def test_head_variable_must_be_bound():
    with pytest.raises(ParseError):
        parse_query("?z <- ?s a ?t")


def test_catalog_and_constants():
    t = parse_query("?s <- ?s hasChild+/livesIn Sweden")
    assert query_catalog(t) == {"hasChild": frozenset("st"), "livesIn": frozenset("st")}
    assert query_constants(t) == ["Sweden"]


def test_read_queries_names_and_comments():
    text = "# comment\nfirst: ?s,?t <- ?s a ?t\n\n?s,?t <- ?s b ?t  # trailing\n"
    assert read_queries(text) == [("first", "?s,?t <- ?s a ?t"), ("q2", "?s,?t <- ?s b ?t")]


def test_bundled_queries_parse():
    qs = bundled_queries()
    assert len(qs) == 12
    for _, text in qs:
        t = parse_query(text)
        assert parse_term(print_term(t)) == t


# --------------------------------------------------------------------------
# random queries from the grammar

label = st.sampled_from(["a", "b", "p"])


def _path(children):
    return st.one_of(
        st.builds(lambda x: f"({x})+", children),
        st.builds(lambda x, y: f"{x}/{y}", children, children),
        st.builds(lambda x, y: f"({x}|{y})", children, children),
    )


paths = st.recursive(st.one_of(label, label.map(lambda x: "^" + x)), _path, max_leaves=5)
endpoints = st.sampled_from(["?s", "Sweden", "_"])


@settings(max_examples=150, deadline=None)
@given(paths, endpoints)
def test_random_queries_translate_to_valid_plans(path, subject):
    t = parse_query(f"?t <- {subject} {path} ?t")
    assert restriction_violations(t) == []
    assert type_of(t, query_catalog(t)) == {"t"}
