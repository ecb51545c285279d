"""Hypothesis strategies for well-formed binary-relation terms over {s, t}."""
from __future__ import annotations

from hypothesis import strategies as st

from rlqdag.terms import AntiJoin, AntiProject, Eq, Filter, Fix, Join, Neq, Rel, Rename, Union, Var

CATALOG = {"R": frozenset({"s", "t"}), "S": frozenset({"s", "t"})}
VALUES = ("n0", "n1", "n2")


def compose(a, b):
    """Paths a then b: join a's target with b's source."""
    return AntiProject("m", Join(Rename("t", "m", a), Rename("s", "m", b)))


def reverse(a):
    return Rename("k", "t", Rename("t", "s", Rename("s", "k", a)))


def _closed(children):
    return st.one_of(
        st.builds(lambda c, v, x: Filter(Eq(c, v), x), st.sampled_from("st"), st.sampled_from(VALUES), children),
        st.builds(lambda c, v, x: Filter(Neq(c, v), x), st.sampled_from("st"), st.sampled_from(VALUES), children),
        st.builds(Union, children, children),
        st.builds(AntiJoin, children, children),
        st.builds(compose, children, children),
        st.builds(reverse, children),
        st.builds(lambda c, side: Fix("X", c, compose(c, Var("X")) if side else compose(Var("X"), c)),
                  children, st.booleans()),
    )


closed_terms = st.recursive(st.sampled_from([Rel("R"), Rel("S")]), _closed, max_leaves=6)


@st.composite
def closures(draw):
    """A fixpoint, possibly under filters and an outer composition."""
    const = draw(closed_terms)
    step = draw(closed_terms)
    rec = compose(step, Var("X")) if draw(st.booleans()) else compose(Var("X"), step)
    t = Fix("X", const, rec)
    if draw(st.booleans()):
        t = Filter(Eq(draw(st.sampled_from("st")), draw(st.sampled_from(VALUES))), t)
    return t


@st.composite
def edge_sets(draw, max_edges=15):
    nodes = [f"n{i}" for i in range(5)]
    pairs = st.tuples(st.sampled_from(nodes), st.sampled_from(nodes))
    return draw(st.frozensets(pairs, max_size=max_edges))
