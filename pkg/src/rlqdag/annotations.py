"""Destabilizer and rigid-column annotations computed over equivalence nodes.

Both functions walk the DAG once per class, taking the union over members.
On a consistent node every member agrees, so the union equals the value of
any single unfolded member.
"""
from __future__ import annotations

from .dag import CHILD_SLOTS, Dag, children
from .errors import InconsistentNode, RestrictionError
from .terms import _compose, destab_of_derivations, filt


def node_derivations(dag: Dag, cls, _memo=None) -> frozenset:
    memo = {} if _memo is None else _memo
    cls = dag.find(cls)
    if cls in memo:
        return memo[cls]
    memo[cls] = frozenset()  # guards against accidental cycles
    out = set()
    for key in dag.members[cls]:
        out |= _key_derivations(dag, key, memo)
    memo[cls] = frozenset(out)
    return memo[cls]


def _key_derivations(dag, key, memo):
    op = key[0]
    if op == "var":
        return {()}
    if op in ("rel", "fix"):
        return set()
    if op in ("join", "union"):
        return node_derivations(dag, key[1], memo) | node_derivations(dag, key[2], memo)
    if op == "antijoin":
        return set(node_derivations(dag, key[1], memo))
    if op == "filter":
        return set(node_derivations(dag, key[2], memo))
    if op == "rename":
        step = ((key[2], key[1]), (key[1], None))
        return {_compose(p, step) for p in node_derivations(dag, key[3], memo)}
    if op == "antiproject":
        step = ((key[1], None),)
        return {_compose(p, step) for p in node_derivations(dag, key[2], memo)}
    raise ValueError(op)


def node_destab(dag: Dag, cls) -> frozenset:
    return destab_of_derivations(node_derivations(dag, cls))


def node_rigid(dag: Dag, cls, shadowed: bool = False, _memo=None) -> frozenset:
    """Rigid columns of ``cls`` with respect to its free X.

    With ``shadowed`` the X occurrences belong to an inner binder and count as
    ordinary relations.
    """
    memo = {} if _memo is None else _memo
    cls = dag.find(cls)
    mk = (cls, shadowed)
    if mk in memo:
        return memo[mk]
    memo[mk] = frozenset()
    out = set()
    for key in dag.members[cls]:
        out |= _key_rigid(dag, key, shadowed, memo)
    memo[mk] = frozenset(out)
    return memo[mk]


def _key_rigid(dag, key, shadowed, memo):
    op = key[0]
    if op == "var":
        return set(key[1]) if shadowed else set()
    if op == "rel":
        return set(dag.catalog[key[1]])
    if op in ("join", "union", "antijoin"):
        return node_rigid(dag, key[1], shadowed, memo) | node_rigid(dag, key[2], shadowed, memo)
    if op == "rename":
        return node_rigid(dag, key[3], shadowed, memo) | {key[1], key[2]}
    if op == "antiproject":
        if shadowed or dag.xschema[dag.find(key[2])] is None:
            return set()
        return node_rigid(dag, key[2], shadowed, memo) | {key[1]}
    if op == "filter":
        return node_rigid(dag, key[2], shadowed, memo) | filt(key[1])
    if op == "fix":
        return node_rigid(dag, key[1], shadowed, memo) | node_rigid(dag, key[2], True, memo)
    raise ValueError(op)


def member_annotations(dag: Dag, cls) -> list:
    """(destab, rigid) of each member op taken alone."""
    cls = dag.find(cls)
    out = []
    for key in dag.members[cls]:
        d = destab_of_derivations(_key_derivations(dag, key, {}))
        r = frozenset(_key_rigid(dag, key, False, {}))
        out.append((d, r))
    return out


def check_node(dag: Dag, cls) -> None:
    """Raise InconsistentNode when the members of ``cls`` disagree."""
    anns = member_annotations(dag, cls)
    if any(a != anns[0] for a in anns[1:]):
        raise InconsistentNode(f"class {dag.find(cls)} members disagree: {anns}")


def annotate_fixpoint(dag: Dag, const, rec) -> tuple:
    rec = dag.find(rec)
    if dag.xschema[rec] is None:
        raise RestrictionError("the recursive part of a fixpoint must mention its variable")
    return dag.annotate(rec)


def update_after_filter_push(ann: tuple, pred) -> tuple:
    destab, rigid = ann
    return destab, frozenset(rigid) | filt(pred)


def update_after_merge(a1: tuple, a2: tuple) -> tuple:
    return frozenset(a1[0]) | a2[0], frozenset(a1[1]) | a2[1]


__all__ = [
    "CHILD_SLOTS", "children", "node_derivations", "node_destab", "node_rigid", "member_annotations",
    "check_node", "annotate_fixpoint", "update_after_filter_push", "update_after_merge",
]
