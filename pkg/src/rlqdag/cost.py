"""Cardinality and cost estimates, and best-plan extraction.

Costs are abstract units (tuples touched).  Every operation node costs the
cardinality it produces plus the cost of its operands.  Cardinalities follow
the usual independence assumptions:

* base relation: its row count; ``X``: the cardinality of the constant part
  of its binder
* ``σ_{a=v}``: ``|T| / ndv(a)``; ``σ_{a≠v}``: ``|T| · (1 - 1/ndv(a))``;
  ``σ_{a=b}``: ``|T| / max(ndv(a), ndv(b))``
* ``L ⋈ R``: ``|L|·|R|`` divided by ``max(ndv_L(c), ndv_R(c))`` for every shared ``c``
* ``L ▷ R``: ``0.9·|L|``; ``L ∪ R``: ``|L| + |R|``; renames and
  antiprojections keep the cardinality
* ``μ(X = C ∪ R)``: ``min(c·|C|, |domain|^arity)``, and the recursive part is
  charged ``c`` times at ``|X| = |C|``; ``c`` defaults to 3

An equivalence node takes the smallest estimate among the operation nodes it
was created from (its *origins*), so all members share one cardinality and
merging classes can only lower it.  Missing statistics fall back to
``DEFAULT_ROWS`` rows, ``DEFAULT_DOMAIN`` domain values and
``rows / DEFAULT_NDV_RATIO`` distinct values per column.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

from .dag import Dag, _build, children
from .terms import (
    CANONICAL_VAR, AntiJoin, AntiProject, And, ColEq, Eq, Filter, Fix, Join, Neq, Rel, Rename, Term, Union, Var,
    type_of,
)

DEFAULT_ROWS = 1000
DEFAULT_DOMAIN = 1000
DEFAULT_NDV_RATIO = 10
ANTIJOIN_KEEP = 0.9


@dataclass(frozen=True)
class Info:
    """Estimated cardinality plus distinct counts per column."""

    card: float
    ndv: tuple  # sorted (column, distinct) pairs

    def distinct(self, col) -> float:
        for c, n in self.ndv:
            if c == col:
                return max(n, 1.0)
        return max(self.card, 1.0)


def _info(card, ndv: dict) -> Info:
    card = max(float(card), 0.0)
    return Info(card, tuple(sorted((c, max(min(n, card), 1.0)) for c, n in ndv.items())))


class CostModel:
    def __init__(self, stats: Optional[dict] = None, fix_factor: float = 3.0):
        self.stats = stats or {}
        self.fix_factor = fix_factor
        self.domain = float(self.stats.get("domain") or DEFAULT_DOMAIN)

    def rel(self, name, schema) -> Info:
        entry = self.stats.get("relations", {}).get(name)
        if entry is None:
            rows = DEFAULT_ROWS
            return _info(rows, {c: rows / DEFAULT_NDV_RATIO for c in schema})
        rows = entry.get("rows", DEFAULT_ROWS)
        distinct = entry.get("distinct", {})
        return _info(rows, {c: distinct.get(c, rows / DEFAULT_NDV_RATIO) for c in schema})

    def _select(self, pred, info: Info) -> float:
        if isinstance(pred, Eq):
            return info.card / info.distinct(pred.column)
        if isinstance(pred, Neq):
            return info.card * (1.0 - 1.0 / info.distinct(pred.column))
        if isinstance(pred, ColEq):
            return info.card / max(info.distinct(pred.left), info.distinct(pred.right))
        if isinstance(pred, And):
            card = info.card
            for p in pred.parts:
                card *= self._select(p, info) / info.card if info.card else 0.0
            return card
        raise TypeError(pred)

    def filter(self, pred, info: Info) -> Info:
        card = self._select(pred, info)
        ndv = dict(info.ndv)
        for c in _eq_columns(pred):
            ndv[c] = 1.0
        return _info(card, ndv)

    @staticmethod
    def rename(old, new, info: Info) -> Info:
        return _info(info.card, {new if c == old else c: n for c, n in info.ndv})

    @staticmethod
    def antiproject(col, info: Info) -> Info:
        return _info(info.card, {c: n for c, n in info.ndv if c != col})

    @staticmethod
    def join(left: Info, right: Info) -> Info:
        lcols, rcols = dict(left.ndv), dict(right.ndv)
        card = left.card * right.card
        ndv = dict(rcols)
        ndv.update(lcols)
        for c in lcols.keys() & rcols.keys():
            card /= max(lcols[c], rcols[c], 1.0)
            ndv[c] = min(lcols[c], rcols[c])
        return _info(card, ndv)

    @staticmethod
    def antijoin(left: Info, right: Info) -> Info:
        return _info(ANTIJOIN_KEEP * left.card, dict(left.ndv))

    def union(self, left: Info, right: Info) -> Info:
        ndv = {c: min(n + right.distinct(c), self.domain) for c, n in left.ndv}
        return _info(left.card + right.card, ndv)

    def fix(self, const: Info) -> Info:
        bound = self.domain ** max(len(const.ndv), 1)
        card = min(self.fix_factor * const.card, bound)
        return _info(card, {c: min(self.domain, card) for c, _ in const.ndv})


def _eq_columns(pred):
    if isinstance(pred, Eq):
        return (pred.column,)
    if isinstance(pred, And):
        return tuple(c for p in pred.parts for c in _eq_columns(p))
    return ()


# --------------------------------------------------------------------------
# estimates over a DAG


@dataclass
class BestPlan:
    term: Term
    cost: float
    card: float


class Estimates:
    """Lazily computed cardinalities and costs of a DAG's classes.

    Classes mentioning a free X are estimated once per cardinality given to
    X, which is how one recursive part is costed under different binders.
    """

    def __init__(self, dag: Dag, model: CostModel):
        self.dag = dag
        self.model = model
        self._info: dict = {}
        self._cost: dict = {}   # (cls, x) -> (cost, member index)

    def _ctx(self, cls, x):
        return x if self.dag.xschema[cls] is not None else None

    def info(self, cls, x: Optional[Info] = None) -> Info:
        cls = self.dag.find(cls)
        x = self._ctx(cls, x)
        mk = (cls, x)
        hit = self._info.get(mk)
        if hit is not None:
            return hit
        best = None
        for key in self.dag.origins[cls]:
            inf = self.op_info(self.dag.canon(key), x)
            if best is None or inf.card < best.card:
                best = inf
        self._info[mk] = best
        return best

    def card(self, cls, x: Optional[Info] = None) -> float:
        return self.info(cls, x).card

    def op_info(self, key, x: Optional[Info]) -> Info:
        op = key[0]
        m = self.model
        if op == "rel":
            return m.rel(key[1], self.dag.catalog[key[1]])
        if op == "var":
            if x is None:
                return _info(DEFAULT_ROWS, {c: DEFAULT_ROWS / DEFAULT_NDV_RATIO for c in key[1]})
            return x
        if op == "filter":
            return m.filter(key[1], self.info(key[2], x))
        if op == "rename":
            return m.rename(key[1], key[2], self.info(key[3], x))
        if op == "antiproject":
            return m.antiproject(key[1], self.info(key[2], x))
        if op == "join":
            return m.join(self.info(key[1], x), self.info(key[2], x))
        if op == "antijoin":
            return m.antijoin(self.info(key[1], x), self.info(key[2], x))
        if op == "union":
            return m.union(self.info(key[1], x), self.info(key[2], x))
        if op == "fix":
            return m.fix(self.info(key[1], x))
        raise ValueError(op)

    def op_cost(self, cls, key, x: Optional[Info]) -> float:
        own = self.card(cls, x)
        if key[0] == "fix":
            cx = self.info(key[1], x)
            return own + self.cost(key[1], x) + self.model.fix_factor * self.cost(key[2], cx)
        return own + sum(self.cost(k, x) for k in children(key))

    def _solve(self, cls, x):
        cls = self.dag.find(cls)
        x = self._ctx(cls, x)
        mk = (cls, x)
        hit = self._cost.get(mk)
        if hit is not None:
            return hit
        best = None
        for i, key in enumerate(self.dag.members[cls]):
            c = self.op_cost(cls, self.dag.canon(key), x)
            if best is None or c < best[0]:
                best = (c, i)
        self._cost[mk] = best
        return best

    def cost(self, cls, x: Optional[Info] = None) -> float:
        return self._solve(cls, x)[0]

    def best_member(self, cls, x: Optional[Info] = None):
        cls = self.dag.find(cls)
        return self.dag.canon(self.dag.members[cls][self._solve(cls, x)[1]])

    def best_term(self, cls, x: Optional[Info] = None) -> Term:
        key = self.best_member(cls, x)
        if key[0] == "fix":
            kids = (self.best_term(key[1], x), self.best_term(key[2], self.info(key[1], x)))
        else:
            kids = tuple(self.best_term(k, x) for k in children(key))
        return _build(key, kids)

    def to_json(self, root) -> dict:
        root = self.dag.find(root)
        self.cost(root)
        nodes = []
        for (cls, x), (cost, best) in sorted(self._cost.items(), key=lambda kv: (kv[0][0], _xkey(kv[0][1]))):
            members = [{"op": key[0], "cost": _num(self.op_cost(cls, self.dag.canon(key), x))}
                       for key in self.dag.members[cls]]
            nodes.append({
                "id": cls,
                "x_card": None if x is None else _num(x.card),
                "card": _num(self.card(cls, x)),
                "cost": _num(cost),
                "best": best,
                "members": members,
            })
        return {"schema_version": 1, "root": root, "fix_factor": self.model.fix_factor, "nodes": nodes}

    def dumps(self, root) -> str:
        return json.dumps(self.to_json(root), indent=1, sort_keys=True)


def _xkey(x):
    return (-1.0, ()) if x is None else (x.card, x.ndv)


def _num(v: float):
    return round(v, 6)


def estimate(dag: Dag, root, stats: Optional[dict] = None, fix_factor: float = 3.0) -> Estimates:
    est = Estimates(dag, CostModel(stats, fix_factor))
    est.cost(root)
    return est


def best_plan(dag: Dag, root, stats: Optional[dict] = None, estimates: Optional[Estimates] = None) -> BestPlan:
    """Cheapest plan of ``root``; ties go to the earliest member."""
    est = estimates or estimate(dag, root, stats)
    root = dag.find(root)
    return BestPlan(est.best_term(root), est.cost(root), est.card(root))


# --------------------------------------------------------------------------
# single terms


def term_cost(term: Term, stats: Optional[dict] = None, catalog=None, dag: Optional[Dag] = None,
              estimates: Optional[Estimates] = None, fix_factor: float = 3.0) -> float:
    """Estimated cost of one plan.

    Subterms that are operation nodes of ``dag`` take their cardinality from
    the DAG, so a plan of the DAG's space costs exactly what ``Estimates``
    charges it; other subterms are estimated from their own shape.
    """
    if estimates is None and dag is not None:
        estimates = Estimates(dag, CostModel(stats, fix_factor))
    model = estimates.model if estimates is not None else CostModel(stats, fix_factor)
    if catalog is None:
        catalog = dag.catalog if dag is not None else {}
    return _TermCoster(model, catalog, estimates).cost(term, {}, None)[0]


class _TermCoster:
    def __init__(self, model, catalog, est):
        self.model = model
        self.catalog = catalog
        self.est = est

    def cost(self, t, env, x):
        """(cost, info, class id or None) of ``t`` with X of estimate ``x``."""
        m = self.model
        if isinstance(t, Fix):
            cc, ci, ccls = self.cost(t.const, env, x)
            inner = dict(env)
            inner[t.var] = type_of(t.const, self.catalog, env)
            rc, _, rcls = self.cost(t.rec, inner, ci)
            cls = self._locate(("fix", ccls, rcls), ccls, rcls)
            info = self._class_info(cls, x) or m.fix(ci)
            return info.card + cc + m.fix_factor * rc, info, cls
        kids = [self.cost(c, env, x) for c in t.children()]
        cost = sum(k[0] for k in kids)
        ids = [k[2] for k in kids]
        infos = [k[1] for k in kids]
        if isinstance(t, Rel):
            key = ("rel", t.name)
            fallback = lambda: m.rel(t.name, self.catalog[t.name])  # noqa: E731
        elif isinstance(t, Var):
            key = ("var", frozenset(env.get(t.name, ())))
            fallback = lambda: x if x is not None else m.rel(None, key[1])  # noqa: E731
        elif isinstance(t, Filter):
            key = ("filter", t.pred, ids[0])
            fallback = lambda: m.filter(t.pred, infos[0])  # noqa: E731
        elif isinstance(t, Rename):
            key = ("rename", t.old, t.new, ids[0])
            fallback = lambda: m.rename(t.old, t.new, infos[0])  # noqa: E731
        elif isinstance(t, AntiProject):
            key = ("antiproject", t.column, ids[0])
            fallback = lambda: m.antiproject(t.column, infos[0])  # noqa: E731
        elif isinstance(t, Join):
            key = ("join", ids[0], ids[1])
            fallback = lambda: m.join(*infos)  # noqa: E731
        elif isinstance(t, AntiJoin):
            key = ("antijoin", ids[0], ids[1])
            fallback = lambda: m.antijoin(*infos)  # noqa: E731
        elif isinstance(t, Union):
            key = ("union", ids[0], ids[1])
            fallback = lambda: m.union(*infos)  # noqa: E731
        else:
            raise TypeError(t)
        cls = self._locate(key, *ids)
        info = self._class_info(cls, x) or fallback()
        return info.card + cost, info, cls

    def _locate(self, key, *ids):
        if self.est is None or any(i is None for i in ids):
            return None
        return self.est.dag.lookup(key)

    def _class_info(self, cls, x):
        if cls is None:
            return None
        return self.est.info(cls, x)


__all__ = [
    "Info", "CostModel", "Estimates", "BestPlan", "estimate", "best_plan", "term_cost", "CANONICAL_VAR",
    "DEFAULT_ROWS", "DEFAULT_DOMAIN", "DEFAULT_NDV_RATIO",
]
