"""Term-at-a-time plan enumerator.

Every rule of the grouped expansion is restated here on single terms and the
plan space is the breadth-first closure of the input under one-step
rewrites, deduplicated by structural hashing.  Rule criteria recompute
destabilizers and rigid sets from scratch at every application, as a term
enumerator without shared annotations must.
"""
from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from typing import Iterator, Optional

from .terms import (
    CANONICAL_VAR, AntiJoin, AntiProject, Filter, Fix, Join, Rename, Term, Union, Var, canonicalize, filt,
    term_destab, term_rigid, type_of,
)
from .transforms import ALL_RULES


@dataclass
class EnumerationResult:
    plans: set
    visited: int
    elapsed: float
    complete: bool

    @property
    def metrics(self) -> dict:
        return {"plans": self.visited, "elapsed": self.elapsed, "complete": self.complete}


def plans_per_second(metrics) -> float:
    if isinstance(metrics, EnumerationResult):
        metrics = metrics.metrics
    elapsed = metrics["elapsed"]
    if elapsed <= 0:
        raise ValueError("elapsed time must be positive")
    return metrics["plans"] / elapsed


class _Rewriter:
    def __init__(self, catalog, rules):
        self.catalog = catalog
        self.rules = frozenset(rules)

    def type(self, t, env):
        return type_of(t, self.catalog, env)

    def ann(self, fix, env):
        inner = dict(env)
        inner[CANONICAL_VAR] = self.type(fix.const, env)
        return term_destab(fix.rec), term_rigid(fix.rec, CANONICAL_VAR, self.catalog, inner)

    # one-step rewrites anywhere in ``t``
    def rewrites(self, t: Term, env=None) -> Iterator[Term]:
        env = dict(env or {})
        yield from self._at_root(t, env)
        if isinstance(t, Fix):
            inner = dict(env)
            inner[t.var] = self.type(t.const, env)
            for c in self.rewrites(t.const, env):
                yield Fix(t.var, c, t.rec)
            for r in self.rewrites(t.rec, inner):
                yield Fix(t.var, t.const, r)
            return
        if isinstance(t, (Filter, Rename, AntiProject)):
            for c in self.rewrites(t.child, env):
                yield _with_child(t, c)
            return
        if isinstance(t, (Join, AntiJoin, Union)):
            cls = type(t)
            for l in self.rewrites(t.left, env):
                yield cls(l, t.right)
            for r in self.rewrites(t.right, env):
                yield cls(t.left, r)

    def _at_root(self, t, env):
        rules = self.rules
        X = CANONICAL_VAR
        if isinstance(t, Filter):
            f, child = t.pred, t.child
            if "pf" in rules and isinstance(child, Fix):
                destab, _ = self.ann(child, env)
                if not filt(f) & destab:
                    yield Fix(X, Filter(f, child.const), child.rec)
            if "pfjoin" in rules and isinstance(child, Join):
                cols = filt(f)
                in_a = cols <= self.type(child.left, env)
                in_b = cols <= self.type(child.right, env)
                if in_a or in_b:
                    a = Filter(f, child.left) if in_a else child.left
                    b = Filter(f, child.right) if in_b else child.right
                    yield Join(a, b)
        elif isinstance(t, AntiProject):
            col, child = t.column, t.child
            if "pp" in rules and isinstance(child, Fix):
                _, rigid = self.ann(child, env)
                if col not in rigid:
                    yield Fix(X, AntiProject(col, child.const), child.rec)
            if "pajoin" in rules and isinstance(child, Join):
                in_a = col in self.type(child.left, env)
                in_b = col in self.type(child.right, env)
                if in_a and not in_b:
                    yield Join(AntiProject(col, child.left), child.right)
                elif in_b and not in_a:
                    yield Join(child.left, AntiProject(col, child.right))
        elif isinstance(t, Join):
            a, b = t.left, t.right
            if "pj" in rules and isinstance(b, Fix):
                destab, rigid = self.ann(b, env)
                tb = self.type(a, env)
                tc = self.type(b.const, env)
                if not tb & destab and not (tb - tc) & rigid:
                    yield Fix(X, Join(a, b.const), b.rec)
            if "mf" in rules and isinstance(a, Fix) and isinstance(b, Fix):
                d1, r1 = self.ann(a, env)
                d2, r2 = self.ann(b, env)
                t1 = self.type(a.const, env)
                t2 = self.type(b.const, env)
                if not (t1 & t2) & (d1 | d2) and not (t1 - t2) & r2 and not (t2 - t1) & r1:
                    yield Fix(X, Join(a.const, b.const), Union(a.rec, b.rec))
            if "jcomm" in rules:
                yield Join(b, a)
            if "jassoc" in rules and isinstance(a, Join):
                yield Join(a.left, Join(a.right, b))
                yield Join(a.right, Join(a.left, b))
            if "dju" in rules and isinstance(b, Union):
                yield Union(Join(a, b.left), Join(a, b.right))
        elif isinstance(t, AntiJoin):
            if "pa" in rules and isinstance(t.left, Fix):
                destab, _ = self.ann(t.left, env)
                if not self.type(t.right, env) & destab:
                    yield Fix(X, AntiJoin(t.left.const, t.right), t.left.rec)
        elif isinstance(t, Union):
            if "ucomm" in rules:
                yield Union(t.right, t.left)
        elif isinstance(t, Fix):
            if "rev" in rules:
                yield from self._reverse(t, env)

    def _reverse(self, t, env):
        tc = self.type(t.const, env)
        if len(tc) != 2 or not isinstance(t.rec, AntiProject) or not isinstance(t.rec.child, Join):
            return
        k = t.rec.column
        j = t.rec.child
        for side_c, side_x in ((j.left, j.right), (j.right, j.left)):
            if not (isinstance(side_c, Rename) and isinstance(side_x, Rename)):
                continue
            if side_c.new != k or side_x.new != k or side_c.child != t.const:
                continue
            if not (isinstance(side_x.child, Var) and side_x.child.name == CANONICAL_VAR):
                continue
            u, v = side_c.old, side_x.old
            if u != v and {u, v} == tc:
                rec = AntiProject(k, Join(Rename(v, k, t.const), Rename(u, k, Var(CANONICAL_VAR))))
                yield Fix(CANONICAL_VAR, t.const, rec)

    def unpushed(self, t, env=None) -> bool:
        """Whether ``t`` holds a filter or antiprojection that could enter a fixpoint."""
        env = dict(env or {})
        if isinstance(t, Filter) and isinstance(t.child, Fix) and "pf" in self.rules:
            if not filt(t.pred) & self.ann(t.child, env)[0]:
                return True
        if isinstance(t, AntiProject) and isinstance(t.child, Fix) and "pp" in self.rules:
            if t.column not in self.ann(t.child, env)[1]:
                return True
        if isinstance(t, Fix):
            inner = dict(env)
            inner[t.var] = self.type(t.const, env)
            return self.unpushed(t.const, env) or self.unpushed(t.rec, inner)
        return any(self.unpushed(c, env) for c in t.children())


def _with_child(t, c):
    if isinstance(t, Filter):
        return Filter(t.pred, c)
    if isinstance(t, Rename):
        return Rename(t.old, t.new, c)
    return AntiProject(t.column, c)


def rewrites(t: Term, catalog, rules=ALL_RULES) -> list:
    return list(_Rewriter(catalog, rules).rewrites(canonicalize(t)))


def enumerate_plans(t: Term, catalog, budget_ms: Optional[float] = None, rules=ALL_RULES, rep: bool = False,
                    max_plans: Optional[int] = None) -> EnumerationResult:
    """Breadth-first closure of ``t`` under the single-term rules."""
    rw = _Rewriter(catalog, rules)
    start = time.monotonic()
    deadline = None if budget_ms is None else start + budget_ms / 1000.0
    t = canonicalize(t)
    seen = {t}
    queue = deque([t])
    complete = True
    if budget_ms == 0:
        complete = False
        queue.clear()
    while queue:
        if deadline is not None and time.monotonic() >= deadline:
            complete = False
            break
        if max_plans is not None and len(seen) >= max_plans:
            complete = False
            break
        cur = queue.popleft()
        for nxt in rw.rewrites(cur):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    elapsed = time.monotonic() - start
    visited = len(seen)
    plans = {p for p in seen if not rw.unpushed(p)} if rep else seen
    return EnumerationResult(plans, visited, elapsed, complete)
# short alias; ``enumerate_plans`` is the main name since ``enumerate`` shadows a builtin

# the spec-level name; kept as an alias because ``enumerate`` shadows a builtin
enumerate = enumerate_plans  # noqa: A001
