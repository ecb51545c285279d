"""Individual mu-RA terms.

A term is an immutable tree of relational operators extended with a least
fixpoint binder ``Fix(var, const, rec)``.  Schemas are sets of column names;
joins are natural joins on shared columns and all evaluation is set based.

The per-term destabilizer and rigid-column functions live here as well since
both the term-at-a-time enumerator and the consistency checks of the DAG need
them on single terms.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Mapping, Optional, Union as TUnion

from .errors import FreshnessError, RestrictionError, SchemaError

Schema = frozenset
Catalog = Mapping[str, frozenset]

CANONICAL_VAR = "X"


# --------------------------------------------------------------------------
# filter predicates


@dataclass(frozen=True)
class Eq:
    column: str
    value: str

    @property
    def columns(self) -> frozenset:
        return frozenset((self.column,))

    def __call__(self, row: Mapping[str, str]) -> bool:
        return row[self.column] == self.value


@dataclass(frozen=True)
class Neq:
    column: str
    value: str

    @property
    def columns(self) -> frozenset:
        return frozenset((self.column,))

    def __call__(self, row: Mapping[str, str]) -> bool:
        return row[self.column] != self.value


@dataclass(frozen=True)
class ColEq:
    left: str
    right: str

    @property
    def columns(self) -> frozenset:
        return frozenset((self.left, self.right))

    def __call__(self, row: Mapping[str, str]) -> bool:
        return row[self.left] == row[self.right]


@dataclass(frozen=True)
class And:
    parts: tuple

    @property
    def columns(self) -> frozenset:
        return frozenset().union(*(p.columns for p in self.parts))

    def __call__(self, row: Mapping[str, str]) -> bool:
        return all(p(row) for p in self.parts)


Predicate = TUnion[Eq, Neq, ColEq, And]


def filt(pred: Predicate) -> frozenset:
    """Columns read by a predicate."""
    return pred.columns


# --------------------------------------------------------------------------
# terms


class Term:
    __slots__ = ()

    def children(self) -> tuple:
        return ()

    def __str__(self) -> str:
        from .syntax import print_term

        return print_term(self)


@dataclass(frozen=True, repr=False)
class Rel(Term):
    name: str

    def __repr__(self):
        return f"Rel({self.name!r})"


@dataclass(frozen=True, repr=False)
class Var(Term):
    """Occurrence of a recursion variable."""

    name: str = CANONICAL_VAR

    def __repr__(self):
        return f"Var({self.name!r})"


@dataclass(frozen=True, repr=False)
class Filter(Term):
    pred: Predicate
    child: Term

    def children(self):
        return (self.child,)


@dataclass(frozen=True, repr=False)
class Rename(Term):
    old: str
    new: str
    child: Term

    def children(self):
        return (self.child,)


@dataclass(frozen=True, repr=False)
class AntiProject(Term):
    column: str
    child: Term

    def children(self):
        return (self.child,)


@dataclass(frozen=True, repr=False)
class Join(Term):
    left: Term
    right: Term

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True, repr=False)
class AntiJoin(Term):
    left: Term
    right: Term

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True, repr=False)
class Union(Term):
    left: Term
    right: Term

    def children(self):
        return (self.left, self.right)


@dataclass(frozen=True, repr=False)
class Fix(Term):
    var: str
    const: Term
    rec: Term

    def children(self):
        return (self.const, self.rec)


for _cls in (Filter, Rename, AntiProject, Join, AntiJoin, Union, Fix):
    _cls.__repr__ = lambda self: f"<{type(self).__name__} {self}>"


def with_children(t: Term, kids) -> Term:
    """Rebuild ``t`` with new children, keeping its operator and parameters."""
    if isinstance(t, Filter):
        return Filter(t.pred, kids[0])
    if isinstance(t, Rename):
        return Rename(t.old, t.new, kids[0])
    if isinstance(t, AntiProject):
        return AntiProject(t.column, kids[0])
    if isinstance(t, Join):
        return Join(kids[0], kids[1])
    if isinstance(t, AntiJoin):
        return AntiJoin(kids[0], kids[1])
    if isinstance(t, Union):
        return Union(kids[0], kids[1])
    if isinstance(t, Fix):
        return Fix(t.var, kids[0], kids[1])
    return t


def size(t: Term) -> int:
    return 1 + sum(size(c) for c in t.children())


def subterms(t: Term) -> Iterator[Term]:
    yield t
    for c in t.children():
        yield from subterms(c)


def count_ops(t: Term, cls) -> int:
    return sum(1 for s in subterms(t) if isinstance(s, cls))


# --------------------------------------------------------------------------
# typing


def type_of(t: Term, catalog: Catalog, env: Optional[Mapping[str, frozenset]] = None) -> frozenset:
    """Schema of ``t``; ``env`` gives schemas of free recursion variables."""
    return _type_of(t, catalog, dict(env or {}), {})


def _type_of(t, catalog, env, memo):
    key = (id(t), tuple(sorted((k, tuple(sorted(v))) for k, v in env.items())))
    hit = memo.get(key)
    if hit is not None and hit[0] is t:
        return hit[1]
    res = _type_of_uncached(t, catalog, env, memo)
    memo[key] = (t, res)
    return res


def _type_of_uncached(t, catalog, env, memo):
    if isinstance(t, Rel):
        try:
            return frozenset(catalog[t.name])
        except KeyError:
            raise SchemaError(f"unknown relation {t.name!r}") from None
    if isinstance(t, Var):
        try:
            return env[t.name]
        except KeyError:
            raise SchemaError(f"recursion variable {t.name!r} has no schema") from None
    if isinstance(t, Filter):
        child = _type_of(t.child, catalog, env, memo)
        missing = filt(t.pred) - child
        if missing:
            raise SchemaError(f"filter reads absent columns {sorted(missing)}")
        return child
    if isinstance(t, Rename):
        child = _type_of(t.child, catalog, env, memo)
        if t.old not in child:
            raise SchemaError(f"rename source {t.old!r} not in {sorted(child)}")
        if t.new in child:
            raise SchemaError(f"rename target {t.new!r} already in {sorted(child)}")
        return (child - {t.old}) | {t.new}
    if isinstance(t, AntiProject):
        child = _type_of(t.child, catalog, env, memo)
        if t.column not in child:
            raise SchemaError(f"antiprojected column {t.column!r} not in {sorted(child)}")
        return child - {t.column}
    if isinstance(t, Join):
        return _type_of(t.left, catalog, env, memo) | _type_of(t.right, catalog, env, memo)
    if isinstance(t, AntiJoin):
        left = _type_of(t.left, catalog, env, memo)
        right = _type_of(t.right, catalog, env, memo)
        if not right <= left:
            raise SchemaError(f"antijoin right schema {sorted(right)} not within {sorted(left)}")
        return left
    if isinstance(t, Union):
        left = _type_of(t.left, catalog, env, memo)
        right = _type_of(t.right, catalog, env, memo)
        if left != right:
            raise SchemaError(f"union of {sorted(left)} and {sorted(right)}")
        return left
    if isinstance(t, Fix):
        const = _type_of(t.const, catalog, env, memo)
        inner = dict(env)
        inner[t.var] = const
        rec = _type_of(t.rec, catalog, inner, memo)
        if rec != const:
            raise SchemaError(f"fixpoint parts disagree: {sorted(const)} vs {sorted(rec)}")
        return const
    raise TypeError(f"not a term: {t!r}")


# --------------------------------------------------------------------------
# variables


def free_rec_vars(t: Term) -> frozenset:
    if isinstance(t, Var):
        return frozenset((t.name,))
    if isinstance(t, Fix):
        return free_rec_vars(t.const) | (free_rec_vars(t.rec) - {t.var})
    out = frozenset()
    for c in t.children():
        out |= free_rec_vars(c)
    return out


def _all_var_names(t: Term) -> set:
    names = set()
    for s in subterms(t):
        if isinstance(s, Var):
            names.add(s.name)
        elif isinstance(s, Fix):
            names.add(s.var)
    return names


def substitute(t: Term, x: str, x2: str) -> Term:
    """Replace free occurrences of recursion variable ``x`` by ``x2``."""
    if x2 != x and x2 in _all_var_names(t):
        raise FreshnessError(f"{x2!r} already occurs in the term")
    return _subst(t, x, x2)


def _subst(t, x, x2):
    if isinstance(t, Var):
        return Var(x2) if t.name == x else t
    if isinstance(t, Fix):
        const = _subst(t.const, x, x2)
        rec = t.rec if t.var == x else _subst(t.rec, x, x2)
        return Fix(t.var, const, rec)
    kids = t.children()
    if not kids:
        return t
    return with_children(t, [_subst(c, x, x2) for c in kids])


def canonicalize(t: Term) -> Term:
    """Rename every binder to ``X``.

    Sound only for non-mutually-recursive terms: the rec part of a fixpoint has
    a single free variable (its own), so naming all binders alike never
    captures anything.
    """
    if isinstance(t, Var):
        return Var(CANONICAL_VAR)
    if isinstance(t, Fix):
        return Fix(CANONICAL_VAR, canonicalize(t.const), canonicalize(t.rec))
    kids = t.children()
    if not kids:
        return t
    return with_children(t, [canonicalize(c) for c in kids])


def alpha_equal(a: Term, b: Term) -> bool:
    return canonicalize(a) == canonicalize(b)


# --------------------------------------------------------------------------
# destabilizer and rigidity on single terms
#
# A derivation is a finite column map stored as a sorted tuple of
# (column, image) pairs; image None stands for the absorbing non-column.


def _compose(p: tuple, q: tuple) -> tuple:
    """``p`` after ``q``: c -> p(q(c)), None absorbing."""
    pd, qd = dict(p), dict(q)
    out = {}
    for c in set(pd) | set(qd):
        qc = qd.get(c, c)
        img = None if qc is None else pd.get(qc, qc)
        if img != c:
            out[c] = img
    return tuple(sorted(out.items(), key=lambda kv: kv[0]))


def derivations(t: Term, x: str) -> frozenset:
    if isinstance(t, Var):
        return frozenset({()}) if t.name == x else frozenset()
    if isinstance(t, Rel):
        return frozenset()
    if isinstance(t, Fix):
        return frozenset()
    if isinstance(t, (Union, Join)):
        return derivations(t.left, x) | derivations(t.right, x)
    if isinstance(t, AntiJoin):
        return derivations(t.left, x)
    if isinstance(t, Filter):
        return derivations(t.child, x)
    if isinstance(t, Rename):
        step = ((t.new, t.old), (t.old, None))
        return frozenset(_compose(p, step) for p in derivations(t.child, x))
    if isinstance(t, AntiProject):
        step = ((t.column, None),)
        return frozenset(_compose(p, step) for p in derivations(t.child, x))
    raise TypeError(t)


def destab_of_derivations(derivs) -> frozenset:
    return frozenset(c for p in derivs for c, _ in p)


def term_destab(t: Term, x: str = CANONICAL_VAR) -> frozenset:
    """Columns a fixpoint iteration over ``t`` may modify."""
    return destab_of_derivations(derivations(t, x))


def term_rigid(t: Term, x: str, catalog: Catalog, env: Optional[Mapping[str, frozenset]] = None) -> frozenset:
    """Columns that cannot be added to or removed from a recursion over ``t``.

    ``env`` supplies schemas for recursion variables bound *inside* ``t``'s
    context other than ``x`` (they count as ordinary relations).
    """
    return _rigid(t, x, catalog, dict(env or {}))


def _rigid(t, x, catalog, env):
    if isinstance(t, Var):
        if t.name == x:
            return frozenset()
        return frozenset(env[t.name])
    if isinstance(t, Rel):
        return frozenset(catalog[t.name])
    if isinstance(t, (Union, Join, AntiJoin)):
        return _rigid(t.left, x, catalog, env) | _rigid(t.right, x, catalog, env)
    if isinstance(t, Rename):
        return _rigid(t.child, x, catalog, env) | {t.old, t.new}
    if isinstance(t, AntiProject):
        if x not in free_rec_vars(t.child):
            return frozenset()
        return _rigid(t.child, x, catalog, env) | {t.column}
    if isinstance(t, Filter):
        return _rigid(t.child, x, catalog, env) | filt(t.pred)
    if isinstance(t, Fix):
        inner = dict(env)
        # the inner binder's variable is an ordinary relation from x's viewpoint
        inner[t.var] = type_of(t.const, catalog, env)
        if t.var == x:
            rec = _rigid(t.rec, None, catalog, inner)
        else:
            rec = _rigid(t.rec, x, catalog, inner)
        return rec | _rigid(t.const, x, catalog, env)
    raise TypeError(t)


# --------------------------------------------------------------------------
# syntactic restrictions


def restriction_violations(t: Term) -> list:
    """Describe every positivity / linearity / mutual-recursion violation."""
    out = []
    _check(t, out)
    return out


def _check(t, out):
    if isinstance(t, AntiJoin) and free_rec_vars(t.right):
        out.append(f"positivity: recursion variable in right operand of antijoin: {t}")
    if isinstance(t, (Join, AntiJoin)):
        if free_rec_vars(t.left) & free_rec_vars(t.right):
            out.append(f"linearity: both join operands use {sorted(free_rec_vars(t.left) & free_rec_vars(t.right))}: {t}")
    if len(free_rec_vars(t)) > 1:
        out.append(f"mutual recursion: several free variables {sorted(free_rec_vars(t))} in {t}")
    if isinstance(t, Fix):
        if t.var in free_rec_vars(t.const):
            out.append(f"fixpoint variable {t.var} occurs in its constant part")
        if t.var not in free_rec_vars(t.rec):
            out.append(f"fixpoint variable {t.var} does not occur in its recursive part")
        if free_rec_vars(t.rec) - {t.var}:
            out.append(f"mutual recursion: {sorted(free_rec_vars(t.rec) - {t.var})} free in recursive part of {t.var}")
    for c in t.children():
        _check(c, out)


def check_restrictions(t: Term) -> None:
    problems = restriction_violations(t)
    if problems:
        raise RestrictionError("; ".join(problems))


def fresh_names(prefix: str, taken) -> Iterator[str]:
    taken = set(taken)
    for i in itertools.count():
        name = prefix if i == 0 else f"{prefix}{i}"
        if name not in taken:
            taken.add(name)
            yield name
