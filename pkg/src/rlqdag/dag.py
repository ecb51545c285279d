"""The RLQDAG store.

Equivalence nodes are classes of a union-find; operation nodes are hashconsed
tuples whose operands are class ids::

    ("rel", name)            ("var", schema)
    ("filter", pred, c)      ("rename", old, new, c)     ("antiproject", col, c)
    ("join", l, r)           ("antijoin", l, r)          ("union", l, r)
    ("fix", const, rec)

Every recursion variable is called ``X``; the ``var`` key carries the schema
the enclosing binder gives it, so a class has a single type even when it
mentions X.  Because each operation node lives in exactly one class, the set
of plans a class denotes is the disjoint union over its members and
``count_plans`` is an exact sum of products.

Classes may also carry ``let`` binders.  Operands written as ``Ref(name)``
resolve through the binders of the class holding the operation; ``unfold``
removes them.  Binders recorded by the rewrite rules are metadata only: the
operation nodes always point to class ids directly.
"""
from __future__ import annotations

import itertools
import json
import random
import time
from dataclasses import dataclass
from typing import Iterator, Optional

from .errors import SchemaError, UnboundReference
from .evaluator import evaluate, random_relation
from .terms import (
    CANONICAL_VAR, AntiJoin, AntiProject, Filter, Fix, Join, Rel, Rename, Term, Union, Var, filt,
    restriction_violations, term_destab, term_rigid,
)
from .syntax import print_pred


@dataclass(frozen=True)
class Ref:
    """Reference operand bound by a ``let`` on an enclosing class."""

    name: str


CHILD_SLOTS = {
    "rel": (),
    "var": (),
    "filter": (2,),
    "rename": (3,),
    "antiproject": (2,),
    "join": (1, 2),
    "antijoin": (1, 2),
    "union": (1, 2),
    "fix": (1, 2),
}


def children(key) -> tuple:
    return tuple(key[i] for i in CHILD_SLOTS[key[0]])


def replace_children(key, kids) -> tuple:
    slots = CHILD_SLOTS[key[0]]
    out = list(key)
    for i, k in zip(slots, kids):
        out[i] = k
    return tuple(out)


@dataclass
class Verdict:
    ok: bool
    message: str = ""
    detail: object = None

    def __bool__(self):
        return self.ok


class Dag:
    def __init__(self, catalog):
        self.catalog = {k: frozenset(v) for k, v in catalog.items()}
        self._parent: list = []
        self.members: dict = {}     # root -> [op key]
        self.types: dict = {}       # root -> schema
        self.xschema: dict = {}     # root -> schema of free X, or None
        self.version: dict = {}
        self.ann: dict = {}         # rec class root -> (destab, rigid)
        self.binders: dict = {}     # root -> [(name, class)]
        self.origins: dict = {}     # root -> [op key] first members of merged classes
        self.views: set = set()
        self._hashcons: dict = {}
        self._dirty = False
        self._let_counter = itertools.count(1)
        self._retypes: dict = {}    # (class, new X schema) -> class
        self._n_nodes = 0
        self.rebuild_cost = 2e-5    # seconds per node, refreshed by rebuild()
        self.trace: list = []

    # ------------------------------------------------------------------
    # union-find

    def find(self, c):
        parent = self._parent
        try:
            root = parent[c]
        except TypeError:  # a Ref to a let binding
            return c
        if root == c:
            return c
        while parent[root] != root:
            root = parent[root]
        while parent[c] != root:
            parent[c], c = root, parent[c]
        return root

    def canon(self, key) -> tuple:
        slots = CHILD_SLOTS[key[0]]
        if not slots:
            return key
        out = list(key)
        for i in slots:
            out[i] = self.find(key[i])
        return tuple(out)

    def classes(self) -> list:
        return [c for c in self.members]

    def n_classes(self) -> int:
        return len(self.members)

    def n_nodes(self) -> int:
        return self._n_nodes

    # ------------------------------------------------------------------
    # typing of operation keys

    def _resolve(self, operand, scope):
        if isinstance(operand, Ref):
            for name, cls in reversed(scope):
                if name == operand.name:
                    return self.find(cls)
            raise UnboundReference(f"unbound reference {operand.name!r}")
        return self.find(operand)

    def op_type(self, key, scope=()):
        op = key[0]
        if op == "rel":
            try:
                return self.catalog[key[1]]
            except KeyError:
                raise SchemaError(f"unknown relation {key[1]!r}") from None
        if op == "var":
            return key[1]
        kids = [self.types[self._resolve(c, scope)] for c in children(key)]
        if op == "filter":
            missing = filt(key[1]) - kids[0]
            if missing:
                raise SchemaError(f"filter reads absent columns {sorted(missing)}")
            return kids[0]
        if op == "rename":
            a, b = key[1], key[2]
            if a not in kids[0] or b in kids[0]:
                raise SchemaError(f"bad rename {a}->{b} over {sorted(kids[0])}")
            return (kids[0] - {a}) | {b}
        if op == "antiproject":
            if key[1] not in kids[0]:
                raise SchemaError(f"antiprojected column {key[1]!r} not in {sorted(kids[0])}")
            return kids[0] - {key[1]}
        if op == "join":
            return kids[0] | kids[1]
        if op == "antijoin":
            if not kids[1] <= kids[0]:
                raise SchemaError(f"antijoin right schema {sorted(kids[1])} not within {sorted(kids[0])}")
            return kids[0]
        if op == "union":
            if kids[0] != kids[1]:
                raise SchemaError(f"union of {sorted(kids[0])} and {sorted(kids[1])}")
            return kids[0]
        if op == "fix":
            if kids[0] != kids[1]:
                raise SchemaError(f"fixpoint parts disagree: {sorted(kids[0])} vs {sorted(kids[1])}")
            rec = self._resolve(key[2], scope)
            if self.xschema[rec] is None:
                raise SchemaError("recursive part does not mention the recursion variable")
            if self.xschema[rec] != kids[0]:
                raise SchemaError("recursion variable schema differs from the constant part")
            return kids[0]
        raise ValueError(f"unknown operator {op!r}")

    def op_xschema(self, key, scope=()):
        op = key[0]
        if op == "var":
            return key[1]
        if op == "fix":
            return self.xschema[self._resolve(key[1], scope)]
        found = None
        for c in children(key):
            xs = self.xschema[self._resolve(c, scope)]
            if xs is not None:
                if found is not None and found != xs:
                    raise SchemaError("two recursion variables with different schemas meet")
                found = xs
        return found

    # ------------------------------------------------------------------
    # construction

    def _new_class(self, key, scope=()):
        cid = len(self._parent)
        self._parent.append(cid)
        self.members[cid] = [key]
        self.origins[cid] = [key]
        self.types[cid] = self.op_type(key, scope)
        self.xschema[cid] = self.op_xschema(key, scope)
        self.version[cid] = 0
        self._n_nodes += 1
        return cid

    def lookup(self, key) -> Optional[int]:
        cls = self._hashcons.get(self.canon(key))
        return None if cls is None else self.find(cls)

    def add(self, key) -> int:
        """Intern an operation node, returning its class."""
        key = self.canon(key)
        hit = self._hashcons.get(key)
        if hit is not None:
            return self.find(hit)
        # type errors surface before anything is stored
        self.op_type(key)
        cid = self._new_class(key)
        self._hashcons[key] = cid
        return cid

    def add_let(self, bindings, key) -> int:
        """A fresh class ``let name = cls ... in [key]`` whose operands may be ``Ref``."""
        bindings = [(n, self.find(c)) for n, c in bindings]
        for name, cls in bindings:
            if self.xschema[cls] is not None:
                raise SchemaError(f"binder {name!r} would capture a free recursion variable")
        cid = self._new_class(self.canon(key), tuple(bindings))
        self.binders[cid] = bindings
        self.views.add(cid)  # scoped keys must never be hashconsed
        return cid

    def add_member(self, cls, key) -> bool:
        """Unify ``key`` into class ``cls``; returns True when something changed."""
        cls = self.find(cls)
        key = self.canon(key)
        hit = self._hashcons.get(key)
        if hit is not None:
            hit = self.find(hit)
            if hit == cls:
                return False
            self.merge(cls, hit)
            return True
        t = self.op_type(key)
        if t != self.types[cls]:
            raise SchemaError(f"member of type {sorted(t)} added to class of type {sorted(self.types[cls])}")
        self.members[cls].append(key)
        self._hashcons[key] = cls
        self.version[cls] += 1
        self._n_nodes += 1
        return True

    def unify_into(self, target, new_members) -> int:
        for key in new_members:
            self.add_member(target, key)
        self.rebuild()
        return self.find(target)

    def merge(self, a, b) -> int:
        a, b = self.find(a), self.find(b)
        if a == b:
            return a
        if self.types[a] != self.types[b]:
            raise SchemaError(f"merging classes of types {sorted(self.types[a])} and {sorted(self.types[b])}")
        if a > b:
            a, b = b, a
        self._parent[b] = a
        self.members[a].extend(self.members.pop(b))
        self.origins[a].extend(self.origins.pop(b))
        if a not in self.ann and b in self.ann:
            self.ann[a] = self.ann[b]
        self.ann.pop(b, None)
        if b in self.binders:
            self.binders.setdefault(a, []).extend(self.binders.pop(b))
        for d in (self.types, self.xschema):
            d.pop(b)
        self.version[a] += self.version.pop(b) + 1
        self._dirty = True
        return a

    def rebuild(self) -> None:
        """Restore canonical keys and congruence after merges."""
        t0 = time.monotonic()
        while True:
            table = {}
            pending = []
            for cls in list(self.members):
                seen = set()
                out = []
                for key in self.members[cls]:
                    k = self.canon(key)
                    if k in seen:
                        continue
                    seen.add(k)
                    out.append(k)
                    if cls in self.views:
                        continue
                    other = table.get(k)
                    if other is not None and other != cls:
                        pending.append((cls, other))
                    else:
                        table[k] = cls
                self.members[cls] = out
                self.origins[cls] = [self.canon(k) for k in self.origins[cls]]
            for a, b in pending:
                self.merge(a, b)
            self._hashcons = {k: self.find(c) for k, c in table.items()}
            self._dirty = False
            if not pending:
                break
        self._n_nodes = sum(len(m) for m in self.members.values())
        if self._n_nodes > 1000:
            self.rebuild_cost = (time.monotonic() - t0) / self._n_nodes
        self._retypes = {(self.find(c), x): self.find(d) for (c, x), d in self._retypes.items()}

    # ------------------------------------------------------------------
    # retyping the recursion variable

    def retype(self, cls, new_x) -> int:
        """Copy of class ``cls`` in which the free X has schema ``new_x``."""
        cls = self.find(cls)
        if self.xschema[cls] is None or self.xschema[cls] == new_x:
            return cls
        memo_key = (cls, new_x)
        hit = self._retypes.get(memo_key)
        if hit is not None:
            return self.find(hit)
        first = None
        for key in list(self.members[cls]):
            nk = self._retype_key(key, new_x)
            if first is None:
                first = self.add(nk)
                self._retypes[memo_key] = first
            else:
                self.add_member(first, nk)
        return self.find(first)

    def _retype_key(self, key, new_x):
        op = key[0]
        if op == "var":
            return ("var", new_x)
        if op == "fix":
            const, rec = key[1], key[2]
            nc = self.retype(const, new_x)
            if self.types[self.find(nc)] != self.types[self.find(const)]:
                rec = self.retype(rec, self.types[self.find(nc)])
            return ("fix", nc, rec)
        kids = [self.retype(c, new_x) if self.xschema[self.find(c)] is not None else c for c in children(key)]
        return replace_children(key, kids)

    def sync_retypes(self) -> bool:
        """Propagate members gained by retyped sources to their copies."""
        changed = False
        for (src, new_x), dst in list(self._retypes.items()):
            src, dst = self.find(src), self.find(dst)
            for key in list(self.members[src]):
                if self.add_member(dst, self._retype_key(key, new_x)):
                    changed = True
        return changed

    # ------------------------------------------------------------------
    # terms <-> classes

    def add_term(self, t: Term, env=None) -> int:
        """Intern every subterm of ``t``; ``env`` maps free variables to schemas."""
        env = dict(env or {})
        return self._add_term(t, env)

    def _add_term(self, t, env):
        if isinstance(t, Rel):
            return self.add(("rel", t.name))
        if isinstance(t, Var):
            if t.name not in env:
                raise SchemaError(f"recursion variable {t.name!r} has no schema")
            return self.add(("var", frozenset(env[t.name])))
        if isinstance(t, Filter):
            return self.add(("filter", t.pred, self._add_term(t.child, env)))
        if isinstance(t, Rename):
            return self.add(("rename", t.old, t.new, self._add_term(t.child, env)))
        if isinstance(t, AntiProject):
            return self.add(("antiproject", t.column, self._add_term(t.child, env)))
        if isinstance(t, (Join, AntiJoin, Union)):
            op = {Join: "join", AntiJoin: "antijoin", Union: "union"}[type(t)]
            return self.add((op, self._add_term(t.left, env), self._add_term(t.right, env)))
        if isinstance(t, Fix):
            c = self._add_term(t.const, env)
            inner = dict(env)
            inner[t.var] = self.types[c]
            r = self._add_term(t.rec, inner)
            cls = self.add(("fix", c, r))
            self.annotate(r)
            return cls
        raise TypeError(t)

    def annotate(self, rec) -> tuple:
        from .annotations import node_destab, node_rigid

        rec = self.find(rec)
        if rec not in self.ann:
            self.ann[rec] = (node_destab(self, rec), node_rigid(self, rec))
        return self.ann[rec]

    def fresh_let_name(self) -> str:
        return f"const{next(self._let_counter)}"

    def record_binder(self, cls, const) -> None:
        cls, const = self.find(cls), self.find(const)
        if self.xschema[const] is not None:
            return
        for _, c in self.binders.get(cls, ()):
            if self.find(c) == const:
                return
        self.binders.setdefault(cls, []).append((self.fresh_let_name(), const))

    # ------------------------------------------------------------------
    # reachability, counting, interpretation

    def reachable(self, root) -> list:
        """Classes reachable from ``root`` in DFS post-order (children first)."""
        root = self.find(root)
        order, seen = [], {root}
        stack = [(root, iter(self._operands(root)))]
        while stack:
            cls, it = stack[-1]
            for child in it:
                if child not in seen:
                    seen.add(child)
                    stack.append((child, iter(self._operands(child))))
                    break
            else:
                stack.pop()
                order.append(cls)
        return order

    def _operands(self, cls):
        scope = tuple(self.binders.get(cls, ()))
        out = []
        for key in self.members[cls]:
            for c in children(key):
                out.append(self._resolve(c, scope))
        for _, c in scope:
            out.append(self.find(c))
        return out

    def count_plans(self, root) -> int:
        counts = {}
        for cls in self.reachable(root):
            scope = tuple(self.binders.get(cls, ()))
            total = 0
            for key in self.members[cls]:
                prod = 1
                for c in children(key):
                    c = self._resolve(c, scope)
                    if c not in counts:
                        raise RuntimeError(f"cycle through class {c}")
                    prod *= counts[c]
                total += prod
            counts[cls] = total
        return counts[self.find(root)]

    def interpret(self, root, limit: Optional[int] = None, env=None):
        """Plans of ``root`` as terms, plus a truncation flag."""
        env = dict(env or {})
        out = []
        gen = self.iter_terms(root, env)
        for t in gen:
            if limit is not None and len(out) >= limit:
                return out, True
            out.append(t)
        return out, False

    def iter_terms(self, cls, env=None) -> Iterator[Term]:
        env = dict(env or {})
        cls = self._resolve(cls, tuple(env.items())) if isinstance(cls, Ref) else self.find(cls)
        scope = tuple(env.items()) + tuple(self.binders.get(cls, ()))
        for key in self.members[cls]:
            yield from self._iter_key(key, scope)

    def _iter_key(self, key, scope):
        op = key[0]
        if op == "rel":
            yield Rel(key[1])
            return
        if op == "var":
            yield Var(CANONICAL_VAR)
            return
        kids = [self._resolve(c, scope) for c in children(key)]
        if len(kids) == 1:
            for a in self.iter_terms(kids[0], dict(scope)):
                yield _build(key, (a,))
            return
        for a in self.iter_terms(kids[0], dict(scope)):
            for b in self.iter_terms(kids[1], dict(scope)):
                yield _build(key, (a, b))

    def first_term(self, cls) -> Term:
        return next(self.iter_terms(cls))

    # ------------------------------------------------------------------
    # binders

    def unfold(self, root) -> int:
        """Binder-free copy of ``root``: every ``Ref`` replaced by its class."""
        memo = {}
        return self._unfold(self.find(root), (), memo)

    def _unfold(self, cls, scope, memo):
        cls = self.find(cls)
        scope = scope + tuple(self.binders.get(cls, ()))
        if not self._mentions_ref(cls, set()):
            return cls
        mk = (cls, scope)
        if mk in memo:
            return memo[mk]
        first = None
        for key in self.members[cls]:
            kids = [self._unfold(self._resolve(c, scope), scope, memo) for c in children(key)]
            nk = replace_children(key, kids)
            if first is None:
                first = self.add(nk)
            else:
                self.add_member(first, nk)
        self.rebuild()
        memo[mk] = self.find(first)
        return memo[mk]

    def _mentions_ref(self, cls, seen):
        if cls in seen:
            return False
        seen.add(cls)
        if self.binders.get(cls) and cls in self.views:
            return True
        for key in self.members[cls]:
            for c in children(key):
                if isinstance(c, Ref) or self._mentions_ref(self.find(c), seen):
                    return True
        return False

    # ------------------------------------------------------------------
    # validation

    def fix_members(self, cls):
        cls = self.find(cls)
        return [k for k in self.members[cls] if k[0] == "fix"]

    def check_consistency(self, root, samples: int = 20) -> Verdict:
        """Recompute the annotation of every recursive part and compare."""
        from .annotations import node_destab, node_rigid

        for cls in self.reachable(root):
            for key in self.fix_members(cls):
                rec = self.find(key[2])
                stored = self.ann.get(rec)
                if stored is None:
                    return Verdict(False, f"recursive part {rec} carries no annotation", rec)
                xs = self.xschema[rec]
                fresh = (node_destab(self, rec), node_rigid(self, rec))
                if fresh != stored:
                    return Verdict(False, f"class {rec}: stored {_fmt(stored)} recomputed {_fmt(fresh)}", rec)
                env = {CANONICAL_VAR: xs}
                for t in itertools.islice(self.iter_terms(rec), samples):
                    d = term_destab(t)
                    r = term_rigid(t, CANONICAL_VAR, self.catalog, env)
                    if (d, r) != stored:
                        return Verdict(False, f"member {t} of class {rec}: {_fmt((d, r))} vs stored {_fmt(stored)}", (rec, t))
        return Verdict(True)

    def validate_restrictions(self, root, samples: int = 50) -> Verdict:
        for cls in self.reachable(root):
            for name, bound in self.binders.get(cls, ()):
                if self.xschema[self.find(bound)] is not None:
                    return Verdict(False, f"binder {name} captures a free recursion variable", cls)
        for t in itertools.islice(self.iter_terms(root), samples):
            problems = restriction_violations(t)
            if problems:
                return Verdict(False, problems[0], t)
        return Verdict(True)

    def check_well_formed(self, root, dbs, samples: int = 20, rng=None) -> Verdict:
        """Evaluate sampled members of every class on each database and compare."""
        rng = rng or random.Random(0)
        for cls in self.reachable(root):
            n = self.count_plans(cls)
            terms = _sample_terms(self, cls, n, samples, rng)
            if len(terms) < 2:
                continue
            xs = self.xschema[cls]
            for db in dbs:
                env = None
                if xs is not None:
                    env = {CANONICAL_VAR: random_relation(xs, db, rng)}
                ref = evaluate(terms[0], db, env)
                for t in terms[1:]:
                    got = evaluate(t, db, env)
                    if got != ref:
                        return Verdict(False, f"class {cls}: {terms[0]} and {t} differ", (terms[0], t, db))
        return Verdict(True)

    # ------------------------------------------------------------------
    # export

    def to_json(self, root) -> dict:
        nodes = []
        for cls in sorted(self.reachable(root)):
            entry = {
                "id": cls,
                "type": sorted(self.types[cls]),
                "members": [_key_json(k) for k in self.members[cls]],
            }
            if self.binders.get(cls):
                entry["binders"] = [[n, self.find(c)] for n, c in self.binders[cls]]
            if cls in self.ann:
                d, r = self.ann[cls]
                entry["annotation"] = {"destab": sorted(d), "rigid": sorted(r)}
            nodes.append(entry)
        return {"schema_version": 1, "root": self.find(root), "nodes": nodes}

    def dumps(self, root) -> str:
        return json.dumps(self.to_json(root), indent=1, sort_keys=True)

    def to_dot(self, root) -> str:
        lines = ["digraph rlqdag {", "  node [fontname=monospace];"]
        for cls in sorted(self.reachable(root)):
            label = f"{cls} {{{','.join(sorted(self.types[cls]))}}}"
            if cls in self.ann:
                d, r = self.ann[cls]
                label += f"\\nD={{{','.join(sorted(d))}}} R={{{','.join(sorted(r))}}}"
            lines.append(f'  c{cls} [shape=box,label="{label}"];')
            for i, key in enumerate(self.members[cls]):
                op = f"o{cls}_{i}"
                lines.append(f'  {op} [shape=ellipse,label="{_key_label(key)}"];')
                lines.append(f"  c{cls} -> {op};")
                for c in children(key):
                    target = f"c{self.find(c)}" if not isinstance(c, Ref) else f'"{c.name}"'
                    lines.append(f"  {op} -> {target};")
        lines.append("}")
        return "\n".join(lines)


# ----------------------------------------------------------------------
# helpers


def _build(key, kids) -> Term:
    op = key[0]
    if op == "rel":
        return Rel(key[1])
    if op == "var":
        return Var(CANONICAL_VAR)
    if op == "filter":
        return Filter(key[1], kids[0])
    if op == "rename":
        return Rename(key[1], key[2], kids[0])
    if op == "antiproject":
        return AntiProject(key[1], kids[0])
    if op == "join":
        return Join(*kids)
    if op == "antijoin":
        return AntiJoin(*kids)
    if op == "union":
        return Union(*kids)
    if op == "fix":
        return Fix(CANONICAL_VAR, *kids)
    raise ValueError(op)


def _fmt(ann) -> str:
    d, r = ann
    return f"(D={sorted(d)}, R={sorted(r)})"


def _key_label(key) -> str:
    op = key[0]
    if op == "rel":
        return key[1]
    if op == "var":
        return "X:" + ",".join(sorted(key[1]))
    if op == "filter":
        return "filter " + print_pred(key[1]).replace('"', "'")
    if op == "rename":
        return f"rename {key[1]}->{key[2]}"
    if op == "antiproject":
        return f"antiproject {key[1]}"
    return op


def _key_json(key):
    op = key[0]
    if op == "rel":
        return ["rel", key[1]]
    if op == "var":
        return ["var", sorted(key[1])]
    ref = lambda c: {"ref": c.name} if isinstance(c, Ref) else c  # noqa: E731
    if op == "filter":
        return ["filter", print_pred(key[1]), ref(key[2])]
    if op == "rename":
        return ["rename", key[1], key[2], ref(key[3])]
    if op == "antiproject":
        return ["antiproject", key[1], ref(key[2])]
    return [op, ref(key[1]), ref(key[2])]


def _sample_terms(dag, cls, n, samples, rng):
    if n <= samples:
        return list(dag.iter_terms(cls))
    # the first plan is always included; the rest are drawn by random descent
    out = [dag.first_term(cls)]
    seen = {out[0]}
    attempts = 0
    while len(out) < samples and attempts < samples * 10:
        attempts += 1
        t = random_plan(dag, cls, rng)
        if t not in seen:
            seen.add(t)
            out.append(t)
    return out


def random_plan(dag, cls, rng, scope=()) -> Term:
    """One plan of ``cls`` drawn by choosing a random member at each class."""
    cls = dag._resolve(cls, scope) if isinstance(cls, Ref) else dag.find(cls)
    scope = scope + tuple(dag.binders.get(cls, ()))
    key = rng.choice(dag.members[cls])
    op = key[0]
    if op == "rel":
        return Rel(key[1])
    if op == "var":
        return Var(CANONICAL_VAR)
    kids = tuple(random_plan(dag, c, rng, scope) for c in children(key))
    return _build(key, kids)
