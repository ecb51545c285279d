"""Set-semantics evaluation of single plans on in-memory relations.

This is the ground truth the rest of the package is checked against, so it is
written plainly: hash joins, semi-naive fixpoints and nothing clever.
"""
from __future__ import annotations

import json
import logging
import random
from collections import defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional

from .errors import ParseError, SchemaError
from .terms import AntiJoin, AntiProject, Filter, Fix, Join, Rel, Rename, Term, Union, Var

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Relation:
    columns: tuple
    rows: frozenset

    @classmethod
    def make(cls, columns, rows) -> "Relation":
        """Build from rows given in the order of ``columns`` (any order)."""
        columns = tuple(columns)
        order = sorted(range(len(columns)), key=lambda i: columns[i])
        sorted_cols = tuple(columns[i] for i in order)
        if len(set(sorted_cols)) != len(sorted_cols):
            raise SchemaError(f"duplicate columns {columns}")
        return cls(sorted_cols, frozenset(tuple(r[i] for i in order) for r in rows))

    @classmethod
    def empty(cls, columns) -> "Relation":
        return cls(tuple(sorted(columns)), frozenset())

    @property
    def schema(self) -> frozenset:
        return frozenset(self.columns)

    def __len__(self):
        return len(self.rows)

    def dicts(self):
        for r in self.rows:
            yield dict(zip(self.columns, r))

    def to_tsv(self) -> str:
        lines = ["\t".join(self.columns)]
        lines += ["\t".join(r) for r in sorted(self.rows)]
        return "\n".join(lines) + "\n"


@dataclass
class Database:
    relations: dict = field(default_factory=dict)
    stats: Optional[dict] = None

    def catalog(self) -> dict:
        return {name: rel.schema for name, rel in self.relations.items()}

    def __getitem__(self, name) -> Relation:
        return self.relations[name]

    def domain(self) -> list:
        vals = set()
        for rel in self.relations.values():
            for r in rel.rows:
                vals.update(r)
        return sorted(vals)

    def compute_stats(self) -> dict:
        rels = {}
        for name in sorted(self.relations):
            rel = self.relations[name]
            distinct = {c: len({r[i] for r in rel.rows}) for i, c in enumerate(rel.columns)}
            rels[name] = {"rows": len(rel), "distinct": distinct}
        self.stats = {"schema_version": 1, "domain": len(self.domain()), "relations": rels}
        return self.stats


# --------------------------------------------------------------------------
# operators


def _project_index(columns, wanted):
    return [columns.index(c) for c in wanted]


def rename(rel: Relation, old: str, new: str) -> Relation:
    if old not in rel.columns or new in rel.columns:
        raise SchemaError(f"bad rename {old}->{new} over {rel.columns}")
    cols = tuple(new if c == old else c for c in rel.columns)
    return Relation.make(cols, rel.rows)


def antiproject(rel: Relation, col: str) -> Relation:
    if col not in rel.columns:
        raise SchemaError(f"antiprojected column {col!r} absent")
    keep = [i for i, c in enumerate(rel.columns) if c != col]
    return Relation(tuple(rel.columns[i] for i in keep), frozenset(tuple(r[i] for i in keep) for r in rel.rows))


def select(rel: Relation, pred) -> Relation:
    missing = pred.columns - rel.schema
    if missing:
        raise SchemaError(f"filter reads absent columns {sorted(missing)}")
    cols = rel.columns
    return Relation(cols, frozenset(r for r in rel.rows if pred(dict(zip(cols, r)))))


def join(left: Relation, right: Relation) -> Relation:
    shared = [c for c in left.columns if c in right.schema]
    li = _project_index(left.columns, shared)
    ri = _project_index(right.columns, shared)
    extra = [i for i, c in enumerate(right.columns) if c not in left.schema]
    cols = left.columns + tuple(right.columns[i] for i in extra)
    index = defaultdict(list)
    for r in right.rows:
        index[tuple(r[i] for i in ri)].append(tuple(r[i] for i in extra))
    rows = []
    for l in left.rows:
        for tail in index.get(tuple(l[i] for i in li), ()):
            rows.append(l + tail)
    return Relation.make(cols, rows)


def antijoin(left: Relation, right: Relation) -> Relation:
    if not right.schema <= left.schema:
        raise SchemaError(f"antijoin right schema {right.columns} not within {left.columns}")
    li = _project_index(left.columns, right.columns)
    return Relation(left.columns, frozenset(l for l in left.rows if tuple(l[i] for i in li) not in right.rows))


def union(left: Relation, right: Relation) -> Relation:
    if left.columns != right.columns:
        raise SchemaError(f"union of {left.columns} and {right.columns}")
    return Relation(left.columns, left.rows | right.rows)


# --------------------------------------------------------------------------
# evaluation


def evaluate(t: Term, db: Database, env: Optional[Mapping[str, Relation]] = None, naive: bool = False) -> Relation:
    """Evaluate ``t``; ``env`` binds free recursion variables."""
    return _eval(t, db, dict(env or {}), naive)


def _eval(t, db, env, naive):
    if isinstance(t, Rel):
        try:
            return db.relations[t.name]
        except KeyError:
            raise SchemaError(f"unknown relation {t.name!r}") from None
    if isinstance(t, Var):
        try:
            return env[t.name]
        except KeyError:
            raise SchemaError(f"unbound recursion variable {t.name!r}") from None
    if isinstance(t, Filter):
        return select(_eval(t.child, db, env, naive), t.pred)
    if isinstance(t, Rename):
        return rename(_eval(t.child, db, env, naive), t.old, t.new)
    if isinstance(t, AntiProject):
        return antiproject(_eval(t.child, db, env, naive), t.column)
    if isinstance(t, Join):
        return join(_eval(t.left, db, env, naive), _eval(t.right, db, env, naive))
    if isinstance(t, AntiJoin):
        return antijoin(_eval(t.left, db, env, naive), _eval(t.right, db, env, naive))
    if isinstance(t, Union):
        return union(_eval(t.left, db, env, naive), _eval(t.right, db, env, naive))
    if isinstance(t, Fix):
        const = _eval(t.const, db, env, naive)
        return (_naive_fix if naive else _seminaive_fix)(t, const, db, env)
    raise TypeError(t)


def _seminaive_fix(t, const, db, env):
    # linearity makes the recursive part distribute over unions of X
    total = set(const.rows)
    delta = const
    inner = dict(env)
    while delta.rows:
        inner[t.var] = delta
        step = _eval(t.rec, db, inner, False)
        if step.columns != const.columns:
            raise SchemaError(f"fixpoint parts disagree: {const.columns} vs {step.columns}")
        new = step.rows - total
        total |= new
        delta = Relation(const.columns, frozenset(new))
    return Relation(const.columns, frozenset(total))


def _naive_fix(t, const, db, env):
    current = const
    inner = dict(env)
    while True:
        inner[t.var] = current
        step = _eval(t.rec, db, inner, True)
        nxt = Relation(const.columns, const.rows | step.rows)
        if nxt == current:
            return current
        current = nxt


# --------------------------------------------------------------------------
# oracles and random data


def bfs_closure(edges) -> set:
    """Pairs (a, b) with a non-empty path from a to b."""
    succ = defaultdict(set)
    for a, b in edges:
        succ[a].add(b)
    out = set()
    for start in list(succ):
        seen = set()
        queue = deque(succ[start])
        while queue:
            n = queue.popleft()
            if n in seen:
                continue
            seen.add(n)
            queue.extend(succ.get(n, ()))
        out.update((start, n) for n in seen)
    return out


def random_database(catalog, rng: random.Random, nodes: int = 8, rows: int = 12, constants=()) -> Database:
    """Random relations over a small shared domain that includes ``constants``."""
    domain = sorted(set(f"n{i}" for i in range(nodes)) | set(constants))
    rels = {}
    for name in sorted(catalog):
        cols = tuple(sorted(catalog[name]))
        n = rng.randint(0, rows)
        rels[name] = Relation(cols, frozenset(tuple(rng.choice(domain) for _ in cols) for _ in range(n)))
    return Database(rels)


def random_relation(schema, db: Database, rng: random.Random, rows: int = 6) -> Relation:
    domain = db.domain() or ["n0"]
    cols = tuple(sorted(schema))
    n = rng.randint(0, rows)
    return Relation(cols, frozenset(tuple(rng.choice(domain) for _ in cols) for _ in range(n)))


# --------------------------------------------------------------------------
# ingestion


def load_edges(path, stats_path=None) -> Database:
    """Read ``source<TAB>label<TAB>target`` lines into one relation per label."""
    path = Path(path)
    by_label = defaultdict(set)
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3 or not all(parts):
                raise ParseError(f"expected source<TAB>label<TAB>target in {path.name}", line=lineno)
            src, label, dst = parts
            by_label[label].add((src, dst))
    if not by_label:
        log.warning("%s holds no edges", path)
    db = Database({label: Relation(("s", "t"), frozenset(rows)) for label, rows in sorted(by_label.items())})
    if stats_path is not None and Path(stats_path).exists():
        db.stats = load_stats(stats_path)
    else:
        db.compute_stats()
    return db


def load_stats(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        stats = json.load(fh)
    if "relations" not in stats:
        raise ParseError(f"stats file {path} lacks a 'relations' entry")
    return stats


def save_stats(db: Database, path) -> None:
    stats = db.stats or db.compute_stats()
    Path(path).write_text(json.dumps(stats, indent=1, sort_keys=True) + "\n", encoding="utf-8")
