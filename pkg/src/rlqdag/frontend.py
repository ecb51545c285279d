"""Regular-path-style queries translated into initial plans.

Grammar (EBNF)::

    query    = builtin | head "<-" triple { "minus" triple } ;
    builtin  = ( "anbn" "(" label "," label ")" ) | ( "samegen" "(" label ")" ) ;
    head     = variable { "," variable } ;
    triple   = endpoint path endpoint ;
    endpoint = variable | constant | "_" ;
    path     = seq { "|" seq } ;
    seq      = unit { "/" unit } ;
    unit     = atom [ "+" ] ;
    atom     = label | "^" label | "(" path ")" ;
    variable = "?" name ;

Every edge label is a relation with columns ``s`` (source) and ``t``
(target); answers use ``s`` for the subject and ``t`` for the object.

The translation is the unoptimized plan: closures recurse on the right
(``X(s,t) <- C(s,m), X(m,t)``), constants are filters over the whole path and
``/`` joins the target of one step with the source of the next through a
fresh column that is antiprojected at the end.
"""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from importlib import resources

from .errors import ParseError
from .syntax import parse_term, print_term  # noqa: F401  (re-exported)
from .terms import (
    CANONICAL_VAR, AntiJoin, AntiProject, ColEq, Eq, Filter, Fix, Join, Rel, Rename, Term, Union, Var,
    check_restrictions, subterms,
)

# --------------------------------------------------------------------------
# path syntax tree


@dataclass(frozen=True)
class Label:
    name: str


@dataclass(frozen=True)
class Inverse:
    name: str


@dataclass(frozen=True)
class RecRef:
    """The recursion variable inside a builtin's body."""


@dataclass(frozen=True)
class Plus:
    body: object


@dataclass(frozen=True)
class Seq:
    parts: tuple


@dataclass(frozen=True)
class Alt:
    parts: tuple


@dataclass(frozen=True)
class Endpoint:
    kind: str  # "var", "const" or "any"
    value: str = ""


@dataclass(frozen=True)
class Triple:
    subject: Endpoint
    path: object
    object: Endpoint


# --------------------------------------------------------------------------
# tokenizer and parser

_TOKEN = re.compile(
    r"""\s*(?:
        (?P<arrow><-)
      | (?P<punct>[(),|/+^])
      | (?P<var>\?[A-Za-z_][A-Za-z0-9_]*)
      | (?P<str>"[^"]*")
      | (?P<name>[A-Za-z0-9_][A-Za-z0-9_.:'-]*)
    )""",
    re.VERBOSE,
)


def _tokenize(text):
    toks = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", position=pos)
        kind = m.lastgroup
        val = m.group(kind)
        start = m.start(kind)
        if kind == "str":
            kind, val = "name", val[1:-1]
        elif kind == "punct" or kind == "arrow":
            kind = val
        toks.append((kind, val, start))
        pos = m.end()
    toks.append(("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, k=0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def take(self, kind=None, what=None):
        tok = self.peek()
        if kind is not None and tok[0] != kind:
            raise ParseError(f"expected {what or kind!r}, found {tok[1] or 'end of input'!r}", position=tok[2])
        self.i += 1
        return tok

    def at(self, kind, value=None):
        tok = self.peek()
        return tok[0] == kind and (value is None or tok[1] == value)

    def query(self):
        if self.at("name") and self.peek(1)[0] == "(" and self.peek()[1] in BUILTINS:
            q = self.builtin()
            self.take("eof", "end of input")
            return q
        head = [self.take("var", "?variable")[1]]
        while self.at(","):
            self.take(",")
            head.append(self.take("var", "?variable")[1])
        self.take("<-", "<-")
        main = self.triple()
        minus = []
        while self.at("name", "minus"):
            self.take()
            minus.append(self.triple())
        self.take("eof", "end of input")
        return head, main, minus

    def builtin(self):
        _, name, pos = self.take("name")
        self.take("(")
        args = [self.take("name", "label")[1]]
        while self.at(","):
            self.take(",")
            args.append(self.take("name", "label")[1])
        self.take(")", ")")
        arity = BUILTINS[name][0]
        if len(args) != arity:
            raise ParseError(f"{name} takes {arity} labels, got {len(args)}", position=pos)
        return ("builtin", name, tuple(args))

    def endpoint(self):
        tok = self.peek()
        if tok[0] == "var":
            self.take()
            return Endpoint("var", tok[1])
        if tok[0] == "name" and tok[1] == "_":
            self.take()
            return Endpoint("any")
        if tok[0] == "name":
            self.take()
            return Endpoint("const", tok[1])
        raise ParseError(f"expected an endpoint, found {tok[1] or 'end of input'!r}", position=tok[2])

    def triple(self):
        s = self.endpoint()
        p = self.path()
        o = self.endpoint()
        return Triple(s, p, o)

    def path(self):
        parts = [self.seq()]
        while self.at("|"):
            self.take()
            parts.append(self.seq())
        return parts[0] if len(parts) == 1 else Alt(tuple(parts))

    def seq(self):
        parts = [self.unit()]
        while self.at("/"):
            self.take()
            parts.append(self.unit())
        return parts[0] if len(parts) == 1 else Seq(tuple(parts))

    def unit(self):
        a = self.atom()
        if self.at("+"):
            self.take()
            return Plus(a)
        return a

    def atom(self):
        tok = self.peek()
        if tok[0] == "(":
            self.take()
            p = self.path()
            self.take(")", ")")
            return p
        if tok[0] == "^":
            self.take()
            return Inverse(self.take("name", "label")[1])
        if tok[0] == "name" and tok[1] != "_":
            self.take()
            return Label(tok[1])
        raise ParseError(f"expected a label, found {tok[1] or 'end of input'!r}", position=tok[2])


# --------------------------------------------------------------------------
# translation


class _Fresh:
    def __init__(self, taken=()):
        self.taken = set(taken)
        self.counter = itertools.count()

    def __call__(self):
        while True:
            i = next(self.counter)
            name = "m" if i == 0 else f"m{i}"
            if name not in self.taken:
                self.taken.add(name)
                return name


def rename_columns(t: Term, mapping: dict, taken=()) -> Term:
    """Apply simultaneous renames ``old -> new`` with renames, dodging clashes."""
    pending = [(a, b) for a, b in sorted(mapping.items()) if a != b]
    cols = set(mapping) | set(taken)
    tmp = itertools.count()
    while pending:
        progressed = False
        for i, (a, b) in enumerate(pending):
            if not any(b == other for other, _ in pending):
                t = Rename(a, b, t)
                pending.pop(i)
                progressed = True
                break
        if not progressed:
            # a cycle such as s<->t: park one column on a temporary name
            a, b = pending.pop(0)
            while True:
                name = f"tmp{next(tmp)}"
                if name not in cols and name not in mapping.values():
                    break
            t = Rename(a, name, t)
            pending.append((name, b))
    return t


def translate_path(p, a: str, b: str, fresh: _Fresh) -> Term:
    if isinstance(p, Label):
        return rename_columns(Rel(p.name), {"s": a, "t": b})
    if isinstance(p, Inverse):
        return rename_columns(Rel(p.name), {"s": b, "t": a})
    if isinstance(p, RecRef):
        return rename_columns(Var(CANONICAL_VAR), {"s": a, "t": b})
    if isinstance(p, Alt):
        terms = [translate_path(q, a, b, fresh) for q in p.parts]
        out = terms[0]
        for q in terms[1:]:
            out = Union(out, q)
        return out
    if isinstance(p, Seq):
        mids = [fresh() for _ in p.parts[:-1]]
        ends = [a] + mids + [b]
        out = None
        for i, q in enumerate(p.parts):
            piece = translate_path(q, ends[i], ends[i + 1], fresh)
            out = piece if out is None else Join(out, piece)
        for m in mids:
            out = AntiProject(m, out)
        return out
    if isinstance(p, Plus):
        c = translate_path(p.body, a, b, fresh)
        k = fresh()
        rec = AntiProject(k, Join(Rename(b, k, c), Rename(a, k, Var(CANONICAL_VAR))))
        return Fix(CANONICAL_VAR, c, rec)
    raise TypeError(p)


def _direct(p) -> bool:
    return isinstance(p, Label) or (isinstance(p, Plus) and isinstance(p.body, Label))


def translate_query(head, main: Triple, minus=()) -> Term:
    direct = _direct(main.path) and main.subject != main.object
    cs, ct = ("s", "t") if direct else ("x", "y")
    fresh = _Fresh({cs, ct, "s", "t", "x", "y"})
    body = translate_path(main.path, cs, ct, fresh)
    if main.subject.kind == "var" and main.subject == main.object:
        body = Filter(ColEq(cs, ct), body)
        varcols = {main.subject.value: cs}
        hidden = [ct]
    else:
        constant_cols = [(c, ep) for c, ep in ((cs, main.subject), (ct, main.object)) if ep.kind == "const"]
        for col, ep in constant_cols:
            body = Filter(Eq(col, ep.value), body)
        varcols = {}
        hidden = []
        for col, ep in ((cs, main.subject), (ct, main.object)):
            if ep.kind == "var":
                varcols[ep.value] = col
            else:
                hidden.append(col)
    for tr in minus:
        body = AntiJoin(body, _translate_minus(tr, varcols, fresh))
    for v in head:
        if v not in varcols:
            raise ParseError(f"head variable {v} does not occur in the pattern")
    out_name = {cs: "s", ct: "t"}
    for v, col in sorted(varcols.items(), key=lambda kv: kv[1]):
        if v not in head:
            hidden.append(col)
    for col in sorted(set(hidden)):
        body = AntiProject(col, body)
    kept = {col: out_name[col] for v, col in varcols.items() if v in head}
    return rename_columns(body, kept, taken=set(kept))


def _translate_minus(tr: Triple, varcols, fresh):
    cols = []
    for ep in (tr.subject, tr.object):
        if ep.kind == "var":
            if ep.value not in varcols:
                raise ParseError(f"variable {ep.value} of a minus pattern is not bound by the main pattern")
            cols.append(varcols[ep.value])
        else:
            cols.append(fresh())
    term = translate_path(tr.path, cols[0], cols[1], fresh)
    for col, ep in zip(cols, (tr.subject, tr.object)):
        if ep.kind == "const":
            term = Filter(Eq(col, ep.value), term)
    for col, ep in zip(cols, (tr.subject, tr.object)):
        if ep.kind != "var":
            term = AntiProject(col, term)
    return term


# --------------------------------------------------------------------------
# builtins


def anbn(a: str, b: str) -> Term:
    """Pairs joined by a^n b^n paths, n >= 1."""
    fresh = _Fresh({"s", "t"})
    const = translate_path(Seq((Label(a), Label(b))), "s", "t", fresh)
    rec = translate_path(Seq((Label(a), RecRef(), Label(b))), "s", "t", fresh)
    return Fix(CANONICAL_VAR, const, rec)


def samegen(p: str) -> Term:
    """Pairs of nodes at the same depth below a common ancestor along ``p``."""
    fresh = _Fresh({"s", "t"})
    const = translate_path(Seq((Inverse(p), Label(p))), "s", "t", fresh)
    rec = translate_path(Seq((Inverse(p), RecRef(), Label(p))), "s", "t", fresh)
    return Fix(CANONICAL_VAR, const, rec)


BUILTINS = {"anbn": (2, anbn), "samegen": (1, samegen)}


# --------------------------------------------------------------------------
# public entry points


def parse_query(text: str) -> Term:
    parsed = _Parser(text).query()
    if parsed[0] == "builtin":
        _, name, args = parsed
        term = BUILTINS[name][1](*args)
    else:
        head, main, minus = parsed
        term = translate_query(head, main, minus)
    check_restrictions(term)
    return term


def query_catalog(term: Term) -> dict:
    """Schema of every relation a translated query mentions (all edge labels)."""
    return {s.name: frozenset(("s", "t")) for s in subterms(term) if isinstance(s, Rel)}


def query_constants(term: Term) -> list:
    out = set()
    for s in subterms(term):
        if isinstance(s, Filter):
            stack = [s.pred]
            while stack:
                p = stack.pop()
                if hasattr(p, "parts"):
                    stack.extend(p.parts)
                elif hasattr(p, "value"):
                    out.add(p.value)
    return sorted(out)


def qr(i: int) -> str:
    """The chain-of-closures family ``a1+/a2+/.../ai+``."""
    if i < 1:
        raise ValueError("i must be at least 1")
    return "?s,?t <- ?s " + "/".join(f"a{j}+" for j in range(1, i + 1)) + " ?t"


_NAMED = re.compile(r"^([A-Za-z][A-Za-z0-9_]*):\s+(.*)$")


def read_queries(text: str) -> list:
    """``(name, query)`` pairs from a query file: one per line, ``#`` comments."""
    out = []
    n = 0
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        n += 1
        m = _NAMED.match(line)
        out.append((m.group(1), m.group(2)) if m else (f"q{n}", line))
    return out


def bundled_queries() -> list:
    text = resources.files("rlqdag.data").joinpath("queries.txt").read_text(encoding="utf-8")
    return read_queries(text)


def bundled_graph_path():
    return resources.files("rlqdag.data").joinpath("desk_graph.tsv")


def bundled_stats_path():
    return resources.files("rlqdag.data").joinpath("desk_stats.json")
