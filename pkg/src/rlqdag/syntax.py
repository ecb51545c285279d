"""Round-trippable S-expression form of terms.

    (fix X (rel isLocIn) (antiproject m (join (rename t m (rel isLocIn)) (rename s m (var X)))))

Filter predicates: ``(= col "lit")``, ``(!= col "lit")``, ``(= a b)`` for a
column-column equality and ``(and p1 p2 ...)``.
"""
from __future__ import annotations

import json
import re

from .errors import ParseError
from .terms import (
    And, AntiJoin, AntiProject, ColEq, Eq, Filter, Fix, Join, Neq, Rel, Rename, Term, Union, Var,
)

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_'.:-]*\Z")


def print_pred(p) -> str:
    if isinstance(p, Eq):
        return f"(= {p.column} {json.dumps(p.value)})"
    if isinstance(p, Neq):
        return f"(!= {p.column} {json.dumps(p.value)})"
    if isinstance(p, ColEq):
        return f"(= {p.left} {p.right})"
    if isinstance(p, And):
        return "(and " + " ".join(print_pred(q) for q in p.parts) + ")"
    raise TypeError(p)


def print_term(t: Term) -> str:
    parts = []
    _emit(t, parts)
    return "".join(parts)


def _emit(t, out):
    # explicit stack keeps very deep terms from hitting the recursion limit
    stack = [t]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            out.append(item)
            continue
        if isinstance(item, Rel):
            out.append(f"(rel {item.name})")
        elif isinstance(item, Var):
            out.append(f"(var {item.name})")
        elif isinstance(item, Filter):
            stack += [")", item.child, f"(filter {print_pred(item.pred)} "]
        elif isinstance(item, Rename):
            stack += [")", item.child, f"(rename {item.old} {item.new} "]
        elif isinstance(item, AntiProject):
            stack += [")", item.child, f"(antiproject {item.column} "]
        elif isinstance(item, (Join, AntiJoin, Union)):
            head = {Join: "join", AntiJoin: "antijoin", Union: "union"}[type(item)]
            stack += [")", item.right, " ", item.left, f"({head} "]
        elif isinstance(item, Fix):
            stack += [")", item.rec, " ", item.const, f"(fix {item.var} "]
        else:
            raise TypeError(item)


# --------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r'\s*(?:(\()|(\))|("(?:[^"\\]|\\.)*")|([^\s()"]+))')


def _tokenize(text):
    pos = 0
    toks = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            rest = text[pos:]
            if rest.strip() == "":
                break
            at = pos + len(rest) - len(rest.lstrip())
            if text[at] == '"':
                raise ParseError("unterminated string", position=at)
            raise ParseError(f"unexpected character {text[at]!r}", position=at)
        start = m.start(m.lastindex)
        if m.group(1):
            toks.append(("(", "(", start))
        elif m.group(2):
            toks.append((")", ")", start))
        elif m.group(3):
            toks.append(("str", json.loads(m.group(3)), start))
        else:
            toks.append(("atom", m.group(4), start))
        pos = m.end()
    return toks


def _read(toks):
    """Tokens to nested lists; atoms stay (kind, value, pos) triples."""
    stack = [[]]
    opens = []
    for tok in toks:
        if tok[0] == "(":
            stack.append([])
            opens.append(tok[2])
        elif tok[0] == ")":
            if len(stack) == 1:
                raise ParseError("unbalanced ')'", position=tok[2])
            done = stack.pop()
            done_pos = opens.pop()
            stack[-1].append((done, done_pos))
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise ParseError("missing ')'", position=opens[-1])
    return stack[0]


def _atom(node, what):
    if isinstance(node, tuple) and len(node) == 3 and node[0] == "atom":
        return node[1]
    raise ParseError(f"expected {what}", position=_pos(node))


def _pos(node):
    if isinstance(node, tuple):
        return node[-1]
    return None


def _pred(node):
    if not (isinstance(node, tuple) and len(node) == 2 and isinstance(node[0], list)):
        raise ParseError("expected predicate", position=_pos(node))
    items, pos = node
    if not items:
        raise ParseError("empty predicate", position=pos)
    head = _atom(items[0], "predicate operator")
    if head == "and":
        return And(tuple(_pred(p) for p in items[1:]))
    if head in ("=", "!=") and len(items) == 3:
        col = _atom(items[1], "column")
        rhs = items[2]
        if rhs[0] == "str":
            return Eq(col, rhs[1]) if head == "=" else Neq(col, rhs[1])
        if head == "=":
            return ColEq(col, _atom(rhs, "column"))
    raise ParseError(f"bad predicate {head!r}", position=pos)


def _term(node):
    if not (isinstance(node, tuple) and len(node) == 2 and isinstance(node[0], list)):
        raise ParseError("expected '('", position=_pos(node))
    items, pos = node
    if not items:
        raise ParseError("empty form", position=pos)
    head = _atom(items[0], "operator")
    args = items[1:]

    def arity(n):
        if len(args) != n:
            raise ParseError(f"{head} takes {n} arguments, got {len(args)}", position=pos)

    if head == "rel":
        arity(1)
        return Rel(_atom(args[0], "relation name"))
    if head == "var":
        arity(1)
        return Var(_atom(args[0], "variable"))
    if head == "filter":
        arity(2)
        return Filter(_pred(args[0]), _term(args[1]))
    if head == "rename":
        arity(3)
        return Rename(_atom(args[0], "column"), _atom(args[1], "column"), _term(args[2]))
    if head == "antiproject":
        arity(2)
        return AntiProject(_atom(args[0], "column"), _term(args[1]))
    if head in ("join", "antijoin", "union"):
        arity(2)
        cls = {"join": Join, "antijoin": AntiJoin, "union": Union}[head]
        return cls(_term(args[0]), _term(args[1]))
    if head == "fix":
        arity(3)
        return Fix(_atom(args[0], "variable"), _term(args[1]), _term(args[2]))
    raise ParseError(f"unknown operator {head!r}", position=_pos(items[0]))


def parse_term(text: str) -> Term:
    forms = _read(_tokenize(text))
    if len(forms) != 1:
        raise ParseError(f"expected exactly one term, found {len(forms)}", position=0)
    return _term(forms[0])
