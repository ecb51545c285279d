"""Grouped rewrite rules and the expansion driver.

A rule looks at one operation node of one class and unifies the rewritten
operation nodes into that same class.  Because operands are whole classes, a
single firing covers every combination of the plans below it.

Fixpoint rules: ``pf`` (filter), ``pa`` (antijoin), ``pj`` (join), ``mf``
(merge two fixpoints), ``pp`` (antiprojection) and ``rev`` (flip the direction
of a binary closure).  Classical rules: ``jcomm``, ``ucomm``, ``jassoc``,
``pfjoin``, ``pajoin`` and ``dju``.
"""
from __future__ import annotations

import logging
import time
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Optional

from .dag import Dag, children
from .terms import filt

log = logging.getLogger(__name__)

FIX_RULES = ("pf", "pa", "pj", "mf", "pp", "rev")
CODD_RULES = ("jcomm", "ucomm", "jassoc", "pfjoin", "pajoin", "dju")
ALL_RULES = FIX_RULES + CODD_RULES


def parse_rules(text: str) -> frozenset:
    """``"all"``, ``"codd"``, ``"fix"`` or a comma list of rule names."""
    out = set()
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        if part == "all":
            out.update(ALL_RULES)
        elif part == "codd":
            out.update(CODD_RULES)
        elif part == "fix":
            out.update(FIX_RULES)
        elif part in ALL_RULES:
            out.add(part)
        else:
            raise ValueError(f"unknown rule {part!r}; known: {', '.join(ALL_RULES)}")
    return frozenset(out)


@dataclass
class ExpansionConfig:
    budget_ms: Optional[float] = None  # None means unlimited
    rep: bool = False
    rules: frozenset = frozenset(ALL_RULES)
    max_nodes: int = 2_000_000
    trace: bool = False

    def __post_init__(self):
        if self.budget_ms is not None and self.budget_ms < 0:
            raise ValueError("budget must be non-negative")
        self.rules = frozenset(self.rules)


@dataclass
class ExpansionResult:
    root: int
    complete: bool
    elapsed: float
    passes: int
    firings: Counter = field(default_factory=Counter)


# --------------------------------------------------------------------------
# rule context


class _Ctx:
    def __init__(self, dag: Dag, trace: bool):
        self.dag = dag
        self.trace = trace
        self.firings = Counter()

    def emit(self, rule, cls, key, why="") -> bool:
        changed = self.dag.add_member(cls, key)
        if changed:
            self.firings[rule] += 1
            if self.trace:
                line = f"{rule} class={self.dag.find(cls)} {why}".rstrip()
                self.dag.trace.append(line)
                log.debug(line)
        return changed


def _fixes(dag, cls):
    return [k for k in dag.members[dag.find(cls)] if k[0] == "fix"]


def _ann(dag, rec):
    return dag.annotate(rec)


def _s(cols) -> str:
    return "{" + ",".join(sorted(cols)) + "}"


# --------------------------------------------------------------------------
# criteria, shared with the completeness scans


def filter_pushable(dag, pred, fix) -> bool:
    destab, _ = _ann(dag, fix[2])
    return not (filt(pred) & destab)


def antiproject_pushable(dag, col, fix) -> bool:
    _, rigid = _ann(dag, fix[2])
    return col not in rigid


def join_pushable(dag, beta, fix) -> bool:
    destab, rigid = _ann(dag, fix[2])
    tb = dag.types[dag.find(beta)]
    tc = dag.types[dag.find(fix[1])]
    return not (tb & destab) and not ((tb - tc) & rigid)


def antijoin_pushable(dag, beta, fix) -> bool:
    destab, _ = _ann(dag, fix[2])
    return not (dag.types[dag.find(beta)] & destab)


def mergeable(dag, f1, f2) -> bool:
    d1, r1 = _ann(dag, f1[2])
    d2, r2 = _ann(dag, f2[2])
    t1 = dag.types[dag.find(f1[1])]
    t2 = dag.types[dag.find(f2[1])]
    return not ((t1 & t2) & (d1 | d2)) and not ((t1 - t2) & r2) and not ((t2 - t1) & r1)


# --------------------------------------------------------------------------
# fixpoint rules


def _pf(ctx, cls, key):
    if key[0] != "filter":
        return False
    dag = ctx.dag
    pred, child = key[1], key[2]
    changed = False
    for fx in _fixes(dag, child):
        if not filter_pushable(dag, pred, fx):
            continue
        const = dag.add(("filter", pred, fx[1]))
        changed |= ctx.emit("pf", cls, ("fix", const, fx[2]), f"filt={_s(filt(pred))} D={_s(_ann(dag, fx[2])[0])}")
    return changed


def _pp(ctx, cls, key):
    if key[0] != "antiproject":
        return False
    dag = ctx.dag
    col, child = key[1], key[2]
    changed = False
    for fx in _fixes(dag, child):
        if not antiproject_pushable(dag, col, fx):
            continue
        const = dag.add(("antiproject", col, fx[1]))
        rec = dag.retype(fx[2], dag.types[const])
        dag.annotate(rec)
        changed |= ctx.emit("pp", cls, ("fix", const, rec), f"a={col} R={_s(_ann(dag, fx[2])[1])}")
    return changed


def _pj(ctx, cls, key):
    if key[0] != "join":
        return False
    dag = ctx.dag
    beta, child = key[1], key[2]
    changed = False
    for fx in _fixes(dag, child):
        if not join_pushable(dag, beta, fx):
            continue
        const = dag.add(("join", beta, fx[1]))
        rec = dag.retype(fx[2], dag.types[const])
        dag.annotate(rec)
        if ctx.emit("pj", cls, ("fix", const, rec), f"type(beta)={_s(dag.types[dag.find(beta)])}"):
            dag.record_binder(cls, fx[1])
            changed = True
    return changed


def _mf(ctx, cls, key):
    if key[0] != "join":
        return False
    dag = ctx.dag
    changed = False
    for f1 in _fixes(dag, key[1]):
        for f2 in _fixes(dag, key[2]):
            if not mergeable(dag, f1, f2):
                continue
            const = dag.add(("join", f1[1], f2[1]))
            t = dag.types[const]
            r1 = dag.retype(f1[2], t)
            r2 = dag.retype(f2[2], t)
            dag.annotate(r1)
            dag.annotate(r2)
            rec = dag.add(("union", r1, r2))
            dag.annotate(rec)
            if ctx.emit("mf", cls, ("fix", const, rec)):
                dag.record_binder(cls, f1[1])
                dag.record_binder(cls, f2[1])
                changed = True
    return changed


def _pa(ctx, cls, key):
    if key[0] != "antijoin":
        return False
    dag = ctx.dag
    child, beta = key[1], key[2]
    changed = False
    for fx in _fixes(dag, child):
        if not antijoin_pushable(dag, beta, fx):
            continue
        const = dag.add(("antijoin", fx[1], beta))
        if ctx.emit("pa", cls, ("fix", const, fx[2]), f"type(beta)={_s(dag.types[dag.find(beta)])}"):
            dag.record_binder(cls, fx[1])
            changed = True
    return changed


def reversal_matches(dag, key):
    """(k, u, v, X class) for each closure shape in the recursive part of ``key``.

    The shape is ``antiproject k (join (rename u k const) (rename v k X))`` in
    either join order, with ``{u, v}`` the schema of the constant part.
    """
    const = dag.find(key[1])
    tc = dag.types[const]
    if len(tc) != 2:
        return []
    out = []
    for ap in dag.members[dag.find(key[2])]:
        if ap[0] != "antiproject":
            continue
        k = ap[1]
        for j in dag.members[dag.find(ap[2])]:
            if j[0] != "join":
                continue
            for side_c, side_x in ((j[1], j[2]), (j[2], j[1])):
                for rc in dag.members[dag.find(side_c)]:
                    if rc[0] != "rename" or rc[2] != k or dag.find(rc[3]) != const:
                        continue
                    for rx in dag.members[dag.find(side_x)]:
                        if rx[0] != "rename" or rx[2] != k:
                            continue
                        xcls = dag.find(rx[3])
                        if not any(m[0] == "var" for m in dag.members[xcls]):
                            continue
                        u, v = rc[1], rx[1]
                        if u != v and {u, v} == tc:
                            out.append((k, u, v, xcls))
    return out


def _rev(ctx, cls, key):
    if key[0] != "fix":
        return False
    dag = ctx.dag
    changed = False
    for k, u, v, xcls in reversal_matches(dag, key):
        left = dag.add(("rename", v, k, key[1]))
        right = dag.add(("rename", u, k, xcls))
        rec = dag.add(("antiproject", k, dag.add(("join", left, right))))
        dag.annotate(rec)
        changed |= ctx.emit("rev", cls, ("fix", key[1], rec), f"k={k} {u}<->{v}")
    return changed


# --------------------------------------------------------------------------
# classical rules


def _jcomm(ctx, cls, key):
    if key[0] != "join":
        return False
    return ctx.emit("jcomm", cls, ("join", key[2], key[1]))


def _ucomm(ctx, cls, key):
    if key[0] != "union":
        return False
    return ctx.emit("ucomm", cls, ("union", key[2], key[1]))


def _jassoc(ctx, cls, key):
    if key[0] != "join":
        return False
    dag = ctx.dag
    c = key[2]
    changed = False
    for m in list(dag.members[dag.find(key[1])]):
        if m[0] != "join":
            continue
        a, b = m[1], m[2]
        changed |= ctx.emit("jassoc", cls, ("join", a, dag.add(("join", b, c))))
        changed |= ctx.emit("jassoc", cls, ("join", b, dag.add(("join", a, c))))
    return changed


def _pfjoin(ctx, cls, key):
    if key[0] != "filter":
        return False
    dag = ctx.dag
    pred = key[1]
    cols = filt(pred)
    changed = False
    for m in list(dag.members[dag.find(key[2])]):
        if m[0] != "join":
            continue
        a, b = m[1], m[2]
        in_a = cols <= dag.types[dag.find(a)]
        in_b = cols <= dag.types[dag.find(b)]
        if in_a:
            a = dag.add(("filter", pred, a))
        if in_b:
            b = dag.add(("filter", pred, b))
        if in_a or in_b:
            changed |= ctx.emit("pfjoin", cls, ("join", a, b))
    return changed


def _pajoin(ctx, cls, key):
    if key[0] != "antiproject":
        return False
    dag = ctx.dag
    col = key[1]
    changed = False
    for m in list(dag.members[dag.find(key[2])]):
        if m[0] != "join":
            continue
        a, b = m[1], m[2]
        in_a = col in dag.types[dag.find(a)]
        in_b = col in dag.types[dag.find(b)]
        if in_a and not in_b:
            changed |= ctx.emit("pajoin", cls, ("join", dag.add(("antiproject", col, a)), b))
        elif in_b and not in_a:
            changed |= ctx.emit("pajoin", cls, ("join", a, dag.add(("antiproject", col, b))))
    return changed


def _dju(ctx, cls, key):
    if key[0] != "join":
        return False
    dag = ctx.dag
    a = key[1]
    changed = False
    for m in list(dag.members[dag.find(key[2])]):
        if m[0] != "union":
            continue
        left = dag.add(("join", a, m[1]))
        right = dag.add(("join", a, m[2]))
        changed |= ctx.emit("dju", cls, ("union", left, right))
    return changed


RULE_FUNCS: dict = {
    "pf": _pf, "pa": _pa, "pj": _pj, "mf": _mf, "pp": _pp, "rev": _rev,
    "jcomm": _jcomm, "ucomm": _ucomm, "jassoc": _jassoc, "pfjoin": _pfjoin, "pajoin": _pajoin, "dju": _dju,
}


# --------------------------------------------------------------------------
# single-rule entry points (one step over the members of a class)


def _apply_once(dag: Dag, cls, names) -> int:
    ctx = _Ctx(dag, trace=False)
    cls = dag.find(cls)
    for key in list(dag.members[cls]):
        for name in names:
            RULE_FUNCS[name](ctx, dag.find(cls), dag.canon(key))
    dag.rebuild()
    return dag.find(cls)


def push_filter(dag: Dag, cls, rep: bool = False) -> int:
    out = _apply_once(dag, cls, ("pf",))
    return prune_unpushed(dag, out) if rep else out


def push_join(dag: Dag, cls) -> int:
    return _apply_once(dag, cls, ("pj",))


def merge_fixpoints(dag: Dag, cls) -> int:
    return _apply_once(dag, cls, ("mf",))


def push_antiprojection(dag: Dag, cls, rep: bool = False) -> int:
    out = _apply_once(dag, cls, ("pp",))
    return prune_unpushed(dag, out) if rep else out


def push_antijoin(dag: Dag, cls) -> int:
    return _apply_once(dag, cls, ("pa",))


def reverse_closure(dag: Dag, cls) -> int:
    return _apply_once(dag, cls, ("rev",))


def apply_codd(dag: Dag, cls) -> int:
    return _apply_once(dag, cls, CODD_RULES)


# --------------------------------------------------------------------------
# expansion


def _signature(dag, key, rev: bool):
    """Versions of the classes the enabled rules read when matching ``key``."""
    if key[0] != "fix":
        kids = [dag.find(c) for c in children(key)]
        return tuple(kids) + tuple(dag.version[c] for c in kids)
    if not rev:
        return ()
    # the reversal pattern: antiproject -> join -> rename -> X
    rec = dag.find(key[2])
    sig = [rec, dag.version[rec]]
    for ap in dag.members[rec]:
        if ap[0] != "antiproject":
            continue
        j = dag.find(ap[2])
        sig += (j, dag.version[j])
        for m in dag.members[j]:
            if m[0] != "join":
                continue
            for side in (dag.find(m[1]), dag.find(m[2])):
                sig += (side, dag.version[side])
                for rn in dag.members[side]:
                    if rn[0] == "rename":
                        x = dag.find(rn[3])
                        sig += (x, dag.version[x])
    return tuple(sig)


def expand(dag: Dag, root, cfg: Optional[ExpansionConfig] = None) -> ExpansionResult:
    """Saturate ``root`` under the enabled rules, within the budget."""
    cfg = cfg or ExpansionConfig()
    start = time.monotonic()
    deadline = None if cfg.budget_ms is None else start + cfg.budget_ms / 1000.0
    root = dag.unfold(root)
    order = [r for r in ALL_RULES if r in cfg.rules]
    funcs = [RULE_FUNCS[r] for r in order]
    rev = "rev" in cfg.rules
    ctx = _Ctx(dag, cfg.trace)
    done = {}
    complete = True
    passes = 0

    def out_of_budget():
        # leave room for the closing rebuild
        if deadline is not None and time.monotonic() + dag.rebuild_cost * dag.n_nodes() >= deadline:
            return True
        return dag.n_nodes() > cfg.max_nodes

    if deadline is not None and cfg.budget_ms == 0:
        complete = False
    else:
        while True:
            passes += 1
            changed = False
            # classes born during the pass are expanded right after the class
            # that created them, so a budgeted run saturates small sub-plans early
            queue = deque(dag.reachable(root))
            mark = len(dag._parent)
            while queue:
                cls = queue.popleft()
                i = 0
                while True:
                    cls = dag.find(cls)
                    members = dag.members[cls]
                    if i >= len(members):
                        break
                    key = dag.canon(members[i])
                    i += 1
                    sig = _signature(dag, key, rev)
                    if done.get(key) == sig:
                        continue
                    if out_of_budget():
                        complete = False
                        break
                    for f in funcs:
                        if f(ctx, dag.find(cls), key):
                            changed = True
                    done[key] = sig
                if not complete:
                    break
                if len(dag._parent) > mark:
                    born = [c for c in range(mark, len(dag._parent)) if dag.find(c) == c]
                    mark = len(dag._parent)
                    queue.extendleft(reversed(born))
            if complete and dag.sync_retypes():
                changed = True
            dag.rebuild()
            if not complete or not changed:
                break
    root = dag.find(root)
    if cfg.rep:
        root = prune_unpushed(dag, root)
    return ExpansionResult(root, complete, time.monotonic() - start, passes, ctx.firings)


# --------------------------------------------------------------------------
# rep = true: drop unpushed filters and antiprojections over fixpoints


def _pushed_witness(dag, cls, key, fx):
    """Class id of the pushed version of ``key`` over fixpoint ``fx`` if present in ``cls``."""
    if key[0] == "filter":
        if not filter_pushable(dag, key[1], fx):
            return None
        const = dag.lookup(("filter", key[1], fx[1]))
        rec = fx[2]
    elif key[0] == "antiproject":
        if not antiproject_pushable(dag, key[1], fx):
            return None
        const = dag.lookup(("antiproject", key[1], fx[1]))
        if const is None:
            return None
        rec = dag._retypes.get((dag.find(fx[2]), dag.types[const]))
        if rec is None:
            return None
    else:
        return None
    if const is None:
        return None
    hit = dag.lookup(("fix", const, rec))
    return hit if hit is not None and hit == dag.find(cls) else None


def prune_unpushed(dag: Dag, root) -> int:
    """Replace each unpushed filter or antiprojection whose pushed twin exists.

    The operand class is swapped for a view holding its members minus the
    pushable fixpoints; when nothing is left the operation node is dropped.
    """
    views = {}
    for cls in dag.reachable(root):
        new = []
        for key in dag.members[cls]:
            if key[0] not in ("filter", "antiproject"):
                new.append(key)
                continue
            child = dag.find(key[2])
            drop = [m for m in dag.members[child] if m[0] == "fix" and _pushed_witness(dag, cls, key, m) is not None]
            if not drop:
                new.append(key)
                continue
            keep = [m for m in dag.members[child] if m not in drop]
            if not keep:
                continue
            vk = (child, tuple(keep))
            view = views.get(vk)
            if view is None:
                view = dag._new_class(keep[0])
                dag.members[view] = list(keep)
                dag.views.add(view)
                for attr in ("types", "xschema"):
                    getattr(dag, attr)[view] = getattr(dag, attr)[child]
                views[vk] = view
            new.append((key[0], key[1], view))
        if new:
            dag.members[cls] = new
    return dag.find(root)


# --------------------------------------------------------------------------
# completeness scans


def completeness_scan(dag: Dag, root, rules=frozenset(ALL_RULES), rep: bool = False) -> dict:
    """Violations of the five push/merge completeness properties.

    P1 filters, P2 antiprojections, P3 joins, P4 merges, P5 antijoins.  With
    ``rep`` the unpushed forms of P1 and P2 must be gone; otherwise the pushed
    witness must sit in the same class as the unpushed operation node.  A
    property whose rule is disabled is left out of the result.
    """
    out = {"P1": [], "P2": [], "P3": [], "P4": [], "P5": []}
    wanted = {p for p, r in _SCAN_RULES.items() if r in rules}
    for cls in dag.reachable(root):
        for key in dag.members[cls]:
            op = key[0]
            if op == "filter" and "pf" in rules:
                for fx in _fixes(dag, key[2]):
                    if not filter_pushable(dag, key[1], fx):
                        continue
                    if rep:
                        out["P1"].append((cls, key))
                    elif _pushed_witness(dag, cls, key, fx) is None:
                        out["P1"].append((cls, key))
            elif op == "antiproject" and "pp" in rules:
                for fx in _fixes(dag, key[2]):
                    if not antiproject_pushable(dag, key[1], fx):
                        continue
                    if rep or _pushed_witness(dag, cls, key, fx) is None:
                        out["P2"].append((cls, key))
            elif op == "join":
                if "pj" in rules:
                    for fx in _fixes(dag, key[2]):
                        if join_pushable(dag, key[1], fx) and not _has_fix(dag, cls, ("join", key[1], fx[1]), fx[2]):
                            out["P3"].append((cls, key))
                if "mf" in rules and dag.find(key[1]) != dag.find(key[2]):
                    for f1 in _fixes(dag, key[1]):
                        for f2 in _fixes(dag, key[2]):
                            if mergeable(dag, f1, f2) and not _has_merge(dag, cls, f1, f2):
                                out["P4"].append((cls, key))
            elif op == "antijoin" and "pa" in rules:
                for fx in _fixes(dag, key[1]):
                    if antijoin_pushable(dag, key[2], fx):
                        const = dag.lookup(("antijoin", fx[1], key[2]))
                        if const is None or dag.lookup(("fix", const, fx[2])) != cls:
                            out["P5"].append((cls, key))
    return {p: v for p, v in out.items() if p in wanted}


_SCAN_RULES = {"P1": "pf", "P2": "pp", "P3": "pj", "P4": "mf", "P5": "pa"}


def _has_fix(dag, cls, const_key, rec):
    const = dag.lookup(const_key)
    if const is None:
        return False
    rec = dag._retypes.get((dag.find(rec), dag.types[const]), dag.find(rec))
    return dag.lookup(("fix", const, rec)) == dag.find(cls)


def _has_merge(dag, cls, f1, f2):
    const = dag.lookup(("join", f1[1], f2[1]))
    if const is None:
        return False
    t = dag.types[const]
    r1 = dag._retypes.get((dag.find(f1[2]), t), dag.find(f1[2]))
    r2 = dag._retypes.get((dag.find(f2[2]), t), dag.find(f2[2]))
    rec = dag.lookup(("union", r1, r2))
    return rec is not None and dag.lookup(("fix", const, rec)) == dag.find(cls)
