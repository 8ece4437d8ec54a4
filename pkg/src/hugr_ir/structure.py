"""Convert CFG nodes into structured conditionals and tail loops.

The algorithm is iterative T1/T2 region folding. Each basic block becomes a
fragment computing ``row -> successor tag + row``; T1 folds a self-loop into
a tail loop (a tag subset means "repeat"), T2 inlines a block into its unique
predecessor behind a conditional dispatch. A reducible graph collapses to a
single fragment whose remaining exits all target the exit block; the fragment
is then materialised in place of the CFG node. Irreducible inputs (a cycle
with more than one entry) are rejected without touching the graph.

Blocks must be row-preserving (inputs equal the passed row) whenever any
dispatch or loop needs to be built, because the payload-free successor tags
force every merged path to carry one common value row. Straight-line CFGs
are inlined without that restriction.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .build import DfBuilder, splice_region
from .graph import Hugr, in_port, out_port
from .ops import BasicBlock, Cfg, Const, ExitBlock, LoadConst, Registry
from .types import BOOL, EnumType, Type


class StructuringError(Exception):
    pass


class IrreducibleCfg(StructuringError):
    """A cycle has more than one entry; node splitting is out of scope."""


class InvalidInput(StructuringError):
    pass


class UnsupportedCfg(StructuringError):
    """Valid but outside the supported shape (non-row-preserving blocks)."""


# ── CFG view ───────────────────────────────────────────────────────

@dataclass
class CfgView:
    """Successor structure of one CFG node, unreachable blocks pruned."""

    blocks: list[int]  # reachable basic blocks, entry first
    entry: int
    exit: int
    succ: dict[int, list[int]]  # tag-ordered successors (exit id included)

    @classmethod
    def of(cls, h: Hugr, cfg: int) -> "CfgView":
        children = h.children(cfg)
        if not children or not isinstance(h.op(children[0]), BasicBlock):
            raise InvalidInput("CFG entry (first child) must be a basic block")
        exits = [c for c in children if isinstance(h.op(c), ExitBlock)]
        if len(exits) != 1:
            raise InvalidInput("CFG must have exactly one exit block")
        entry, exit_ = children[0], exits[0]
        succ: dict[int, list[int]] = {}
        for b in children:
            if isinstance(h.op(b), BasicBlock):
                succ[b] = [h.neighbours(out_port(b, tag))[0].node
                           for tag in range(h.op(b).successor_count)]
        reachable = {entry}
        frontier = [entry]
        while frontier:
            b = frontier.pop()
            for s in succ.get(b, []):
                if s != exit_ and s not in reachable:
                    reachable.add(s)
                    frontier.append(s)
        pruned = [b for b in succ if b not in reachable]
        for b in pruned:
            warnings.warn(f"pruning unreachable block {b}", stacklevel=3)
            del succ[b]
        blocks = [b for b in children if b in reachable]
        return cls(blocks, entry, exit_, succ)


def dominators(view: CfgView) -> dict[int, int]:
    """Immediate dominators; the entry maps to itself."""
    preds: dict[int, list[int]] = {b: [] for b in view.blocks}
    for b, succs in view.succ.items():
        for s in succs:
            if s != view.exit:
                preds[s].append(b)
    # reverse postorder
    order: list[int] = []
    seen: set[int] = set()

    def dfs(b: int) -> None:
        seen.add(b)
        for s in view.succ.get(b, []):
            if s != view.exit and s not in seen:
                dfs(s)
        order.append(b)

    dfs(view.entry)
    rpo = list(reversed(order))
    position = {b: i for i, b in enumerate(rpo)}

    idom: dict[int, int] = {view.entry: view.entry}
    changed = True
    while changed:
        changed = False
        for b in rpo:
            if b == view.entry:
                continue
            candidates = [p for p in preds[b] if p in idom]
            if not candidates:
                continue
            new = candidates[0]
            for p in candidates[1:]:
                new = _intersect(new, p, idom, position)
            if idom.get(b) != new:
                idom[b] = new
                changed = True
    return idom


def _intersect(a: int, b: int, idom: dict[int, int], pos: dict[int, int]) -> int:
    while a != b:
        while pos[a] > pos[b]:
            a = idom[a]
        while pos[b] > pos[a]:
            b = idom[b]
    return a


@dataclass
class LoopCandidate:
    """A natural loop: back edges into a header that dominates the body."""

    header: int
    back_edges: list[tuple[int, int]]
    body: set[int]


def loop_candidates(view: CfgView) -> list[LoopCandidate]:
    idom = dominators(view)

    def dominates(a: int, b: int) -> bool:
        while True:
            if a == b:
                return True
            if b == view.entry:
                return False
            b = idom[b]

    loops: dict[int, LoopCandidate] = {}
    for b, succs in view.succ.items():
        for s in succs:
            if s != view.exit and dominates(s, b):
                cand = loops.setdefault(s, LoopCandidate(s, [], {s}))
                cand.back_edges.append((b, s))
                # walk predecessors from the latch up to the header
                stack = [b]
                while stack:
                    n = stack.pop()
                    if n in cand.body:
                        continue
                    cand.body.add(n)
                    for p, ps in view.succ.items():
                        if n in ps:
                            stack.append(p)
    return [loops[k] for k in sorted(loops)]


def is_reducible(view: CfgView) -> bool:
    """True iff iterative T1/T2 reduction collapses the graph to one node."""
    succ = {b: [s for s in ss] for b, ss in view.succ.items()}
    changed = True
    while changed:
        changed = False
        for b in sorted(succ):
            if b in succ[b]:  # T1
                succ[b] = [s for s in succ[b] if s != b]
                changed = True
        for s in sorted(succ):
            if s == view.entry:
                continue
            preds = {p for p in succ if s in succ[p]}
            if len(preds) == 1:  # T2
                (p,) = preds
                merged: list[int] = []
                for t in succ[p]:
                    if t == s:
                        merged.extend(succ[s])
                    else:
                        merged.append(t)
                # dedup, order-preserving
                succ[p] = list(dict.fromkeys(merged))
                del succ[s]
                changed = True
                break
    return len(succ) == 1


# ── fragments ──────────────────────────────────────────────────────

@dataclass
class _Block:
    block: int
    arity: int


@dataclass
class _Exit:
    tag: int


@dataclass
class _Run:
    frag: "Frag"
    retag: tuple[int, ...]


@dataclass
class _Seq:
    first: "Frag"
    cases: tuple  # per tag of ``first``: _Exit or _Run
    arity: int


@dataclass
class _Loop:
    body: "Frag"
    repeat: frozenset  # tags of ``body`` that continue the loop
    retag: tuple  # per body tag: None (repeat) or the exit tag
    arity: int


Frag = _Block | _Seq | _Loop


@dataclass
class _SuperNode:
    frag: Frag
    succs: list[int]  # block ids; the exit block id marks leaving the CFG


def _reduce(view: CfgView) -> Frag:
    nodes: dict[int, _SuperNode] = {
        b: _SuperNode(_Block(b, len(view.succ[b])), list(view.succ[b]))
        for b in view.succ
    }
    exit_ = view.exit

    def fold_self_loops() -> bool:
        for sid in sorted(nodes):
            sn = nodes[sid]
            repeat = frozenset(j for j, t in enumerate(sn.succs) if t == sid)
            if not repeat:
                continue
            remaining = [t for j, t in enumerate(sn.succs) if j not in repeat]
            targets = list(dict.fromkeys(remaining))
            if not targets:
                raise UnsupportedCfg(f"block {sid} loops forever with no exit")
            retag = []
            for j, t in enumerate(sn.succs):
                retag.append(None if j in repeat else targets.index(t))
            sn.frag = _Loop(sn.frag, repeat, tuple(retag), len(targets))
            sn.succs = targets
            return True
        return False

    def merge_unique_pred() -> bool:
        for sid in sorted(nodes):
            if sid == view.entry:
                continue
            preds = {p for p, pn in nodes.items() if sid in pn.succs}
            if len(preds) != 1 or sid in preds:
                continue
            (pid,) = preds
            p, s = nodes[pid], nodes[sid]
            merged: list[int] = []
            for t in p.succs:
                if t == sid:
                    merged.extend(s.succs)
                else:
                    merged.append(t)
            targets = list(dict.fromkeys(merged))
            cases: list = []
            for t in p.succs:
                if t == sid:
                    cases.append(_Run(s.frag, tuple(targets.index(x) for x in s.succs)))
                else:
                    cases.append(_Exit(targets.index(t)))
            p.frag = _Seq(p.frag, tuple(cases), len(targets))
            p.succs = targets
            del nodes[sid]
            return True
        return False

    while True:
        if fold_self_loops():
            continue
        if merge_unique_pred():
            continue
        break

    if len(nodes) != 1 or set(nodes[view.entry].succs) != {exit_}:
        raise IrreducibleCfg(
            "control flow is irreducible (a cycle with multiple entries)")
    return nodes[view.entry].frag


# ── materialisation ────────────────────────────────────────────────

def _emit(frag: Frag, b: DfBuilder, src: Hugr, wires, row: tuple[Type, ...]):
    """Build ``frag`` into builder ``b``; returns (tag wire, value wires)."""
    if isinstance(frag, _Block):
        outs = splice_region(b, src, frag.block, tuple(wires))
        return outs[0], tuple(outs[1:])

    if isinstance(frag, _Seq):
        tag, vals = _emit(frag.first, b, src, wires, row)
        if frag.first.arity == 1:
            # no dispatch needed: run the single continuation in sequence
            case = frag.cases[0]
            if isinstance(case, _Exit):
                return b.tag_const(case.tag, frag.arity), vals
            t2, vals2 = _emit(case.frag, b, src, vals, row)
            if case.retag == tuple(range(frag.arity)):
                return t2, vals2
            tag, vals = t2, vals2
            remap, cases = b.conditional(tag, vals, (EnumType(frag.arity),) + row)
            for jj, icb in enumerate(cases):
                icb.set_outputs(icb.tag_const(case.retag[jj], frag.arity), *icb.inputs())
            return remap[0], tuple(remap[1:])
        out_row = (EnumType(frag.arity),) + row
        cond_outs, cases = b.conditional(tag, vals, out_row)
        for j, case in enumerate(frag.cases):
            cb = cases[j]
            ins = cb.inputs()
            if isinstance(case, _Exit):
                cb.set_outputs(cb.tag_const(case.tag, frag.arity), *ins)
            else:
                t2, vals2 = _emit(case.frag, cb, src, ins, row)
                inner_outs, inner_cases = cb.conditional(t2, vals2, out_row)
                for jj, icb in enumerate(inner_cases):
                    icb.set_outputs(icb.tag_const(case.retag[jj], frag.arity),
                                    *icb.inputs())
                cb.set_outputs(*inner_outs)
        return cond_outs[0], tuple(cond_outs[1:])

    if isinstance(frag, _Loop):
        seed = b.tag_const(0, frag.arity)
        loop_outs, body = b.tail_loop((seed,) + tuple(wires))
        ins = body.inputs()  # (previous tag, row...); the tag is discarded
        tag, vals = _emit(frag.body, body, src, ins[1:], row)
        out_row = (BOOL, EnumType(frag.arity)) + row
        cond_outs, cases = body.conditional(tag, vals, out_row)
        for j, cb in enumerate(cases):
            cins = cb.inputs()
            if j in frag.repeat:
                cb.set_outputs(cb.bool_const(False), cb.tag_const(0, frag.arity), *cins)
            else:
                cb.set_outputs(cb.bool_const(True),
                               cb.tag_const(frag.retag[j], frag.arity), *cins)
        body.set_outputs(*cond_outs)
        return loop_outs[0], tuple(loop_outs[1:])

    raise AssertionError(frag)


def _sweep_dead_consts(h: Hugr, region: int) -> None:
    changed = True
    while changed:
        changed = False
        for n in list(h.children(region)):
            op = h.op(n)
            if isinstance(op, (LoadConst, Const)):
                nd = h.node(n)
                if all(not edges for edges in nd.out_edges):
                    h.remove_node(n)
                    changed = True


def _needs_dispatch(frag: Frag) -> bool:
    """True when materialising builds a conditional or a loop."""
    if isinstance(frag, _Block):
        return False
    if isinstance(frag, _Loop):
        return True
    if frag.first.arity > 1 or _needs_dispatch(frag.first):
        return True
    case = frag.cases[0]
    if isinstance(case, _Exit):
        return False
    if case.retag != tuple(range(frag.arity)):
        return True
    return _needs_dispatch(case.frag)


def structure_cfg(h: Hugr, cfg: int, registry: Registry) -> Hugr:
    """Replace ``cfg`` in place by an equivalent structured subgraph."""
    from .validate import validate

    op = h.op(cfg)
    if not isinstance(op, Cfg):
        raise InvalidInput(f"node {cfg} is not a CFG")
    inside = set(h.preorder(cfg))
    bad = [d for d in validate(h, registry) if d.node in inside]
    if bad:
        raise InvalidInput(f"CFG does not validate: {bad[0].render()}")

    view = CfgView.of(h, cfg)
    frag = _reduce(view)
    row = op.signature.inputs
    if _needs_dispatch(frag):
        # payload-free successor tags force one common value row at dispatches
        if op.signature.outputs != row:
            raise UnsupportedCfg("branching CFGs must preserve their value row")
        for b in view.succ:
            rows = _block_rows(h, b)
            if rows != (row, row):
                raise UnsupportedCfg(
                    f"block {b} is not row-preserving: {rows[0]} -> {rows[1]}")

    parent = h.parent(cfg)
    builder = DfBuilder.attach(h, parent, registry)
    in_wires = tuple(h.neighbours(in_port(cfg, i))[0]
                     for i in range(len(op.signature.inputs)))
    consumers = [list(h.neighbours(out_port(cfg, i)))
                 for i in range(len(op.signature.outputs))]

    _, out_wires = _emit(frag, builder, h, in_wires, row)

    h.remove_node(cfg)
    for i, wire in enumerate(out_wires):
        for dst in consumers[i]:
            builder.connect(wire, dst)
    _sweep_dead_consts(h, parent)

    from .validate import validate_region

    diags = validate_region(h, parent, registry)
    if diags:
        raise StructuringError(f"structuring produced an invalid region: {diags[0].render()}")
    return h


def _block_rows(h: Hugr, block: int) -> tuple[tuple[Type, ...], tuple[Type, ...]]:
    children = h.children(block)
    out_types = h.op(children[1]).types
    return h.op(block).inputs, tuple(out_types[1:])


def structure_all(h: Hugr, registry: Registry) -> Hugr:
    """Structure every CFG node, innermost first."""
    while True:
        cfgs = [n for n in h.preorder() if isinstance(h.op(n), Cfg)]
        if not cfgs:
            return h
        # innermost last in preorder within a branch; process deepest first
        deepest = max(cfgs, key=lambda n: _depth(h, n))
        structure_cfg(h, deepest, registry)


def _depth(h: Hugr, n: int) -> int:
    d = 0
    p = h.parent(n)
    while p is not None:
        d += 1
        p = h.parent(p)
    return d
