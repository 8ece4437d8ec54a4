"""Anchored pattern matching and validated subgraph replacement.

Matching exploits the port structure: an anchor node fixes the first
correspondence and the embedding grows by following edges port-by-port.
Linear ports have exactly one connected edge, so most frontier steps extend
uniquely; copyable fan-out is explored in edge insertion order. Matches must
be convex (no host path leaves and re-enters the image) so splicing in the
replacement can never create a dataflow cycle.

Applying a rule removes the matched image, splices in the replacement
fragment with the same boundary signature, re-validates the touched region,
and returns an invertible delta. On any error the host is left unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass

from .build import DfBuilder, splice_region
from .graph import Direction, Hugr, Port, RemovedSubtree, in_port, out_port
from .ops import ExtensionOp, FuncDef, Registry, Value, value_signature
from .types import Signature

WILDCARD_EXTENSION = "pattern.wild"


class RewriteError(Exception):
    pass


class StaleMatch(RewriteError):
    """The host changed since the match was found."""


class WouldCreateCycle(RewriteError):
    """The match is no longer convex; applying it would create a cycle."""


class ValidationFailed(RewriteError):
    """The spliced replacement does not validate; the host was rolled back."""


def wildcard(signature: Signature) -> ExtensionOp:
    """A pattern node matching any operation with the given signature."""
    return ExtensionOp(WILDCARD_EXTENSION, "node", (), signature)


def _is_wildcard(op) -> bool:
    return isinstance(op, ExtensionOp) and op.extension == WILDCARD_EXTENSION


def _op_matches(pattern_op, host_op) -> bool:
    if _is_wildcard(pattern_op):
        return value_signature(pattern_op) == value_signature(host_op)
    if type(pattern_op) is not type(host_op):
        return False
    if isinstance(pattern_op, ExtensionOp):
        # cheap discriminators first; the deep compare is the common failure cost
        if pattern_op.name != host_op.name or pattern_op.extension != host_op.extension:
            return False
    return pattern_op == host_op


@dataclass
class Pattern:
    """A dataflow fragment with a designated anchor node.

    The fragment is the body of the single function in ``hugr``; its Input
    and Output rows are the pattern's boundary. Inner nodes are extension
    ops (exact match) or wildcards (signature match).
    """

    hugr: Hugr
    anchor: int

    def __post_init__(self) -> None:
        region = self.region()
        inner = self.inner_nodes()
        if not inner:
            raise RewriteError("pattern fragment has no inner nodes")
        for n in inner:
            if not isinstance(self.hugr.op(n), ExtensionOp):
                raise RewriteError("pattern inner nodes must be extension ops or wildcards")
        if self.anchor not in inner:
            raise RewriteError("anchor must be an inner node of the fragment")
        if _is_wildcard(self.hugr.op(self.anchor)):
            raise RewriteError("anchor must not be a wildcard")
        children = self.hugr.children(region)
        out_node = children[1]
        for i in range(len(self.boundary().outputs)):
            feeds = self.hugr.neighbours(in_port(out_node, i))
            if feeds and feeds[0].node == children[0]:
                raise RewriteError("pattern boundary must not pass inputs through")
        self._check_connected()

    def region(self) -> int:
        for c in self.hugr.children(self.hugr.root):
            if isinstance(self.hugr.op(c), FuncDef):
                return c
        raise RewriteError("pattern fragment must contain one function definition")

    def boundary(self) -> Signature:
        return self.hugr.op(self.region()).scheme.body

    def inner_nodes(self) -> list[int]:
        return self.hugr.children(self.region())[2:]

    def _check_connected(self) -> None:
        inner = set(self.inner_nodes())
        seen = {self.anchor}
        frontier = [self.anchor]
        while frontier:
            n = frontier.pop()
            nd = self.hugr.node(n)
            for edges in nd.in_edges + nd.out_edges:
                for e in edges:
                    for other in (e.src.node, e.dst.node):
                        if other in inner and other not in seen:
                            seen.add(other)
                            frontier.append(other)
        if seen != inner:
            raise RewriteError("pattern fragment must be connected")


@dataclass
class Match:
    """An embedding of a pattern into one host region."""

    pattern: Pattern
    region: int
    mapping: dict[int, int]  # pattern inner node -> host node
    boundary_sources: tuple[Port, ...]  # host source port per pattern input index

    def key(self) -> tuple:
        return tuple(self.mapping[p] for p in sorted(self.mapping))

    def anchor_host(self) -> int:
        return self.mapping[self.pattern.anchor]

    def image(self) -> set[int]:
        return set(self.mapping.values())

    def host_output_port(self, index: int) -> Port:
        """The host port providing boundary output ``index``."""
        ph = self.pattern.hugr
        out_node = ph.children(self.pattern.region())[1]
        src = ph.neighbours(in_port(out_node, index))[0]
        return out_port(self.mapping[src.node], src.offset)


@dataclass
class MatchStats:
    """Exploration counters; linear frontier ports must extend uniquely."""

    anchors_tried: int = 0
    frontier_steps: int = 0
    candidates_explored: int = 0


@dataclass
class RewriteDelta:
    """Invertible record of one rule application."""

    rule_name: str
    region: int
    anchor_host: int
    removed: list[RemovedSubtree]
    added_nodes: list[int]
    # reconnections between pre-existing nodes (pass-through replacements)
    added_edges: list


@dataclass
class RewriteRule:
    lhs: Pattern
    rhs: Hugr  # fragment shaped like a pattern's graph
    name: str

    def __post_init__(self) -> None:
        if self.lhs.boundary() != _fragment_boundary(self.rhs):
            raise RewriteError(f"rule {self.name!r}: boundary signatures differ")

    def rhs_region(self) -> int:
        for c in self.rhs.children(self.rhs.root):
            if isinstance(self.rhs.op(c), FuncDef):
                return c
        raise RewriteError("replacement fragment must contain one function definition")


def _fragment_boundary(fragment: Hugr) -> Signature:
    for c in fragment.children(fragment.root):
        op = fragment.op(c)
        if isinstance(op, FuncDef):
            return op.scheme.body
    raise RewriteError("fragment must contain one function definition")


# ── matching ───────────────────────────────────────────────────────

def find_matches(pattern: Pattern, h: Hugr, region: int,
                 stats: MatchStats | None = None) -> list[Match]:
    """Every embedding of ``pattern`` in the region, deduplicated and ordered
    by (anchor host id, embedding)."""
    matches = list(_iter_matches(pattern, h, region, stats))
    seen: set[tuple] = set()
    unique = []
    for m in matches:
        k = (m.anchor_host(), m.key())
        if k not in seen:
            seen.add(k)
            unique.append(m)
    unique.sort(key=lambda m: (m.anchor_host(), m.key()))
    return unique


def _iter_matches(pattern: Pattern, h: Hugr, region: int,
                  stats: MatchStats | None = None,
                  anchors: list[int] | None = None):
    anchor_op = pattern.hugr.op(pattern.anchor)
    steps = _match_program(pattern)

    if anchors is None:
        anchors = [n for n in sorted(h.children(region))
                   if _op_matches(anchor_op, h.op(n))]
    for anchor_host in anchors:
        if stats:
            stats.anchors_tried += 1
        mapping = {pattern.anchor: anchor_host}
        used = {anchor_host}
        yield from _extend(pattern, h, region, steps, 0, mapping, used, stats)


def _match_program(pattern: Pattern) -> list[tuple]:
    """Deterministic frontier steps: (known node, its port, peer node, peer port).

    BFS from the anchor; at each mapped node, ports are visited outgoing
    first, offsets ascending, edges in insertion order.
    """
    ph = pattern.hugr
    inner = set(pattern.inner_nodes())
    steps: list[tuple] = []
    seen = {pattern.anchor}
    queue = [pattern.anchor]
    while queue:
        n = queue.pop(0)
        nd = ph.node(n)
        for off, edges in enumerate(nd.out_edges):
            for e in edges:
                if isinstance(e.kind, Value) and e.dst.node in inner and e.dst.node not in seen:
                    seen.add(e.dst.node)
                    steps.append((n, Port(n, Direction.OUT, off), e.dst.node, e.dst))
                    queue.append(e.dst.node)
        for off, edges in enumerate(nd.in_edges):
            for e in edges:
                if isinstance(e.kind, Value) and e.src.node in inner and e.src.node not in seen:
                    seen.add(e.src.node)
                    steps.append((n, Port(n, Direction.IN, off), e.src.node, e.src))
                    queue.append(e.src.node)
    return steps


def _extend(pattern, h, region, steps, depth, mapping, used, stats):
    if depth == len(steps):
        m = _finalise(pattern, h, region, mapping)
        if m is not None:
            yield m
        return
    p_known, p_port, p_peer, p_peer_port = steps[depth]
    host_node = mapping[p_known]
    host_port = Port(host_node, p_port.direction, p_port.offset)
    if stats:
        stats.frontier_steps += 1
    peer_op = pattern.hugr.op(p_peer)
    for cand in h.neighbours(host_port):
        if stats:
            stats.candidates_explored += 1
        if cand.offset != p_peer_port.offset:
            continue
        c_node = cand.node
        if c_node in used or h.parent(c_node) != region:
            continue
        if not _op_matches(peer_op, h.op(c_node)):
            continue
        mapping[p_peer] = c_node
        used.add(c_node)
        yield from _extend(pattern, h, region, steps, depth + 1, mapping, used, stats)
        del mapping[p_peer]
        used.remove(c_node)


def _finalise(pattern: Pattern, h: Hugr, region: int,
              mapping: dict[int, int]) -> Match | None:
    ph = pattern.hugr
    children = ph.children(pattern.region())
    p_input, p_output = children[0], children[1]
    image = set(mapping.values())

    # interior edges must all exist with identical ports and types
    for pn, hn in mapping.items():
        for off, edges in enumerate(ph.node(pn).out_edges):
            host_edges = h.edges_at(Port(hn, Direction.OUT, off))
            host_pairs = {(e.dst.node, e.dst.offset) for e in host_edges}
            for e in edges:
                if e.dst.node in mapping:
                    if (mapping[e.dst.node], e.dst.offset) not in host_pairs:
                        return None

    # boundary inputs: consistent host sources outside the image
    n_in = len(pattern.boundary().inputs)
    sources: list[Port | None] = [None] * n_in
    for off in range(n_in):
        for e in ph.edges_at(Port(p_input, Direction.OUT, off)):
            if e.dst.node not in mapping:
                continue
            host_in = h.edges_at(Port(mapping[e.dst.node], Direction.IN, e.dst.offset))
            if len(host_in) != 1:
                return None
            s = host_in[0].src
            if s.node in image:
                return None
            if sources[off] is not None and sources[off] != s:
                return None
            sources[off] = s
    if any(s is None for s in sources):
        return None

    # escapes: host edges leaving the image require a boundary output port
    exported: set[tuple[int, int]] = set()
    for off in range(len(pattern.boundary().outputs)):
        for e in ph.edges_at(Port(p_output, Direction.IN, off)):
            exported.add((mapping[e.src.node], e.src.offset))
    for pn, hn in mapping.items():
        for off in range(len(ph.node(pn).out_edges)):
            p_targets_inside = sum(
                1 for e in ph.edges_at(Port(pn, Direction.OUT, off)) if e.dst.node in mapping)
            host_edges = h.edges_at(Port(hn, Direction.OUT, off))
            outside = [e for e in host_edges if e.dst.node not in image]
            inside = [e for e in host_edges if e.dst.node in image]
            if len(inside) != p_targets_inside:
                return None
            if outside and (hn, off) not in exported:
                return None

    if not _is_convex(h, region, image):
        return None
    return Match(pattern, region, dict(mapping), tuple(sources))


def _is_convex(h: Hugr, region: int, image: set[int]) -> bool:
    """No value path may leave the image and come back into it."""
    outside_reach: set[int] = set()
    frontier: list[int] = []
    for n in image:
        for edges in h.node(n).out_edges:
            for e in edges:
                if isinstance(e.kind, Value) and e.dst.node not in image:
                    if h.parent(e.dst.node) == region and e.dst.node not in outside_reach:
                        outside_reach.add(e.dst.node)
                        frontier.append(e.dst.node)
    while frontier:
        n = frontier.pop()
        if n in image:
            return False
        for edges in h.node(n).out_edges:
            for e in edges:
                d = e.dst.node
                if isinstance(e.kind, Value) and h.parent(d) == region:
                    if d in image:
                        return False
                    if d not in outside_reach:
                        outside_reach.add(d)
                        frontier.append(d)
    return True


# ── application ────────────────────────────────────────────────────

def apply(rule: RewriteRule, match: Match, h: Hugr, registry: Registry,
          full_check: bool = False) -> RewriteDelta:
    """Replace the matched image by the rule's rhs; validate; return a delta.

    Raises StaleMatch / WouldCreateCycle / ValidationFailed, in which case
    the host graph is left unchanged.

    The post-splice check covers every node whose wiring changed. Replacing a
    convex image by a dataflow fragment attached only at the boundary cannot
    create cycles (convexity is re-checked here), so on a valid host the
    region stays valid whenever this check passes. ``full_check`` re-runs the
    whole-region validation instead.
    """
    from .validate import validate_region

    _recheck(rule.lhs, match, h)

    region = match.region
    image = match.image()
    n_out = len(rule.lhs.boundary().outputs)
    consumers: list[list[Port]] = []
    for j in range(n_out):
        hp = match.host_output_port(j)
        consumers.append([e.dst for e in h.edges_at(hp) if e.dst.node not in image])

    watermark = h._next_id
    removed = [h.remove_node(match.mapping[pn]) for pn in sorted(match.mapping)]
    added_edges: list = []

    try:
        builder = DfBuilder.attach(h, region, registry)
        rhs_outs = splice_region(builder, rule.rhs, rule.rhs_region(),
                                 match.boundary_sources)
        for j, wire in enumerate(rhs_outs):
            for dst in consumers[j]:
                edge = h.connect(wire, dst, Value(builder.wire_type(wire)))
                if wire.node < watermark and dst.node < watermark:
                    added_edges.append(edge)
        added = [n for n in h.children(region) if n >= watermark]
        if full_check:
            diags = validate_region(h, region, registry)
        else:
            touched = set(added)
            touched.update(s.node for s in match.boundary_sources)
            touched.update(dst.node for ports in consumers for dst in ports)
            diags = _check_touched(h, region, registry, touched)
        if diags:
            raise ValidationFailed(
                f"rule {rule.name!r} left the region invalid: {diags[0].render()}")
    except Exception:
        _rollback(h, region, watermark, removed, added_edges)
        raise

    return RewriteDelta(rule.name, region, match.anchor_host(), removed, added,
                        added_edges)


def _check_touched(h: Hugr, region: int, registry: Registry,
                   touched: set[int]) -> list:
    from .validate import _check_node_ports

    member = set(h.children(region))
    diags: list = []
    for n in sorted(touched):
        if n in h and h.parent(n) == region:
            diags.extend(_check_node_ports(h, n, member, registry))
    return diags


def _recheck(pattern: Pattern, match: Match, h: Hugr) -> None:
    for pn, hn in match.mapping.items():
        if hn not in h or h.parent(hn) != match.region:
            raise StaleMatch(f"host node {hn} vanished or moved")
        if not _op_matches(pattern.hugr.op(pn), h.op(hn)):
            raise StaleMatch(f"host node {hn} changed operation")
    fresh = _finalise(pattern, h, match.region, match.mapping)
    if fresh is None or fresh.boundary_sources != match.boundary_sources:
        if not _is_convex(h, match.region, match.image()):
            raise WouldCreateCycle("match image is no longer convex")
        raise StaleMatch("match no longer embeds")


def _rollback(h: Hugr, region: int, watermark: int,
              removed: list[RemovedSubtree], added_edges: list) -> None:
    for e in added_edges:
        if h.has_edge(e):
            h.disconnect(e)
    for n in list(h.children(region)):
        if n >= watermark:
            h.remove_node(n)
    for sub in reversed(removed):
        h.restore(sub)


def undo(h: Hugr, delta: RewriteDelta) -> None:
    """Invert a successful application, restoring the original structure."""
    for e in delta.added_edges:
        if h.has_edge(e):
            h.disconnect(e)
    for n in delta.added_nodes:
        if n in h:
            h.remove_node(n)
    for sub in reversed(delta.removed):
        h.restore(sub)


# ── saturation ─────────────────────────────────────────────────────

def _dataflow_regions(h: Hugr) -> list[int]:
    from .ops import BasicBlock, Case, TailLoop

    out = []
    for n in h.preorder():
        if isinstance(h.op(n), (FuncDef, Case, TailLoop, BasicBlock)):
            out.append(n)
    return out


def saturate(rules: list[RewriteRule], h: Hugr, budget: int,
             registry: Registry) -> tuple[Hugr, list[tuple[str, int]]]:
    """Repeatedly apply the first matching rule (rule order, then leftmost
    anchor) until fixpoint or ``budget`` applications."""
    applied: list[tuple[str, int]] = []
    regions = _dataflow_regions(h)
    # per-region index from op to candidate anchors, rebuilt when dirty
    index: dict[int, dict] = {}

    def region_index(region: int) -> dict:
        if region not in index:
            by_op: dict = {}
            for n in sorted(h.children(region)):
                by_op.setdefault(h.op(n), []).append(n)
            index[region] = by_op
        return index[region]

    while len(applied) < budget:
        hit = None
        for rule in rules:
            anchor_op = rule.lhs.hugr.op(rule.lhs.anchor)
            for region in regions:
                if region not in h:
                    continue
                candidates = region_index(region).get(anchor_op)
                if not candidates:
                    continue
                for m in _iter_matches(rule.lhs, h, region, anchors=candidates):
                    hit = (rule, m)
                    break
                if hit:
                    break
            if hit:
                break
        if hit is None:
            break
        rule, m = hit
        apply(rule, m, h, registry)
        applied.append((rule.name, m.anchor_host()))
        index.pop(m.region, None)
        regions = _dataflow_regions(h)
        index = {r: ix for r, ix in index.items() if r in h}
    return h, applied
