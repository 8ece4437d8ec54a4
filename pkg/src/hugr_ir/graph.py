"""Storage and mutation of the hierarchical port graph.

Nodes live in a tree (parent links, ordered children) and expose numbered,
directed ports determined by their operation. Edges connect an outgoing port
to an incoming port and carry an explicit kind (value, static or control
flow). Children order is significant everywhere: region inputs/outputs, case
order, CFG entry.

Node ids are never reused within one graph instance, which keeps undo logs
and rewrite deltas unambiguous. Mutation requires exclusive access; reads are
safe to share.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .ops import ControlFlow, OpKind, PortKind, Static, Value, port_rows


class GraphError(Exception):
    """Raised on malformed graph mutations (unknown nodes, bad ports, ...)."""


class Direction(enum.Enum):
    IN = "in"
    OUT = "out"


@dataclass(frozen=True)
class Port:
    """A numbered connection point on a node."""

    node: int
    direction: Direction
    offset: int

    def __repr__(self) -> str:
        return f"{self.node}.{self.direction.value}{self.offset}"


def out_port(node: int, offset: int = 0) -> Port:
    return Port(node, Direction.OUT, offset)


def in_port(node: int, offset: int = 0) -> Port:
    return Port(node, Direction.IN, offset)


@dataclass(frozen=True)
class Edge:
    """A recorded connection; ``src`` is always outgoing, ``dst`` incoming."""

    src: Port
    dst: Port
    kind: PortKind


@dataclass
class Node:
    id: int
    parent: int | None
    op: OpKind
    children: list[int] = field(default_factory=list)
    # one edge list per port, in insertion order
    in_edges: list[list[Edge]] = field(default_factory=list)
    out_edges: list[list[Edge]] = field(default_factory=list)

    def __post_init__(self) -> None:
        ins, outs = port_rows(self.op)
        if not self.in_edges:
            self.in_edges = [[] for _ in ins]
        if not self.out_edges:
            self.out_edges = [[] for _ in outs]


@dataclass
class RemovedSubtree:
    """Material returned by :meth:`Hugr.remove_node`, sufficient for undo."""

    nodes: list[tuple[int, int | None, int, OpKind]]  # (id, parent, child index, op) preorder
    edges: list[Edge]


class Hugr:
    """The hierarchical port graph."""

    def __init__(self, root_op: OpKind | None = None):
        from .ops import Module

        self._nodes: dict[int, Node] = {}
        self._next_id = 0
        self._edge_keys: set[tuple[Port, Port, PortKind]] = set()
        self.root = self._fresh_node(root_op if root_op is not None else Module(), None)

    # ── accessors ──────────────────────────────────────────────────

    def __contains__(self, node: int) -> bool:
        return node in self._nodes

    def __len__(self) -> int:
        return len(self._nodes)

    def node(self, node: int) -> Node:
        try:
            return self._nodes[node]
        except KeyError:
            raise GraphError(f"unknown node {node}") from None

    def op(self, node: int) -> OpKind:
        return self.node(node).op

    def parent(self, node: int) -> int | None:
        return self.node(node).parent

    def children(self, node: int) -> list[int]:
        return list(self.node(node).children)

    def region_nodes(self, parent: int) -> list[int]:
        """Direct children only, in order."""
        return self.children(parent)

    def preorder(self, start: int | None = None) -> list[int]:
        """Hierarchy preorder following children order."""
        order: list[int] = []
        stack = [self.root if start is None else start]
        while stack:
            n = stack.pop()
            order.append(n)
            stack.extend(reversed(self._nodes[n].children))
        return order

    def is_ancestor(self, ancestor: int, node: int) -> bool:
        """True iff ``ancestor`` is ``node`` or a proper ancestor of it."""
        cur: int | None = node
        while cur is not None:
            if cur == ancestor:
                return True
            cur = self._nodes[cur].parent
        return False

    def child_index(self, node: int) -> int:
        p = self.parent(node)
        if p is None:
            raise GraphError("root has no siblings")
        return self._nodes[p].children.index(node)

    def port_kind(self, port: Port) -> PortKind:
        node = self.node(port.node)
        ins, outs = port_rows(node.op)
        row = ins if port.direction is Direction.IN else outs
        if not 0 <= port.offset < len(row):
            raise GraphError(f"port {port!r} out of range for {node.op!r}")
        return row[port.offset]

    def edges_at(self, port: Port) -> list[Edge]:
        node = self.node(port.node)
        row = node.in_edges if port.direction is Direction.IN else node.out_edges
        if not 0 <= port.offset < len(row):
            raise GraphError(f"port {port!r} out of range for {node.op!r}")
        return list(row[port.offset])

    def neighbours(self, port: Port) -> list[Port]:
        """Ports connected to ``port`` by any edge, in insertion order."""
        if port.direction is Direction.IN:
            return [e.src for e in self.edges_at(port)]
        return [e.dst for e in self.edges_at(port)]

    def all_edges(self) -> list[Edge]:
        out: list[Edge] = []
        for n in self.preorder():
            for edges in self._nodes[n].out_edges:
                out.extend(edges)
        return out

    # ── mutation ───────────────────────────────────────────────────

    def _fresh_node(self, op: OpKind, parent: int | None) -> int:
        nid = self._next_id
        self._next_id += 1
        self._nodes[nid] = Node(nid, parent, op)
        return nid

    def add_node(self, op: OpKind, parent: int) -> int:
        """Append a new node to ``parent``'s children; returns its fresh id."""
        pnode = self.node(parent)
        nid = self._fresh_node(op, parent)
        pnode.children.append(nid)
        assert self._nodes[nid].parent == parent  # fresh leaf keeps the tree a tree
        return nid

    def insert_node(self, op: OpKind, parent: int, index: int) -> int:
        pnode = self.node(parent)
        nid = self._fresh_node(op, parent)
        pnode.children.insert(index, nid)
        return nid

    def connect(self, src: Port, dst: Port, kind: PortKind) -> Edge:
        """Record an edge. Typing is checked later by validation; direction,
        port range and duplication are checked here."""
        if src.direction is not Direction.OUT or dst.direction is not Direction.IN:
            raise GraphError(f"edge must run outgoing -> incoming, got {src!r} -> {dst!r}")
        self.port_kind(src)
        self.port_kind(dst)
        key = (src, dst, kind)
        if key in self._edge_keys:
            raise GraphError(f"duplicate edge {src!r} -> {dst!r}")
        edge = Edge(src, dst, kind)
        self._nodes[src.node].out_edges[src.offset].append(edge)
        self._nodes[dst.node].in_edges[dst.offset].append(edge)
        self._edge_keys.add(key)
        return edge

    def has_edge(self, edge: Edge) -> bool:
        return (edge.src, edge.dst, edge.kind) in self._edge_keys

    def disconnect(self, edge: Edge) -> None:
        key = (edge.src, edge.dst, edge.kind)
        if key not in self._edge_keys:
            raise GraphError(f"no such edge {edge.src!r} -> {edge.dst!r}")
        self._edge_keys.remove(key)
        self._nodes[edge.src.node].out_edges[edge.src.offset].remove(edge)
        self._nodes[edge.dst.node].in_edges[edge.dst.offset].remove(edge)

    def remove_node(self, node: int) -> RemovedSubtree:
        """Remove ``node`` and all descendants plus every incident edge.

        Returns the removed material; :meth:`restore` undoes the removal.
        """
        if node == self.root:
            raise GraphError("cannot remove the root node")
        target = self.node(node)
        subtree = self.preorder(node)
        inside = set(subtree)

        removed_edges: list[Edge] = []
        seen: set[tuple[Port, Port, PortKind]] = set()
        for n in subtree:
            nd = self._nodes[n]
            for edges in nd.in_edges + nd.out_edges:
                for e in list(edges):
                    key = (e.src, e.dst, e.kind)
                    if key not in seen:
                        seen.add(key)
                        removed_edges.append(e)
        for e in removed_edges:
            self.disconnect(e)

        nodes: list[tuple[int, int | None, int, OpKind]] = []
        for n in subtree:
            nd = self._nodes[n]
            idx = 0 if nd.parent is None else self._nodes[nd.parent].children.index(n)
            nodes.append((n, nd.parent, idx, nd.op))
        parent = target.parent
        assert parent is not None
        self._nodes[parent].children.remove(node)
        for n in subtree:
            del self._nodes[n]
        assert node not in self._nodes[parent].children
        return RemovedSubtree(nodes, removed_edges)

    def restore(self, removed: RemovedSubtree) -> None:
        """Re-insert a removed subtree at its original positions."""
        restored = {nid for nid, *_ in removed.nodes}
        for nid, parent, _, op in removed.nodes:
            if nid in self._nodes:
                raise GraphError(f"node {nid} already present")
            self._nodes[nid] = Node(nid, parent, op)
        # the subtree root splices back at its recorded child index; interior
        # nodes are recorded in preorder, so appending rebuilds children order
        for nid, parent, idx, _ in removed.nodes:
            if parent is None:
                continue
            siblings = self._nodes[parent].children
            if parent in restored:
                siblings.append(nid)
            else:
                siblings.insert(idx, nid)
        for e in removed.edges:
            self.connect(e.src, e.dst, e.kind)
        if __debug__:
            self._assert_tree()

    # ── integrity ──────────────────────────────────────────────────

    def check_tree(self) -> None:
        """Full hierarchy audit: a tree, parent links consistent, no orphans."""
        self._assert_tree()

    def _assert_tree(self) -> None:
        seen: set[int] = set()
        stack = [self.root]
        while stack:
            n = stack.pop()
            assert n not in seen, f"hierarchy cycle through node {n}"
            seen.add(n)
            for c in self._nodes[n].children:
                assert self._nodes[c].parent == n, f"bad parent link at {c}"
                stack.append(c)
        assert seen == set(self._nodes), "orphaned nodes outside the hierarchy"

    def copy(self) -> "Hugr":
        """Structural copy preserving node ids and edge insertion order."""
        h = Hugr.__new__(Hugr)
        h._nodes = {}
        h._next_id = self._next_id
        h._edge_keys = set(self._edge_keys)
        h.root = self.root
        for nid, nd in self._nodes.items():
            copy = Node(nd.id, nd.parent, nd.op, list(nd.children))
            copy.in_edges = [list(es) for es in nd.in_edges]
            copy.out_edges = [list(es) for es in nd.out_edges]
            h._nodes[nid] = copy
        return h


__all__ = [
    "Direction",
    "Edge",
    "GraphError",
    "Hugr",
    "Node",
    "Port",
    "RemovedSubtree",
    "in_port",
    "out_port",
    "ControlFlow",
    "Static",
    "Value",
]
