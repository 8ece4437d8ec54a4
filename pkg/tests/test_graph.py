"""Core graph storage: hierarchy, ports, edges, removal and undo."""

import pytest

from hugr_ir import (
    GraphError,
    Hugr,
    Value,
    encode,
    ext_op,
    in_port,
    out_port,
    port_rows,
    stdlib,
)
from hugr_ir.build import new_module
from hugr_ir.ops import Case, Conditional, FuncDef, Module
from hugr_ir.types import BOOL, F64, QUBIT, PolySignature, Signature

from generators import chain_circuit, main_region


def test_rz_port_counts(registry):
    ins, outs = port_rows(ext_op(registry, "stdlib.quantum", "Rz"))
    assert [k.type for k in ins] == [QUBIT, F64]
    assert [k.type for k in outs] == [QUBIT]


def test_add_then_remove_is_identity(registry):
    h = chain_circuit(["H"], registry)
    region = main_region(h)
    count = len(h)
    n = h.add_node(ext_op(registry, "stdlib.quantum", "X"), region)
    assert len(h) == count + 1
    h.remove_node(n)
    assert len(h) == count


def test_children_keep_insertion_order():
    h = Hugr()
    f = h.add_node(FuncDef("main", PolySignature(0, Signature((BOOL,), (BOOL,)))), h.root)
    cond = h.add_node(Conditional(3, (), ()), f)
    cases = [h.add_node(Case(), cond) for _ in range(3)]
    assert h.region_nodes(cond) == cases


def test_add_node_unknown_parent():
    h = Hugr()
    with pytest.raises(GraphError):
        h.add_node(Module(), 999)


def test_connect_checks_direction_and_range(registry):
    h = chain_circuit(["H", "H"], registry)
    region = main_region(h)
    first, second = h.children(region)[2], h.children(region)[3]
    qubit_edge = Value(QUBIT)
    with pytest.raises(GraphError):
        h.connect(out_port(first, 0), out_port(second, 0), qubit_edge)  # wrong direction
    with pytest.raises(GraphError):
        h.connect(out_port(first, 5), in_port(second, 0), qubit_edge)  # src out of range
    with pytest.raises(GraphError):
        h.connect(out_port(first, 0), in_port(second, 3), qubit_edge)  # dst out of range


def test_connect_port_to_itself_is_direction_mismatch(registry):
    h = chain_circuit(["H"], registry)
    node = h.children(main_region(h))[2]
    p = out_port(node, 0)
    with pytest.raises(GraphError):
        h.connect(p, p, Value(QUBIT))


def test_duplicate_edge_rejected(registry):
    m = new_module(registry)
    b = m.define_function("main", Signature((F64,), (F64, F64)))
    (x,) = b.inputs()
    b.set_outputs(x, x)  # copyable fan-out to two distinct ports is fine
    h = m.hugr
    out_node = h.children(main_region(h))[1]
    with pytest.raises(GraphError):
        h.connect(out_port(h.children(main_region(h))[0], 0), in_port(out_node, 0),
                  Value(F64))


def test_fanout_from_one_output(registry):
    # one classical output wired to two consumers; neighbours in insertion order
    m = new_module(registry)
    b = m.define_function("main", Signature((QUBIT, F64, F64), (QUBIT,)))
    q, a, x = b.inputs()
    (s,) = b.cl("Add", a, x)
    (q,) = b.q("Rz", q, s)
    (q,) = b.q("Rx", q, s)
    b.set_outputs(q)
    h = m.hugr
    region = main_region(h)
    add_node = h.children(region)[2]
    targets = h.neighbours(out_port(add_node, 0))
    assert [t.offset for t in targets] == [1, 1]
    rz, rx = targets[0].node, targets[1].node
    assert h.op(rz).name == "Rz" and h.op(rx).name == "Rx"


def test_neighbours_fresh_port_empty(registry):
    h = chain_circuit(["H"], registry)
    n = h.add_node(ext_op(registry, "stdlib.quantum", "X"), main_region(h))
    assert h.neighbours(out_port(n, 0)) == []


def test_neighbours_symmetric(registry):
    h = chain_circuit(["H", "X", "Z", "H"], registry)
    for n in h.preorder():
        nd = h.node(n)
        for off in range(len(nd.out_edges)):
            p = out_port(n, off)
            for other in h.neighbours(p):
                assert p in h.neighbours(other)
        for off in range(len(nd.in_edges)):
            p = in_port(n, off)
            for other in h.neighbours(p):
                assert p in h.neighbours(other)


def test_qubit_output_single_edge_in_valid_graph(registry):
    h = chain_circuit(["H", "X"], registry)
    region = main_region(h)
    for n in h.children(region):
        for off, kind in enumerate(port_rows(h.op(n))[1]):
            if isinstance(kind, Value) and kind.type == QUBIT:
                assert len(h.neighbours(out_port(n, off))) == 1


def test_remove_subtree_and_incident_edges(registry):
    from hugr_ir.programs import measurement_branch

    h = measurement_branch(registry)
    cond = next(n for n in h.preorder() if isinstance(h.op(n), Conditional))
    n_children = len(h.preorder(cond))
    before_nodes = len(h)
    h.remove_node(cond)
    assert len(h) == before_nodes - n_children
    # no dangling edges survive
    for e in h.all_edges():
        assert e.src.node in h and e.dst.node in h


def test_remove_leaf_drops_incident_edges(registry):
    h = chain_circuit(["H", "X", "Z"], registry)
    region = main_region(h)
    x = h.children(region)[3]
    edges_before = len(h.all_edges())
    h.remove_node(x)
    assert len(h.all_edges()) == edges_before - 2


def test_remove_restore_isomorphic(registry):
    h = chain_circuit(["H", "X", "Z"], registry)
    reference = encode(h)
    x = h.children(main_region(h))[3]
    removed = h.remove_node(x)
    assert encode(h) != reference
    h.restore(removed)
    assert encode(h) == reference


def test_remove_root_rejected(registry):
    h = chain_circuit(["H"], registry)
    with pytest.raises(GraphError):
        h.remove_node(h.root)


def test_node_ids_never_reused(registry):
    h = chain_circuit(["H"], registry)
    region = main_region(h)
    seen = set(h.preorder())
    for _ in range(5):
        n = h.add_node(ext_op(registry, "stdlib.quantum", "X"), region)
        assert n not in seen
        seen.add(n)
        h.remove_node(n)


def test_identical_mutation_sequences_serialize_identically(registry):
    assert encode(chain_circuit(["H", "X"], registry)) == \
        encode(chain_circuit(["H", "X"], registry))


def test_copy_is_structurally_equal(registry):
    h = chain_circuit(["H", "X"], registry)
    c = h.copy()
    assert encode(c) == encode(h)
    c.add_node(ext_op(registry, "stdlib.quantum", "Z"), main_region(c))
    assert encode(c) != encode(h)


def test_hierarchy_stays_a_tree_through_mutations(registry):
    from hugr_ir.programs import measurement_branch
    from hugr_ir.ops import Conditional

    h = measurement_branch(registry)
    h.check_tree()
    cond = next(n for n in h.preorder() if isinstance(h.op(n), Conditional))
    removed = h.remove_node(cond)
    h.check_tree()
    h.restore(removed)
    h.check_tree()
    assert not any(h.is_ancestor(c, h.parent(c)) for c in h.preorder()
                   if h.parent(c) is not None)
