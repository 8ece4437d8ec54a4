"""Stock peephole rules: involution cancellation and rotation merging."""

from __future__ import annotations

from .build import new_module
from .graph import Hugr
from .ops import Registry, stdlib
from .rewrite import Pattern, RewriteRule
from .types import F64, QUBIT, Signature, Type


def _fragment(registry: Registry, inputs: tuple[Type, ...],
              outputs: tuple[Type, ...]):
    m = new_module(registry)
    return m, m.define_function("fragment", Signature(inputs, outputs))


def _passthrough(registry: Registry, types: tuple[Type, ...]) -> Hugr:
    m, b = _fragment(registry, types, types)
    b.set_outputs(*b.inputs())
    return m.hugr


def _pair_pattern(registry: Registry, gate: str) -> Pattern:
    m, b = _fragment(registry, (QUBIT,), (QUBIT,))
    (q,) = b.inputs()
    first = b.q(gate, q)
    anchor = first[0].node
    (q2,) = b.q(gate, *first)
    b.set_outputs(q2)
    return Pattern(m.hugr, anchor)


def involution_cancel(gate: str, registry: Registry | None = None) -> RewriteRule:
    """gate;gate -> bare wire, for self-inverse single-qubit gates."""
    registry = registry or stdlib()
    lhs = _pair_pattern(registry, gate)
    rhs = _passthrough(registry, (QUBIT,))
    return RewriteRule(lhs, rhs, f"{gate.lower()}{gate.lower()}_cancel")


def hh_cancel(registry: Registry | None = None) -> RewriteRule:
    return involution_cancel("H", registry)


def xx_cancel(registry: Registry | None = None) -> RewriteRule:
    return involution_cancel("X", registry)


def cx_cx_cancel(registry: Registry | None = None) -> RewriteRule:
    """Two adjacent CX gates in the same orientation cancel."""
    registry = registry or stdlib()
    m, b = _fragment(registry, (QUBIT, QUBIT), (QUBIT, QUBIT))
    c, t = b.inputs()
    c1, t1 = b.q("CX", c, t)
    anchor = c1.node
    c2, t2 = b.q("CX", c1, t1)
    b.set_outputs(c2, t2)
    lhs = Pattern(m.hugr, anchor)
    rhs = _passthrough(registry, (QUBIT, QUBIT))
    return RewriteRule(lhs, rhs, "cxcx_cancel")


def rz_merge(registry: Registry | None = None) -> RewriteRule:
    """Rz(a);Rz(b) -> Rz(a+b), summing the angles in the graph."""
    registry = registry or stdlib()
    m, b = _fragment(registry, (QUBIT, F64, F64), (QUBIT,))
    q, a, c = b.inputs()
    first = b.q("Rz", q, a)
    anchor = first[0].node
    (q2,) = b.q("Rz", *first, c)
    b.set_outputs(q2)
    lhs = Pattern(m.hugr, anchor)

    m2, b2 = _fragment(registry, (QUBIT, F64, F64), (QUBIT,))
    q, a, c = b2.inputs()
    (s,) = b2.cl("Add", a, c)
    (q2,) = b2.q("Rz", q, s)
    b2.set_outputs(q2)
    return RewriteRule(lhs, m2.hugr, "rz_merge")


def standard_rules(registry: Registry | None = None) -> list[RewriteRule]:
    registry = registry or stdlib()
    return [hh_cancel(registry), xx_cancel(registry),
            rz_merge(registry), cx_cx_cancel(registry)]
