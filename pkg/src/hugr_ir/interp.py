"""Reference evaluator: exact classical semantics over a dense statevector.

This is the semantics oracle the other passes are tested against. Classical
values evaluate exactly; qubits are handles into a small statevector (default
cap 10 qubits). Measurement outcomes come from an :class:`OutcomeSource` —
either a script of booleans, for deterministic control-flow tests, or a
seeded generator sampling Born-rule probabilities.

Conventions fixed here and shared by the fixtures and the structuring pass:
the first bool a loop body emits means *finished* when true and *repeat*
when false; equivalence checks ignore global phase (fidelity based).
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np

from .graph import Direction, Hugr, Port
from .ops import (
    Call,
    Cfg,
    Conditional,
    Const,
    ExitBlock,
    ExtensionOp,
    FuncDecl,
    FuncDef,
    LoadConst,
    LoadFunction,
    Registry,
    TailLoop,
    Value,
    instantiate,
    value_signature,
)
from .types import EnumType, ExtType, F64, I64, Signature, Type


class InterpError(Exception):
    pass


class QubitCapExceeded(InterpError):
    pass


class ScriptExhausted(InterpError):
    pass


class ImpossibleOutcome(InterpError):
    """A scripted outcome has (numerically) zero probability."""


class UnboundDecl(InterpError):
    pass


class NonTerminating(InterpError):
    pass


# ── runtime values ─────────────────────────────────────────────────

@dataclass(frozen=True)
class RtValue:
    """Base class for runtime values."""


@dataclass(frozen=True)
class F64Value(RtValue):
    value: float


@dataclass(frozen=True)
class I64Value(RtValue):
    value: int


@dataclass(frozen=True)
class EnumValue(RtValue):
    tag: int
    cardinality: int = 2

    def __post_init__(self):
        if not 0 <= self.tag < self.cardinality:
            raise InterpError(f"enum tag {self.tag} out of range {self.cardinality}")


@dataclass(frozen=True)
class FnValue(RtValue):
    node: int
    signature: Signature


@dataclass(frozen=True)
class QubitValue(RtValue):
    token: int


def bool_value(b: bool) -> EnumValue:
    return EnumValue(int(b), 2)


# ── measurement outcomes ───────────────────────────────────────────

class OutcomeSource:
    def next_outcome(self, p_true: float) -> bool:
        raise NotImplementedError


class Scripted(OutcomeSource):
    """Forces a fixed sequence of outcomes (post-selection with renormalising)."""

    def __init__(self, outcomes):
        self._outcomes = list(outcomes)
        self._pos = 0

    def next_outcome(self, p_true: float) -> bool:
        if self._pos >= len(self._outcomes):
            raise ScriptExhausted(f"script of length {len(self._outcomes)} exhausted")
        out = bool(self._outcomes[self._pos])
        self._pos += 1
        return out


class Seeded(OutcomeSource):
    """Samples outcomes from the Born probabilities with a fixed seed."""

    def __init__(self, seed: int):
        self._rng = np.random.default_rng(seed)

    def next_outcome(self, p_true: float) -> bool:
        return bool(self._rng.random() < p_true)


# ── quantum state ──────────────────────────────────────────────────

_NORM_TOL = 1e-9
_PROB_TOL = 1e-12

_SQ2 = 1.0 / np.sqrt(2.0)
_H = np.array([[1, 1], [1, -1]], dtype=complex) * _SQ2
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_T = np.diag([1.0, np.exp(1j * np.pi / 4)]).astype(complex)
_TDG = _T.conj().T
_TXDG = _H @ _TDG @ _H
_CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)


def _rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)]).astype(complex)


def _rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


class QuantumState:
    """Dense statevector over the currently live qubits."""

    def __init__(self, cap: int = 10):
        self.cap = cap
        self.amps = np.ones(1, dtype=complex)
        self._axes: dict[int, int] = {}  # token -> tensor axis
        self._next_token = 0

    @property
    def num_qubits(self) -> int:
        return len(self._axes)

    def _tensor(self) -> np.ndarray:
        return self.amps.reshape([2] * self.num_qubits) if self.num_qubits else self.amps

    def alloc(self) -> QubitValue:
        if self.num_qubits >= self.cap:
            raise QubitCapExceeded(f"qubit cap {self.cap} exceeded")
        token = self._next_token
        self._next_token += 1
        new = np.zeros(2 * self.amps.size, dtype=complex)
        new[0::2] = self.amps  # fresh qubit in |0> as the last axis
        self.amps = new
        self._axes[token] = self.num_qubits
        return QubitValue(token)

    def _axis(self, q: QubitValue) -> int:
        if q.token not in self._axes:
            raise InterpError(f"qubit handle {q.token} reused after being consumed")
        return self._axes[q.token]

    def _renew(self, q: QubitValue) -> QubitValue:
        # consume the old token, mint a fresh handle on the same axis
        axis = self._axes.pop(q.token)
        token = self._next_token
        self._next_token += 1
        self._axes[token] = axis
        return QubitValue(token)

    def apply1(self, q: QubitValue, u: np.ndarray) -> QubitValue:
        axis = self._axis(q)
        if self.num_qubits == 1:
            self.amps = u @ self.amps
        else:
            t = np.tensordot(u, self._tensor(), axes=([1], [axis]))
            self.amps = np.moveaxis(t, 0, axis).reshape(-1)
        self._check_norm()
        return self._renew(q)

    def apply2(self, q0: QubitValue, q1: QubitValue, u4: np.ndarray
               ) -> tuple[QubitValue, QubitValue]:
        a0, a1 = self._axis(q0), self._axis(q1)
        if a0 == a1:
            raise InterpError("two-qubit gate applied to one qubit twice")
        n = self.num_qubits
        t = self._tensor()
        u = u4.reshape(2, 2, 2, 2)
        t = np.tensordot(u, t, axes=([2, 3], [a0, a1]))
        t = np.moveaxis(t, [0, 1], [a0, a1])
        self.amps = t.reshape(-1)
        self._check_norm()
        return self._renew(q0), self._renew(q1)

    def probability_one(self, q: QubitValue) -> float:
        axis = self._axis(q)
        if self.num_qubits == 1:
            return float(abs(self.amps[1]) ** 2)
        t = self._tensor()
        marginal = np.sum(np.abs(t) ** 2, axis=tuple(i for i in range(self.num_qubits) if i != axis))
        return float(marginal[1])

    def measure(self, q: QubitValue, source: OutcomeSource) -> tuple[QubitValue, bool]:
        axis = self._axis(q)
        p1 = self.probability_one(q)
        outcome = source.next_outcome(p1)
        p = p1 if outcome else 1.0 - p1
        if p < _PROB_TOL:
            raise ImpossibleOutcome(f"scripted outcome {outcome} has probability {p:.3g}")
        t = self._tensor().copy()
        idx = [slice(None)] * self.num_qubits
        idx[axis] = 0 if outcome else 1
        t[tuple(idx)] = 0.0
        self.amps = (t / np.sqrt(p)).reshape(-1)
        self._check_norm()
        return self._renew(q), outcome

    def free(self, q: QubitValue) -> None:
        axis = self._axis(q)
        t = np.moveaxis(self._tensor(), axis, 0)
        s0, s1 = t[0].reshape(-1), t[1].reshape(-1)
        n0, n1 = np.linalg.norm(s0), np.linalg.norm(s1)
        if n1 < _NORM_TOL:
            rest = s0
        elif n0 < _NORM_TOL:
            rest = s1
        else:
            # separable iff the two slices are proportional
            overlap = abs(np.vdot(s0, s1)) / (n0 * n1)
            if abs(overlap - 1.0) > 1e-7:
                raise InterpError("cannot free an entangled qubit")
            rest = s0
        rest = rest / np.linalg.norm(rest)
        del self._axes[q.token]
        for tok, ax in self._axes.items():
            if ax > axis:
                self._axes[tok] = ax - 1
        self.amps = rest
        self._check_norm()

    def statevector(self, order: list[QubitValue]) -> np.ndarray:
        """Amplitudes with axes permuted so ``order[0]`` is the most significant."""
        if len(order) != self.num_qubits:
            raise InterpError("statevector order must list every live qubit")
        axes = [self._axis(q) for q in order]
        return np.transpose(self._tensor(), axes).reshape(-1).copy()

    def _check_norm(self) -> None:
        norm2 = float(np.vdot(self.amps, self.amps).real)
        assert abs(norm2 - 1.0) < 2 * _NORM_TOL, f"statevector norm drifted to {norm2 ** 0.5}"


# ── evaluator ──────────────────────────────────────────────────────

def _scalar(ty: Type, raw) -> RtValue:
    if isinstance(ty, EnumType):
        return EnumValue(int(raw), ty.cardinality)
    if ty == F64:
        return F64Value(float(raw))
    if ty == I64:
        return I64Value(int(raw))
    raise InterpError(f"constants of type {ty!r} are not supported")


class Interpreter:
    """One evaluator instance; not shared between threads."""

    def __init__(self, h: Hugr, registry: Registry,
                 outcomes: OutcomeSource | None = None,
                 stubs: dict | None = None,
                 qubit_cap: int = 10,
                 iteration_cap: int = 100_000):
        self.h = h
        self.registry = registry
        self.outcomes = outcomes if outcomes is not None else Seeded(0)
        self.stubs = stubs or {}
        self.qubit_cap = qubit_cap
        self.iteration_cap = iteration_cap
        self.state = QuantumState(qubit_cap)
        self._iterations = 0

    def reset(self) -> None:
        self.state = QuantumState(self.qubit_cap)
        self._iterations = 0

    def find_function(self, name: str) -> int:
        for c in self.h.children(self.h.root):
            op = self.h.op(c)
            if isinstance(op, (FuncDef, FuncDecl)) and op.name == name:
                return c
        raise InterpError(f"no function named {name!r}")

    def run(self, entry: str, args: list[RtValue]) -> list[RtValue]:
        node = self.find_function(entry)
        op = self.h.op(node)
        if isinstance(op, FuncDecl):
            return self._call_stub(op.name, args)
        sig = op.scheme.body
        if op.scheme.param_count:
            raise InterpError(f"entry {entry!r} is polymorphic; instantiate it via a call site")
        if len(args) != len(sig.inputs):
            raise InterpError(f"{entry!r} takes {len(sig.inputs)} arguments, got {len(args)}")
        return self._exec_region(node, list(args))

    # region execution ------------------------------------------------

    def _exec_region(self, parent: int, args: list[RtValue]) -> list[RtValue]:
        children = self.h.children(parent)
        input_node, output_node = children[0], children[1]
        values: dict[tuple[int, int], RtValue] = {}
        for i, v in enumerate(args):
            values[(input_node, i)] = v

        dataflow = [c for c in children[2:]
                    if not isinstance(self.h.op(c), (FuncDef, FuncDecl, Const))]
        indeg: dict[int, int] = {}
        for c in dataflow:
            nd = self.h.node(c)
            indeg[c] = sum(1 for edges in nd.in_edges for e in edges
                           if isinstance(e.kind, Value))
        fed: dict[int, int] = {c: 0 for c in dataflow}
        for i in range(len(args)):
            for p in self.h.neighbours(Port(input_node, Direction.OUT, i)):
                if p.node in fed:
                    fed[p.node] += 1

        ready = [c for c in dataflow if fed[c] == indeg[c]]
        heapq.heapify(ready)
        done: set[int] = set()
        while ready:
            n = heapq.heappop(ready)
            if n in done:
                continue
            done.add(n)
            outs = self._exec_node(n, self._gather_inputs(n, values))
            for i, v in enumerate(outs):
                values[(n, i)] = v
            for i in range(len(outs)):
                for p in self.h.neighbours(Port(n, Direction.OUT, i)):
                    if p.node in fed and p.node not in done:
                        fed[p.node] += 1
                        if fed[p.node] == indeg[p.node]:
                            heapq.heappush(ready, p.node)
        return self._gather_inputs(output_node, values)

    def _value_sig(self, n: int) -> Signature:
        return value_signature(self.h.op(n))

    def _gather_inputs(self, n: int, values) -> list[RtValue]:
        nd = self.h.node(n)
        n_in = len(value_signature(nd.op).inputs)
        out: list[RtValue] = []
        for i in range(n_in):
            src = nd.in_edges[i][0].src  # validated: exactly one
            out.append(values[(src.node, src.offset)])
        return out

    def _static_source(self, n: int, offset: int) -> int:
        sources = self.h.neighbours(Port(n, Direction.IN, offset))
        return sources[0].node

    # node execution ----------------------------------------------------

    def _exec_node(self, n: int, invals: list[RtValue]) -> list[RtValue]:
        op = self.h.op(n)
        if isinstance(op, ExtensionOp):
            fn = _EXT_SEMANTICS.get((op.extension, op.name))
            if fn is None:
                raise InterpError(f"no evaluator semantics for {op.extension}.{op.name}")
            return fn(self, op, invals)
        if isinstance(op, Conditional):
            disc = invals[0]
            assert isinstance(disc, EnumValue)
            case = self.h.children(n)[disc.tag]
            return self._exec_region(case, invals[1:])
        if isinstance(op, TailLoop):
            vals = invals
            while True:
                self._tick()
                outs = self._exec_region(n, vals)
                flag = outs[0]
                assert isinstance(flag, EnumValue) and flag.cardinality == 2
                if flag.tag == 1:  # finished
                    return outs[1:]
                vals = outs[1:]
        if isinstance(op, Cfg):
            cur = self.h.children(n)[0]
            vals = invals
            while True:
                cur_op = self.h.op(cur)
                if isinstance(cur_op, ExitBlock):
                    return vals
                self._tick()
                outs = self._exec_region(cur, vals)
                tag = outs[0]
                assert isinstance(tag, EnumValue)
                succ = self.h.neighbours(Port(cur, Direction.OUT, tag.tag))
                cur = succ[0].node
                vals = outs[1:]
        if isinstance(op, Call):
            sig = self._value_sig(n)
            target = self._static_source(n, len(sig.inputs))
            target_op = self.h.op(target)
            if isinstance(target_op, FuncDef):
                return self._exec_region(target, invals)
            return self._call_stub(target_op.name, invals)
        if isinstance(op, LoadFunction):
            target = self._static_source(n, 0)
            return [FnValue(target, instantiate(op.scheme, op.type_args))]
        if isinstance(op, LoadConst):
            target = self._static_source(n, 0)
            const = self.h.op(target)
            assert isinstance(const, Const)
            return [_scalar(const.type, const.value)]
        raise InterpError(f"cannot execute op {op!r}")

    def _call_stub(self, name: str, args: list[RtValue]) -> list[RtValue]:
        fn = self.stubs.get(name)
        if fn is None:
            raise UnboundDecl(f"declaration {name!r} has no bound implementation")
        return list(fn(self, args))

    def _tick(self) -> None:
        self._iterations += 1
        if self._iterations > self.iteration_cap:
            raise NonTerminating(f"iteration cap {self.iteration_cap} exceeded")


# ── extension semantics ────────────────────────────────────────────

def _gate1(mat):
    def apply(interp: Interpreter, op, invals):
        (q,) = invals
        return [interp.state.apply1(q, mat)]

    return apply


def _rot(mat_fn):
    def apply(interp: Interpreter, op, invals):
        q, angle = invals
        assert isinstance(angle, F64Value)
        return [interp.state.apply1(q, mat_fn(angle.value))]

    return apply


def _cx(interp: Interpreter, op, invals):
    q0, q1 = invals
    a, b = interp.state.apply2(q0, q1, _CX)
    return [a, b]


def _measure(interp: Interpreter, op, invals):
    (q,) = invals
    q, outcome = interp.state.measure(q, interp.outcomes)
    return [q, bool_value(outcome)]


def _qalloc(interp: Interpreter, op, invals):
    return [interp.state.alloc()]


def _qfree(interp: Interpreter, op, invals):
    (q,) = invals
    interp.state.free(q)
    return []


def _binop(fn):
    def apply(interp, op, invals):
        a, b = invals
        return [F64Value(fn(a.value, b.value))]

    return apply


def _cmp(fn):
    def apply(interp, op, invals):
        a, b = invals
        return [bool_value(fn(a.value, b.value))]

    return apply


def _boolop(fn):
    def apply(interp, op, invals):
        tags = [bool(v.tag) for v in invals]
        return [bool_value(fn(*tags))]

    return apply


_EXT_SEMANTICS = {
    ("stdlib.quantum", "H"): _gate1(_H),
    ("stdlib.quantum", "X"): _gate1(_X),
    ("stdlib.quantum", "Z"): _gate1(_Z),
    ("stdlib.quantum", "T"): _gate1(_T),
    ("stdlib.quantum", "Tdg"): _gate1(_TDG),
    ("stdlib.quantum", "TxDg"): _gate1(_TXDG),
    ("stdlib.quantum", "Rz"): _rot(_rz),
    ("stdlib.quantum", "Rx"): _rot(_rx),
    ("stdlib.quantum", "CX"): _cx,
    ("stdlib.quantum", "Measure"): _measure,
    ("stdlib.quantum", "QAlloc"): _qalloc,
    ("stdlib.quantum", "QFree"): _qfree,
    ("stdlib.classical", "Add"): _binop(lambda a, b: a + b),
    ("stdlib.classical", "Sub"): _binop(lambda a, b: a - b),
    ("stdlib.classical", "Mul"): _binop(lambda a, b: a * b),
    ("stdlib.classical", "Neg"): lambda i, o, v: [F64Value(-v[0].value)],
    ("stdlib.classical", "Eq"): _cmp(lambda a, b: a == b),
    ("stdlib.classical", "Neq"): _cmp(lambda a, b: a != b),
    ("stdlib.classical", "Lt"): _cmp(lambda a, b: a < b),
    ("stdlib.classical", "Le"): _cmp(lambda a, b: a <= b),
    ("stdlib.classical", "Gt"): _cmp(lambda a, b: a > b),
    ("stdlib.classical", "Ge"): _cmp(lambda a, b: a >= b),
    ("stdlib.classical", "Not"): _boolop(lambda a: not a),
    ("stdlib.classical", "And"): _boolop(lambda a, b: a and b),
    ("stdlib.classical", "Or"): _boolop(lambda a, b: a or b),
}


# ── entry points ───────────────────────────────────────────────────

def run(h: Hugr, entry: str, args: list[RtValue], outcomes: OutcomeSource,
        registry: Registry, stubs: dict | None = None, qubit_cap: int = 10,
        iteration_cap: int = 100_000, check: bool = True) -> list[RtValue]:
    """Execute a validated graph's ``entry`` function."""
    if check:
        from .validate import validate

        diags = validate(h, registry)
        if diags:
            raise InterpError(f"graph is invalid: {diags[0].render()}")
    interp = Interpreter(h, registry, outcomes, stubs, qubit_cap, iteration_cap)
    return interp.run(entry, args)


def _contains_forbidden(h: Hugr, parent: int) -> str | None:
    for n in h.preorder(parent):
        op = h.op(n)
        if isinstance(op, (Conditional, TailLoop, Cfg)):
            return type(op).__name__
        if isinstance(op, ExtensionOp) and (op.extension, op.name) == ("stdlib.quantum", "Measure"):
            return "Measure"
        if isinstance(op, Call):
            sig_in = len(op.scheme.body.inputs)
            # the callee body is reached through the static edge
            targets = h.neighbours(Port(n, Direction.IN, sig_in))
            if targets and isinstance(h.op(targets[0].node), FuncDef):
                found = _contains_forbidden(h, targets[0].node)
                if found:
                    return found
    return None


def unitary_of(h: Hugr, entry: str, registry: Registry, check: bool = True) -> np.ndarray:
    """The unitary matrix of a measurement-free, all-qubit function.

    Assembled by running every computational basis state; the first input
    qubit is the most significant bit. Limited to 5 qubits.
    """
    if check:
        from .validate import validate

        diags = validate(h, registry)
        if diags:
            raise InterpError(f"graph is invalid: {diags[0].render()}")
    node = None
    for c in h.children(h.root):
        op = h.op(c)
        if isinstance(op, FuncDef) and op.name == entry:
            node = c
            break
    if node is None:
        raise InterpError(f"no function definition named {entry!r}")
    sig = h.op(node).scheme.body
    if any(not _is_qubit(t) for t in sig.inputs) or any(not _is_qubit(t) for t in sig.outputs):
        raise InterpError("unitary extraction needs an all-qubit signature")
    k = len(sig.inputs)
    if k > 5 or k != len(sig.outputs):
        raise InterpError(f"unitary extraction supports 1..5 qubits, got {k}->{len(sig.outputs)}")
    forbidden = _contains_forbidden(h, node)
    if forbidden:
        raise InterpError(f"unitary extraction forbids {forbidden}")

    dim = 2 ** k
    u = np.zeros((dim, dim), dtype=complex)
    for j in range(dim):
        interp = Interpreter(h, registry, Scripted([]), qubit_cap=max(10, k))
        qubits = [interp.state.alloc() for _ in range(k)]
        for i in range(k):
            if (j >> (k - 1 - i)) & 1:
                qubits[i] = interp.state.apply1(qubits[i], _X)
        outs = interp._exec_region(node, list(qubits))
        u[:, j] = interp.state.statevector([v for v in outs])
    if np.linalg.norm(u @ u.conj().T - np.eye(dim)) > 1e-9 * dim:
        raise InterpError("extracted matrix is not unitary")
    return u


def _is_qubit(t: Type) -> bool:
    return isinstance(t, ExtType) and (t.extension, t.name) == ("stdlib.quantum", "qubit")


def state_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|<a|b>|^2 on normalised states; global phase invariant."""
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    return float(abs(np.vdot(a, b)) ** 2)


def unitary_fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """|tr(a^dag b)| / dim; 1 iff equal up to global phase."""
    return float(abs(np.trace(a.conj().T @ b)) / a.shape[0])
