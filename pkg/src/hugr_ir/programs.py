"""Self-contained sample programs exercising every structural feature.

These double as documentation, CLI demo material, and the shared fixtures of
the test suite. All entry functions are named ``main``. Run this module to
dump them as ``.hugr.json`` files:

    python -m hugr_ir.programs <output-dir>
"""

from __future__ import annotations

from .build import DfBuilder, new_module
from .graph import Hugr
from .ops import Registry, monomorphic, stdlib
from .types import BOOL, F64, QUBIT, Signature


def rotation_pipeline(registry: Registry | None = None) -> Hugr:
    """Rz then Rx on one qubit, both by the same dynamically computed angle.

    The angle is the sum of two float inputs; the sum fans out to both
    rotations, which is fine for a copyable value.
    """
    m = new_module(registry or stdlib())
    b = m.define_function("main", Signature((QUBIT, F64, F64), (QUBIT,)))
    q, a, x = b.inputs()
    (s,) = b.cl("Add", a, x)
    (q,) = b.q("Rz", q, s)
    (q,) = b.q("Rx", q, s)
    b.set_outputs(q)
    return m.hugr


def fanout_rejected(registry: Registry | None = None) -> Hugr:
    """A CX whose control and target come from the same qubit.

    Not physically realisable: the qubit output feeds two ports, which the
    validator reports as a linearity violation.
    """
    m = new_module(registry or stdlib())
    b = m.define_function("main", Signature((QUBIT,), (QUBIT, QUBIT)))
    (q,) = b.inputs()
    c, t = b.q("CX", q, q)
    b.set_outputs(c, t)
    return m.hugr


def measurement_branch(registry: Registry | None = None) -> Hugr:
    """Measure the first qubit; apply H (false) or X (true) to the second."""
    m = new_module(registry or stdlib())
    b = m.define_function("main", Signature((QUBIT, QUBIT), (QUBIT, QUBIT)))
    q0, q1 = b.inputs()
    q0, flag = b.q("Measure", q0)
    (branched,), cases = b.conditional(flag, (q1,), (QUBIT,))
    false_case, true_case = cases
    (hq,) = false_case.q("H", *false_case.inputs())
    false_case.set_outputs(hq)
    (xq,) = true_case.q("X", *true_case.inputs())
    true_case.set_outputs(xq)
    b.set_outputs(q0, branched)
    return m.hugr


def external_call(registry: Registry | None = None) -> Hugr:
    """Call a declared (externally linked) two-qubit predicate.

    The declaration reaches the call site over a static edge.
    """
    m = new_module(registry or stdlib())
    foo = m.declare_function("foo", monomorphic((QUBIT, QUBIT), (BOOL,)))
    b = m.define_function("main", Signature((QUBIT, QUBIT), (BOOL,)))
    q0, q1 = b.inputs()
    (flag,) = b.call(foo, q0, q1)
    b.set_outputs(flag)
    return m.hugr


def _rus_attempt(b: DfBuilder, q):
    """One round of the repeat-until-success protocol for (I + i*sqrt(2)*X)/sqrt(3).

    Measuring the ancilla true (probability 3/4) leaves the target with the
    gate applied; false leaves a Pauli Z, which the caller corrects before
    retrying. Returns (outcome flag, target qubit).
    """
    (a,) = b.q("QAlloc")
    (a,) = b.q("TxDg", a)
    (a,) = b.q("T", a)
    (a,) = b.q("T", a)
    (q,) = b.q("TxDg", q)
    a, q = b.q("CX", a, q)
    (a,) = b.q("H", a)
    (a,) = b.q("T", a)
    (q,) = b.q("TxDg", q)
    q, a = b.q("CX", q, a)
    (a,) = b.q("Z", a)
    (a,) = b.q("H", a)
    a, flag = b.q("Measure", a)
    b.q("QFree", a)
    return flag, q


def _z_correction(b: DfBuilder, flag, q):
    """Apply Z to ``q`` when ``flag`` is false (the retry path)."""
    (corrected,), cases = b.conditional(flag, (q,), (QUBIT,))
    retry, done = cases
    (zq,) = retry.q("Z", *retry.inputs())
    retry.set_outputs(zq)
    done.set_outputs(*done.inputs())
    return corrected


def rus_loop(registry: Registry | None = None) -> Hugr:
    """Repeat-until-success as a tail loop.

    The loop body's first bool output is the measurement outcome: false
    repeats (after the Z correction), true finishes.
    """
    m = new_module(registry or stdlib())
    b = m.define_function("main", Signature((QUBIT,), (QUBIT,)))
    (q,) = b.inputs()
    (q_final,), body = b.tail_loop((q,))
    (lq,) = body.inputs()
    flag, lq = _rus_attempt(body, lq)
    corrected = _z_correction(body, flag, lq)
    body.set_outputs(flag, corrected)
    b.set_outputs(q_final)
    return m.hugr


def rus_cfg(registry: Registry | None = None) -> Hugr:
    """The same repeat-until-success program as unstructured control flow.

    The attempt block branches on the measurement: tag 0 (false) goes to the
    correction block, which loops back; tag 1 (true) reaches the exit.
    """
    m = new_module(registry or stdlib())
    b = m.define_function("main", Signature((QUBIT,), (QUBIT,)))
    (q,) = b.inputs()
    (out,), cb = b.cfg((q,), (QUBIT,))

    attempt, ab = cb.add_block((QUBIT,), 2, (QUBIT,))
    (aq,) = ab.inputs()
    flag, aq = _rus_attempt(ab, aq)
    ab.set_outputs(flag, aq)

    fix, fb = cb.add_block((QUBIT,), 1, (QUBIT,))
    (fq,) = fb.inputs()
    (fq,) = fb.q("Z", fq)
    fb.set_outputs(fb.tag_const(0, 1), fq)

    exit_ = cb.add_exit((QUBIT,))
    cb.link(attempt, 0, fix)
    cb.link(attempt, 1, exit_)
    cb.link(fix, 0, attempt)

    b.set_outputs(out)
    return m.hugr


def all_programs(registry: Registry | None = None) -> dict[str, Hugr]:
    registry = registry or stdlib()
    return {
        "rotation_pipeline": rotation_pipeline(registry),
        "fanout_rejected": fanout_rejected(registry),
        "measurement_branch": measurement_branch(registry),
        "external_call": external_call(registry),
        "rus_loop": rus_loop(registry),
        "rus_cfg": rus_cfg(registry),
    }


def write_all(directory) -> list[str]:
    import pathlib

    from .serial import encode

    out = pathlib.Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, h in all_programs().items():
        path = out / f"{name}.hugr.json"
        path.write_text(encode(h) + "\n")
        written.append(str(path))
    return written


if __name__ == "__main__":
    import sys

    target = sys.argv[1] if len(sys.argv) > 1 else "."
    for path in write_all(target):
        print(path)
