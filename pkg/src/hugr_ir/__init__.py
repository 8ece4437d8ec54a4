"""Hierarchical typed port-graph IR for mixed quantum-classical programs."""

from .build import CfgBuilder, DfBuilder, ModuleBuilder, new_module, splice_region
from .graph import Direction, Edge, GraphError, Hugr, Port, in_port, out_port
from .interp import (
    EnumValue,
    F64Value,
    FnValue,
    I64Value,
    Interpreter,
    InterpError,
    QubitValue,
    Scripted,
    Seeded,
    bool_value,
    run,
    state_fidelity,
    unitary_fidelity,
    unitary_of,
)
from .ops import (
    BasicBlock,
    Call,
    Case,
    Cfg,
    Conditional,
    Const,
    ControlFlow,
    ExitBlock,
    Extension,
    ExtensionOp,
    FuncDecl,
    FuncDef,
    Input,
    LoadConst,
    LoadFunction,
    Module,
    OpDef,
    Output,
    Registry,
    Static,
    TailLoop,
    TypeDef,
    Value,
    ext_op,
    port_rows,
    register,
    signature_of,
    stdlib,
    value_signature,
)
from .rewrite import (
    Match,
    Pattern,
    RewriteDelta,
    RewriteRule,
    StaleMatch,
    ValidationFailed,
    WouldCreateCycle,
    apply,
    find_matches,
    saturate,
    undo,
    wildcard,
)
from .serial import DecodeError, decode, encode, structurally_equal
from .structure import (
    CfgView,
    IrreducibleCfg,
    dominators,
    is_reducible,
    loop_candidates,
    structure_all,
    structure_cfg,
)
from .types import (
    BOOL,
    F64,
    I64,
    QUBIT,
    EnumType,
    ExtType,
    FunctionType,
    PolySignature,
    Signature,
    Type,
    VarType,
    instantiate,
    is_linear,
    monomorphic,
    types_equal,
)
from .validate import Code, Diagnostic, validate, validate_region

__version__ = "0.1.0"
