"""Batched evaluation of loop-free networks on a flat register tape.

compile_tape flattens the slice of a Grfn feeding one output into a
write-once register program (int64 instruction rows plus a float64
constant pool). run_tape executes it over an n-by-k input matrix with
either a numba kernel or a vectorized numpy fallback; set
GRFNKIT_NO_NUMBA=1 (or pass backend="numpy") to force the fallback.

Samples that hit a domain violation are marked in a flag vector and
replayed through the scalar interpreter, so the error they raise
carries the offending node id and sample index.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from . import ir
from .errors import DomainError, ValidationError
from .grfn import DECISION, LOOPBODY, Grfn

OP_CONST = 0
OP_ADD = 1
OP_SUB = 2
OP_MUL = 3
OP_DIV = 4
OP_POW = 5
OP_NEG = 6
OP_EXP = 7
OP_LOG = 8
OP_SIN = 9
OP_COS = 10
OP_TAN = 11
OP_SQRT = 12
OP_ABS = 13
OP_MIN = 14
OP_MAX = 15
OP_MOD = 16
OP_GT = 17
OP_GE = 18
OP_LT = 19
OP_LE = 20
OP_EQ = 21
OP_NE = 22
OP_AND = 23
OP_OR = 24
OP_NOT = 25
OP_SELECT = 26

_BINOPS = {
    "ADD": OP_ADD, "SUB": OP_SUB, "MUL": OP_MUL, "DIV": OP_DIV,
    "POW": OP_POW, "GT": OP_GT, "GE": OP_GE, "LT": OP_LT, "LE": OP_LE,
    "EQ": OP_EQ, "NE": OP_NE, "AND": OP_AND, "OR": OP_OR,
}
_UNARY_CALLS = {
    "EXP": OP_EXP, "LOG": OP_LOG, "SIN": OP_SIN, "COS": OP_COS,
    "TAN": OP_TAN, "SQRT": OP_SQRT, "ABS": OP_ABS,
}


@dataclass(frozen=True)
class TapeProgram:
    code: np.ndarray        # (m, 5) int64: op, dst, a, b, c
    consts: np.ndarray      # float64 pool
    columns: tuple[str, ...]
    n_regs: int
    out_reg: int


class _Compiler:
    def __init__(self, grfn: Grfn, columns: tuple[str, ...]):
        self.grfn = grfn
        self.rows: list[tuple[int, int, int, int, int]] = []
        self.consts: list[float] = []
        self.const_regs: dict[float, int] = {}
        self.regs: dict[str, int] = {}
        self.next_reg = len(columns)
        self.producers = {f.output: f for f in grfn.functions}
        for j, name in enumerate(columns):
            vid = grfn.var_id(name, 0)
            if vid in grfn.variable_ids:
                self.regs[vid] = j

    def alloc(self) -> int:
        reg = self.next_reg
        self.next_reg += 1
        return reg

    def const(self, value: float) -> int:
        reg = self.const_regs.get(value)
        if reg is None:
            self.consts.append(value)
            reg = self.alloc()
            self.rows.append((OP_CONST, reg, len(self.consts) - 1, 0, 0))
            self.const_regs[value] = reg
        return reg

    def emit_var(self, vid: str) -> int:
        reg = self.regs.get(vid)
        if reg is not None:
            return reg
        f = self.producers.get(vid)
        if f is None:
            raise ValidationError(f"no value for {vid}")
        if f.kind == LOOPBODY:
            raise ValidationError(
                "the batched evaluator does not support loop nodes")
        if f.kind == DECISION:
            cond = self.emit_var(f.decision.condition)
            then = self.emit_var(f.decision.then)
            orelse = self.emit_var(f.decision.orelse)
            reg = self.alloc()
            self.rows.append((OP_SELECT, reg, cond, then, orelse))
        else:
            env = {}
            for iid in f.inputs:
                name = iid.split("::")[1]
                env[name] = self.emit_var(iid)
            reg = self.emit_expr(f.expression, env)
        self.regs[vid] = reg
        return reg

    def emit_expr(self, expr: ir.Expression, env: dict[str, int]) -> int:
        if isinstance(expr, ir.Num):
            return self.const(float(expr.value))
        if isinstance(expr, ir.Var):
            return env[expr.name]
        if isinstance(expr, ir.Unary):
            child = self.emit_expr(expr.child, env)
            reg = self.alloc()
            op = OP_NEG if expr.op == "NEG" else OP_NOT
            self.rows.append((op, reg, child, 0, 0))
            return reg
        if isinstance(expr, ir.Binary):
            left = self.emit_expr(expr.left, env)
            right = self.emit_expr(expr.right, env)
            reg = self.alloc()
            self.rows.append((_BINOPS[expr.op], reg, left, right, 0))
            return reg
        if isinstance(expr, ir.Call):
            args = [self.emit_expr(a, env) for a in expr.args]
            if expr.name in _UNARY_CALLS:
                reg = self.alloc()
                self.rows.append((_UNARY_CALLS[expr.name], reg, args[0], 0, 0))
                return reg
            if expr.name in ("MIN", "MAX"):
                op = OP_MIN if expr.name == "MIN" else OP_MAX
                acc = args[0]
                for other in args[1:]:
                    reg = self.alloc()
                    self.rows.append((op, reg, acc, other, 0))
                    acc = reg
                return acc
            if expr.name == "MOD":
                reg = self.alloc()
                self.rows.append((OP_MOD, reg, args[0], args[1], 0))
                return reg
            raise ValidationError(f"unknown intrinsic {expr.name}")
        raise ValidationError(f"cannot compile {type(expr).__name__}")


def compile_tape(grfn: Grfn, output: str,
                 columns: tuple[str, ...] | None = None) -> TapeProgram:
    """Register program computing `output` from the named input columns."""
    if columns is None:
        columns = tuple(sorted(grfn.inputs))
    missing = set(grfn.inputs) - set(columns)
    if missing:
        raise ValidationError(f"columns do not cover inputs: {sorted(missing)}")
    version = grfn.final_version(output)
    if version is None:
        raise ValidationError(f"{output!r} is not an output of this network")

    comp = _Compiler(grfn, tuple(columns))
    out_reg = comp.emit_var(grfn.var_id(output, version))
    code = np.array(comp.rows, dtype=np.int64).reshape(len(comp.rows), 5)
    consts = np.array(comp.consts, dtype=np.float64)
    return TapeProgram(code=code, consts=consts, columns=tuple(columns),
                       n_regs=comp.next_reg, out_reg=out_reg)


# ---------------------------------------------------------------------------
# Backends

def select_backend(override: str | None = None) -> str:
    """Resolve the backend name: explicit arg, then env flag, then numba."""
    if override is not None:
        if override not in ("numba", "numpy"):
            raise ValidationError(f"unknown backend {override!r}")
        if override == "numba":
            _numba_kernel()
        return override
    if os.environ.get("GRFNKIT_NO_NUMBA", ""):
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        return "numpy"
    return "numba"


def _kernel_source(code, consts, X, n_regs, out_reg):  # numba compiles this
    n, k = X.shape
    out = np.empty(n, dtype=np.float64)
    flags = np.zeros(n, dtype=np.bool_)
    regs = np.empty(n_regs, dtype=np.float64)
    for s in range(n):
        for j in range(k):
            regs[j] = X[s, j]
        ok = True
        for i in range(code.shape[0]):
            op = code[i, 0]
            dst = code[i, 1]
            a = code[i, 2]
            b = code[i, 3]
            c = code[i, 4]
            if op == OP_CONST:
                regs[dst] = consts[a]
            elif op == OP_ADD:
                regs[dst] = regs[a] + regs[b]
            elif op == OP_SUB:
                regs[dst] = regs[a] - regs[b]
            elif op == OP_MUL:
                regs[dst] = regs[a] * regs[b]
            elif op == OP_DIV:
                if regs[b] == 0.0:
                    ok = False
                    break
                regs[dst] = regs[a] / regs[b]
            elif op == OP_POW:
                base = regs[a]
                ex = regs[b]
                if (base < 0.0 and ex != math.floor(ex)) or (base == 0.0 and ex < 0.0):
                    ok = False
                    break
                regs[dst] = base ** ex
            elif op == OP_NEG:
                regs[dst] = -regs[a]
            elif op == OP_EXP:
                # C semantics: overflow yields inf, matching _safe_exp.
                regs[dst] = math.exp(regs[a])
            elif op == OP_LOG:
                if regs[a] <= 0.0:
                    ok = False
                    break
                regs[dst] = math.log(regs[a])
            elif op == OP_SIN:
                regs[dst] = math.sin(regs[a])
            elif op == OP_COS:
                regs[dst] = math.cos(regs[a])
            elif op == OP_TAN:
                regs[dst] = math.tan(regs[a])
            elif op == OP_SQRT:
                if regs[a] < 0.0:
                    ok = False
                    break
                regs[dst] = math.sqrt(regs[a])
            elif op == OP_ABS:
                regs[dst] = abs(regs[a])
            elif op == OP_MIN:
                regs[dst] = regs[a] if regs[a] <= regs[b] else regs[b]
            elif op == OP_MAX:
                regs[dst] = regs[a] if regs[a] >= regs[b] else regs[b]
            elif op == OP_MOD:
                if regs[b] == 0.0:
                    ok = False
                    break
                regs[dst] = np.fmod(regs[a], regs[b])
            elif op == OP_GT:
                regs[dst] = 1.0 if regs[a] > regs[b] else 0.0
            elif op == OP_GE:
                regs[dst] = 1.0 if regs[a] >= regs[b] else 0.0
            elif op == OP_LT:
                regs[dst] = 1.0 if regs[a] < regs[b] else 0.0
            elif op == OP_LE:
                regs[dst] = 1.0 if regs[a] <= regs[b] else 0.0
            elif op == OP_EQ:
                regs[dst] = 1.0 if regs[a] == regs[b] else 0.0
            elif op == OP_NE:
                regs[dst] = 1.0 if regs[a] != regs[b] else 0.0
            elif op == OP_AND:
                regs[dst] = 1.0 if regs[a] != 0.0 and regs[b] != 0.0 else 0.0
            elif op == OP_OR:
                regs[dst] = 1.0 if regs[a] != 0.0 or regs[b] != 0.0 else 0.0
            elif op == OP_NOT:
                regs[dst] = 1.0 if regs[a] == 0.0 else 0.0
            else:
                regs[dst] = regs[b] if regs[a] != 0.0 else regs[c]
        if ok:
            out[s] = regs[out_reg]
        else:
            out[s] = np.nan
            flags[s] = True
    return out, flags


_compiled_kernel = None


def _numba_kernel():
    global _compiled_kernel
    if _compiled_kernel is None:
        from numba import njit
        _compiled_kernel = njit(cache=True)(_kernel_source)
    return _compiled_kernel


def _run_numpy(tape: TapeProgram, X: np.ndarray):
    n = X.shape[0]
    regs = np.empty((tape.n_regs, n), dtype=np.float64)
    for j in range(X.shape[1]):
        regs[j] = X[:, j]
    flags = np.zeros(n, dtype=bool)
    with np.errstate(all="ignore"):
        for op, dst, a, b, c in tape.code:
            if op == OP_CONST:
                regs[dst] = tape.consts[a]
            elif op == OP_ADD:
                regs[dst] = regs[a] + regs[b]
            elif op == OP_SUB:
                regs[dst] = regs[a] - regs[b]
            elif op == OP_MUL:
                regs[dst] = regs[a] * regs[b]
            elif op == OP_DIV:
                bad = regs[b] == 0.0
                flags |= bad
                regs[dst] = np.where(bad, np.nan,
                                     regs[a] / np.where(bad, 1.0, regs[b]))
            elif op == OP_POW:
                base, ex = regs[a], regs[b]
                bad = ((base < 0.0) & (ex != np.floor(ex))) \
                    | ((base == 0.0) & (ex < 0.0))
                flags |= bad
                regs[dst] = np.where(bad, np.nan,
                                     np.power(np.where(bad, 1.0, base),
                                              np.where(bad, 1.0, ex)))
            elif op == OP_NEG:
                regs[dst] = -regs[a]
            elif op == OP_EXP:
                regs[dst] = np.exp(regs[a])
            elif op == OP_LOG:
                bad = regs[a] <= 0.0
                flags |= bad
                regs[dst] = np.where(bad, np.nan,
                                     np.log(np.where(bad, 1.0, regs[a])))
            elif op == OP_SIN:
                regs[dst] = np.sin(regs[a])
            elif op == OP_COS:
                regs[dst] = np.cos(regs[a])
            elif op == OP_TAN:
                regs[dst] = np.tan(regs[a])
            elif op == OP_SQRT:
                bad = regs[a] < 0.0
                flags |= bad
                regs[dst] = np.where(bad, np.nan,
                                     np.sqrt(np.where(bad, 1.0, regs[a])))
            elif op == OP_ABS:
                regs[dst] = np.abs(regs[a])
            elif op == OP_MIN:
                regs[dst] = np.where(regs[a] <= regs[b], regs[a], regs[b])
            elif op == OP_MAX:
                regs[dst] = np.where(regs[a] >= regs[b], regs[a], regs[b])
            elif op == OP_MOD:
                bad = regs[b] == 0.0
                flags |= bad
                regs[dst] = np.where(bad, np.nan,
                                     np.fmod(regs[a], np.where(bad, 1.0, regs[b])))
            elif op == OP_GT:
                regs[dst] = (regs[a] > regs[b]).astype(np.float64)
            elif op == OP_GE:
                regs[dst] = (regs[a] >= regs[b]).astype(np.float64)
            elif op == OP_LT:
                regs[dst] = (regs[a] < regs[b]).astype(np.float64)
            elif op == OP_LE:
                regs[dst] = (regs[a] <= regs[b]).astype(np.float64)
            elif op == OP_EQ:
                regs[dst] = (regs[a] == regs[b]).astype(np.float64)
            elif op == OP_NE:
                regs[dst] = (regs[a] != regs[b]).astype(np.float64)
            elif op == OP_AND:
                regs[dst] = ((regs[a] != 0.0) & (regs[b] != 0.0)).astype(np.float64)
            elif op == OP_OR:
                regs[dst] = ((regs[a] != 0.0) | (regs[b] != 0.0)).astype(np.float64)
            elif op == OP_NOT:
                regs[dst] = (regs[a] == 0.0).astype(np.float64)
            else:
                regs[dst] = np.where(regs[a] != 0.0, regs[b], regs[c])
    out = regs[tape.out_reg].copy()
    out[flags] = np.nan
    return out, flags


def run_tape(tape: TapeProgram, X: np.ndarray, backend: str | None = None):
    """(values, domain_flags) for every row of X; flagged values are NaN."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != len(tape.columns):
        raise ValidationError(
            f"expected an (n, {len(tape.columns)}) sample matrix, got {X.shape}")
    if select_backend(backend) == "numba":
        return _numba_kernel()(tape.code, tape.consts, X,
                               tape.n_regs, tape.out_reg)
    return _run_numpy(tape, X)


def _replay(grfn: Grfn, output: str, X: np.ndarray,
            columns: tuple[str, ...], sample: int) -> float:
    from . import interp
    bind = {name: float(X[sample, j]) for j, name in enumerate(columns)}
    try:
        return float(interp.execute(grfn, bind)[output])
    except DomainError as err:
        raise DomainError(f"{err.message} (sample {sample})",
                          err.node_id) from None


def batch_execute(grfn: Grfn, output: str, X: np.ndarray,
                  columns: tuple[str, ...] | None = None,
                  backend: str | None = None) -> np.ndarray:
    """Evaluate `output` for every row of X.

    Rows whose evaluation leaves the intrinsics' domains are replayed
    through the scalar interpreter so the DomainError names both the
    failing node and the sample index. Graphs with loop nodes skip the
    tape entirely and run each row through the interpreter.
    """
    if any(f.kind == LOOPBODY for f in grfn.functions):
        if columns is None:
            columns = tuple(sorted(grfn.inputs))
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(columns):
            raise ValidationError(
                f"expected an (n, {len(columns)}) sample matrix, got {X.shape}")
        if grfn.final_version(output) is None:
            raise ValidationError(f"{output!r} is not an output of this network")
        return np.array([_replay(grfn, output, X, tuple(columns), s)
                         for s in range(X.shape[0])])

    tape = compile_tape(grfn, output, columns)
    out, flags = run_tape(tape, X, backend)
    for s in np.flatnonzero(flags):
        out[s] = _replay(grfn, output, X, tape.columns, int(s))
    return out
