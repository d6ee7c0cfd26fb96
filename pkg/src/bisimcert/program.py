"""Flat postfix programs compiled from expression trees.

The sampling falsifier and the integrator evaluate the same expression at
many points; walking the tree per point is the bottleneck.  Trees are
compiled once into a flat opcode/operand form that both the vectorized
numpy evaluator (below) and the numba kernels (_kernels.py) execute.

Batch evaluation returns a per-sample status code instead of raising:

    0  ok
    1  math-domain error (division by zero, sqrt of negative, bad power)
    2  non-differentiable point hit while differentiating (abs at 0,
       min/max tie, sqrt at 0)

Output values at samples with nonzero status are garbage and must be
masked by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EvalError
from . import expr as ex

OP_CONST = 0
OP_VAR = 1
OP_NEG = 2
OP_SIN = 3
OP_COS = 4
OP_EXP = 5
OP_TANH = 6
OP_SQRT = 7
OP_ABS = 8
OP_ADD = 9
OP_SUB = 10
OP_MUL = 11
OP_DIV = 12
OP_POW = 13
OP_MIN = 14
OP_MAX = 15

_UNARY_OPS = {
    "neg": OP_NEG,
    "sin": OP_SIN,
    "cos": OP_COS,
    "exp": OP_EXP,
    "tanh": OP_TANH,
    "sqrt": OP_SQRT,
    "abs": OP_ABS,
}
_BINARY_OPS = {"add": OP_ADD, "sub": OP_SUB, "mul": OP_MUL, "div": OP_DIV, "pow": OP_POW}

STATUS_OK = 0
STATUS_DOMAIN = 1
STATUS_NONDIFF = 2


@dataclass(frozen=True)
class Program:
    """A compiled expression over a fixed flattened slot layout.

    Slot k of the input matrix corresponds to ``slot_vars[k]``; the layout
    is the declared family order, each family contiguous.
    """

    code: np.ndarray  # int64
    arg: np.ndarray  # int64
    consts: np.ndarray  # float64
    stack_size: int
    families: tuple[tuple[str, int], ...]
    nslots: int

    def slot(self, family: str, index: int) -> int:
        off = 0
        for name, length in self.families:
            if name == family:
                if index >= length:
                    raise EvalError(f"index {index} out of range for family '{family}'")
                return off + index
            off += length
        raise EvalError(f"family '{family}' not in program layout")


def stack_need(e: ex.Expr) -> int:
    if isinstance(e, (ex.Const, ex.Var)):
        return 1
    if isinstance(e, ex.Unary):
        return stack_need(e.arg)
    if isinstance(e, ex.Binary):
        return max(stack_need(e.lhs), stack_need(e.rhs) + 1)
    if isinstance(e, ex.MinMax):
        return max(stack_need(a) + i for i, a in enumerate(e.args))
    raise TypeError(f"not an Expr: {e!r}")


def compile_expr(e: ex.Expr, families) -> Program:
    """Compile ``e`` against a declared family layout (dict or pairs)."""
    fams = tuple(ex.normalize_families(families).items())
    offsets: dict[str, int] = {}
    off = 0
    for name, length in fams:
        offsets[name] = off
        off += length
    lengths = dict(fams)

    code: list[int] = []
    arg: list[int] = []
    consts: list[float] = []

    def emit(node: ex.Expr):
        if isinstance(node, ex.Const):
            code.append(OP_CONST)
            arg.append(len(consts))
            consts.append(float(node.value))
        elif isinstance(node, ex.Var):
            if node.family not in offsets:
                raise EvalError(f"reference to undeclared family '{node.family}'")
            if node.index >= lengths[node.family]:
                raise EvalError(
                    f"index {node.index} out of range for family '{node.family}'"
                )
            code.append(OP_VAR)
            arg.append(offsets[node.family] + node.index)
        elif isinstance(node, ex.Unary):
            emit(node.arg)
            code.append(_UNARY_OPS[node.op])
            arg.append(0)
        elif isinstance(node, ex.Binary):
            emit(node.lhs)
            emit(node.rhs)
            code.append(_BINARY_OPS[node.op])
            arg.append(0)
        elif isinstance(node, ex.MinMax):
            for a in node.args:
                emit(a)
            code.append(OP_MIN if node.op == "min" else OP_MAX)
            arg.append(len(node.args))
        else:
            raise TypeError(f"not an Expr: {node!r}")

    emit(e)
    return Program(
        code=np.asarray(code, dtype=np.int64),
        arg=np.asarray(arg, dtype=np.int64),
        consts=np.asarray(consts, dtype=np.float64),
        stack_size=stack_need(e),
        families=fams,
        nslots=off,
    )


def stack_programs(progs):
    """Concatenate several programs (same layout) into ragged arrays.

    Returns (code, arg, offsets, consts, stack_size); const operands are
    rebased into the shared const pool.  Used by the multi-component
    kernels (vector fields, input signals).
    """
    code_parts, arg_parts, consts_parts = [], [], []
    offsets = [0]
    const_off = 0
    stack_size = 1
    for p in progs:
        a = p.arg.copy()
        a[p.code == OP_CONST] += const_off
        code_parts.append(p.code)
        arg_parts.append(a)
        consts_parts.append(p.consts)
        const_off += len(p.consts)
        offsets.append(offsets[-1] + len(p.code))
        stack_size = max(stack_size, p.stack_size)
    return (
        np.concatenate(code_parts) if code_parts else np.zeros(0, np.int64),
        np.concatenate(arg_parts) if arg_parts else np.zeros(0, np.int64),
        np.asarray(offsets, dtype=np.int64),
        np.concatenate(consts_parts) if consts_parts else np.zeros(0, np.float64),
        stack_size,
    )


def run_batch_numpy(prog: Program, X: np.ndarray, seed_slot: int = -1):
    """Vectorized evaluation of ``prog`` at every row of X (N, nslots).

    With ``seed_slot >= 0`` also returns the derivative with respect to
    that slot (forward mode).  Returns (values, derivs | None, status).
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    N = X.shape[0]
    if X.shape[1] != prog.nslots:
        raise EvalError(f"expected {prog.nslots} slots, got {X.shape[1]}")
    want_d = seed_slot >= 0
    stack = np.empty((prog.stack_size, N))
    dstack = np.empty((prog.stack_size, N)) if want_d else None
    status = np.zeros(N, dtype=np.int8)

    def flag(mask, code):
        np.copyto(status, code, where=mask & (status == STATUS_OK))

    sp = 0
    with np.errstate(all="ignore"):
        for op, a in zip(prog.code, prog.arg):
            if op == OP_CONST:
                stack[sp] = prog.consts[a]
                if want_d:
                    dstack[sp] = 0.0
                sp += 1
            elif op == OP_VAR:
                stack[sp] = X[:, a]
                if want_d:
                    dstack[sp] = 1.0 if a == seed_slot else 0.0
                sp += 1
            elif op == OP_NEG:
                np.negative(stack[sp - 1], out=stack[sp - 1])
                if want_d:
                    np.negative(dstack[sp - 1], out=dstack[sp - 1])
            elif op == OP_SIN:
                v = stack[sp - 1]
                if want_d:
                    dstack[sp - 1] *= np.cos(v)
                np.sin(v, out=v)
            elif op == OP_COS:
                v = stack[sp - 1]
                if want_d:
                    dstack[sp - 1] *= -np.sin(v)
                np.cos(v, out=v)
            elif op == OP_EXP:
                v = stack[sp - 1]
                np.exp(v, out=v)
                if want_d:
                    dstack[sp - 1] *= v
            elif op == OP_TANH:
                v = stack[sp - 1]
                np.tanh(v, out=v)
                if want_d:
                    dstack[sp - 1] *= 1.0 - v * v
            elif op == OP_SQRT:
                v = stack[sp - 1]
                flag(v < 0.0, STATUS_DOMAIN)
                if want_d:
                    flag(v == 0.0, STATUS_NONDIFF)
                np.sqrt(np.maximum(v, 0.0), out=v)
                if want_d:
                    dstack[sp - 1] *= 0.5 / np.where(v != 0.0, v, 1.0)
            elif op == OP_ABS:
                v = stack[sp - 1]
                if want_d:
                    flag(v == 0.0, STATUS_NONDIFF)
                    dstack[sp - 1] *= np.sign(v)
                np.abs(v, out=v)
            elif op == OP_ADD:
                stack[sp - 2] += stack[sp - 1]
                if want_d:
                    dstack[sp - 2] += dstack[sp - 1]
                sp -= 1
            elif op == OP_SUB:
                stack[sp - 2] -= stack[sp - 1]
                if want_d:
                    dstack[sp - 2] -= dstack[sp - 1]
                sp -= 1
            elif op == OP_MUL:
                if want_d:
                    dstack[sp - 2] = (
                        dstack[sp - 2] * stack[sp - 1] + stack[sp - 2] * dstack[sp - 1]
                    )
                stack[sp - 2] *= stack[sp - 1]
                sp -= 1
            elif op == OP_DIV:
                va, vb = stack[sp - 2], stack[sp - 1]
                flag(vb == 0.0, STATUS_DOMAIN)
                if want_d:
                    dstack[sp - 2] = (
                        dstack[sp - 2] * vb - va * dstack[sp - 1]
                    ) / (vb * vb)
                stack[sp - 2] = va / vb
                sp -= 1
            elif op == OP_POW:
                va, vb = stack[sp - 2], stack[sp - 1]
                b_integer = vb == np.floor(vb)
                flag((va == 0.0) & (vb < 0.0), STATUS_DOMAIN)
                flag((va < 0.0) & ~b_integer, STATUS_DOMAIN)
                v = np.power(va, vb)
                if want_d:
                    da, db = dstack[sp - 2], dstack[sp - 1]
                    exp_varies = db != 0.0
                    flag(exp_varies & (va <= 0.0), STATUS_DOMAIN)
                    flag(
                        ~exp_varies & (va == 0.0) & (vb < 1.0) & (vb != 0.0),
                        STATUS_NONDIFF,
                    )
                    safe_a = np.where(va > 0.0, va, 1.0)
                    d_fixed = np.where(
                        vb == 0.0, 0.0, vb * np.power(np.where(va != 0.0, va, 1.0), vb - 1.0) * da
                    )
                    # the safe base only affects lanes already flagged above
                    d_fixed = np.where(
                        (va == 0.0) & (vb != 0.0),
                        np.where(vb == 1.0, da, 0.0),
                        d_fixed,
                    )
                    d_var = v * (db * np.log(safe_a) + vb * da / safe_a)
                    dstack[sp - 2] = np.where(exp_varies, d_var, d_fixed)
                stack[sp - 2] = v
                sp -= 1
            elif op == OP_MIN or op == OP_MAX:
                k = int(a)
                base = sp - k
                best = stack[base].copy()
                if op == OP_MIN:
                    for j in range(1, k):
                        np.minimum(best, stack[base + j], out=best)
                else:
                    for j in range(1, k):
                        np.maximum(best, stack[base + j], out=best)
                if want_d:
                    hits = np.zeros(N, dtype=np.int64)
                    dbest = np.empty(N)
                    for j in range(k - 1, -1, -1):
                        winner = stack[base + j] == best
                        hits += winner
                        np.copyto(dbest, dstack[base + j], where=winner)
                    flag(hits > 1, STATUS_NONDIFF)
                    dstack[base] = dbest
                stack[base] = best
                sp = base + 1
            else:
                raise EvalError(f"bad opcode {op}")
    values = stack[0].copy()
    derivs = dstack[0].copy() if want_d else None
    return values, derivs, status
