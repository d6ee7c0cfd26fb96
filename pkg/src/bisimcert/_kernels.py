"""Numba-compiled kernels for batch program evaluation and RK4 stepping.

Semantics mirror program.run_batch_numpy exactly (same status codes, same
branch structure) so the two backends are interchangeable; see
backend.py for how one is selected.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .program import (
    OP_ABS,
    OP_ADD,
    OP_CONST,
    OP_COS,
    OP_DIV,
    OP_EXP,
    OP_MAX,
    OP_MIN,
    OP_MUL,
    OP_NEG,
    OP_POW,
    OP_SIN,
    OP_SQRT,
    OP_SUB,
    OP_TANH,
    OP_VAR,
    STATUS_DOMAIN,
    STATUS_NONDIFF,
    STATUS_OK,
)


@njit(cache=True)
def _eval_one(code, arg, consts, lo, hi, slots, seed_slot, stack, dstack):
    """Evaluate code[lo:hi] on one slot vector; returns (v, d, status)."""
    want_d = seed_slot >= 0
    sp = 0
    st = STATUS_OK
    for i in range(lo, hi):
        op = code[i]
        a = arg[i]
        if op == OP_CONST:
            stack[sp] = consts[a]
            if want_d:
                dstack[sp] = 0.0
            sp += 1
        elif op == OP_VAR:
            stack[sp] = slots[a]
            if want_d:
                dstack[sp] = 1.0 if a == seed_slot else 0.0
            sp += 1
        elif op == OP_NEG:
            stack[sp - 1] = -stack[sp - 1]
            if want_d:
                dstack[sp - 1] = -dstack[sp - 1]
        elif op == OP_SIN:
            v = stack[sp - 1]
            if want_d:
                dstack[sp - 1] *= np.cos(v)
            stack[sp - 1] = np.sin(v)
        elif op == OP_COS:
            v = stack[sp - 1]
            if want_d:
                dstack[sp - 1] *= -np.sin(v)
            stack[sp - 1] = np.cos(v)
        elif op == OP_EXP:
            v = np.exp(stack[sp - 1])
            stack[sp - 1] = v
            if want_d:
                dstack[sp - 1] *= v
        elif op == OP_TANH:
            v = np.tanh(stack[sp - 1])
            stack[sp - 1] = v
            if want_d:
                dstack[sp - 1] *= 1.0 - v * v
        elif op == OP_SQRT:
            v = stack[sp - 1]
            if v < 0.0:
                if st == STATUS_OK:
                    st = STATUS_DOMAIN
                v = 0.0
            elif v == 0.0 and want_d:
                if st == STATUS_OK:
                    st = STATUS_NONDIFF
            r = np.sqrt(v)
            if want_d:
                dstack[sp - 1] *= 0.5 / (r if r != 0.0 else 1.0)
            stack[sp - 1] = r
        elif op == OP_ABS:
            v = stack[sp - 1]
            if want_d:
                if v == 0.0:
                    if st == STATUS_OK:
                        st = STATUS_NONDIFF
                    dstack[sp - 1] = 0.0
                elif v < 0.0:
                    dstack[sp - 1] = -dstack[sp - 1]
            stack[sp - 1] = abs(v)
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
                dstack[sp - 2] = dstack[sp - 2] * stack[sp - 1] + stack[sp - 2] * dstack[sp - 1]
            stack[sp - 2] *= stack[sp - 1]
            sp -= 1
        elif op == OP_DIV:
            va = stack[sp - 2]
            vb = stack[sp - 1]
            if vb == 0.0:
                if st == STATUS_OK:
                    st = STATUS_DOMAIN
                vb = 1.0
            if want_d:
                dstack[sp - 2] = (dstack[sp - 2] * vb - va * dstack[sp - 1]) / (vb * vb)
            stack[sp - 2] = va / vb
            sp -= 1
        elif op == OP_POW:
            va = stack[sp - 2]
            vb = stack[sp - 1]
            b_integer = vb == np.floor(vb)
            if (va == 0.0 and vb < 0.0) or (va < 0.0 and not b_integer):
                if st == STATUS_OK:
                    st = STATUS_DOMAIN
                v = 0.0
            else:
                v = va ** vb
            if want_d:
                da = dstack[sp - 2]
                db = dstack[sp - 1]
                if db != 0.0:
                    if va <= 0.0:
                        if st == STATUS_OK:
                            st = STATUS_DOMAIN
                        d = 0.0
                    else:
                        d = v * (db * np.log(va) + vb * da / va)
                elif vb == 0.0:
                    d = 0.0
                elif va == 0.0:
                    if vb < 1.0:
                        if st == STATUS_OK:
                            st = STATUS_NONDIFF
                        d = 0.0
                    elif vb == 1.0:
                        d = da
                    else:
                        d = 0.0
                else:
                    d = vb * va ** (vb - 1.0) * da
                dstack[sp - 2] = d
            stack[sp - 2] = v
            sp -= 1
        elif op == OP_MIN or op == OP_MAX:
            k = a
            base = sp - k
            best = stack[base]
            for j in range(1, k):
                x = stack[base + j]
                if op == OP_MIN:
                    if x < best:
                        best = x
                else:
                    if x > best:
                        best = x
            if want_d:
                hits = 0
                dbest = 0.0
                for j in range(k):
                    if stack[base + j] == best:
                        hits += 1
                        dbest = dstack[base + j]
                if hits > 1:
                    if st == STATUS_OK:
                        st = STATUS_NONDIFF
                dstack[base] = dbest
            stack[base] = best
            sp = base + 1
    d0 = dstack[0] if want_d else 0.0
    return stack[0], d0, st


@njit(cache=True)
def run_batch(code, arg, consts, stack_size, X, seed_slot):
    """Evaluate one program at every row of X.  Returns (v, d, status)."""
    N = X.shape[0]
    values = np.empty(N)
    derivs = np.zeros(N)
    status = np.zeros(N, dtype=np.int8)
    stack = np.empty(stack_size)
    dstack = np.empty(stack_size)
    for i in range(N):
        v, d, st = _eval_one(
            code, arg, consts, 0, len(code), X[i], seed_slot, stack, dstack
        )
        values[i] = v
        derivs[i] = d
        status[i] = st
    return values, derivs, status


@njit(cache=True)
def rk4_integrate(
    code_f, arg_f, off_f, consts_f, stack_f,
    code_s, arg_s, off_s, consts_s, stack_s,
    x0, h, nsteps,
):
    """Classical RK4 over compiled field/signal programs.

    Field programs read slots [x (n), u (m)]; signal programs read slot
    [t].  Returns (states, inputs, status, bad_step); nonzero status
    aborts at bad_step.
    """
    n = len(off_f) - 1
    m = len(off_s) - 1
    states = np.zeros((nsteps + 1, n))
    inputs = np.zeros((nsteps + 1, m))
    slots = np.empty(n + m)
    tslot = np.empty(1)
    stack = np.empty(max(stack_f, stack_s))
    dstack = np.empty(1)
    u0 = np.empty(m)
    u1 = np.empty(m)
    u2 = np.empty(m)
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)

    states[0] = x0
    for step in range(nsteps):
        t = step * h
        x = states[step]

        for phase in range(3):
            tslot[0] = t + 0.5 * h * phase
            u = u0 if phase == 0 else (u1 if phase == 1 else u2)
            for j in range(m):
                v, _, st = _eval_one(
                    code_s, arg_s, consts_s, off_s[j], off_s[j + 1], tslot, -1, stack, dstack
                )
                if st != 0:
                    return states, inputs, st, step
                u[j] = v
        inputs[step] = u0

        for stage in range(4):
            if stage == 0:
                for j in range(n):
                    slots[j] = x[j]
                for j in range(m):
                    slots[n + j] = u0[j]
                kk = k1
            elif stage == 1:
                for j in range(n):
                    slots[j] = x[j] + 0.5 * h * k1[j]
                for j in range(m):
                    slots[n + j] = u1[j]
                kk = k2
            elif stage == 2:
                for j in range(n):
                    slots[j] = x[j] + 0.5 * h * k2[j]
                for j in range(m):
                    slots[n + j] = u1[j]
                kk = k3
            else:
                for j in range(n):
                    slots[j] = x[j] + h * k3[j]
                for j in range(m):
                    slots[n + j] = u2[j]
                kk = k4
            for j in range(n):
                v, _, st = _eval_one(
                    code_f, arg_f, consts_f, off_f[j], off_f[j + 1], slots, -1, stack, dstack
                )
                if st != 0:
                    return states, inputs, st, step
                kk[j] = v

        ok = True
        for j in range(n):
            nxt = x[j] + (h / 6.0) * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
            if not np.isfinite(nxt):
                ok = False
            states[step + 1, j] = nxt
        if not ok:
            return states, inputs, 3, step

    tslot[0] = nsteps * h
    for j in range(m):
        v, _, st = _eval_one(
            code_s, arg_s, consts_s, off_s[j], off_s[j + 1], tslot, -1, stack, dstack
        )
        if st != 0:
            return states, inputs, st, nsteps
        inputs[nsteps, j] = v
    return states, inputs, 0, -1
