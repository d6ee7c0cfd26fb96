"""Fixed-step RK4 integration of systems under scripted input signals.

The step count is round(T/h) so the last grid time is within h/2 of the
horizon; times are exactly k*h.  Integration is deterministic: the same
(system, x0, signal, h, T) always yields a bit-identical trajectory on a
given backend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .backend import backend_name
from .errors import DimensionError, EvalError
from .model import System
from .program import compile_expr, stack_programs
from .backend import run_batch

_T_FAMILY = {"t": 1}


@dataclass(frozen=True)
class InputSignal:
    """Open-loop input: one expression of t per input component."""

    components: tuple[ex.Expr, ...]
    label: str = ""

    def __post_init__(self):
        for i, e in enumerate(self.components):
            extra = ex.variables(e) - {("t", 0)}
            if extra:
                raise DimensionError(
                    f"input signal '{self.label}' component {i} may only "
                    f"reference t, found {sorted(extra)}"
                )

    @property
    def m(self) -> int:
        return len(self.components)

    @classmethod
    def parse(cls, sources, label: str = "") -> "InputSignal":
        return cls(tuple(ex.parse(s, _T_FAMILY) for s in sources), label)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray  # (K,)
    states: np.ndarray  # (K, n)
    inputs: np.ndarray  # (K, m)


def _nsteps(h: float, T: float) -> int:
    if h <= 0.0:
        raise DimensionError(f"step must be positive, got h={h}")
    if T < 0.0:
        raise DimensionError(f"horizon must be >= 0, got T={T}")
    if T == 0.0:
        return 0
    if h > T:
        raise DimensionError(f"step h={h} exceeds horizon T={T}")
    return int(math.floor(T / h + 0.5))


def _signal_at(sig: InputSignal, t: float) -> np.ndarray:
    env = {"t": (t,)}
    out = np.empty(sig.m)
    for j, e in enumerate(sig.components):
        try:
            out[j] = ex.evaluate(e, env)
        except EvalError as err:
            raise EvalError(f"input component {j} at t={t}: {err}") from err
    return out


def _field_at(s: System, x, u, t: float) -> np.ndarray:
    env = {"x": x, "u": u}
    out = np.empty(s.n)
    for j, e in enumerate(s.field):
        try:
            out[j] = ex.evaluate(e, env)
        except EvalError as err:
            raise EvalError(f"field component {j} at t={t}: {err}") from err
    return out


def _integrate_py(s: System, x0, sig: InputSignal, h: float, nsteps: int) -> tuple:
    states = np.zeros((nsteps + 1, s.n))
    inputs = np.zeros((nsteps + 1, sig.m))
    states[0] = x0
    for step in range(nsteps):
        t = step * h
        x = states[step]
        u0 = _signal_at(sig, t)
        u1 = _signal_at(sig, t + 0.5 * h)
        u2 = _signal_at(sig, t + h)
        inputs[step] = u0
        k1 = _field_at(s, x, u0, t)
        k2 = _field_at(s, x + 0.5 * h * k1, u1, t + 0.5 * h)
        k3 = _field_at(s, x + 0.5 * h * k2, u1, t + 0.5 * h)
        k4 = _field_at(s, x + h * k3, u2, t + h)
        nxt = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(nxt)):
            raise EvalError(f"state became non-finite at t={t + h} (divergence)")
        states[step + 1] = nxt
    inputs[nsteps] = _signal_at(sig, nsteps * h)
    return states, inputs


def integrate(s: System, x0, sig: InputSignal, h: float, T: float) -> Trajectory:
    """Classical 4th-order Runge-Kutta with fixed step h.

    Inputs are evaluated exactly at the stage times t, t+h/2, t+h.
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (s.n,):
        raise DimensionError(f"x0 has shape {x0.shape}, expected ({s.n},)")
    if sig.m != s.m:
        raise DimensionError(
            f"signal has {sig.m} components, system '{s.name}' expects m={s.m}"
        )
    nsteps = _nsteps(h, T)
    times = np.arange(nsteps + 1) * h

    if backend_name() == "numba":
        from . import _kernels

        layout = {"x": s.n, "u": s.m}
        code_f, arg_f, off_f, consts_f, stack_f = stack_programs(
            [compile_expr(e, layout) for e in s.field]
        )
        code_s, arg_s, off_s, consts_s, stack_s = stack_programs(
            [compile_expr(e, _T_FAMILY) for e in sig.components]
        )
        states, inputs, status, bad_step = _kernels.rk4_integrate(
            code_f, arg_f, off_f, consts_f, stack_f,
            code_s, arg_s, off_s, consts_s, stack_s,
            x0, h, nsteps,
        )
        if status != 0:
            # rare path: redo in pure Python for a precise error message
            _integrate_py(s, x0, sig, h, nsteps)
            raise EvalError(f"integration failed at step {bad_step} (t={bad_step * h})")
    else:
        states, inputs = _integrate_py(s, x0, sig, h, nsteps)
    return Trajectory(times=times, states=states, inputs=inputs)


def sup_input_gap(sig_a: InputSignal, sig_b: InputSignal, h: float, T: float) -> float:
    """Max over the half-step grid (stage midpoints included) of the
    Euclidean norm of the pointwise signal difference.

    A grid approximation of the true sup over [0, T].
    """
    if sig_a.m != sig_b.m:
        raise DimensionError(
            f"signals have different component counts: {sig_a.m} vs {sig_b.m}"
        )
    if sig_a.m == 0:
        return 0.0
    nsteps = _nsteps(h, T)
    times = np.arange(2 * nsteps + 1) * (0.5 * h)
    X = times.reshape(-1, 1)
    sq = np.zeros(len(times))
    for ea, eb in zip(sig_a.components, sig_b.components):
        for e, sign in ((ea, 1.0), (eb, -1.0)):
            v, _, status = run_batch(compile_expr(e, _T_FAMILY), X)
            if np.any(status != 0):
                k = int(np.argmax(status != 0))
                raise EvalError(f"signal evaluation failed at t={times[k]}")
            if sign > 0:
                comp = v
            else:
                comp = comp - v
        sq += comp * comp
    return float(np.max(np.sqrt(sq)))
