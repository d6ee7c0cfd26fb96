"""Sampling falsifier for certificate conditions and the trajectory-pair
funnel bound.

Passing here means "no counterexample found in N samples": evidence, not
proof.  Results are a deterministic function of (seed, N): samples are
drawn from one PCG64 stream in index order, so a violation found at
sample i is found again for any larger N with the same seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import config
from .backend import run_batch
from .certify import Certificate
from .errors import DimensionError, EvalError
from .model import System
from .program import STATUS_DOMAIN, STATUS_NONDIFF, compile_expr
from .sim import InputSignal, integrate, sup_input_gap


def _interval_list(bounds, dim, what):
    out = []
    for lo, hi in bounds:
        lo, hi = float(lo), float(hi)
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
            raise DimensionError(f"bad {what} interval ({lo}, {hi})")
        out.append((lo, hi))
    if len(out) != dim:
        raise DimensionError(f"{what} needs {dim} intervals, got {len(out)}")
    return tuple(out)


@dataclass(frozen=True)
class SampleBox:
    """Uniform sampling domain for (x, x', u, u') with count and seed."""

    x_bounds: tuple
    xp_bounds: tuple
    u_bounds: tuple
    up_bounds: tuple
    n_samples: int = config.DEFAULT_SAMPLES
    seed: int = config.DEFAULT_SEED

    def __post_init__(self):
        if self.n_samples < 1:
            raise DimensionError(f"need n_samples >= 1, got {self.n_samples}")

    @classmethod
    def cube(cls, n: int, m: int, lo: float = config.DEFAULT_BOX_LO,
             hi: float = config.DEFAULT_BOX_HI,
             n_samples: int = config.DEFAULT_SAMPLES,
             seed: int = config.DEFAULT_SEED) -> "SampleBox":
        iv = ((lo, hi),)
        return cls(iv * n, iv * n, iv * m, iv * m, n_samples, seed)


@dataclass(frozen=True)
class Violation:
    kind: str  # cond1 | cond2 | bound
    witness: dict
    lhs: float
    rhs: float
    margin: float
    time: Optional[float] = None
    index: Optional[int] = None

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "witness": self.witness,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin,
        }
        if self.time is not None:
            out["time"] = self.time
        if self.index is not None:
            out["index"] = self.index
        return out


@dataclass(frozen=True)
class CheckReport:
    kind: str
    passed: bool
    n_samples: int
    n_resampled: int
    max_margin: float
    first: Optional[Violation] = None
    worst: Optional[Violation] = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "passed": self.passed,
            "n_samples": self.n_samples,
            "n_resampled": self.n_resampled,
            "max_margin": self.max_margin,
            "first_violation": self.first.to_dict() if self.first else None,
            "worst_violation": self.worst.to_dict() if self.worst else None,
        }


@dataclass(frozen=True)
class Envelope:
    """Decay bound eta(t) = exp(-lambda t) V0 + (gamma/lambda) u_gap."""

    times: np.ndarray
    values: np.ndarray


def _bounds_arrays(*bound_groups):
    los, his = [], []
    for bounds in bound_groups:
        for lo, hi in bounds:
            los.append(lo)
            his.append(hi)
    return np.array(los), np.array(his)


def check_cond1(cert: Certificate, box: SampleBox,
                tol: float = config.TOL_COND) -> CheckReport:
    """Sample pairs (x, x') looking for ||x - x'|| > V(x, x') + tol."""
    n = cert.n
    _interval_list(box.x_bounds, n, "x")
    _interval_list(box.xp_bounds, n, "xp")
    lo, hi = _bounds_arrays(box.x_bounds, box.xp_bounds)
    rng = np.random.default_rng(box.seed)
    S = rng.uniform(lo, hi, (box.n_samples, 2 * n))

    prog = compile_expr(cert.V, {"x": n, "xp": n})
    v, _, status = run_batch(prog, S)
    if np.any(status != 0):
        k = int(np.argmax(status != 0))
        raise EvalError(
            f"V not evaluable at sampled point x={S[k, :n].tolist()}, "
            f"xp={S[k, n:].tolist()}"
        )
    gap = np.linalg.norm(S[:, :n] - S[:, n:], axis=1)
    margin = gap - v
    return _sample_report("cond1", S, margin, gap, v, tol, 0,
                          lambda row: {"x": row[:n].tolist(), "xp": row[n:].tolist()})


def _sample_report(kind, S, margin, lhs, rhs, tol, n_resampled, witness_of):
    viol = margin > tol
    max_margin = float(np.max(margin))
    if not np.any(viol):
        return CheckReport(kind, True, S.shape[0], n_resampled, max_margin)

    def mk(i):
        return Violation(
            kind=kind,
            witness=witness_of(S[i]),
            lhs=float(lhs[i]),
            rhs=float(rhs[i]),
            margin=float(margin[i]),
            index=int(i),
        )

    first = mk(int(np.argmax(viol)))
    worst = mk(int(np.argmax(margin)))
    return CheckReport(kind, False, S.shape[0], n_resampled, max_margin,
                       first=first, worst=worst)


def check_cond2(cert: Certificate, s: System, box: SampleBox,
                tol: float = config.TOL_COND) -> CheckReport:
    """Sample tuples (x, x', u, u') looking for

        dV/dx . f(x,u) + dV/dx' . f(x',u')
            > -lambda V(x,x') + gamma ||u - u'|| + tol.

    Samples landing on a non-differentiable point of V are redrawn
    (budget: RESAMPLE_FACTOR * N), so piecewise-smooth V like |x - x'|
    are checked wherever the derivative exists.
    """
    n, m = cert.n, cert.m
    if s.n != n or s.m != m:
        raise DimensionError(
            f"certificate is for (n={n}, m={m}) but system '{s.name}' "
            f"has (n={s.n}, m={s.m})"
        )
    _interval_list(box.x_bounds, n, "x")
    _interval_list(box.xp_bounds, n, "xp")
    _interval_list(box.u_bounds, m, "u")
    _interval_list(box.up_bounds, m, "up")
    lo, hi = _bounds_arrays(box.x_bounds, box.xp_bounds, box.u_bounds, box.up_bounds)
    d = 2 * n + 2 * m

    v_prog = compile_expr(cert.V, {"x": n, "xp": n})
    f_progs = [compile_expr(e, {"x": n, "u": m}) for e in s.field]

    def evaluate_rows(S):
        x, xp = S[:, :n], S[:, n:2 * n]
        u, up = S[:, 2 * n:2 * n + m], S[:, 2 * n + m:]
        Xv = np.hstack([x, xp])
        Xf = np.hstack([x, u])
        Xfp = np.hstack([xp, up])
        status = np.zeros(S.shape[0], dtype=np.int8)

        def merge(st):
            # domain errors outrank nondifferentiable ties
            np.copyto(status, st, where=(st != 0) & (status != STATUS_DOMAIN))

        v, _, st = run_batch(v_prog, Xv)
        merge(st)
        lhs = np.zeros(S.shape[0])
        for j in range(n):
            _, dvx, st = run_batch(v_prog, Xv, seed_slot=j)
            merge(st)
            _, dvxp, st = run_batch(v_prog, Xv, seed_slot=n + j)
            merge(st)
            fj, _, st = run_batch(f_progs[j], Xf)
            merge(st)
            fjp, _, st = run_batch(f_progs[j], Xfp)
            merge(st)
            lhs += dvx * fj + dvxp * fjp
        rhs = -cert.lam * v + cert.gamma * np.linalg.norm(u - up, axis=1)
        return lhs, rhs, status

    rng = np.random.default_rng(box.seed)
    N = box.n_samples
    S = rng.uniform(lo, hi, (N, d))
    lhs, rhs, status = evaluate_rows(S)

    n_resampled = 0
    budget = config.RESAMPLE_FACTOR * N
    while True:
        bad = np.flatnonzero(status == STATUS_NONDIFF)
        if len(bad) == 0:
            break
        if n_resampled + len(bad) > budget:
            raise EvalError(
                f"resample budget exhausted ({budget} redraws): V is "
                "non-differentiable on too much of the sampling box"
            )
        n_resampled += len(bad)
        fresh = rng.uniform(lo, hi, (len(bad), d))
        S[bad] = fresh
        l2, r2, st2 = evaluate_rows(fresh)
        lhs[bad], rhs[bad], status[bad] = l2, r2, st2

    if np.any(status == STATUS_DOMAIN):
        k = int(np.argmax(status == STATUS_DOMAIN))
        raise EvalError(
            f"evaluation error at sampled point x={S[k, :n].tolist()}, "
            f"xp={S[k, n:2 * n].tolist()}, u={S[k, 2 * n:2 * n + m].tolist()}, "
            f"up={S[k, 2 * n + m:].tolist()}"
        )

    margin = lhs - rhs

    def witness(row):
        return {
            "x": row[:n].tolist(),
            "xp": row[n:2 * n].tolist(),
            "u": row[2 * n:2 * n + m].tolist(),
            "up": row[2 * n + m:].tolist(),
        }

    return _sample_report("cond2", S, margin, lhs, rhs, tol, n_resampled, witness)


def envelope(cert: Certificate, v0: float, u_gap: float, times) -> Envelope:
    """Tabulate the decay bound on a time grid."""
    if v0 < 0.0 or u_gap < 0.0:
        raise DimensionError("v0 and u_gap must be nonnegative")
    times = np.asarray(times, dtype=float)
    values = np.exp(-cert.lam * times) * v0 + (cert.gamma / cert.lam) * u_gap
    return Envelope(times=times, values=values)


@dataclass(frozen=True)
class BoundReport:
    passed: bool
    violation: Optional[Violation]
    times: np.ndarray
    states: np.ndarray
    states_p: np.ndarray
    gaps: np.ndarray
    v_values: np.ndarray
    eta: np.ndarray
    v0: float
    u_gap: float


def check_bound(cert: Certificate, s: System, x0, x0p,
                sig_u: InputSignal, sig_up: InputSignal,
                h: float, T: float, tol: Optional[float] = None) -> BoundReport:
    """Integrate both trajectories and check the chain

        ||x(t) - x'(t)|| <= V(x(t), x'(t)) <= eta(t)

    at every grid point, where eta uses V0 = V(x0, x0') and the grid sup
    of the input gap.  The default tolerance absorbs RK4 and grid-sup
    error (config.tol_bound)."""
    if tol is None:
        tol = config.tol_bound(h)
    if s.n != cert.n or s.m != cert.m:
        raise DimensionError(
            f"certificate is for (n={cert.n}, m={cert.m}) but system "
            f"'{s.name}' has (n={s.n}, m={s.m})"
        )
    traj = integrate(s, x0, sig_u, h, T)
    traj_p = integrate(s, x0p, sig_up, h, T)

    prog = compile_expr(cert.V, {"x": s.n, "xp": s.n})
    X = np.hstack([traj.states, traj_p.states])
    v, _, status = run_batch(prog, X)
    if np.any(status != 0):
        k = int(np.argmax(status != 0))
        raise EvalError(f"V not evaluable along trajectory at t={traj.times[k]}")

    gaps = np.linalg.norm(traj.states - traj_p.states, axis=1)
    u_gap = sup_input_gap(sig_u, sig_up, h, T)
    v0 = float(v[0])
    env = envelope(cert, v0, u_gap, traj.times)

    viol_gap = gaps > v + tol
    viol_eta = v > env.values + tol
    violation = None
    bad = np.flatnonzero(viol_gap | viol_eta)
    if len(bad) > 0:
        k = int(bad[0])
        if viol_gap[k]:
            lhs, rhs, which = float(gaps[k]), float(v[k]), "state gap exceeds V"
        else:
            lhs, rhs, which = float(v[k]), float(env.values[k]), "V exceeds envelope"
        violation = Violation(
            kind="bound",
            witness={
                "which": which,
                "x": traj.states[k].tolist(),
                "xp": traj_p.states[k].tolist(),
            },
            lhs=lhs,
            rhs=rhs,
            margin=lhs - rhs,
            time=float(traj.times[k]),
            index=k,
        )
    return BoundReport(
        passed=violation is None,
        violation=violation,
        times=traj.times,
        states=traj.states,
        states_p=traj_p.states,
        gaps=gaps,
        v_values=v,
        eta=env.values,
        v0=v0,
        u_gap=u_gap,
    )
