"""Subsystems with partitioned inputs, their interconnection, and input
re-partitioning for hierarchical composition.

A Subsystem has state x (dim n) and input u = [v, w]: v (dim p) is fed by
the partner's state when interconnecting, w (dim q) stays external.
Interconnecting two subsystems with p1 = n2 and p2 = n1 yields a closed
System over x = [x1, x2], u = [w1, w2]; the substitution is a pure
variable re-indexing on the expression trees, so evaluation through the
System agrees bit-for-bit with evaluating the subsystems directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Sequence

import numpy as np

from . import expr as ex
from .errors import DimensionError


def _check_refs(exprs, limits, owner):
    for i, e in enumerate(exprs):
        for fam, idx in ex.variables(e):
            if fam not in limits:
                raise DimensionError(
                    f"{owner}: component {i} references undeclared family '{fam}'"
                )
            if idx >= limits[fam]:
                raise DimensionError(
                    f"{owner}: component {i} references {fam}[{idx}] "
                    f"but '{fam}' has length {limits[fam]}"
                )


@dataclass(frozen=True)
class Subsystem:
    """Open system dx = f(x, v, w) with interconnection input v and
    external input w."""

    name: str
    n: int
    p: int
    q: int
    field: tuple[ex.Expr, ...]

    def __post_init__(self):
        if self.n < 1 or self.p < 0 or self.q < 0:
            raise DimensionError(
                f"subsystem '{self.name}': need n >= 1, p >= 0, q >= 0 "
                f"(got n={self.n}, p={self.p}, q={self.q})"
            )
        if len(self.field) != self.n:
            raise DimensionError(
                f"subsystem '{self.name}': field has {len(self.field)} components, "
                f"expected n={self.n}"
            )
        _check_refs(self.field, {"x": self.n, "v": self.p, "w": self.q},
                    f"subsystem '{self.name}'")

    @property
    def m(self) -> int:
        return self.p + self.q


@dataclass(frozen=True)
class System:
    """Closed-input-structure system dx = f(x, u)."""

    name: str
    n: int
    m: int
    field: tuple[ex.Expr, ...]
    provenance: str = "atomic"

    def __post_init__(self):
        if self.n < 1 or self.m < 0:
            raise DimensionError(
                f"system '{self.name}': need n >= 1, m >= 0 (got n={self.n}, m={self.m})"
            )
        if len(self.field) != self.n:
            raise DimensionError(
                f"system '{self.name}': field has {len(self.field)} components, "
                f"expected n={self.n}"
            )
        _check_refs(self.field, {"x": self.n, "u": self.m}, f"system '{self.name}'")


@dataclass(frozen=True)
class Interconnection:
    left: Subsystem
    right: Subsystem

    def __post_init__(self):
        problems = []
        if self.left.p != self.right.n:
            problems.append(
                f"left.p={self.left.p} != right.n={self.right.n}"
            )
        if self.right.p != self.left.n:
            problems.append(
                f"right.p={self.right.p} != left.n={self.left.n}"
            )
        if problems:
            raise DimensionError(
                f"cannot interconnect '{self.left.name}' and '{self.right.name}': "
                + "; ".join(problems)
            )


def interconnect(ic: Interconnection) -> System:
    """Close the loop v1 = x2, v2 = x1; the result has state [x1, x2] and
    input [w1, w2]."""
    s1, s2 = ic.left, ic.right
    n1, n2, q1, q2 = s1.n, s2.n, s1.q, s2.q

    map1 = {("x", i): ("x", i) for i in range(n1)}
    map1.update({("v", j): ("x", n1 + j) for j in range(s1.p)})
    map1.update({("w", k): ("u", k) for k in range(q1)})

    map2 = {("x", i): ("x", n1 + i) for i in range(n2)}
    map2.update({("v", j): ("x", j) for j in range(s2.p)})
    map2.update({("w", k): ("u", q1 + k) for k in range(q2)})

    field = tuple(ex.rename_vars(e, map1) for e in s1.field) + tuple(
        ex.rename_vars(e, map2) for e in s2.field
    )
    return System(
        name=f"{s1.name}<->{s2.name}",
        n=n1 + n2,
        m=q1 + q2,
        field=field,
        provenance=f"interconnection({s1.name}, {s2.name})",
    )


def repartition(s: System, v_indices: Sequence[int], w_indices: Sequence[int]) -> Subsystem:
    """Split the input of ``s`` into interconnection part v (u[v_indices])
    and external part w (u[w_indices]); the two lists must partition
    0..m-1."""
    v_indices = list(v_indices)
    w_indices = list(w_indices)
    seen: dict[int, str] = {}
    problems = []
    for label, idxs in (("v", v_indices), ("w", w_indices)):
        for j in idxs:
            if j < 0 or j >= s.m:
                problems.append(f"{label} index {j} out of range for m={s.m}")
            elif j in seen:
                problems.append(f"index {j} assigned to both {seen[j]} and {label}")
            else:
                seen[j] = label
    missing = [j for j in range(s.m) if j not in seen]
    if missing:
        problems.append(f"indices {missing} assigned to neither v nor w")
    if problems:
        raise DimensionError(
            f"bad input partition for system '{s.name}': " + "; ".join(problems)
        )

    mapping = {("x", i): ("x", i) for i in range(s.n)}
    mapping.update({("u", j): ("v", pos) for pos, j in enumerate(v_indices)})
    mapping.update({("u", j): ("w", pos) for pos, j in enumerate(w_indices)})
    return Subsystem(
        name=s.name,
        n=s.n,
        p=len(v_indices),
        q=len(w_indices),
        field=tuple(ex.rename_vars(e, mapping) for e in s.field),
    )


def as_system(sub: Subsystem) -> System:
    """View a subsystem as a closed system with input u = [v, w]."""
    mapping = {("x", i): ("x", i) for i in range(sub.n)}
    mapping.update({("v", j): ("u", j) for j in range(sub.p)})
    mapping.update({("w", k): ("u", sub.p + k) for k in range(sub.q)})
    return System(
        name=sub.name,
        n=sub.n,
        m=sub.m,
        field=tuple(ex.rename_vars(e, mapping) for e in sub.field),
        provenance=f"opened({sub.name})",
    )


def eval_field(s: System, x, u) -> np.ndarray:
    """Componentwise evaluation of the vector field at a single point."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (s.n,):
        raise DimensionError(f"state has shape {x.shape}, expected ({s.n},)")
    if u.shape != (s.m,):
        raise DimensionError(f"input has shape {u.shape}, expected ({s.m},)")
    env = {"x": x, "u": u}
    return np.array([ex.evaluate(e, env) for e in s.field])


def eval_subsystem_field(s: Subsystem, x, v, w) -> np.ndarray:
    """Evaluate an open subsystem's field directly (used to cross-check
    interconnection)."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != (s.n,) or v.shape != (s.p,) or w.shape != (s.q,):
        raise DimensionError(
            f"bad argument shapes for subsystem '{s.name}': "
            f"x{x.shape}, v{v.shape}, w{w.shape}"
        )
    env = {"x": x, "v": v, "w": w}
    return np.array([ex.evaluate(e, env) for e in s.field])
