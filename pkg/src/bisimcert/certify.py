"""Bisimulation-function certificates and their small-gain composition.

A certificate for a system is a function V(x, x') together with constants
lambda > 0 and gamma >= 0 such that

    ||x - x'|| <= V(x, x')                                     (cond 1)
    dV/dx . f(x,u) + dV/dx' . f(x',u') <= -lambda V + gamma ||u - u'||  (cond 2)

Two certificates compose across an interconnection whenever
gamma1*gamma2 / (lambda1*lambda2) < 1; the composite is
V = alpha1 V1 + alpha2 V2 with weights satisfying four inequalities.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import expr as ex
from .config import EPS_FEAS
from .errors import DimensionError, SmallGainError


@dataclass(frozen=True)
class Certificate:
    """Candidate bisimulation function with its decay/gain constants.

    V is an expression over families x (len n) and xp (len n); m is the
    input dimension of the certified system.
    """

    V: ex.Expr
    lam: float
    gamma: float
    n: int
    m: int

    def __post_init__(self):
        if not self.lam > 0.0:
            raise SmallGainError(f"certificate needs lambda > 0, got {self.lam}")
        if self.gamma < 0.0:
            raise SmallGainError(f"certificate needs gamma >= 0, got {self.gamma}")
        for fam, idx in ex.variables(self.V):
            if fam not in ("x", "xp") or idx >= self.n:
                raise DimensionError(
                    f"certificate V references {fam}[{idx}], "
                    f"allowed are x[0..{self.n - 1}] and xp[0..{self.n - 1}]"
                )


@dataclass(frozen=True)
class CompositionWeights:
    alpha1: float
    alpha2: float


def small_gain_ratio(c1: Certificate, c2: Certificate) -> float:
    """gamma1*gamma2 / (lambda1*lambda2); composition is feasible iff < 1."""
    return (c1.gamma * c2.gamma) / (c1.lam * c2.lam)


def validate_alphas(w: CompositionWeights, c1: Certificate, c2: Certificate,
                    eps: float = EPS_FEAS) -> list[str]:
    """Check the four feasibility inequalities.

    Returns the list of violated ones (empty = pass).  The strict
    inequalities are required to clear ``eps`` so floating-point boundary
    cases fail deterministically.
    """
    a1, a2 = w.alpha1, w.alpha2
    violations = []
    if not a1 >= 1.0:
        violations.append(f"alpha1 >= 1 violated (alpha1 = {a1})")
    if not a2 >= 1.0:
        violations.append(f"alpha2 >= 1 violated (alpha2 = {a2})")
    s1 = a1 * c1.lam - a2 * c2.gamma
    if not s1 > eps:
        violations.append(
            f"alpha1*lambda1 - alpha2*gamma2 > 0 violated (slack = {s1})"
        )
    s2 = a2 * c2.lam - a1 * c1.gamma
    if not s2 > eps:
        violations.append(
            f"alpha2*lambda2 - alpha1*gamma1 > 0 violated (slack = {s2})"
        )
    return violations


def select_alphas(c1: Certificate, c2: Certificate) -> CompositionWeights:
    """Pick composition weights by the three-case rule, taking the midpoint
    where a whole open interval is admissible.

    With a zero gain the admissible interval is unbounded above; we then
    take twice its lower end (any point works, and the choice of point is
    deliberately pluggable: pass explicit weights to compose instead).
    """
    l1, g1 = c1.lam, c1.gamma
    l2, g2 = c2.lam, c2.gamma
    ratio = small_gain_ratio(c1, c2)
    if ratio >= 1.0:
        raise SmallGainError(
            f"small-gain condition fails: gamma1*gamma2/(lambda1*lambda2) = {ratio} >= 1"
        )
    case1 = l1 <= g2
    case2 = l2 <= g1
    if case1 and case2:
        # impossible under ratio < 1; reaching here means inconsistent inputs
        raise SmallGainError(
            "inconsistent case analysis: lambda1 <= gamma2 and lambda2 <= gamma1 "
            f"cannot both hold when the small-gain ratio is {ratio} < 1"
        )
    if case1:
        lo = g2 / l1
        if g1 == 0.0:
            w = CompositionWeights(2.0 * lo, 1.0)
        else:
            w = CompositionWeights((lo + l2 / g1) / 2.0, 1.0)
    elif case2:
        lo = g1 / l2
        if g2 == 0.0:
            w = CompositionWeights(1.0, 2.0 * lo)
        else:
            w = CompositionWeights(1.0, (lo + l1 / g2) / 2.0)
    else:
        w = CompositionWeights(1.0, 1.0)
    bad = validate_alphas(w, c1, c2)
    if bad:
        raise SmallGainError(
            "selected weights fail validation (degenerate inputs?): " + "; ".join(bad)
        )
    return w


def compose(c1: Certificate, c2: Certificate, w: CompositionWeights) -> Certificate:
    """Build the composite certificate alpha1 V1 + alpha2 V2 with

        lambda = min((a1 l1 - a2 g2)/a1, (a2 l2 - a1 g1)/a2)
        gamma  = a1 g1 + a2 g2

    The composite V is a real expression tree, so it can be re-verified
    and itself composed again (hierarchical modelling).
    """
    bad = validate_alphas(w, c1, c2)
    if bad:
        raise SmallGainError("invalid composition weights: " + "; ".join(bad))
    n1, n2 = c1.n, c2.n
    q1 = c1.m - n2
    q2 = c2.m - n1
    if q1 < 0 or q2 < 0:
        raise DimensionError(
            f"certificate input dims do not match an interconnection: "
            f"m1={c1.m} < n2={n2}" if q1 < 0 else
            f"certificate input dims do not match an interconnection: "
            f"m2={c2.m} < n1={n1}"
        )

    map1 = {("x", i): ("x", i) for i in range(n1)}
    map1.update({("xp", i): ("xp", i) for i in range(n1)})
    map2 = {("x", i): ("x", n1 + i) for i in range(n2)}
    map2.update({("xp", i): ("xp", n1 + i) for i in range(n2)})

    v = ex.Binary(
        "add",
        ex.Binary("mul", ex.Const(w.alpha1), ex.rename_vars(c1.V, map1)),
        ex.Binary("mul", ex.Const(w.alpha2), ex.rename_vars(c2.V, map2)),
    )
    lam = min(
        (w.alpha1 * c1.lam - w.alpha2 * c2.gamma) / w.alpha1,
        (w.alpha2 * c2.lam - w.alpha1 * c1.gamma) / w.alpha2,
    )
    gamma = w.alpha1 * c1.gamma + w.alpha2 * c2.gamma
    return Certificate(V=v, lam=lam, gamma=gamma, n=n1 + n2, m=q1 + q2)


def alpha_feasible_region_grid(c1: Certificate, c2: Certificate,
                               resolution: int = 200, alpha_max: float = 50.0,
                               eps: float = EPS_FEAS):
    """Exhaustively test the four weight inequalities on a grid over
    [1, alpha_max]^2.

    Independent oracle for the small-gain case analysis: empty when the
    ratio is >= 1, and contains the selected weights (up to grid rounding)
    when it is < 1.
    """
    if resolution < 2:
        raise ValueError("grid resolution must be >= 2 per axis")
    axis = np.linspace(1.0, alpha_max, resolution)
    a1, a2 = np.meshgrid(axis, axis, indexing="ij")
    ok = (
        (a1 * c1.lam - a2 * c2.gamma > eps)
        & (a2 * c2.lam - a1 * c1.gamma > eps)
    )
    return list(zip(a1[ok].tolist(), a2[ok].tolist()))
