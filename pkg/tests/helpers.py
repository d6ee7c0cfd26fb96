"""Shared generators for the test suite: random smooth DSL expressions
(for derivative cross-checks) and linear scalar subsystems with their
hand-derived certificates (the closed-form oracle family)."""

import math

import numpy as np

import bisimcert as bc
from bisimcert import expr as ex


def _const(rng, scale):
    # keep constants nonnegative so generated trees stay within what the
    # parser itself can produce (negation is the unary neg node)
    node = ex.Const(round(rng.uniform(0.0, scale), 3))
    if rng.random() < 0.5:
        return ex.Unary("neg", node)
    return node


def random_smooth_expr(rng, n_vars, depth=3):
    """Random expression over x[0..n_vars-1] that is smooth and bounded
    enough on [-2, 2]^n for finite-difference comparison: div and sqrt
    are guarded away from their singularities and exp arguments stay
    bounded via tanh."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.4:
            return _const(rng, 2.0)
        return ex.Var("x", int(rng.integers(n_vars)))
    choice = rng.integers(9)
    sub = lambda: random_smooth_expr(rng, n_vars, depth - 1)
    if choice == 0:
        return ex.Binary("add", sub(), sub())
    if choice == 1:
        return ex.Binary("sub", sub(), sub())
    if choice == 2:
        return ex.Binary("mul", sub(), sub())
    if choice == 3:
        # denominator >= 1 everywhere
        denom = ex.Binary("add", ex.Binary("pow", sub(), ex.Const(2.0)),
                          ex.Const(round(rng.uniform(1.0, 3.0), 3)))
        return ex.Binary("div", sub(), denom)
    if choice == 4:
        return ex.Unary("sin", sub())
    if choice == 5:
        return ex.Unary("cos", sub())
    if choice == 6:
        return ex.Unary("tanh", sub())
    if choice == 7:
        arg = ex.Binary("mul", _const(rng, 1.5),
                        ex.Unary("tanh", sub()))
        return ex.Unary("exp", arg)
    # sqrt of something >= 0.5
    return ex.Unary("sqrt", ex.Binary("add", ex.Binary("pow", sub(), ex.Const(2.0)),
                                      ex.Const(round(rng.uniform(0.5, 2.0), 3))))


def random_expr_any(rng, n_vars, depth=3):
    """Random expression that may also use the piecewise-smooth operators;
    used to cross-check the batch backends against the tree walker."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.35:
            return _const(rng, 2.0)
        return ex.Var("x", int(rng.integers(n_vars)))
    sub = lambda: random_expr_any(rng, n_vars, depth - 1)
    choice = rng.integers(12)
    if choice < 9:
        smooth = random_smooth_expr(rng, n_vars, depth)
        return smooth
    if choice == 9:
        return ex.Unary("abs", sub())
    if choice == 10:
        return ex.MinMax("min", (sub(), sub()))
    return ex.MinMax("max", (sub(), sub(), sub()))


def linear_subsystem(name, a, b, c):
    """dx = -a x + b v + c w with scalar state and inputs."""
    fams = {"x": 1, "v": 1, "w": 1}
    a, b, c = float(a), float(b), float(c)
    field = bc.parse(f"-{a!r}*x[0] + {b!r}*v[0] + {c!r}*w[0]", fams)
    return bc.Subsystem(name, n=1, p=1, q=1, field=(field,))


ABS_V = "abs(x[0] - xp[0])"


def oracle_certificate(a, b, c):
    """Hand-derived certificate for the linear scalar subsystem above:
    V = |x - x'|, lambda = a, gamma = sqrt(b^2 + c^2) (Cauchy-Schwarz on
    the input term)."""
    v = bc.parse(ABS_V, {"x": 1, "xp": 1})
    return bc.Certificate(V=v, lam=a, gamma=math.hypot(b, c), n=1, m=2)


def random_small_gain_pair(rng, margin=0.05):
    """Draw (subsystem, certificate) pairs with a_i in [0.5, 5] and
    b_i, c_i in [0, 2] until the small-gain ratio clears the margin."""
    while True:
        a1, a2 = rng.uniform(0.5, 5.0, 2)
        b1, c1, b2, c2 = rng.uniform(0.0, 2.0, 4)
        s1 = linear_subsystem("s1", a1, b1, c1)
        s2 = linear_subsystem("s2", a2, b2, c2)
        cert1 = oracle_certificate(a1, b1, c1)
        cert2 = oracle_certificate(a2, b2, c2)
        if bc.small_gain_ratio(cert1, cert2) <= 1.0 - margin:
            return s1, cert1, s2, cert2


def fd_gradient(e, env, step=1e-6):
    """Central finite differences with respect to family x."""
    base = np.asarray(env["x"], dtype=float)
    out = np.empty(len(base))
    for i in range(len(base)):
        hi = base.copy()
        lo = base.copy()
        hi[i] += step
        lo[i] -= step
        out[i] = (bc.evaluate(e, {**env, "x": hi}) - bc.evaluate(e, {**env, "x": lo})) / (2 * step)
    return out
