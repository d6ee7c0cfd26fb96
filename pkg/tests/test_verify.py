import math

import numpy as np
import pytest

import bisimcert as bc
from bisimcert.certify import CompositionWeights
from helpers import ABS_V, linear_subsystem, oracle_certificate, random_small_gain_pair


def abs_cert(lam, gamma, m=1):
    v = bc.parse(ABS_V, {"x": 1, "xp": 1})
    return bc.Certificate(V=v, lam=lam, gamma=gamma, n=1, m=m)


def decay_system():
    return bc.System("decay", 1, 1, (bc.parse("-x[0] + u[0]", {"x": 1, "u": 1}),))


class TestCheckCond1:
    def test_passes_for_generous_v(self):
        v = bc.parse("2*abs(x[0] - xp[0])", {"x": 1, "xp": 1})
        cert = bc.Certificate(v, lam=1.0, gamma=1.0, n=1, m=1)
        rep = bc.check_cond1(cert, bc.SampleBox.cube(1, 1, n_samples=2000))
        assert rep.passed
        assert rep.first is None

    def test_exact_equality_passes(self):
        rep = bc.check_cond1(abs_cert(1, 1), bc.SampleBox.cube(1, 1, n_samples=2000))
        assert rep.passed
        assert rep.max_margin <= 1e-12

    def test_violation_found_and_reported(self):
        v = bc.parse("0.5*abs(x[0] - xp[0])", {"x": 1, "xp": 1})
        cert = bc.Certificate(v, lam=1.0, gamma=1.0, n=1, m=1)
        rep = bc.check_cond1(cert, bc.SampleBox.cube(1, 1, n_samples=2000))
        assert not rep.passed
        w = rep.first.witness
        gap = abs(w["x"][0] - w["xp"][0])
        assert rep.first.lhs == pytest.approx(gap)
        assert rep.first.rhs == pytest.approx(0.5 * gap)
        assert rep.worst.margin >= rep.first.margin

    def test_prefix_property(self):
        v = bc.parse("0.5*abs(x[0] - xp[0])", {"x": 1, "xp": 1})
        cert = bc.Certificate(v, lam=1.0, gamma=1.0, n=1, m=1)
        small = bc.check_cond1(cert, bc.SampleBox.cube(1, 1, n_samples=200, seed=7))
        big = bc.check_cond1(cert, bc.SampleBox.cube(1, 1, n_samples=5000, seed=7))
        assert not small.passed and not big.passed
        assert small.first.index == big.first.index
        assert small.first.witness == big.first.witness

    def test_unevaluable_v_raises(self):
        v = bc.parse("sqrt(x[0] - xp[0])", {"x": 1, "xp": 1})
        cert = bc.Certificate(v, lam=1.0, gamma=0.0, n=1, m=1)
        with pytest.raises(bc.EvalError, match="not evaluable"):
            bc.check_cond1(cert, bc.SampleBox.cube(1, 1, n_samples=100))


class TestCheckCond2:
    def test_oracle_passes_with_tiny_margin(self):
        rep = bc.check_cond2(abs_cert(1, 1), decay_system(),
                             bc.SampleBox.cube(1, 1, n_samples=5000))
        assert rep.passed
        # the oracle is tight: equality whenever sign(x - x') matches
        # sign(u - u'), so the max margin sits at rounding level
        assert abs(rep.max_margin) < 1e-10

    def test_hand_point_violation(self):
        # V = |x - x'| with inflated lambda = 3 on dx = -x + u:
        # at x=1, x'=-1, u=u'=0 the derivative is -2 but the bound is -6
        box = bc.SampleBox(((1, 1),), ((-1, -1),), ((0, 0),), ((0, 0),),
                           n_samples=1)
        rep = bc.check_cond2(abs_cert(3, 1), decay_system(), box)
        assert not rep.passed
        assert rep.first.lhs == pytest.approx(-2.0)
        assert rep.first.rhs == pytest.approx(-6.0)
        assert rep.first.margin == pytest.approx(4.0)

    def test_violation_found_by_sampling(self):
        rep = bc.check_cond2(abs_cert(3, 1), decay_system(),
                             bc.SampleBox.cube(1, 1, n_samples=2000))
        assert not rep.passed

    def test_diagonal_ties_are_resampled(self):
        # x and x' pinned to the same point: every draw hits the |.| tie
        box = bc.SampleBox(((1, 1),), ((1, 1),), ((0, 0),), ((0, 0),),
                           n_samples=10)
        with pytest.raises(bc.EvalError, match="resample budget"):
            bc.check_cond2(abs_cert(1, 1), decay_system(), box)

    def test_generic_box_needs_no_resampling(self):
        rep = bc.check_cond2(abs_cert(1, 1), decay_system(),
                             bc.SampleBox.cube(1, 1, n_samples=1000))
        assert rep.n_resampled == 0

    def test_deterministic(self):
        box = bc.SampleBox.cube(1, 1, n_samples=500, seed=3)
        a = bc.check_cond2(abs_cert(1, 1), decay_system(), box)
        b = bc.check_cond2(abs_cert(1, 1), decay_system(), box)
        assert a.to_dict() == b.to_dict()

    def test_dimension_mismatch(self):
        with pytest.raises(bc.DimensionError, match="certificate is for"):
            bc.check_cond2(abs_cert(1, 1, m=2), decay_system(),
                           bc.SampleBox.cube(1, 2, n_samples=10))


class TestEnvelope:
    def test_pure_decay(self):
        env = bc.envelope(abs_cert(1, 1), v0=1.0, u_gap=0.0, times=[0.0, 1.0])
        assert env.values[0] == 1.0
        assert env.values[1] == pytest.approx(0.36787944117144233)

    def test_zero_initial_gap_zero_input_gap(self):
        env = bc.envelope(abs_cert(2, 1), 0.0, 0.0, np.linspace(0, 5, 11))
        assert np.all(env.values == 0.0)

    def test_asymptote_is_gain_times_gap(self):
        env = bc.envelope(abs_cert(1, 1), 1.0, 1.0, [100.0])
        assert env.values[0] == pytest.approx(1.0)

    def test_negative_inputs_rejected(self):
        with pytest.raises(bc.DimensionError):
            bc.envelope(abs_cert(1, 1), -1.0, 0.0, [0.0])


class TestCheckBound:
    def test_tight_autonomous_case(self):
        zero = bc.InputSignal.parse(["0"])
        rep = bc.check_bound(abs_cert(1, 1), decay_system(), [1.0], [0.0],
                             zero, zero, h=0.001, T=5.0)
        assert rep.passed
        assert rep.v0 == 1.0
        assert rep.u_gap == 0.0
        # V = eta exactly in the continuous system; RK4 keeps them close
        assert np.max(np.abs(rep.v_values - rep.eta)) < 1e-10

    def test_driven_case(self):
        u = bc.InputSignal.parse(["0.5"])
        up = bc.InputSignal.parse(["0"])
        rep = bc.check_bound(abs_cert(1, 1), decay_system(), [1.0], [0.0],
                             u, up, h=0.01, T=10.0)
        assert rep.passed
        assert rep.u_gap == 0.5
        # gap converges to (gamma/lambda) * u_gap = 0.5
        assert rep.gaps[-1] == pytest.approx(0.5, abs=1e-4)

    def test_corrupted_lambda_fails_with_time(self):
        zero = bc.InputSignal.parse(["0"])
        rep = bc.check_bound(abs_cert(2, 1), decay_system(), [1.0], [0.0],
                             zero, zero, h=0.01, T=5.0)
        assert not rep.passed
        v = rep.violation
        assert v.kind == "bound"
        assert v.time > 0.0
        assert v.witness["which"] == "V exceeds envelope"
        assert v.lhs > v.rhs

    def test_zero_horizon(self):
        zero = bc.InputSignal.parse(["0"])
        rep = bc.check_bound(abs_cert(1, 1), decay_system(), [1.0], [0.0],
                             zero, zero, h=0.01, T=0.0)
        assert rep.passed
        assert len(rep.times) == 1

    def test_undersized_v_fails_first_link(self):
        v = bc.parse("0.5*abs(x[0] - xp[0])", {"x": 1, "xp": 1})
        cert = bc.Certificate(v, lam=1.0, gamma=0.5, n=1, m=1)
        zero = bc.InputSignal.parse(["0"])
        rep = bc.check_bound(cert, decay_system(), [1.0], [0.0],
                             zero, zero, h=0.01, T=1.0)
        assert not rep.passed
        assert rep.violation.witness["which"] == "state gap exceeds V"
        assert rep.violation.time == 0.0


class TestChecksAgree:
    """The three checks tell one consistent story for the oracle family."""

    def test_valid_certificate_clears_everything(self):
        cert = abs_cert(1, 1)
        s = decay_system()
        assert bc.check_cond1(cert, bc.SampleBox.cube(1, 1, n_samples=2000)).passed
        assert bc.check_cond2(cert, s, bc.SampleBox.cube(1, 1, n_samples=2000)).passed
        zero = bc.InputSignal.parse(["0"])
        assert bc.check_bound(cert, s, [2.0], [-1.0], zero, zero, 0.01, 5.0).passed


class TestComposedEndToEnd:
    """Random oracle pairs under small gain: the composed certificate must
    survive falsification on the interconnected system."""

    @pytest.mark.parametrize("seed", range(8))
    def test_composed_certificate_passes_cond2(self, seed):
        rng = np.random.default_rng(1000 + seed)
        s1, c1, s2, c2 = random_small_gain_pair(rng)
        s = bc.interconnect(bc.Interconnection(s1, s2))
        c = bc.compose(c1, c2, bc.select_alphas(c1, c2))
        assert (c.n, c.m) == (s.n, s.m)
        box = bc.SampleBox.cube(c.n, c.m, lo=-5.0, hi=5.0,
                                n_samples=2000, seed=seed)
        rep = bc.check_cond2(c, s, box)
        assert rep.passed, rep.worst

    @pytest.mark.parametrize("seed", range(20))
    def test_composed_certificate_passes_bound(self, seed):
        rng = np.random.default_rng(2000 + seed)
        s1, c1, s2, c2 = random_small_gain_pair(rng)
        s = bc.interconnect(bc.Interconnection(s1, s2))
        c = bc.compose(c1, c2, bc.select_alphas(c1, c2))
        x0 = rng.uniform(-3, 3, 2)
        x0p = rng.uniform(-3, 3, 2)
        amp = rng.uniform(0, 1, 2)
        u = bc.InputSignal.parse([f"{float(amp[0])!r}*sin(t)",
                                  f"{float(amp[1])!r}"])
        up = bc.InputSignal.parse(["0", "0"])
        rep = bc.check_bound(c, s, x0, x0p, u, up, h=0.01, T=8.0)
        assert rep.passed, rep.violation
