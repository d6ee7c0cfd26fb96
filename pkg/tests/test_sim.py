import math

import numpy as np
import pytest

import bisimcert as bc

NO_INPUT = bc.InputSignal(())


def linear_decay():
    return bc.System("lin", 1, 0, (bc.parse("-x[0]", {"x": 1, "u": 0}),))


def driven():
    return bc.System("driven", 1, 1, (bc.parse("u[0]", {"x": 1, "u": 1}),))


class TestIntegrate:
    def test_exponential_decay(self):
        traj = bc.integrate(linear_decay(), [1.0], NO_INPUT, 0.01, 1.0)
        assert abs(traj.states[-1, 0] - math.exp(-1.0)) < 1e-6

    def test_zero_field_constant(self):
        s = bc.System("z", 1, 0, (bc.parse("0", {"x": 1, "u": 0}),))
        traj = bc.integrate(s, [4.5], NO_INPUT, 0.1, 2.0)
        assert np.all(traj.states == 4.5)

    def test_integrates_constant_input(self):
        sig = bc.InputSignal.parse(["1"])
        traj = bc.integrate(driven(), [0.0], sig, 0.01, 2.0)
        assert abs(traj.states[-1, 0] - 2.0) < 1e-9

    def test_time_dependent_input(self):
        # dx = cos(t), x(0) = 0 -> x(T) = sin(T)
        sig = bc.InputSignal.parse(["cos(t)"])
        traj = bc.integrate(driven(), [0.0], sig, 0.01, 2.0)
        assert abs(traj.states[-1, 0] - math.sin(2.0)) < 1e-8

    def test_grid_bookkeeping(self):
        traj = bc.integrate(linear_decay(), [1.0], NO_INPUT, 0.01, 10.0)
        assert len(traj.times) == 1001
        assert np.array_equal(traj.times, np.arange(1001) * 0.01)
        assert traj.times[-1] >= 10.0 - 0.005

    def test_zero_horizon(self):
        traj = bc.integrate(linear_decay(), [1.0], NO_INPUT, 0.01, 0.0)
        assert traj.states.shape == (1, 1)
        assert traj.states[0, 0] == 1.0

    def test_step_larger_than_horizon_rejected(self):
        with pytest.raises(bc.DimensionError, match="exceeds horizon"):
            bc.integrate(linear_decay(), [1.0], NO_INPUT, 2.0, 1.0)

    def test_wrong_x0_length(self):
        with pytest.raises(bc.DimensionError, match="x0 has shape"):
            bc.integrate(linear_decay(), [1.0, 2.0], NO_INPUT, 0.01, 1.0)

    def test_signal_component_count_checked(self):
        with pytest.raises(bc.DimensionError, match="components"):
            bc.integrate(driven(), [0.0], NO_INPUT, 0.01, 1.0)

    def test_divergence_guard(self):
        s = bc.System("blow", 1, 0, (bc.parse("x[0]^2", {"x": 1, "u": 0}),))
        with pytest.raises(bc.EvalError):
            bc.integrate(s, [10.0], NO_INPUT, 0.1, 10.0)

    def test_field_evaluation_error_reports_time(self):
        # starts at x=0 moving toward x=1, past which the field leaves its domain
        s = bc.System("bad", 1, 0, (bc.parse("sqrt(1 - x[0])", {"x": 1, "u": 0}),))
        with pytest.raises(bc.EvalError, match="t="):
            bc.integrate(s, [0.0], NO_INPUT, 0.1, 200.0)

    def test_deterministic_bit_for_bit(self):
        sig = bc.InputSignal.parse(["0.3*sin(t)"])
        sysm = bc.System("s", 2, 1, (
            bc.parse("x[1]", {"x": 2, "u": 1}),
            bc.parse("-x[0] - 0.2*x[1] + u[0]", {"x": 2, "u": 1}),
        ))
        a = bc.integrate(sysm, [1.0, 0.0], sig, 0.01, 5.0)
        b = bc.integrate(sysm, [1.0, 0.0], sig, 0.01, 5.0)
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.inputs, b.inputs)

    def test_rk4_order(self):
        errors = []
        for h in (0.1, 0.05, 0.025):
            traj = bc.integrate(linear_decay(), [1.0], NO_INPUT, h, 1.0)
            errors.append(abs(traj.states[-1, 0] - math.exp(-1.0)))
        for coarse, fine in zip(errors, errors[1:]):
            assert 12.0 <= coarse / fine <= 20.0

    def test_backends_agree(self, monkeypatch):
        sig = bc.InputSignal.parse(["0.5*cos(t)"])
        results = {}
        for be in ("numpy", "numba"):
            monkeypatch.setenv("BISIMCERT_BACKEND", be)
            results[be] = bc.integrate(driven(), [0.0], sig, 0.01, 3.0)
        assert np.allclose(results["numpy"].states, results["numba"].states,
                           rtol=1e-13, atol=1e-15)


class TestSupInputGap:
    def test_identical_signals(self):
        sig = bc.InputSignal.parse(["sin(t)"])
        assert bc.sup_input_gap(sig, sig, 0.01, 5.0) == 0.0

    def test_constant_gap(self):
        a = bc.InputSignal.parse(["0.5"])
        b = bc.InputSignal.parse(["0"])
        assert bc.sup_input_gap(a, b, 0.01, 5.0) == 0.5

    def test_sine_peak_on_grid(self):
        a = bc.InputSignal.parse(["sin(t)"])
        b = bc.InputSignal.parse(["0"])
        assert abs(bc.sup_input_gap(a, b, 0.01, math.pi) - 1.0) < 1e-4

    def test_vector_signals_use_euclidean_norm(self):
        a = bc.InputSignal.parse(["3", "4"])
        b = bc.InputSignal.parse(["0", "0"])
        assert bc.sup_input_gap(a, b, 0.1, 1.0) == 5.0

    def test_component_count_mismatch(self):
        with pytest.raises(bc.DimensionError):
            bc.sup_input_gap(bc.InputSignal.parse(["0"]), bc.InputSignal(()), 0.1, 1.0)

    def test_empty_signals(self):
        assert bc.sup_input_gap(bc.InputSignal(()), bc.InputSignal(()), 0.1, 1.0) == 0.0


class TestInputSignal:
    def test_only_time_allowed(self):
        with pytest.raises(bc.DimensionError, match="may only reference t"):
            bc.InputSignal((bc.parse("x[0]", {"x": 1}),))

    def test_parse_helper(self):
        sig = bc.InputSignal.parse(["2*t", "1"])
        assert sig.m == 2
