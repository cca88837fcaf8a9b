"""Synthesis tests: PI pole placement, LQR gain reproduction, controllability."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from balbot import model, numerics, synthesis
from balbot.errors import InvalidInputError, SolverFailureError
from balbot.identification import FirstOrderFit
from balbot.synthesis import GainVector, LQRWeights, PIGains

# Frozen regression constants for the reference PI design
# (plant 2.6/(0.038 s + 1), settle 0.5 s, fast pole at -30 rad/s), computed
# once by matching coefficients of tau s^2 + (1+Km Kp) s + Km Ki against
# tau (s + 10)(s + 30).
REFERENCE_PI_KP = 0.2
REFERENCE_PI_KI = 4.384615384615385


def motor(reference_motor):
    return FirstOrderFit(gain=reference_motor["motor"]["K_m"],
                         tau=reference_motor["motor"]["tau"])


# ---------------------------------------------------------------------------
# PI pole placement
# ---------------------------------------------------------------------------

def test_pi_trivial_plant_hand_expansion():
    # plant 1/(s+1), poles at -1 (settle 5 s) and -2: tau s^2 + (1+Kp)s + Ki
    # must equal (s+1)(s+2) = s^2 + 3s + 2  ->  Kp = 2, Ki = 2.
    gains = synthesis.pi_pole_placement(FirstOrderFit(gain=1.0, tau=1.0),
                                        settle_time=5.0, max_natural_freq=2.0)
    assert_allclose([gains.kp, gains.ki], [2.0, 2.0], rtol=1e-12)


def test_pi_reference_design_regression(reference_motor):
    spec = reference_motor["pi_design"]
    gains = synthesis.pi_pole_placement(motor(reference_motor),
                                        spec["settle_time_s"],
                                        spec["max_natural_freq_rad_s"])
    assert_allclose(gains.kp, REFERENCE_PI_KP, rtol=1e-12)
    assert_allclose(gains.ki, REFERENCE_PI_KI, rtol=1e-12)


def test_pi_placement_roundtrip(reference_motor):
    # Roots of the assembled closed-loop polynomial equal the requested poles.
    plant = motor(reference_motor)
    gains = synthesis.pi_pole_placement(plant, 0.5, 30.0)
    tf = synthesis.velocity_loop_tf(plant, gains)
    poles = np.sort(tf.poles().real)
    assert_allclose(poles, [-30.0, -10.0], rtol=1e-9)
    assert np.abs(tf.poles().imag).max() <= 1e-9


def test_pi_dominant_time_constant_and_dc_gain(reference_motor):
    plant = motor(reference_motor)
    gains = synthesis.pi_pole_placement(plant, 0.5, 30.0)
    tf = synthesis.velocity_loop_tf(plant, gains)
    tau_dom = -1.0 / max(tf.poles().real)
    assert_allclose(tau_dom, 0.1, rtol=1e-9)   # 0.5 s settle / 5
    assert_allclose(tf.dc_gain(), 1.0, rtol=0, atol=1e-15)


def test_pi_random_placements_roundtrip():
    rng = np.random.default_rng(17)
    for _ in range(30):
        plant = FirstOrderFit(gain=rng.uniform(0.5, 5.0),
                              tau=rng.uniform(0.01, 0.5))
        settle = rng.uniform(0.2, 3.0)
        fast = 5.0 / settle * rng.uniform(1.5, 10.0)
        gains = synthesis.pi_pole_placement(plant, settle, fast)
        tf = synthesis.velocity_loop_tf(plant, gains)
        got = np.sort(tf.poles().real)
        assert_allclose(got, [-fast, -5.0 / settle], rtol=1e-9)
        assert_allclose(tf.dc_gain(), 1.0, atol=1e-12)


def test_pi_validates_inputs(reference_motor):
    plant = motor(reference_motor)
    with pytest.raises(InvalidInputError):
        synthesis.pi_pole_placement(plant, -1.0, 30.0)
    with pytest.raises(InvalidInputError):
        synthesis.pi_pole_placement(plant, 0.5, 5.0)  # slower than dominant


# ---------------------------------------------------------------------------
# LQR
# ---------------------------------------------------------------------------

def test_lqr_scalar_care():
    sys = model.StateSpace(np.zeros((1, 1)), np.ones((1, 1)), np.ones((1, 1)),
                           state_labels=("x",), output_labels=("x",))
    gain = synthesis.lqr(sys, LQRWeights(q_diag=(1.0,), r=1.0))
    assert_allclose(gain.k, [1.0], rtol=1e-10)


def test_lqr3_reproduces_reference_gains(reference_params, reference_gains):
    sys = model.linearize(reference_params)
    spec = reference_gains["lqr3"]
    gain = synthesis.lqr(sys, LQRWeights(q_diag=spec["Q"], r=spec["R"]))
    assert gain.states == synthesis.BALANCE_STATE_LABELS
    assert gain.convention == reference_gains["convention"]
    assert_allclose(gain.k, spec["k"], rtol=spec["tolerance_rel"])


def test_lqr4_reproduces_reference_gains(reference_params, reference_gains):
    sys = model.linearize(reference_params)
    spec = reference_gains["lqr4"]
    gain = synthesis.lqr(sys, LQRWeights(q_diag=spec["Q"], r=spec["R"]))
    assert_allclose(gain.k, spec["k"], rtol=spec["tolerance_rel"])


def test_lqr_closed_loop_hurwitz_and_residual(reference_params):
    sys = model.linearize(reference_params)
    rng = np.random.default_rng(23)
    for _ in range(10):
        w = LQRWeights(q_diag=tuple(rng.uniform(0.0, 2.0, size=4)),
                       r=rng.uniform(0.5, 200.0))
        gain = synthesis.lqr(sys, w)
        A_cl = sys.A - sys.B @ np.atleast_2d(gain.as_array())
        eigs = numerics.eigenvalues(A_cl)
        assert eigs.real.max() < -1e-9


def test_lqr_cost_homogeneity(reference_params):
    # Scaling Q and R together leaves the gain unchanged.
    sys = model.linearize(reference_params)
    w1 = LQRWeights(q_diag=(1.0, 0.01, 1.0, 0.01), r=100.0)
    w2 = LQRWeights(q_diag=(7.0, 0.07, 7.0, 0.07), r=700.0)
    k1 = synthesis.lqr(sys, w1).as_array()
    k2 = synthesis.lqr(sys, w2).as_array()
    assert_allclose(k1, k2, rtol=1e-9)


def test_lqr_propagates_care_failure():
    A = np.diag([1.0, 2.0])
    B = np.array([[1.0], [0.0]])
    sys = model.StateSpace(A, B, np.eye(2), state_labels=("a", "b"),
                           output_labels=("a", "b"))
    with pytest.raises(SolverFailureError):
        synthesis.lqr(sys, LQRWeights(q_diag=(1.0, 1.0), r=1.0))


def test_lqr_weight_length_mismatch(reference_params):
    sys = model.linearize(reference_params)
    with pytest.raises(InvalidInputError):
        synthesis.lqr(sys, LQRWeights(q_diag=(1.0, 1.0), r=1.0))


def test_weights_validation():
    with pytest.raises(InvalidInputError):
        LQRWeights(q_diag=(-1.0, 0.0, 0.0), r=1.0)
    with pytest.raises(InvalidInputError):
        LQRWeights(q_diag=(1.0, 0.0, 0.0), r=0.0)


def test_gain_vector_validation():
    with pytest.raises(InvalidInputError):
        GainVector(k=(1.0, 2.0), states=("a", "b", "c"))


# ---------------------------------------------------------------------------
# controllability
# ---------------------------------------------------------------------------

def test_controllability_full_rank(reference_params):
    sys = model.linearize(reference_params)
    Co, rank = synthesis.controllability(sys)
    assert Co.shape == (4, 4)
    assert rank == 4
    expected = np.hstack([sys.B, sys.A @ sys.B,
                          sys.A @ sys.A @ sys.B,
                          sys.A @ sys.A @ sys.A @ sys.B])
    assert_allclose(Co, expected)


def test_controllability_zero_input_matrix(reference_params):
    sys0 = model.StateSpace(model.linearize(reference_params).A,
                            np.zeros((4, 1)),
                            model.linearize(reference_params).C)
    _, rank = synthesis.controllability(sys0)
    assert rank == 0


def test_controllability_unreachable_block(reference_params):
    # Append a decoupled fifth mode with no input path: rank stays 4 of 5.
    sys = model.linearize(reference_params)
    A5 = np.zeros((5, 5))
    A5[:4, :4] = sys.A
    A5[4, 4] = -3.0
    B5 = np.vstack([sys.B, [[0.0]]])
    C5 = np.zeros((2, 5))
    C5[:, :4] = sys.C
    sys5 = model.StateSpace(A5, B5, C5,
                            state_labels=sys.state_labels + ("extra",))
    _, rank = synthesis.controllability(sys5)
    assert rank == 4
