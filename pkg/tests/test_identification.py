"""Identification tests: exact recovery, error paths, noise robustness."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from balbot import identification as ident
from balbot.errors import (IdentifiabilityError, InvalidInputError,
                           ModelMismatchError)
from balbot.identification import FirstOrderFit, TimeSeries


def motor_plant(reference_motor):
    return FirstOrderFit(gain=reference_motor["motor"]["K_m"],
                         tau=reference_motor["motor"]["tau"])


def test_zero_noise_single_step_exact_recovery(reference_motor):
    # Unit step a few samples into the record (pre-trigger baseline).
    plant = motor_plant(reference_motor)
    data = ident.generate_step_experiment(plant, [(0.005, 1.0)], dt=1e-3,
                                          duration=1.0)
    fit = ident.fit_first_order(data)
    assert_allclose(fit.gain, plant.gain, rtol=1e-6)
    assert_allclose(fit.tau, plant.tau, rtol=1e-6)
    assert fit.residual_rms <= 1e-9


def test_zero_noise_roundtrip_random_plants():
    rng = np.random.default_rng(31)
    for _ in range(25):
        plant = FirstOrderFit(gain=rng.uniform(0.5, 5.0),
                              tau=rng.uniform(0.01, 0.5))
        data = ident.generate_step_experiment(
            plant, ident.default_square_wave(duration=2.0), dt=2e-3,
            duration=2.0)
        fit = ident.fit_first_order(data)
        assert_allclose(fit.gain, plant.gain, rtol=1e-6)
        assert_allclose(fit.tau, plant.tau, rtol=1e-6)
        assert fit.residual_rms <= 1e-9


def test_constant_input_unidentifiable():
    t = np.arange(100) * 1e-2
    u = np.ones(100)
    y = 2.6 * np.ones(100)
    with pytest.raises(IdentifiabilityError):
        ident.fit_first_order(TimeSeries(t, u, y))


def test_settled_record_only_dc_identifiable():
    # A step is present in the input record, but the output is already
    # settled throughout: the regressors are collinear.
    t = np.arange(64) * 1e-2
    u = np.ones(64)
    u[0] = 0.999999  # a transition exists, but carries no transient
    y = np.full(64, 2.6)
    with pytest.raises(IdentifiabilityError) as err:
        ident.fit_first_order(TimeSeries(t, u, y))
    assert "2.6" in str(err.value)


def test_unstable_data_is_model_mismatch():
    t = np.arange(64) * 1e-2
    u = np.where(t >= 0.05, 1.0, 0.0)
    y = np.exp(t * 3.0)  # growing: discrete pole > 1
    with pytest.raises(ModelMismatchError):
        ident.fit_first_order(TimeSeries(t, u, y))


def test_noise_monte_carlo_within_five_percent(reference_motor):
    plant = motor_plant(reference_motor)
    sigma = 0.01 * plant.gain  # 1 % of the steady-state response to 1 V
    steps = ident.default_square_wave()
    for seed in range(100):
        data = ident.generate_step_experiment(
            plant, steps, dt=ident.DEFAULT_EXPERIMENT_DT, noise_sigma=sigma,
            seed=seed, duration=ident.DEFAULT_EXPERIMENT_DURATION)
        fit = ident.fit_first_order(data)
        assert abs(fit.gain - plant.gain) <= 0.05 * plant.gain
        assert abs(fit.tau - plant.tau) <= 0.05 * plant.tau


def test_residual_grows_with_noise(reference_motor):
    plant = motor_plant(reference_motor)
    steps = ident.default_square_wave()
    residuals = []
    for sigma in (0.0, 0.01, 0.05):
        vals = []
        for seed in range(10):
            data = ident.generate_step_experiment(plant, steps, dt=5e-3,
                                                  noise_sigma=sigma, seed=seed,
                                                  duration=4.0)
            vals.append(ident.fit_first_order(data).residual_rms)
        residuals.append(np.mean(vals))
    assert residuals[0] <= 1e-9
    assert residuals[0] < residuals[1] < residuals[2]


def test_generator_step_reaches_dc_gain(reference_motor):
    plant = motor_plant(reference_motor)
    data = ident.generate_step_experiment(plant, [(0.005, 1.0)], dt=1e-3,
                                          duration=1.0)
    assert_allclose(data.y[-1], plant.gain, rtol=1e-4)


def test_generator_matches_analytic_exponential():
    # For a step landing exactly on a sample, the ZOH-exact recursion
    # reproduces the continuous exponential at every sample time.
    plant = FirstOrderFit(gain=1.0, tau=1.0)
    t0 = 0.005
    data = ident.generate_step_experiment(plant, [(t0, 1.0)], dt=1e-3,
                                          duration=5.0)
    expected = np.where(data.t >= t0, 1.0 - np.exp(-(data.t - t0)), 0.0)
    assert np.abs(data.y - expected).max() <= 1e-12


def test_generator_deterministic_for_seed():
    plant = FirstOrderFit(gain=2.0, tau=0.1)
    a = ident.generate_step_experiment(plant, [(0.01, 1.0)], dt=1e-3,
                                       noise_sigma=0.1, seed=99, duration=1.0)
    b = ident.generate_step_experiment(plant, [(0.01, 1.0)], dt=1e-3,
                                       noise_sigma=0.1, seed=99, duration=1.0)
    assert np.array_equal(a.y, b.y)


def test_timeseries_validation():
    with pytest.raises(InvalidInputError):
        TimeSeries(np.arange(4.0), np.zeros(4), np.zeros(4))  # too short
    t = np.arange(10.0)
    with pytest.raises(InvalidInputError):
        TimeSeries(t, np.zeros(10), np.zeros(9))
    t_bad = t.copy()
    t_bad[5] = t_bad[4]
    with pytest.raises(InvalidInputError):
        TimeSeries(t_bad, np.zeros(10), np.zeros(10))


def test_nonuniform_record_is_resampled():
    rng = np.random.default_rng(1)
    t = np.sort(rng.uniform(0.0, 1.0, size=50))
    t[0], t[-1] = 0.0, 1.0
    series = TimeSeries(t, np.ones(50), np.linspace(0, 1, 50))
    assert not series.is_uniform()
    uniform = series.resampled()
    assert uniform.is_uniform()
    assert uniform.t.size == 50


def test_csv_roundtrip(tmp_path, reference_motor):
    plant = motor_plant(reference_motor)
    data = ident.generate_step_experiment(plant, [(0.0, 1.0)], dt=1e-3,
                                          noise_sigma=0.01, seed=5,
                                          duration=0.5)
    path = tmp_path / "exp.csv"
    ident.write_timeseries_csv(data, path)
    back = ident.read_timeseries_csv(path)
    assert np.array_equal(back.t, data.t)
    assert np.array_equal(back.u, data.u)
    assert np.array_equal(back.y, data.y)


def test_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("time,in,out\n0,0,0\n")
    with pytest.raises(InvalidInputError):
        ident.read_timeseries_csv(path)


def test_csv_reports_line_number(tmp_path):
    path = tmp_path / "bad.csv"
    rows = "\n".join(f"{i * 0.1},1.0,2.0" for i in range(10))
    path.write_text("t,u,y\n" + rows + "\n0.99,oops,3\n")
    with pytest.raises(InvalidInputError) as err:
        ident.read_timeseries_csv(path)
    assert ":12" in str(err.value)
