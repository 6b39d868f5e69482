import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import qcr
from hilbert import DensityMatrix, SpaceDims, basis_state, thermal_state
from params import MHZ
from protocols import (
    crossing_time,
    fidelity_estimate,
    fidelity_from_rates,
    fit_iv,
    fit_ringdown,
    kappa_sweep,
    optimal_drive,
    reset_mode_rates,
    reset_rate,
    reset_sweep,
    rethermalization,
    ringdown,
    ringdown_ratio,
    rpm_estimate,
    rpm_readout,
    simulate_reset,
    simulate_rpm,
    synth_iv,
    t1_fit,
)
from protocols.drive import VALIDITY_RATIO
from validation import (
    DegenerateMeasurementError,
    DomainError,
    FitError,
    ParamValidationError,
)

TAUS = np.array([50e-9, 100e-9, 150e-9, 200e-9])
DELAYS = np.array([200e-9, 300e-9])


def qubit_state(p_g, p_e, p_f, n_fock=3):
    dims = SpaceDims(n_fock)
    rho = np.zeros((dims.dim, dims.dim), dtype=complex)
    for level, p in zip("gef", (p_g, p_e, p_f)):
        i = dims.index(level, 0)
        rho[i, i] = p
    return DensityMatrix(dims, rho)


# ---- drive and fidelity ----

def test_optimal_drive_at_operating_point():
    setting = optimal_drive(28.4 * MHZ, 4.14e7)
    assert setting.omega_rabi / MHZ == pytest.approx(20.05, abs=0.01)
    assert setting.validity == "valid"
    assert setting.warnings == []


def test_optimal_drive_below_validity_threshold():
    setting = optimal_drive(math.sqrt(2.0), 6.0)
    assert setting.omega_rabi == pytest.approx(0.0, abs=1e-7)
    assert setting.validity == "violated"
    assert len(setting.warnings) == 1


def test_optimal_drive_on_boundary():
    kappa = 6.0
    assert optimal_drive(VALIDITY_RATIO * kappa, kappa).validity == "boundary"


@pytest.mark.parametrize("g, kappa", [(1.0, 5.0), (0.0, 1.0), (1.0, -1.0)])
def test_optimal_drive_undefined(g, kappa):
    with pytest.raises(DomainError):
        optimal_drive(g, kappa)


def test_fidelity_at_operating_point(device):
    assert fidelity_estimate(device, 4.14e7) == pytest.approx(0.99888, abs=1e-5)


@pytest.mark.parametrize("kappa", [4.14e7, 2.36e6, 1e8])
def test_optimal_drive_equalizes_mode_rates(kappa):
    g = 28.4 * MHZ
    rates = reset_mode_rates(g, optimal_drive(g, kappa).omega_rabi, kappa)
    np.testing.assert_allclose(rates, kappa / 3.0, rtol=1e-6)


@pytest.mark.parametrize("scale", [0.9, 1.1, 0.5, 2.0])
def test_detuned_drive_slows_the_asymptotic_reset(scale):
    g, kappa = 28.4 * MHZ, 4.136e7
    omega = optimal_drive(g, kappa).omega_rabi
    slowest = reset_mode_rates(g, scale * omega, kappa)[0]
    assert slowest < 0.97 * kappa / 3.0


def test_fidelity_limits():
    assert fidelity_from_rates(1.0, 2.0, math.inf) == 1.0
    assert fidelity_from_rates(15625.0, 88541.7, 0.0) == pytest.approx(0.85, rel=1e-6)


def test_fidelity_grows_with_kappa(device):
    values = [fidelity_estimate(device, k) for k in (1e6, 1e7, 4e7, 1e8)]
    assert all(b > a for a, b in zip(values, values[1:]))


# ---- RPM ----

def test_rpm_of_thermal_state():
    amps = simulate_rpm(qubit_state(0.85, 0.15, 0.0))
    assert amps.a1 == pytest.approx(0.85)
    assert amps.b1 == pytest.approx(0.15)
    assert amps.a2 == pytest.approx(0.0, abs=1e-15)
    est = rpm_estimate(amps.a1, amps.a2, amps.b1, amps.b2)
    assert est.P_e == pytest.approx(0.15, abs=1e-12)
    assert not est.out_of_range


@settings(max_examples=50, deadline=None)
@given(p_e=st.floats(0.0, 1.0))
def test_rpm_recovers_excited_population(p_e):
    amps = simulate_rpm(qubit_state(1.0 - p_e, p_e, 0.0))
    assert rpm_estimate(amps.a1, amps.a2, amps.b1, amps.b2).P_e == pytest.approx(p_e, abs=1e-12)


def test_rpm_clamps_out_of_range():
    est = rpm_estimate(0.9, 0.1, 0.2, 0.3)
    assert est.P_e == 0.0
    assert est.raw < 0.0
    assert est.out_of_range
    assert len(est.warnings) == 1


def test_rpm_degenerate_amplitudes():
    with pytest.raises(DegenerateMeasurementError):
        rpm_estimate(0.5, 0.5, 0.3, 0.3)


def test_rpm_with_f_population_reads_the_difference():
    amps = simulate_rpm(qubit_state(0.9, 0.07, 0.03))
    expected = (0.07 - 0.03) / (0.9 + 0.07 - 2 * 0.03)
    est = rpm_estimate(amps.a1, amps.a2, amps.b1, amps.b2)
    assert est.P_e == pytest.approx(expected, abs=1e-12)
    assert abs(est.P_e - 0.07) > 0.02
    assert rpm_readout(0.9, 0.07, 0.03) == pytest.approx(expected, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(p_e=st.floats(0.0, 0.5), p_f=st.floats(0.0, 0.05))
def test_rpm_readout_matches_simulated_sequences(p_e, p_f):
    amps = simulate_rpm(qubit_state(1.0 - p_e - p_f, p_e, p_f))
    est = rpm_estimate(amps.a1, amps.a2, amps.b1, amps.b2)
    assert rpm_readout(1.0 - p_e - p_f, p_e, p_f) == pytest.approx(est.P_e, abs=1e-12)


def test_rpm_readout_is_vectorized():
    out = rpm_readout(np.array([0.85, 1.0]), np.array([0.15, 0.0]), np.array([0.0, 0.0]))
    np.testing.assert_allclose(out, [0.15, 0.0], atol=1e-15)


def test_rpm_warns_on_f_population():
    amps = simulate_rpm(qubit_state(0.8, 0.1, 0.1))
    assert len(amps.warnings) == 1
    assert "P_f" in amps.warnings[0].message


# ---- ringdown ----

def test_ringdown_ratio_value():
    r = ringdown_ratio(3.9e7, 2.36e6, 100e-9, 200e-9, delta_gamma_rf=1.95e7)
    assert r == pytest.approx(0.118, abs=5e-4)


@pytest.mark.parametrize("dg", [1e6, 1e7, 4e7])
def test_ringdown_fit_recovers_rates(dg):
    ratios = np.array([[ringdown_ratio(dg, 2.36e6, tau, delay) for tau in TAUS] for delay in DELAYS])
    fit = fit_ringdown(TAUS, DELAYS, ratios)
    assert fit.delta_gamma == pytest.approx(dg, rel=1e-6)
    assert fit.kappa_r == pytest.approx(2.36e6, rel=1e-6)
    assert fit.delta_gamma_rf == pytest.approx(dg, rel=1e-4)
    assert fit.kappa_eff == pytest.approx(2.36e6 + dg, rel=1e-6)
    assert fit.warnings == []


def test_ringdown_single_delay_uses_known_kappa():
    ratios = np.array([[ringdown_ratio(1e7, 2.36e6, tau, 200e-9) for tau in TAUS]])
    fit = fit_ringdown(TAUS, [200e-9], ratios, kappa_r=2.36e6)
    assert fit.delta_gamma == pytest.approx(1e7, rel=1e-6)
    assert fit.kappa_r_stderr == 0.0
    with pytest.raises(DomainError):
        fit_ringdown(TAUS, [200e-9], ratios)


def test_ringdown_rejects_bad_ratios():
    with pytest.raises(DomainError):
        fit_ringdown(TAUS, DELAYS, np.full((2, 4), -0.1))
    with pytest.raises(ValueError):
        fit_ringdown(TAUS, DELAYS, np.full((2, 3), 0.5))


def test_ringdown_without_bias(device):
    fit = ringdown(0.0, TAUS, device)
    assert abs(fit.delta_gamma) < 1e-3 * device.kappa_r
    assert fit.kappa_eff == pytest.approx(device.kappa_r, rel=1e-3)


def test_ringdown_at_operating_bias(device):
    fit = ringdown(qcr.bias_from_ratio(1.03, device.Delta), TAUS, device)
    assert fit.delta_gamma == pytest.approx(3.9e7, rel=1e-6)
    assert fit.kappa_eff == pytest.approx(4.136e7, rel=1e-6)


def test_kappa_sweep_range_checked(device):
    with pytest.raises(ParamValidationError):
        kappa_sweep([0.0, 2.5], device)


def test_kappa_sweep_small_grid(device):
    rows, warnings = kappa_sweep([0.0, 1.03], device)
    assert warnings == []
    off, on = rows
    assert off.V_b == 0.0
    assert off.kappa_eff_ringdown == pytest.approx(device.kappa_r, rel=1e-3)
    assert off.kappa_eff_theory == pytest.approx(device.kappa_r, rel=0.05)
    assert on.kappa_eff_ringdown == pytest.approx(on.kappa_eff_theory, rel=1e-6)


def test_kappa_sweep_in_worker_processes(device):
    serial, _ = kappa_sweep([0.0, 1.03], device)
    parallel, _ = kappa_sweep([0.0, 1.03], device, jobs=2)
    assert parallel == serial


# ---- fits ----

def test_t1_fit_exact():
    t = np.linspace(0.0, 30e-6, 16)
    y = 0.15 + 0.85 * np.exp(-t / 9.6e-6)
    fit = t1_fit(t, y)
    assert fit.T1 == pytest.approx(9.6e-6, rel=1e-6)
    assert fit.P_inf == pytest.approx(0.15, abs=1e-8)
    assert fit.P0 == pytest.approx(1.0, abs=1e-8)
    assert not fit.degenerate


def test_t1_fit_flat_trace():
    fit = t1_fit(np.linspace(0.0, 1e-6, 5), np.full(5, 0.15))
    assert fit.degenerate
    assert math.isnan(fit.T1)
    assert len(fit.warnings) == 1


def test_t1_fit_needs_samples():
    with pytest.raises(DomainError):
        t1_fit([0.0, 1.0, 2.0], [1.0, 0.5, 0.25])


@pytest.fixture(scope="module")
def junction():
    return qcr.JunctionParams(R_T=72e3, Delta=193e-6 * qcr.E_CHARGE, gamma_D=1.3e-4, T_N=60e-3, E_N=0.0)


def test_iv_fit_needs_samples():
    with pytest.raises(DomainError):
        fit_iv(np.linspace(-1e-3, 1e-3, 19), np.linspace(-1e-8, 1e-8, 19))


def test_synthetic_iv_is_reproducible(junction):
    V = np.linspace(-0.6e-3, 0.6e-3, 7)
    noisy = synth_iv(junction, V, noise=0.01, seed=3)
    np.testing.assert_array_equal(noisy, synth_iv(junction, V, noise=0.01, seed=3))
    np.testing.assert_array_equal(synth_iv(junction, V), qcr.iv_curve(V, junction))


@pytest.mark.slow
def test_iv_fit_round_trip(junction):
    V = np.linspace(-0.6e-3, 0.6e-3, 121)
    fit = fit_iv(V, synth_iv(junction, V))
    assert fit.R_T == pytest.approx(junction.R_T, rel=5e-3)
    assert fit.Delta == pytest.approx(junction.Delta, rel=5e-3)
    assert fit.T_N == pytest.approx(junction.T_N, rel=2e-2)
    assert fit.gamma_D == pytest.approx(junction.gamma_D, rel=2e-2)


@pytest.mark.slow
def test_iv_fit_with_noise(junction):
    V = np.linspace(-0.6e-3, 0.6e-3, 121)
    fit = fit_iv(V, synth_iv(junction, V, noise=0.01, seed=1))
    assert fit.R_T == pytest.approx(junction.R_T, rel=0.03)
    assert fit.Delta == pytest.approx(junction.Delta, rel=0.03)


def test_iv_fit_flags_dynes_parameter_without_subgap_data(junction):
    V = np.linspace(0.45e-3, 0.6e-3, 40)
    guess = {"R_T": junction.R_T, "Delta": junction.Delta, "T_N": junction.T_N, "gamma_D": junction.gamma_D}
    fit = fit_iv(V, synth_iv(junction, V), guess=guess)
    assert "gamma_D" in fit.unidentified
    assert "R_T" not in fit.unidentified
    assert any("gamma_D" in w.message for w in fit.warnings)


def test_iv_fit_identifies_all_parameters_with_subgap_data(junction):
    V = np.linspace(-0.6e-3, 0.6e-3, 61)
    guess = {"R_T": junction.R_T, "Delta": junction.Delta, "T_N": junction.T_N, "gamma_D": junction.gamma_D}
    fit = fit_iv(V, synth_iv(junction, V), guess=guess)
    assert "gamma_D" not in fit.unidentified


# ---- reset figures of merit ----

def test_crossing_time_interpolates():
    assert crossing_time([0.0, 1.0, 2.0], [0.1, 0.02, 0.005]) == pytest.approx(1.0 + 0.01 / 0.015)


def test_crossing_time_edge_cases():
    assert crossing_time([0.0, 1.0], [0.005, 0.001]) == 0.0
    assert math.isnan(crossing_time([0.0, 1.0], [0.5, 0.2]))
    assert crossing_time([0.0, 1.0, 2.0], [0.5, math.nan, 0.001]) == 2.0


def test_crossing_time_waits_for_the_last_excursion():
    taus = [0.0, 1.0, 2.0, 3.0]
    assert crossing_time(taus, [0.5, 0.005, 0.02, 0.004]) == pytest.approx(2.0 + 0.01 / 0.016)
    assert math.isnan(crossing_time(taus[:3], [0.5, 0.005, 0.02]))


def test_reset_rate_of_exponential_tail():
    taus = np.linspace(0.0, 200e-9, 21)
    rate = reset_rate(taus, 0.5 * np.exp(-2e7 * taus))
    assert rate.rate == pytest.approx(2e7, rel=1e-6)
    assert rate.intercept == pytest.approx(math.log(0.5), rel=1e-6)
    assert rate.floor == pytest.approx(0.0, abs=1e-9)


def test_reset_rate_separates_floor():
    taus = np.linspace(40e-9, 280e-9, 25)
    rate = reset_rate(taus, 0.012 + 0.15 * np.exp(-1.38e7 * taus), tail_fraction=1.0)
    assert rate.rate == pytest.approx(1.38e7, rel=1e-6)
    assert rate.floor == pytest.approx(0.012, rel=1e-6)


def test_reset_rate_needs_tail():
    with pytest.raises(FitError):
        reset_rate([0.0, 1e-8, 2e-8, 3e-8], [0.1, 0.05, 0.0, 0.0])


def test_sweep_flags_failed_cells(device):
    grid, warnings = reset_sweep([0.0], [0.0, 2e-9], device)
    assert grid.residual[0, 0] == pytest.approx(0.15, abs=1e-12)
    assert grid.P_e[0, 0] == pytest.approx(0.15, abs=1e-12)
    assert grid.leakage[0, 0] == pytest.approx(0.15, abs=1e-12)
    assert grid.unreset[0, 0] == pytest.approx(0.15, abs=1e-12)
    assert not grid.failed[0, 0]
    assert grid.failed[0, 1]
    assert math.isnan(grid.residual[0, 1])
    assert not grid.complete
    assert len(warnings) == 1
    assert grid.meta["initial_state"] == "thermal"


def test_sweep_survives_unexpected_cell_errors(device, monkeypatch):
    import protocols.reset as reset_module

    original = reset_module.simulate_reset

    def singular_when_running(V_b, tau, *args, **kwargs):
        if tau > 0:
            raise np.linalg.LinAlgError("Singular matrix")
        return original(V_b, tau, *args, **kwargs)

    monkeypatch.setattr(reset_module, "simulate_reset", singular_when_running)
    grid, warnings = reset_sweep([0.0], [0.0, 1e-8], device)
    assert grid.failed.tolist() == [[False, True]]
    assert grid.residual[0, 0] == pytest.approx(0.15, abs=1e-12)
    assert len(warnings) == 1
    assert "LinAlgError" in warnings[0].message


def test_sweep_rejects_empty_grid(device):
    with pytest.raises(DomainError):
        reset_sweep([], [0.0], device)


def test_rethermalization_after_ideal_reset(device):
    rho = thermal_state(SpaceDims(3), 0.0)
    delays = np.linspace(0.0, 30e-6, 7)
    result = rethermalization(rho, delays, device)
    np.testing.assert_allclose(result.P_e_rpm, result.P_e_true, atol=1e-9)
    assert result.P_e_true[0] == pytest.approx(0.0, abs=1e-12)
    assert result.time_constant == pytest.approx(device.T1, rel=0.02)
    assert result.P_inf == pytest.approx(0.15, abs=0.01)


def test_rethermalization_needs_delays(device):
    with pytest.raises(DomainError):
        rethermalization(thermal_state(SpaceDims(3), 0.0), [0.0, 1e-6, 2e-6], device)


# ---- full resets ----

@pytest.fixture(scope="module")
def operating_bias(device):
    return qcr.bias_from_ratio(1.03, device.Delta)


@pytest.fixture(scope="module")
def operating_table(device, operating_bias):
    return qcr.rate_table(operating_bias, device.omega_r_eff, qcr.junction_params(device))


@pytest.fixture(scope="module")
def operating_sweep(device):
    """Reset durations 40-110 ns every 10 ns, then 120-250 ns every 5 ns, at eV_b/2Delta = 1.03."""
    taus = np.concatenate([np.arange(40, 120, 10), np.arange(120, 251, 5)]) * 1e-9
    grid, warnings = reset_sweep([1.03], taus, device, jobs=4)
    assert warnings == []
    return grid


def test_zero_length_reset_keeps_state(device, operating_bias, operating_table):
    result = simulate_reset(operating_bias, 0.0, device, table=operating_table)
    assert result.residual == pytest.approx(0.15, abs=1e-12)
    assert result.leakage == pytest.approx(0.15, abs=1e-12)
    assert result.unreset == pytest.approx(0.15, abs=1e-12)
    assert result.kappa_eff == pytest.approx(4.136e7, rel=1e-6)
    assert result.omega_rabi / MHZ == pytest.approx(20.05, abs=0.01)


@pytest.mark.slow
def test_reset_settles_below_one_percent_in_window(operating_sweep):
    assert operating_sweep.complete
    (t99,) = operating_sweep.crossing_times()
    assert 150e-9 <= t99 <= 220e-9
    assert operating_sweep.unreset[0, 0] > 0.05
    assert np.max(operating_sweep.residual) > 0.01


@pytest.mark.slow
def test_unreset_population_decreases_beyond_30ns(operating_sweep):
    unreset = operating_sweep.unreset[0]
    assert np.all(np.diff(unreset) <= 1e-4)
    assert unreset[-1] < unreset[0]


@pytest.mark.slow
def test_reset_conserves_trace(device, operating_bias, operating_table):
    result = simulate_reset(operating_bias, 180e-9, device, table=operating_table)
    assert np.all(result.trace.trace_err < 1e-8)
    assert np.all(result.trace.min_eig > -1e-8)


@pytest.mark.slow
def test_unreset_population_decays_at_a_third_of_kappa_eff(device, operating_bias, operating_table):
    result = simulate_reset(operating_bias, 300e-9, device, table=operating_table, samples=151)
    t = result.trace.t
    unreset = 1.0 - result.trace.levels[:, 0, 0]
    window = (t >= 40e-9) & (t <= 280e-9)
    fit = reset_rate(t[window], unreset[window], tail_fraction=1.0)
    assert abs(fit.rate / (result.kappa_eff / 3.0) - 1.0) < 0.15


@pytest.mark.slow
def test_reset_from_ground_stays_clean(device):
    rho0 = basis_state(SpaceDims(device.n_fock), "g", 0)
    grid, _ = reset_sweep([1.03], [50e-9, 120e-9, 200e-9], device, rho0=rho0)
    assert grid.complete
    assert np.all(grid.residual < 1e-3)
    # the refrigerator pumps ~1% back out of |g,0>, split evenly between e and f
    assert grid.unreset[0, -1] > 5e-3
    assert grid.meta["initial_state"] == "custom"


@pytest.mark.slow
def test_optimal_drive_beats_halved_and_doubled(device, operating_bias, operating_table):
    best = simulate_reset(operating_bias, 200e-9, device, table=operating_table, samples=2)
    for scale in (0.5, 2.0):
        other = simulate_reset(operating_bias, 200e-9, device, table=operating_table, samples=2,
                               omega_rule=scale * best.omega_rabi)
        assert other.unreset > best.unreset


@pytest.mark.slow
def test_halving_tolerances_moves_populations_little(device, operating_bias, operating_table):
    loose = simulate_reset(operating_bias, 60e-9, device, table=operating_table, samples=2)
    tight = simulate_reset(operating_bias, 60e-9, device, table=operating_table, samples=2,
                           rtol=5e-9, atol=5e-11)
    assert abs(tight.P_e - loose.P_e) < 1e-6
    assert abs(tight.P_f - loose.P_f) < 1e-6


@pytest.mark.slow
def test_larger_fock_space_moves_populations_little(device, operating_bias, operating_table):
    small = simulate_reset(operating_bias, 60e-9, device, table=operating_table, samples=2)
    large = simulate_reset(operating_bias, 60e-9, device, table=operating_table, samples=2, n_fock=10)
    assert abs(large.P_e - small.P_e) < 1e-6
    assert abs(large.P_f - small.P_f) < 1e-6
