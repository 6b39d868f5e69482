import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import qcr
from validation import DomainError, ModelConsistencyError

OPERATING_RATIO = 1.03


@pytest.fixture(scope="module")
def jp(device):
    return qcr.junction_params(device)


@pytest.fixture(scope="module")
def cold(jp):
    """Ideal BCS gap at 1 mK."""
    return jp.replace(T_N=1e-3, gamma_D=0.0)


def V(ratio, jp):
    return qcr.bias_from_ratio(ratio, jp.Delta)


# ---- density of states ----

def test_dos_inside_gap_is_dynes_parameter(jp):
    assert qcr.dynes_dos(0.0, jp) == pytest.approx(jp.gamma_D, rel=1e-6)


def test_dos_far_above_gap(jp):
    assert qcr.dynes_dos(10.0 * jp.Delta, jp) == pytest.approx(10.0 / math.sqrt(99.0), rel=1e-4)


def test_dos_vectorised(jp):
    eps = np.array([0.0, 2.0, 5.0]) * jp.Delta
    out = qcr.dynes_dos(eps, jp)
    assert out.shape == (3,)
    assert out[1] == pytest.approx(2.0 / math.sqrt(3.0), rel=1e-4)


@settings(max_examples=50, deadline=None)
@given(x=st.floats(0.0, 20.0))
def test_dos_is_even(x, jp):
    e = x * jp.Delta
    assert qcr.dynes_dos(-e, jp) == pytest.approx(qcr.dynes_dos(e, jp), rel=1e-12, abs=1e-15)


# ---- tunnelling kernel ----

def test_kernel_above_gap_at_zero_temperature(cold):
    F = qcr.rate_function_F(2.0 * cold.Delta, cold)
    assert F == pytest.approx(math.sqrt(3.0) * cold.Delta / qcr.H_PLANCK, rel=1e-4)


def test_kernel_below_gap_vanishes_at_zero_temperature(cold):
    F_below = qcr.rate_function_F(0.5 * cold.Delta, cold)
    F_above = qcr.rate_function_F(2.0 * cold.Delta, cold)
    assert F_below < 1e-10 * F_above


@pytest.mark.parametrize("multiple", [0.5, 1.0, 2.0])
def test_detailed_balance(jp, multiple):
    E = multiple * jp.Delta
    forward = qcr.rate_function_F(E, jp)
    backward = qcr.rate_function_F(-E, jp)
    assert backward == pytest.approx(math.exp(-E / jp.kT) * forward, rel=1e-4)


def test_kernel_is_ohmic_far_above_gap(jp):
    E = 50.0 * jp.Delta
    assert qcr.rate_function_F(E, jp) == pytest.approx(E / qcr.H_PLANCK, rel=1e-2)


@settings(max_examples=20, deadline=None)
@given(x=st.floats(-3.0, 3.0))
def test_kernel_is_non_negative(x, jp):
    assert qcr.rate_function_F(x * jp.Delta, jp) >= 0.0


# ---- transition rates ----

def test_only_single_photon_processes(jp, device):
    with pytest.raises(DomainError):
        qcr.transition_rate(2, 0.0, device.omega_r, jp)


def test_negative_bias_rejected(jp, device):
    with pytest.raises(DomainError):
        qcr.transition_rate(1, -1e-4, device.omega_r, jp)


def test_rates_scale_inversely_with_resistance(jp, device):
    v = V(OPERATING_RATIO, jp)
    base = qcr.transition_rate(1, v, device.omega_r, jp)
    doubled = qcr.transition_rate(1, v, device.omega_r, jp.replace(R_T=2.0 * jp.R_T))
    assert doubled == pytest.approx(base / 2.0, rel=1e-9)


@pytest.mark.parametrize("ratio", [0.0, 0.5, 1.0, OPERATING_RATIO, 1.5, 2.0])
def test_absorption_dominates(jp, device, ratio):
    assert qcr.delta_gamma(V(ratio, jp), device.omega_r, jp) > 0.0


def test_unbiased_cooling_is_weak(jp, device):
    assert qcr.delta_gamma(0.0, device.omega_r, jp) < 0.05 * device.kappa_r


def test_operating_point_kappa(jp, device):
    kappa = qcr.kappa_eff(V(OPERATING_RATIO, jp), device.omega_r_eff, jp, device.kappa_r)
    assert kappa == pytest.approx(4.136e7, rel=1e-6)


def test_kappa_rises_towards_operating_point(jp, device):
    ratios = [0.9, 0.95, 1.0, 1.05, 1.1]
    kappas = [qcr.kappa_eff(V(r, jp), device.omega_r, jp, device.kappa_r) for r in ratios]
    assert all(b > a for a, b in zip(kappas, kappas[1:]))


def test_low_bias_barely_cools(jp, device):
    assert qcr.kappa_eff(V(0.2, jp), device.omega_r, jp, device.kappa_r) < 2.0 * device.kappa_r


# ---- calibration ----

def test_calibration_is_linear_in_target(jp, device):
    v = V(OPERATING_RATIO, jp)
    m_a = qcr.calibrate_m2(1e7, v, device.omega_r, jp)
    m_b = qcr.calibrate_m2(2e7, v, device.omega_r, jp)
    assert m_b == pytest.approx(2.0 * m_a, rel=1e-9)
    calibrated = jp.replace(m2_coupling=m_a)
    assert qcr.delta_gamma(v, device.omega_r, calibrated) == pytest.approx(1e7, rel=1e-9)


def test_calibration_rejects_non_positive_target(jp, device):
    with pytest.raises(DomainError):
        qcr.calibrate_m2(0.0, V(1.0, jp), device.omega_r, jp)


def test_calibration_rejects_unreachable_target(jp, device):
    with pytest.raises(ModelConsistencyError):
        qcr.calibrate_m2(1e15, V(OPERATING_RATIO, jp), device.omega_r, jp)


# ---- effective occupation ----

def test_occupation_matches_bias_point(jp, device):
    v = V(OPERATING_RATIO, jp)
    point = qcr.bias_point(v, device.omega_r, jp, device.kappa_r)
    assert point.N_T == pytest.approx(qcr.effective_occupation_NT(v, device.omega_r, jp), rel=1e-12)
    assert point.N_T == pytest.approx(point.Gamma_up / (point.Gamma_down - point.Gamma_up))
    assert point.kappa_eff == pytest.approx(device.kappa_r + point.delta_gamma)
    assert not point.heating


def test_occupation_vanishes_when_cold(cold, device):
    assert qcr.effective_occupation_NT(V(OPERATING_RATIO, cold), device.omega_r, cold) < 1e-6


def test_sweep_over_cooling_grid_has_no_warnings(jp, device):
    biases = [V(r, jp) for r in (0.0, 0.5, 1.0, OPERATING_RATIO)]
    points, warnings = qcr.bias_sweep(biases, device.omega_r, jp, device.kappa_r)
    assert len(points) == 4
    assert warnings == []


# ---- rate tables ----

def test_rate_table_reproduces_endpoints(jp, device):
    v = V(OPERATING_RATIO, jp)
    table = qcr.rate_table(v, device.omega_r, jp, n_points=5)
    assert table.rates(1.0) == pytest.approx((
        qcr.transition_rate(1, v, device.omega_r, jp),
        qcr.transition_rate(-1, v, device.omega_r, jp),
    ), rel=1e-12)
    assert table.rates(0.0) == pytest.approx((
        qcr.transition_rate(1, 0.0, device.omega_r, jp),
        qcr.transition_rate(-1, 0.0, device.omega_r, jp),
    ), rel=1e-12)


def test_rate_table_clips_fraction(jp, device):
    table = qcr.rate_table(V(OPERATING_RATIO, jp), device.omega_r, jp, n_points=5)
    assert table.rates(1.5) == table.rates(1.0)
    assert table.rates(-0.2) == table.rates(0.0)
    assert table.delta_gamma(1.0) == pytest.approx(3.9e7, rel=1e-6)


# ---- I-V ----

def test_no_current_without_bias(jp):
    assert qcr.iv_current(0.0, jp) == 0.0


def test_current_is_odd(jp):
    v = 1.5 * jp.Delta / qcr.E_CHARGE
    assert qcr.iv_current(-v, jp) == -qcr.iv_current(v, jp)


def test_current_far_above_gap():
    jp = qcr.JunctionParams(R_T=72e3, Delta=193e-6 * qcr.E_CHARGE, gamma_D=0.0, T_N=10e-3, E_N=0.0)
    v = 10.0 * jp.Delta / qcr.E_CHARGE
    current = qcr.iv_current(v, jp)
    assert current == pytest.approx(math.sqrt(99.0) * jp.Delta / (qcr.E_CHARGE * jp.R_T), rel=1e-3)
    assert current == pytest.approx(26.7e-9, rel=2e-3)


def test_subgap_current_from_dynes_states():
    gamma = 1e-3
    jp = qcr.JunctionParams(R_T=72e3, Delta=193e-6 * qcr.E_CHARGE, gamma_D=gamma, T_N=10e-3, E_N=0.0)
    u = 0.5
    expected = gamma * jp.Delta * u / (math.sqrt(1.0 - u * u) * qcr.E_CHARGE * jp.R_T)
    assert qcr.iv_current(u * jp.Delta / qcr.E_CHARGE, jp) == pytest.approx(expected, rel=0.02)
