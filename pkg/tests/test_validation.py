import dataclasses
import math

import numpy as np
import pytest

from validation import (
    ConfigError,
    DegenerateMeasurementError,
    FitError,
    MissingKeyError,
    NumericalError,
    NumericalIntegrityError,
    ParamLimits,
    ParamValidationError,
    PulseShapeError,
    QcrSimError,
    QuadratureError,
    check_density_matrix,
    diagnose,
    get_param_validator,
)


@pytest.fixture
def fields(device):
    return dataclasses.asdict(device)


def test_validator_is_a_singleton():
    assert get_param_validator() is get_param_validator()


def test_device_fields_pass(fields):
    assert get_param_validator().validate_params(fields) == []


@pytest.mark.parametrize("name, value, rule", [
    ("kappa_r", 0.0, "kappa_r > 0"),
    ("T_N", math.inf, "T_N > 0"),
    ("gamma_D", 1.0, "0 <= gamma_D < 1"),
    ("P_e_thermal", 0.5, "0 <= P_e_thermal < 0.5"),
    ("n_fock", 1, "n_fock >= 2"),
    ("C_m", -1e-15, "C_m >= 0"),
    ("m2_coupling", 0.0, "0 < m2_coupling <= 1"),
])
def test_hard_checks(fields, name, value, rule):
    fields[name] = value
    with pytest.raises(ParamValidationError) as exc:
        get_param_validator().validate_params(fields)
    assert exc.value.rule == rule


def test_frequency_ordering(fields):
    fields["omega_r"] = 0.5 * fields["omega_ge"]
    with pytest.raises(ParamValidationError) as exc:
        get_param_validator().validate_params(fields)
    assert exc.value.rule == "omega_r > omega_ge > omega_ef > 0"


def test_detuning_row_checked(fields):
    fields["delta_d_supplied"] = fields["omega_r"] - fields["omega_ge"] + 2.0 * math.pi * 5e6
    with pytest.raises(ParamValidationError):
        get_param_validator().validate_params(fields)
    fields["frequency_tolerance_hz"] = 10e6
    assert get_param_validator().validate_params(fields) == []


def test_far_f0g1_line_warns(fields):
    bare = 2.0 * fields["omega_ge"] + fields["alpha"] - fields["omega_r"]
    fields["omega_f0g1_measured"] = bare + 2.0 * math.pi * ParamLimits.MAX_F0G1_OFFSET_HZ * 1.5
    warnings = get_param_validator().validate_params(fields)
    assert len(warnings) == 1
    assert warnings[0].context["offset_hz"] == pytest.approx(60e6)


# ---- density matrices ----

def test_valid_state_diagnostics():
    rho = np.diag([0.7, 0.2, 0.1]).astype(complex)
    diag = check_density_matrix(rho)
    assert diag.trace_err == pytest.approx(0.0, abs=1e-15)
    assert diag.min_eig == pytest.approx(0.1)
    assert diag.hermitian_err == 0.0


def test_non_hermitian_state():
    rho = np.diag([0.5, 0.5]).astype(complex)
    rho[0, 1] = 1e-6
    with pytest.raises(NumericalIntegrityError, match="Hermitian"):
        check_density_matrix(rho)


def test_trace_drift():
    with pytest.raises(NumericalIntegrityError, match="Trace"):
        check_density_matrix(np.diag([0.5, 0.5 + 1e-6]))


def test_negative_population():
    with pytest.raises(NumericalIntegrityError, match="at t = 1 ns"):
        check_density_matrix(np.diag([1.001, -0.001]), where="t = 1 ns")


def test_tolerances_are_adjustable():
    rho = np.diag([1.001, -0.001])
    assert check_density_matrix(rho, min_eigenvalue=-0.01).min_eig == pytest.approx(-0.001)
    assert diagnose(rho).min_eig == pytest.approx(-0.001)


# ---- exceptions ----

def test_user_message_defaults_to_message():
    e = QcrSimError("boom")
    assert e.user_message == "boom"
    assert QcrSimError("boom", user_message="friendly").user_message == "friendly"


def test_missing_key_message():
    e = MissingKeyError("gap_ueV", "Delta")
    assert e.key == "gap_ueV"
    assert "gap_ueV (Delta)" in e.user_message


def test_exception_hierarchy():
    assert issubclass(ParamValidationError, ConfigError)
    assert issubclass(PulseShapeError, ConfigError)
    assert issubclass(QuadratureError, NumericalError)
    assert issubclass(NumericalIntegrityError, NumericalError)
    assert not issubclass(FitError, NumericalError)
    for cls in (ConfigError, NumericalError, FitError, DegenerateMeasurementError):
        assert issubclass(cls, QcrSimError)


def test_fit_error_carries_report():
    assert FitError("no").report is None
    assert FitError("no", report={"x": 1}).report == {"x": 1}
