"""
Parameter validation AFTER unit conversion, and before any physics runs.

Hard checks (raise exceptions):
- Frequency ordering and anharmonicity sign
- Positive rates, resistances, gap, temperature
- Dynes parameter and thermal population ranges
- Consistency of redundant device-table rows (detuning, e-f frequency)

Soft checks (return warnings):
- Measured f0g1 frequency far from the bare value
- Dephasing-limited qubit (T2* close to 2 T1)
"""

import math
from typing import List

from .exceptions import ParamValidationError, ValidationWarning

TWO_PI = 2.0 * math.pi


class ParamLimits:
    """Configurable limits for parameter validation."""
    MIN_N_FOCK = 2
    MAX_THERMAL_POPULATION = 0.5
    # Measured vs bare f0g1 is a data-consistency check, not an equality
    MAX_F0G1_OFFSET_HZ = 40e6
    # the device table prints frequencies to 1 MHz
    DEFAULT_FREQUENCY_TOLERANCE_HZ = 1.5e6


class ParamValidator:
    """
    Validates SI parameter fields for DeviceParams.

    Hard checks raise ParamValidationError naming the violated rule.
    Soft checks return warnings.
    """

    def validate_params(self, fields: dict) -> List[ValidationWarning]:
        """
        Validate a field dict (SI units, angular frequencies in rad/s).

        Returns:
            List of warnings (may be empty)

        Raises:
            ParamValidationError: an invariant does not hold
        """
        warnings = []

        # === HARD CHECKS (raise on failure) ===
        self._check_frequencies(fields)
        self._check_positive(fields, ['kappa_r', 'R_T', 'Delta', 'T_N', 'T1', 'T2_star'])
        self._check_dynes(fields['gamma_D'])
        self._check_thermal_population(fields['P_e_thermal'])
        self._check_n_fock(fields['n_fock'])
        self._check_capacitances(fields)
        m2 = fields.get('m2_coupling')
        if m2 is not None and not (0.0 < m2 <= 1.0):
            raise ParamValidationError("0 < m2_coupling <= 1", f"m2_coupling = {m2}")

        # === SOFT CHECKS (add warnings) ===
        f0g1_warning = self._check_f0g1_offset(fields)
        if f0g1_warning:
            warnings.append(f0g1_warning)

        return warnings

    # === HARD CHECK METHODS ===

    def _check_frequencies(self, fields: dict) -> None:
        """Ordering omega_r > omega_ge > omega_ef > 0, alpha < 0, redundant rows consistent."""
        omega_r, omega_ge, alpha = fields['omega_r'], fields['omega_ge'], fields['alpha']
        if not alpha < 0:
            raise ParamValidationError(
                "alpha must be negative",
                f"alpha/2pi = {alpha / TWO_PI / 1e6:.4g} MHz",
            )
        omega_ef = omega_ge + alpha
        if not (omega_r > omega_ge > omega_ef > 0):
            raise ParamValidationError(
                "omega_r > omega_ge > omega_ef > 0",
                f"omega_r/2pi = {omega_r / TWO_PI:.6g} Hz, omega_ge/2pi = {omega_ge / TWO_PI:.6g} Hz",
            )

        tol = TWO_PI * fields.get('frequency_tolerance_hz', ParamLimits.DEFAULT_FREQUENCY_TOLERANCE_HZ)
        supplied_ef = fields.get('omega_ef_supplied')
        if supplied_ef is not None and abs(supplied_ef - omega_ef) > tol:
            raise ParamValidationError(
                "alpha = omega_ef - omega_ge",
                f"supplied omega_ef differs by {(supplied_ef - omega_ef) / TWO_PI / 1e6:.4g} MHz",
            )
        supplied_dd = fields.get('delta_d_supplied')
        if supplied_dd is not None and abs(supplied_dd - (omega_r - omega_ge)) > tol:
            raise ParamValidationError(
                "delta_d = omega_r - omega_ge",
                f"supplied delta_d differs by {(supplied_dd - omega_r + omega_ge) / TWO_PI / 1e6:.4g} MHz",
            )

    def _check_positive(self, fields: dict, names: List[str]) -> None:
        """Ensure strictly positive physical scales."""
        for name in names:
            value = fields[name]
            if not (value > 0 and math.isfinite(value)):
                raise ParamValidationError(f"{name} > 0", f"{name} = {value}")

    def _check_dynes(self, gamma_d: float) -> None:
        if not (0.0 <= gamma_d < 1.0):
            raise ParamValidationError("0 <= gamma_D < 1", f"gamma_D = {gamma_d}")

    def _check_thermal_population(self, p_e: float) -> None:
        if not (0.0 <= p_e < ParamLimits.MAX_THERMAL_POPULATION):
            raise ParamValidationError("0 <= P_e_thermal < 0.5", f"P_e_thermal = {p_e}")

    def _check_n_fock(self, n_fock: int) -> None:
        if int(n_fock) != n_fock or n_fock < ParamLimits.MIN_N_FOCK:
            raise ParamValidationError("n_fock >= 2", f"n_fock = {n_fock}")

    def _check_capacitances(self, fields: dict) -> None:
        for name in ('C_c', 'C_j', 'C_m'):
            if not fields[name] >= 0:
                raise ParamValidationError(f"{name} >= 0", f"{name} = {fields[name]}")
        c_sigma = fields.get('C_sigma')
        if c_sigma is not None and not c_sigma > 0:
            raise ParamValidationError("C_sigma > 0", f"C_sigma = {c_sigma}")

    # === SOFT CHECK METHODS ===

    def _check_f0g1_offset(self, fields: dict) -> ValidationWarning | None:
        """Warn if the measured f0g1 line sits far from the bare value."""
        measured = fields.get('omega_f0g1_measured')
        if measured is None:
            return None
        bare = 2.0 * fields['omega_ge'] + fields['alpha'] - fields['omega_r']
        offset_hz = abs(measured - bare) / TWO_PI
        if offset_hz >= ParamLimits.MAX_F0G1_OFFSET_HZ:
            return ValidationWarning(
                f"Measured f0g1 differs from the bare value by {offset_hz / 1e6:.1f} MHz",
                context={'offset_hz': offset_hz},
            )
        return None


# Singleton instance
_param_validator = None


def get_param_validator() -> ParamValidator:
    """Get or create the singleton ParamValidator."""
    global _param_validator
    if _param_validator is None:
        _param_validator = ParamValidator()
    return _param_validator
