"""
Closed-form drive and fidelity estimates.
"""

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np

from params import DeviceParams, thermal_rates
from validation import DomainError, ValidationWarning

# the optimum is only a minimum of the reset time for g >= sqrt(2/27) kappa
VALIDITY_RATIO = math.sqrt(2.0 / 27.0)


@dataclass(frozen=True)
class DriveSetting:
    omega_rabi: float
    validity: str  # "valid" | "boundary" | "violated"
    warnings: List[ValidationWarning] = field(default_factory=list, compare=False)


def optimal_drive(g_rabi: float, kappa: float) -> DriveSetting:
    """
    Omega = (1/6) sqrt(18 g^2 - kappa^2), the ef-drive that minimizes the reset time.

    Raises:
        DomainError: 18 g^2 < kappa^2, or non-positive inputs
    """
    if not (g_rabi > 0 and kappa > 0):
        raise DomainError(f"g_rabi and kappa must be positive (g = {g_rabi}, kappa = {kappa})")
    radicand = 18.0 * g_rabi ** 2 - kappa ** 2
    if radicand < 0:
        raise DomainError(
            f"No real optimal drive: 18 g^2 < kappa^2 (g = {g_rabi:.4e}, kappa = {kappa:.4e})"
        )
    omega = math.sqrt(radicand) / 6.0

    threshold = VALIDITY_RATIO * kappa
    warnings = []
    if math.isclose(g_rabi, threshold, rel_tol=1e-9):
        validity = "boundary"
    elif g_rabi < threshold:
        validity = "violated"
        warnings.append(ValidationWarning(
            f"g = {g_rabi:.4e} rad/s is below sqrt(2/27) kappa = {threshold:.4e} rad/s; "
            f"the optimal-drive formula does not minimize the reset time here",
            context={'g_rabi': g_rabi, 'kappa': kappa},
        ))
    else:
        validity = "valid"
    return DriveSetting(omega_rabi=omega, validity=validity, warnings=warnings)


def reset_mode_rates(g_rabi: float, omega_rabi: float, kappa: float) -> np.ndarray:
    """
    Population decay rates, ascending, of the three modes of |e,0>, |f,0>, |g,1>
    (ef coupling Omega, f0g1 coupling g, |g,1> leaking at kappa).

    The smallest is the asymptotic reset rate. The optimal drive makes all
    three equal to kappa / 3, the largest the slowest one can be.
    """
    m = np.array([
        [0.0, omega_rabi, 0.0],
        [omega_rabi, 0.0, g_rabi],
        [0.0, g_rabi, -0.5j * kappa],
    ], dtype=complex)
    return np.sort(-2.0 * np.linalg.eigvals(m).imag)


def fidelity_from_rates(gamma_up: float, gamma_down: float, kappa_eff: float) -> float:
    """Steady ground occupation (Gamma_down + kappa/3) / (Gamma_up + Gamma_down + kappa/3)."""
    if math.isinf(kappa_eff):
        return 1.0
    reset = kappa_eff / 3.0
    return (gamma_down + reset) / (gamma_up + gamma_down + reset)


def fidelity_estimate(p: DeviceParams, kappa_eff: float) -> float:
    """Upper estimate of P_g with the reset running continuously at kappa_eff / 3."""
    gamma_up, gamma_down = thermal_rates(p)
    return fidelity_from_rates(gamma_up, gamma_down, kappa_eff)
