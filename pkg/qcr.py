"""
SINIS quantum-circuit refrigerator physics.

Dynes density of states, the photon-assisted tunnelling kernel F, the
single-photon Fock transition rates, the cooling rate delta_gamma, kappa_eff,
the effective QCR occupation N_T, and the I-V model used for junction fits.

Sign convention: ell = +1 is the photon-absorbing process (resonator
m -> m-1, "down"), ell = -1 the photon-emitting one ("up"). Each NIS junction
of the symmetric SINIS drops bias_fraction * V_b.
"""

from __future__ import annotations

import dataclasses
import functools
import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy import constants
from scipy.interpolate import PchipInterpolator
from scipy.special import expit

from numerics import QuadratureSpec, integrate
from validation import (
    DomainError,
    ModelConsistencyError,
    ParamValidationError,
    ValidationWarning,
)

logger = logging.getLogger(__name__)

E_CHARGE = constants.e
H_PLANCK = constants.h
HBAR = constants.hbar
K_B = constants.k
R_K = H_PLANCK / E_CHARGE ** 2

QUAD_REL_TOL = 1e-9


@dataclass(frozen=True)
class JunctionParams:
    R_T: float
    Delta: float
    gamma_D: float
    T_N: float
    E_N: float
    m2_coupling: float = 1.0
    bias_fraction: float = 0.5

    def __post_init__(self):
        for name in ('R_T', 'Delta', 'T_N'):
            if not getattr(self, name) > 0:
                raise ParamValidationError(f"{name} > 0", f"{name} = {getattr(self, name)}")
        if self.E_N < 0:
            raise ParamValidationError("E_N >= 0", f"E_N = {self.E_N}")
        if not 0.0 <= self.gamma_D < 1.0:
            raise ParamValidationError("0 <= gamma_D < 1", f"gamma_D = {self.gamma_D}")
        if not 0.0 < self.m2_coupling <= 1.0:
            raise ParamValidationError("0 < m2_coupling <= 1", f"m2_coupling = {self.m2_coupling}")

    @property
    def kT(self) -> float:
        return K_B * self.T_N

    def replace(self, **changes) -> "JunctionParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class QcrBiasPoint:
    V_b: float
    Gamma_down: float
    Gamma_up: float
    delta_gamma: float
    N_T: float
    kappa_eff: float

    @property
    def heating(self) -> bool:
        return self.delta_gamma <= 0.0


def junction_params(p) -> JunctionParams:
    """JunctionParams from DeviceParams (E_N from the island capacitance)."""
    from params import charging_energy
    E_N, _ = charging_energy(p)
    return JunctionParams(
        R_T=p.R_T, Delta=p.Delta, gamma_D=p.gamma_D, T_N=p.T_N, E_N=E_N,
        m2_coupling=p.m2_coupling, bias_fraction=p.bias_fraction,
    )


def bias_from_ratio(ratio: float, Delta: float) -> float:
    """V_b for a given eV_b / 2 Delta."""
    return ratio * 2.0 * Delta / E_CHARGE


def ratio_from_bias(V_b: float, Delta: float) -> float:
    return E_CHARGE * V_b / (2.0 * Delta)


# ---- Density of states and tunnelling kernel ----

def dynes_dos(eps, jp: JunctionParams):
    """n_S(eps) = |Re[(eps/Delta + i gamma_D) / sqrt((eps/Delta + i gamma_D)^2 - 1)]|."""
    x = np.asarray(eps, dtype=float) / jp.Delta + 1j * jp.gamma_D
    with np.errstate(divide='ignore', invalid='ignore'):
        n = np.abs(np.real(x / np.sqrt(x * x - 1.0)))
    n = np.where(np.isfinite(n), n, 0.0)
    return float(n) if n.ndim == 0 else n


def _cutoff(E: float, jp: JunctionParams) -> float:
    return max(10.0 * jp.Delta, abs(E) + 10.0 * jp.kT + 10.0 * jp.Delta)


@functools.lru_cache(maxsize=65536)
def _rate_function(E: float, jp: JunctionParams) -> float:
    kT = jp.kT
    Delta = jp.Delta

    def integrand(eps):
        return dynes_dos(eps, jp) * expit((E - eps) / kT) * expit(eps / kT)

    cut = _cutoff(E, jp)
    width = 10.0 * kT
    spec = QuadratureSpec.over(
        -cut, cut,
        breakpoints=(-Delta, Delta, 0.0, E, -width, width, E - width, E + width),
        abs_tol=1e-300,
        rel_tol=QUAD_REL_TOL,
        max_subdivisions=1000,
    )
    return integrate(integrand, spec).value / H_PLANCK


def rate_function_F(E: float, jp: JunctionParams) -> float:
    """
    F(E) = (1/h) * integral n_S(eps) f(eps - E) [1 - f(eps)] d eps, Fermi functions at T_N.

    Raises:
        QuadratureError: the integral did not converge
    """
    return _rate_function(float(E), jp)


# ---- Fock transition rates ----

def transition_rate(ell: int, V_b: float, omega_r: float, jp: JunctionParams) -> float:
    """
    Single-photon rate Gamma(ell) = m2 (2 R_K / R_T) [F(eV + hbar w ell - E_N) + F(-eV + hbar w ell - E_N)],
    with eV = e * bias_fraction * V_b.
    """
    if ell not in (1, -1):
        raise DomainError(f"Only single-photon processes are modelled (ell = +-1), got {ell}")
    if V_b < 0:
        raise DomainError(f"Bias must be non-negative, got {V_b}")
    eV = E_CHARGE * jp.bias_fraction * V_b
    photon = HBAR * omega_r * ell
    prefactor = jp.m2_coupling * 2.0 * R_K / jp.R_T
    return prefactor * (
        rate_function_F(eV + photon - jp.E_N, jp) + rate_function_F(-eV + photon - jp.E_N, jp)
    )


def delta_gamma(V_b: float, omega_r: float, jp: JunctionParams) -> float:
    """QCR cooling rate Gamma(+1) - Gamma(-1); negative means net heating."""
    return transition_rate(1, V_b, omega_r, jp) - transition_rate(-1, V_b, omega_r, jp)


def kappa_eff(V_b: float, omega_r: float, jp: JunctionParams, kappa_r: float) -> float:
    return kappa_r + delta_gamma(V_b, omega_r, jp)


def effective_occupation_NT(V_b: float, omega_r: float, jp: JunctionParams) -> float:
    """
    N_T = Gamma(-1) / (Gamma(+1) - Gamma(-1)).

    Raises:
        DomainError: delta_gamma <= 0 (no effective temperature)
    """
    down = transition_rate(1, V_b, omega_r, jp)
    up = transition_rate(-1, V_b, omega_r, jp)
    if down - up <= 0:
        raise DomainError(
            f"delta_gamma = {down - up:.3e} 1/s <= 0 at V_b = {V_b:.4e} V: no effective occupation"
        )
    return up / (down - up)


def bias_point(V_b: float, omega_r: float, jp: JunctionParams, kappa_r: float) -> QcrBiasPoint:
    """All rates at one bias. N_T is NaN in the heating regime."""
    down = transition_rate(1, V_b, omega_r, jp)
    up = transition_rate(-1, V_b, omega_r, jp)
    dg = down - up
    return QcrBiasPoint(
        V_b=V_b,
        Gamma_down=down,
        Gamma_up=up,
        delta_gamma=dg,
        N_T=up / dg if dg > 0 else float("nan"),
        kappa_eff=kappa_r + dg,
    )


def bias_sweep(
    biases: Sequence[float], omega_r: float, jp: JunctionParams, kappa_r: float
) -> Tuple[List[QcrBiasPoint], List[ValidationWarning]]:
    """Rates on a bias grid; heating points are flagged, not dropped."""
    points, warnings = [], []
    for V_b in biases:
        point = bias_point(float(V_b), omega_r, jp, kappa_r)
        if point.heating:
            warnings.append(ValidationWarning(
                f"delta_gamma = {point.delta_gamma:.3e} 1/s <= 0 at V_b = {V_b:.4e} V (heating)",
                context={'V_b': float(V_b)},
            ))
        points.append(point)
    return points, warnings


def calibrate_m2(target_delta_gamma: float, V_b: float, omega_r: float, jp: JunctionParams) -> float:
    """
    |M01|^2 that makes delta_gamma(V_b) equal the target. Rates are linear in m2.

    Raises:
        DomainError: non-positive target
        ModelConsistencyError: the required m2 exceeds 1, or no cooling at V_b
    """
    if not target_delta_gamma > 0:
        raise DomainError(f"Target cooling rate must be positive, got {target_delta_gamma}")
    unit = delta_gamma(V_b, omega_r, jp.replace(m2_coupling=1.0))
    if unit <= 0:
        raise ModelConsistencyError(
            f"No cooling at V_b = {V_b:.4e} V (delta_gamma with m2 = 1 is {unit:.3e} 1/s)"
        )
    m2 = target_delta_gamma / unit
    if m2 > 1.0:
        raise ModelConsistencyError(
            f"Target delta_gamma = {target_delta_gamma:.3e} 1/s needs m2 = {m2:.3g} > 1",
            user_message="The requested QCR cooling rate is not reachable with these junction parameters.",
        )
    return m2


# ---- Quasi-static rate tables for the master equation ----

@dataclass(frozen=True, eq=False)
class RateTable:
    """Gamma_down, Gamma_up as functions of the bias envelope fraction u in [0, 1]."""
    V_b: float
    u: np.ndarray
    down: np.ndarray
    up: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, '_down', PchipInterpolator(self.u, self.down))
        object.__setattr__(self, '_up', PchipInterpolator(self.u, self.up))

    def rates(self, u: float) -> Tuple[float, float]:
        u = min(max(u, 0.0), 1.0)
        return max(float(self._down(u)), 0.0), max(float(self._up(u)), 0.0)

    def delta_gamma(self, u: float) -> float:
        down, up = self.rates(u)
        return down - up


def rate_table(V_b: float, omega_r: float, jp: JunctionParams, n_points: int = 41) -> RateTable:
    """Tabulate both rates on u = V / V_b in [0, 1] (endpoints exact)."""
    u = np.linspace(0.0, 1.0, n_points)
    down = np.array([transition_rate(1, x * V_b, omega_r, jp) for x in u])
    up = np.array([transition_rate(-1, x * V_b, omega_r, jp) for x in u])
    logger.debug("rate table at V_b = %.4e V: down %.3e..%.3e, up %.3e..%.3e",
                 V_b, down[0], down[-1], up[0], up[-1])
    return RateTable(V_b=V_b, u=u, down=down, up=up)


# ---- I-V model ----

def iv_current(V: float, jp: JunctionParams) -> float:
    """
    I = (1 / 2 e R_T) * integral n_S(E) [f(E - eV) - f(E + eV)] dE, odd in V by construction.
    """
    V = float(V)
    if V == 0.0:
        return 0.0
    eV = E_CHARGE * abs(V)
    kT = jp.kT

    def integrand(E):
        return dynes_dos(E, jp) * (expit((eV - E) / kT) - expit(-(E + eV) / kT))

    cut = eV + 10.0 * jp.Delta + 40.0 * kT
    spec = QuadratureSpec.over(
        -cut, cut,
        breakpoints=(-jp.Delta, jp.Delta, -eV, eV, 0.0),
        abs_tol=1e-300,
        rel_tol=QUAD_REL_TOL,
        max_subdivisions=1000,
    )
    current = integrate(integrand, spec).value / (2.0 * E_CHARGE * jp.R_T)
    return math.copysign(current, V)


def iv_curve(voltages: Sequence[float], jp: JunctionParams) -> np.ndarray:
    return np.array([iv_current(v, jp) for v in voltages])
