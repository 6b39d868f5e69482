"""
Device and environment parameters.

Config documents are flat KEY=value files (parsed with python-dotenv) in lab
units; everything is converted to SI on load: angular frequencies in rad/s,
times in s, energies in J, capacitances in F, resistance in Ohm, temperature
in K. Angular frequencies are stored as 2*pi*f.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
from dataclasses import dataclass
from typing import List, Mapping, Tuple

from dotenv import dotenv_values
from scipy import constants

from validation import (
    ConfigError,
    MissingKeyError,
    ParamValidationError,
    ValidationWarning,
    get_param_validator,
)

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi
E_CHARGE = constants.e

GHZ = TWO_PI * 1e9
MHZ = TWO_PI * 1e6


# ---- 1. Config schema: key -> (field, unit factor, symbol) ----
REQUIRED_KEYS = {
    "resonator_freq_GHz":          ("omega_r", GHZ, "omega_r"),
    "ge_freq_GHz":                 ("omega_ge", GHZ, "omega_ge"),
    "anharmonicity_MHz":           ("alpha", MHZ, "alpha"),
    "coupling_MHz":                ("lambda_c", MHZ, "lambda"),
    "resonator_kappa_per_s":       ("kappa_r", 1.0, "kappa_r"),
    "T1_us":                       ("T1", 1e-6, "T1"),
    "T2_star_us":                  ("T2_star", 1e-6, "T2_star"),
    "thermal_excited_population":  ("P_e_thermal", 1.0, "P_e"),
    "tunnel_resistance_kOhm":      ("R_T", 1e3, "R_T"),
    "gap_ueV":                     ("Delta", 1e-6 * E_CHARGE, "Delta"),
    "dynes_parameter":             ("gamma_D", 1.0, "gamma_D"),
    "electron_temperature_mK":     ("T_N", 1e-3, "T_N"),
    "coupling_capacitance_fF":     ("C_c", 1e-15, "C_c"),
    "junction_capacitance_fF":     ("C_j", 1e-15, "C_j"),
    "island_capacitance_fF":       ("C_m", 1e-15, "C_m"),
}

OPTIONAL_KEYS = {
    "resonator_detuning_MHz":      ("detuning_r", MHZ, 0.0),
    "qubit_detuning_MHz":          ("detuning_q", MHZ, 0.0),
    "f0g1_freq_GHz":               ("omega_f0g1_measured", GHZ, None),
    "EJ_over_EC":                  ("EJ_over_EC", 1.0, None),
    "qubit_capacitance_fF":        ("C_q", 1e-15, None),
    "island_total_capacitance_fF": ("C_sigma", 1e-15, None),
    "gamma_ef_per_s":              ("gamma_ef", 1.0, None),
    "gamma_phi_ef_per_s":          ("gamma_phi_ef", 1.0, None),
    "qcr_qubit_decay_ge_per_s":    ("gamma_T_ge", 1.0, 0.0),
    "qcr_qubit_decay_ef_per_s":    ("gamma_T_ef", 1.0, 0.0),
    "qcr_qubit_occupation":        ("N_Tq", 1.0, 0.0),
    "line_thermal_occupation":     ("N_tr", 1.0, 0.0),
    "ef_thermal_occupation":       ("n_th_ef", 1.0, 0.0),
    "junction_bias_fraction":      ("bias_fraction", 1.0, 0.5),
}

# Redundant rows of the device table, checked against the recomputed values
CHECK_KEYS = {
    "ef_freq_GHz":                 ("omega_ef_supplied", GHZ),
    "detuning_GHz":                ("delta_d_supplied", GHZ),
    "frequency_tolerance_MHz":     ("frequency_tolerance_hz", 1e6),
}

M2_KEY = "qcr_coupling_m2"
TARGET_KEY = "qcr_target_cooling_rate_per_s"
BIAS_RATIO_KEY = "qcr_operating_bias_ratio"
DEFAULT_TARGET_COOLING = 3.9e7
DEFAULT_BIAS_RATIO = 1.03


@dataclass(frozen=True)
class DeviceParams:
    """Measured device parameters plus model choices, all SI."""
    omega_r: float
    omega_ge: float
    omega_ef: float
    alpha: float
    lambda_c: float
    delta_d: float
    kappa_r: float
    T1: float
    T2_star: float
    P_e_thermal: float
    R_T: float
    Delta: float
    gamma_D: float
    T_N: float
    C_c: float
    C_j: float
    C_m: float
    m2_coupling: float
    n_fock: int = 5
    detuning_r: float = 0.0
    detuning_q: float = 0.0
    # provenance only
    omega_f0g1_measured: float | None = None
    EJ_over_EC: float | None = None
    C_q: float | None = None
    # overrides
    C_sigma: float | None = None
    gamma_ef: float | None = None
    gamma_phi_ef: float | None = None
    gamma_T_ge: float = 0.0
    gamma_T_ef: float = 0.0
    N_Tq: float = 0.0
    N_tr: float = 0.0
    n_th_ef: float = 0.0
    bias_fraction: float = 0.5

    @property
    def omega_r_eff(self) -> float:
        """Resonator frequency including the static frame offset."""
        return self.omega_r + self.detuning_r

    @property
    def omega_ge_eff(self) -> float:
        return self.omega_ge + self.detuning_q

    def with_overrides(self, **changes) -> "DeviceParams":
        p = dataclasses.replace(self, **changes)
        validate(p)
        return p

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Mapping) -> "DeviceParams":
        """Rebuild from to_dict output (SI); redundant rows must match to 1e-9 relative."""
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"Unknown parameter fields: {sorted(unknown)}")
        p = cls(**dict(data))
        validate(p, extra={
            'omega_ef_supplied': p.omega_ef,
            'delta_d_supplied': p.delta_d,
            'frequency_tolerance_hz': 1e-9 * p.omega_r / TWO_PI,
        })
        return p

    @classmethod
    def from_json(cls, text: str) -> "DeviceParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class DerivedParams:
    E_N: float
    C_sigma: float
    omega_f0g1_bare: float
    Gamma_up_q: float
    Gamma_down_q: float
    gamma_ge: float
    n_th: float
    gamma_phi_ge: float
    gamma_ef: float
    gamma_phi_ef: float
    n_th_ef: float


def validate(p: DeviceParams, extra: dict | None = None) -> List[ValidationWarning]:
    """Run the hard and soft parameter checks on a DeviceParams."""
    fields = dataclasses.asdict(p)
    if extra:
        fields.update(extra)
    validator = get_param_validator()
    warnings = validator.validate_params(fields)
    # recomputed quantities must hold exactly
    if p.omega_ef != p.omega_ge + p.alpha:
        if abs(p.omega_ef - (p.omega_ge + p.alpha)) > 1e-9 * p.omega_ge:
            raise ParamValidationError("alpha = omega_ef - omega_ge")
    if not 0.0 < p.bias_fraction <= 1.0:
        raise ParamValidationError("0 < junction_bias_fraction <= 1", f"{p.bias_fraction}")
    for name in ('gamma_T_ge', 'gamma_T_ef', 'N_Tq', 'N_tr', 'n_th_ef'):
        if getattr(p, name) < 0:
            raise ParamValidationError(f"{name} >= 0", f"{name} = {getattr(p, name)}")
    for w in warnings:
        logger.warning(w.message)
    return warnings


def charging_energy(p: DeviceParams) -> Tuple[float, float]:
    """(E_N, C_sigma) with C_sigma = C_c + 2 C_j + C_m unless overridden."""
    c_sigma = p.C_sigma if p.C_sigma is not None else p.C_c + 2.0 * p.C_j + p.C_m
    if not c_sigma > 0:
        raise ParamValidationError("C_sigma > 0", f"C_sigma = {c_sigma}")
    return E_CHARGE ** 2 / (2.0 * c_sigma), c_sigma


def thermal_rates(p: DeviceParams) -> Tuple[float, float]:
    """Qubit (Gamma_up, Gamma_down) with Gamma_up + Gamma_down = 1/T1 and P_e = Gamma_up / sum."""
    total = 1.0 / p.T1
    return p.P_e_thermal * total, (1.0 - p.P_e_thermal) * total


def derive(p: DeviceParams) -> DerivedParams:
    """
    Derived quantities: island charging energy, bare f0g1 frequency, and the
    Lindblad coefficients reproducing T1, T2* and the thermal population.

    Raises:
        ParamValidationError: T2* > 2 T1 (negative pure dephasing)
    """
    E_N, c_sigma = charging_energy(p)
    gamma_up, gamma_down = thermal_rates(p)

    n_th = p.P_e_thermal / (1.0 - 2.0 * p.P_e_thermal)
    gamma_ge = (1.0 / p.T1) / (1.0 + 2.0 * n_th)

    gamma_phi_ge = 1.0 / p.T2_star - 1.0 / (2.0 * p.T1)
    if gamma_phi_ge < 0:
        raise ParamValidationError(
            "T2_star <= 2 T1",
            f"T2* = {p.T2_star:.3e} s, T1 = {p.T1:.3e} s",
        )

    return DerivedParams(
        E_N=E_N,
        C_sigma=c_sigma,
        omega_f0g1_bare=2.0 * p.omega_ge + p.alpha - p.omega_r,
        Gamma_up_q=gamma_up,
        Gamma_down_q=gamma_down,
        gamma_ge=gamma_ge,
        n_th=n_th,
        gamma_phi_ge=gamma_phi_ge,
        gamma_ef=p.gamma_ef if p.gamma_ef is not None else 2.0 * gamma_ge,
        gamma_phi_ef=p.gamma_phi_ef if p.gamma_phi_ef is not None else 2.0 * gamma_phi_ge,
        n_th_ef=p.n_th_ef,
    )


# ---- 2. Loading ----

def read_config(path) -> dict:
    """Parse a KEY=value config document."""
    if not os.path.exists(path):
        raise ConfigError(f"Config file not found: {path}", user_message=f"Cannot open config {path}.")
    return {k: v for k, v in dotenv_values(path).items() if v is not None}


def _number(key: str, raw) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"Config key {key} is not a number: {raw!r}")


def load_params(config) -> DeviceParams:
    """
    Build validated DeviceParams from a config document (path or mapping).

    Raises:
        MissingKeyError: a required key is absent
        ParamValidationError: an invariant is violated
    """
    # 1. Read the document
    doc = read_config(config) if isinstance(config, (str, os.PathLike)) else dict(config)

    # 2. Required keys, converted to SI
    fields = {}
    for key, (name, factor, symbol) in REQUIRED_KEYS.items():
        if key not in doc or str(doc[key]).strip() == "":
            raise MissingKeyError(key, symbol)
        fields[name] = _number(key, doc[key]) * factor

    # 3. Optional keys and overrides
    for key, (name, factor, default) in OPTIONAL_KEYS.items():
        fields[name] = _number(key, doc[key]) * factor if key in doc else default
    if "n_fock" in doc:
        n_fock = _number("n_fock", doc["n_fock"])
        if n_fock != int(n_fock):
            raise ParamValidationError("n_fock is an integer", f"n_fock = {doc['n_fock']}")
        fields["n_fock"] = int(n_fock)

    checks = {name: _number(key, doc[key]) * factor
              for key, (name, factor) in CHECK_KEYS.items() if key in doc}

    # 4. Recompute redundant rows
    fields["omega_ef"] = fields["omega_ge"] + fields["alpha"]
    fields["delta_d"] = fields["omega_r"] - fields["omega_ge"]

    # 5. QCR matrix element: numeric, or calibrated to the target cooling rate
    raw_m2 = str(doc.get(M2_KEY, "auto")).strip().lower()
    fields["m2_coupling"] = 1.0 if raw_m2 == "auto" else _number(M2_KEY, raw_m2)

    p = DeviceParams(**fields)
    validate(p, extra=checks)

    if raw_m2 == "auto":
        target = _number(TARGET_KEY, doc.get(TARGET_KEY, DEFAULT_TARGET_COOLING))
        ratio = _number(BIAS_RATIO_KEY, doc.get(BIAS_RATIO_KEY, DEFAULT_BIAS_RATIO))
        p = dataclasses.replace(p, m2_coupling=_calibrated_m2(p, target, ratio))
        logger.info("Calibrated m2_coupling = %.6g (delta_gamma = %.3g 1/s at eV_b/2Delta = %.3g)",
                    p.m2_coupling, target, ratio)
    return p


def _calibrated_m2(p: DeviceParams, target: float, ratio: float) -> float:
    # qcr depends on params; import here to keep the module graph acyclic
    import qcr
    jp = qcr.junction_params(p)
    return qcr.calibrate_m2(target, qcr.bias_from_ratio(ratio, p.Delta), p.omega_r_eff, jp)
