"""
Rabi population measurement (RPM).

Four gate sequences, each ending in a pi_ge that maps the measured level onto
|g> before a readout modelled as amplitude = P_g:

    a1: pi_ge, 2pi_ef, pi_ge   ->  p_g
    a2: pi_ge, pi_ef,  pi_ge   ->  p_f
    b1: 2pi_ef, pi_ge          ->  p_e
    b2: pi_ef,  pi_ge          ->  p_f

so a1 - a2 = p_g - p_f and b1 - b2 = p_e - p_f. The ratio estimate therefore
equals p_e only when p_f = 0; with f population it reads
(p_e - p_f) / (p_g + p_e - 2 p_f), which is what `rpm_readout` computes
directly from populations.
"""

import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

from hilbert import DensityMatrix, populations
from pulses import apply_gates
from validation import DegenerateMeasurementError, ValidationWarning

logger = logging.getLogger(__name__)

RPM_SEQUENCES = {
    "a1": ("pi_ge", "2pi_ef", "pi_ge"),
    "a2": ("pi_ge", "pi_ef", "pi_ge"),
    "b1": ("2pi_ef", "pi_ge"),
    "b2": ("pi_ef", "pi_ge"),
}

MAX_F_POPULATION = 0.05


@dataclass(frozen=True)
class RpmAmplitudes:
    a1: float
    a2: float
    b1: float
    b2: float
    warnings: List[ValidationWarning] = field(default_factory=list, compare=False)


@dataclass(frozen=True)
class RpmEstimate:
    P_e: float
    raw: float
    out_of_range: bool
    warnings: List[ValidationWarning] = field(default_factory=list, compare=False)


def rpm_estimate(a1: float, a2: float, b1: float, b2: float) -> RpmEstimate:
    """
    P_e = (b1 - b2) / ((b1 - b2) + (a1 - a2)), clamped to [0, 1].

    Exact for states with no f population. Otherwise the result is
    (P_e - P_f) / (P_g + P_e - 2 P_f), not P_e.

    Raises:
        DegenerateMeasurementError: the denominator vanishes
    """
    with_pi = a1 - a2
    without_pi = b1 - b2
    denominator = without_pi + with_pi
    if abs(denominator) < 1e-15:
        raise DegenerateMeasurementError(
            f"RPM amplitudes carry no information: (b1 - b2) + (a1 - a2) = {denominator:.3e}"
        )
    raw = without_pi / denominator
    clamped = min(max(raw, 0.0), 1.0)
    warnings = []
    if clamped != raw:
        warnings.append(ValidationWarning(
            f"RPM estimate {raw:.6g} outside [0, 1], clamped to {clamped:g}",
            context={'raw': raw},
        ))
    return RpmEstimate(P_e=clamped, raw=raw, out_of_range=clamped != raw, warnings=warnings)


def simulate_rpm(rho: DensityMatrix) -> RpmAmplitudes:
    """Synthetic readout amplitudes of the four sequences under ideal gates."""
    warnings = []
    p_f = populations(rho).P_f
    if p_f > MAX_F_POPULATION:
        warnings.append(ValidationWarning(
            f"P_f = {p_f:.4f} > {MAX_F_POPULATION}; RPM assumes no population above |e>",
            context={'P_f': p_f},
        ))
        logger.warning(warnings[-1].message)
    amplitudes = {
        name: populations(apply_gates(rho, gates)).P_g
        for name, gates in RPM_SEQUENCES.items()
    }
    return RpmAmplitudes(**amplitudes, warnings=warnings)


def rpm_readout(P_g, P_e, P_f):
    """
    What rpm_estimate(simulate_rpm(rho)) reports, from the level populations of rho.

    (P_e - P_f) / (P_g + P_e - 2 P_f), clamped to [0, 1]; NaN where the
    denominator vanishes. Works elementwise on arrays.
    """
    P_g, P_e, P_f = (np.asarray(x, dtype=float) for x in (P_g, P_e, P_f))
    denominator = P_g + P_e - 2.0 * P_f
    safe = np.where(np.abs(denominator) < 1e-15, np.nan, denominator)
    out = np.clip((P_e - P_f) / safe, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out
