"""
Flat-top Gaussian envelopes and the reset pulse schedule.

An envelope rises as a Gaussian (sigma = sigma_ratio * t_rise, peak at
t_start + t_rise), stays flat, then falls symmetrically; the Gaussian tails
continue outside [t_start, t_start + tau] down to TAIL_CUTOFF * amplitude.
The cutoff is subtracted and the edge rescaled to keep a unit peak; the
envelope reaches exactly zero at the support boundary.

Timeline of a reset schedule: ideal preparation gates at t = 0, then the
ef-drive, f0g1-drive and QCR bias co-timed over the reset window, then the
readout marker at t_end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import erf

from hilbert import DensityMatrix, SpaceDims, qubit_operator
from validation import PulseShapeError

TAIL_CUTOFF = 1e-6
DEFAULT_EDGE = 2.5e-9
DEFAULT_SIGMA_RATIO = 0.5

_TAIL_WIDTH = math.sqrt(2.0 * math.log(1.0 / TAIL_CUTOFF))  # in units of sigma


def gaussian_segment_fraction(sigma_ratio: float = DEFAULT_SIGMA_RATIO) -> float:
    """Area of one shifted, truncated Gaussian edge divided by amplitude * edge time."""
    gauss = math.sqrt(math.pi / 2.0) * erf(_TAIL_WIDTH / math.sqrt(2.0))
    return sigma_ratio * (gauss - TAIL_CUTOFF * _TAIL_WIDTH) / (1.0 - TAIL_CUTOFF)


@dataclass(frozen=True)
class FlatTopPulse:
    amplitude: float
    t_start: float
    tau: float
    t_rise: float = DEFAULT_EDGE
    t_fall: float = DEFAULT_EDGE
    carrier_detuning: float = 0.0
    sigma_ratio: float = DEFAULT_SIGMA_RATIO

    def __post_init__(self):
        if not math.isfinite(self.amplitude):
            raise PulseShapeError(f"Pulse amplitude must be finite, got {self.amplitude}")
        if self.t_rise < 0 or self.t_fall < 0 or self.sigma_ratio <= 0:
            raise PulseShapeError("Rise/fall times must be >= 0 and sigma_ratio > 0")
        effective_flat_duration(self)

    @property
    def t_stop(self) -> float:
        return self.t_start + self.tau

    @property
    def support(self) -> tuple[float, float]:
        """Interval outside which the envelope is exactly zero."""
        return (
            self.t_start + self.t_rise - _TAIL_WIDTH * self.sigma_ratio * self.t_rise,
            self.t_stop - self.t_fall + _TAIL_WIDTH * self.sigma_ratio * self.t_fall,
        )

    def to_manifest(self) -> dict:
        return {
            "amplitude": self.amplitude,
            "t_start": self.t_start,
            "tau": self.tau,
            "t_rise": self.t_rise,
            "t_fall": self.t_fall,
            "carrier_detuning": self.carrier_detuning,
            "sigma_ratio": self.sigma_ratio,
        }


def effective_flat_duration(p: FlatTopPulse) -> float:
    """tau - t_rise - t_fall."""
    flat = p.tau - p.t_rise - p.t_fall
    if flat < -1e-18:
        raise PulseShapeError(
            f"Pulse length {p.tau * 1e9:.4g} ns is shorter than rise + fall "
            f"({(p.t_rise + p.t_fall) * 1e9:.4g} ns)"
        )
    return max(flat, 0.0)


def _edge(x: np.ndarray, sigma: float) -> np.ndarray:
    """Gaussian edge exp(-x^2 / 2 sigma^2) for x measured from the plateau end, less the cutoff."""
    if sigma == 0.0:
        return np.zeros_like(x)
    g = np.exp(-0.5 * (x / sigma) ** 2)
    return np.clip((g - TAIL_CUTOFF) / (1.0 - TAIL_CUTOFF), 0.0, 1.0)


def envelope(p: FlatTopPulse, t):
    """Envelope value(s) at time(s) t, in pulse units."""
    t_arr = np.asarray(t, dtype=float)
    if p.amplitude == 0.0:
        out = np.zeros_like(t_arr)
    else:
        rise_peak = p.t_start + p.t_rise
        fall_peak = p.t_stop - p.t_fall
        shape = np.where(
            t_arr < rise_peak,
            _edge(t_arr - rise_peak, p.sigma_ratio * p.t_rise),
            np.where(t_arr > fall_peak, _edge(t_arr - fall_peak, p.sigma_ratio * p.t_fall), 1.0),
        )
        out = p.amplitude * shape
    return float(out) if np.ndim(out) == 0 else out


# ---- Ideal gates ----

GATE_NAMES = ("pi_ge", "pi_ef", "2pi_ef")


def ideal_gate(name: str, dims: SpaceDims):
    """Instantaneous unitary exp(-i theta sigma_x / 2) on the named qubit pair."""
    if name not in GATE_NAMES:
        raise PulseShapeError(f"Unknown gate {name!r}; expected one of {GATE_NAMES}")
    i, j = (0, 1) if name == "pi_ge" else (1, 2)
    theta = 2.0 * math.pi if name == "2pi_ef" else math.pi
    u = np.eye(3, dtype=complex)
    u[i, i] = u[j, j] = math.cos(theta / 2.0)
    u[i, j] = u[j, i] = -1j * math.sin(theta / 2.0)
    return qubit_operator(dims, u)


def apply_gates(rho: DensityMatrix, gates: Sequence[str]) -> DensityMatrix:
    entries = np.array(rho.entries)
    for name in gates:
        u = ideal_gate(name, rho.dims).entries
        entries = u @ entries @ u.conj().T
    # gates are exact permutations up to phases; clean roundoff asymmetry
    entries = 0.5 * (entries + entries.conj().T)
    return DensityMatrix(rho.dims, entries)


# ---- Schedule ----

@dataclass(frozen=True)
class GateMarker:
    name: str
    t: float


@dataclass(frozen=True)
class PulseSchedule:
    ef_drive: FlatTopPulse
    f0g1_drive: FlatTopPulse
    qcr_bias: FlatTopPulse
    prep_gates: tuple = ()
    t_end: float = 0.0
    readout_time: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        for label, pulse in self.channels.items():
            lo, hi = pulse.support
            if pulse.amplitude != 0.0 and (lo < -1e-15 or hi > self.t_end + 1e-15):
                raise PulseShapeError(
                    f"{label} pulse [{lo:.4g}, {hi:.4g}] s does not fit in [0, {self.t_end:.4g}] s"
                )
        times = [g.t for g in self.prep_gates]
        if times != sorted(times):
            raise PulseShapeError("Preparation gates must be time-ordered")

    @property
    def channels(self) -> dict:
        return {"ef": self.ef_drive, "f0g1": self.f0g1_drive, "qcr": self.qcr_bias}

    @property
    def window(self) -> tuple[float, float]:
        """Span of the reset window including Gaussian tails."""
        supports = [p.support for p in self.channels.values()]
        return min(s[0] for s in supports), max(s[1] for s in supports)

    @property
    def gate_names(self) -> list:
        return [g.name for g in self.prep_gates]

    def to_manifest(self) -> dict:
        return {
            "ef_drive": self.ef_drive.to_manifest(),
            "f0g1_drive": self.f0g1_drive.to_manifest(),
            "qcr_bias": self.qcr_bias.to_manifest(),
            "prep_gates": [{"name": g.name, "t": g.t} for g in self.prep_gates],
            "t_end": self.t_end,
            "readout_time": self.readout_time,
        }


def idle_schedule(t_end: float, V_b: float = 0.0, prep: Sequence[str] = ()) -> PulseSchedule:
    """Drives off; the QCR bias, if any, is held at V_b for the whole window."""
    off = FlatTopPulse(0.0, 0.0, 0.0, 0.0, 0.0)
    bias = FlatTopPulse(V_b, 0.0, t_end, 0.0, 0.0) if V_b else off
    return PulseSchedule(
        ef_drive=off,
        f0g1_drive=off,
        qcr_bias=bias,
        prep_gates=tuple(GateMarker(name, 0.0) for name in prep),
        t_end=t_end,
        readout_time=t_end,
    )


def reset_schedule(
    tau_reset: float,
    V_b: float,
    g_rabi: float,
    omega_rabi: float,
    prep: Sequence[str] = (),
    t_rise: float = DEFAULT_EDGE,
    t_fall: float = DEFAULT_EDGE,
    bias_rise: float | None = None,
    bias_fall: float | None = None,
    f0g1_detuning: float = 0.0,
    ef_detuning: float = 0.0,
) -> PulseSchedule:
    """
    Preparation gates at t = 0, three co-timed
    flat-top pulses of length tau_reset, readout marker at t_end.
    """
    bias_rise = t_rise if bias_rise is None else bias_rise
    bias_fall = t_fall if bias_fall is None else bias_fall
    if tau_reset < max(t_rise + t_fall, bias_rise + bias_fall) - 1e-18:
        raise PulseShapeError(
            f"Reset length {tau_reset * 1e9:.4g} ns is shorter than rise + fall",
            user_message="The reset pulse must be at least as long as its rise and fall.",
        )
    for gate in prep:
        if gate not in GATE_NAMES:
            raise PulseShapeError(f"Unknown preparation gate {gate!r}")

    # the leading Gaussian tail must start at t >= 0
    t0 = max(0.0, (_TAIL_WIDTH * DEFAULT_SIGMA_RATIO - 1.0) * max(t_rise, bias_rise))
    ef = FlatTopPulse(omega_rabi, t0, tau_reset, t_rise, t_fall, carrier_detuning=ef_detuning)
    f0g1 = FlatTopPulse(g_rabi, t0, tau_reset, t_rise, t_fall, carrier_detuning=f0g1_detuning)
    bias = FlatTopPulse(V_b, t0, tau_reset, bias_rise, bias_fall)
    t_end = max(p.support[1] for p in (ef, f0g1, bias))
    return PulseSchedule(
        ef_drive=ef,
        f0g1_drive=f0g1,
        qcr_bias=bias,
        prep_gates=tuple(GateMarker(name, 0.0) for name in prep),
        t_end=t_end,
        readout_time=t_end,
    )
