"""
Experiment procedures built on the device model.

Usage:
    from protocols import simulate_reset, reset_sweep, ringdown, optimal_drive
"""

from .drive import (
    DriveSetting,
    fidelity_estimate,
    fidelity_from_rates,
    optimal_drive,
    reset_mode_rates,
)
from .fits import IvFit, T1Fit, fit_iv, synth_iv, t1_fit
from .reset import (
    RESET_THRESHOLD,
    SWEEP_COLUMNS,
    ResetRate,
    ResetResult,
    Rethermalization,
    SweepGrid,
    crossing_time,
    reset_rate,
    reset_sweep,
    rethermalization,
    simulate_reset,
)
from .ringdown import (
    KAPPA_SWEEP_COLUMNS,
    KappaSweepRow,
    RingdownResult,
    fit_ringdown,
    kappa_sweep,
    ringdown,
    ringdown_ratio,
)
from .rpm import RPM_SEQUENCES, RpmAmplitudes, RpmEstimate, rpm_estimate, rpm_readout, simulate_rpm

__all__ = [
    # Drive and fidelity
    'DriveSetting',
    'optimal_drive',
    'fidelity_estimate',
    'fidelity_from_rates',
    'reset_mode_rates',
    # Reset
    'RESET_THRESHOLD',
    'SWEEP_COLUMNS',
    'ResetResult',
    'ResetRate',
    'Rethermalization',
    'SweepGrid',
    'simulate_reset',
    'reset_sweep',
    'crossing_time',
    'reset_rate',
    'rethermalization',
    # Ringdown
    'KAPPA_SWEEP_COLUMNS',
    'KappaSweepRow',
    'RingdownResult',
    'ringdown_ratio',
    'fit_ringdown',
    'ringdown',
    'kappa_sweep',
    # RPM
    'RPM_SEQUENCES',
    'RpmAmplitudes',
    'RpmEstimate',
    'rpm_estimate',
    'rpm_readout',
    'simulate_rpm',
    # Fits
    'T1Fit',
    'IvFit',
    't1_fit',
    'fit_iv',
    'synth_iv',
]
