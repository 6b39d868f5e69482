"""
Resonator ringdown: kappa_eff and delta_gamma from amplitude ratios.

The resonator amplitude decays classically, d<a>/dt = -(kappa_eff(t) / 2) <a>,
with kappa_eff(t) = kappa_r + delta_gamma(V(t)) following the bias pulse. Between
the two amplitude samples (delay dt_ab) the pulse of length tau is applied:

    ln(A_after / A_before) = -1/2 [kappa_r dt_ab + delta_gamma (tau - t_r - t_f)
                                   + delta_gamma_rf (t_r + t_f)]

which is linear in (tau, dt_ab).
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import repeat
from typing import List, Sequence

import numpy as np

import qcr
from numerics import FitReport, QuadratureSpec, integrate, nonlinear_least_squares
from params import DeviceParams
from pulses import DEFAULT_EDGE, FlatTopPulse, envelope
from validation import DomainError, ParamValidationError, ValidationWarning

logger = logging.getLogger(__name__)

DEFAULT_DELAYS = (200e-9, 300e-9)
MAX_BIAS_RATIO = 2.2


def ringdown_ratio(
    delta_gamma: float,
    kappa_r: float,
    tau: float,
    delay: float,
    t_rise: float = DEFAULT_EDGE,
    t_fall: float = DEFAULT_EDGE,
    delta_gamma_rf: float | None = None,
) -> float:
    """A_after / A_before for a bias pulse of length tau inside a delay dt_ab."""
    if delta_gamma_rf is None:
        delta_gamma_rf = delta_gamma
    edges = t_rise + t_fall
    return math.exp(-0.5 * (kappa_r * delay + delta_gamma * (tau - edges) + delta_gamma_rf * edges))


@dataclass(frozen=True)
class RingdownResult:
    V_b: float
    taus: np.ndarray
    delays: np.ndarray
    ratios: np.ndarray  # (len(delays), len(taus))
    delta_gamma: float
    delta_gamma_stderr: float
    kappa_r: float
    kappa_r_stderr: float
    delta_gamma_rf: float
    residual_norm: float
    report: FitReport
    warnings: List[ValidationWarning] = field(default_factory=list, compare=False)

    @property
    def kappa_eff(self) -> float:
        return self.kappa_r + self.delta_gamma


def fit_ringdown(
    taus: Sequence[float],
    delays: Sequence[float],
    ratios: np.ndarray,
    t_rise: float = DEFAULT_EDGE,
    t_fall: float = DEFAULT_EDGE,
    kappa_r: float | None = None,
    V_b: float = float("nan"),
) -> RingdownResult:
    """
    Fit ln r = c0 + c1 tau + c2 dt_ab. With a single delay c2 is fixed by kappa_r.

    Raises:
        DomainError: a non-positive amplitude ratio
    """
    taus = np.asarray(taus, dtype=float)
    delays = np.asarray(delays, dtype=float)
    ratios = np.atleast_2d(np.asarray(ratios, dtype=float))
    if ratios.shape != (delays.size, taus.size):
        raise ValueError(f"ratios shape {ratios.shape} does not match ({delays.size}, {taus.size})")
    if np.any(ratios <= 0):
        raise DomainError("Ringdown amplitudes must be positive")

    tau_col = np.tile(taus, delays.size)
    delay_col = np.repeat(delays, taus.size)
    log_r = np.log(ratios).ravel()
    free_kappa = np.unique(delays).size > 1
    if not free_kappa and kappa_r is None:
        raise DomainError("A single delay needs kappa_r from the device parameters")

    # parameters in 1/s-scaled units so the Jacobian is well conditioned
    scale = 1e7
    if free_kappa:
        def residuals(x):
            return x[0] + x[1] * scale * tau_col + x[2] * scale * delay_col - log_r
        guess, names = [0.0, -1.0, -0.1], ("c0", "c1", "c2")
    else:
        known = log_r + 0.5 * kappa_r * delay_col

        def residuals(x):
            return x[0] + x[1] * scale * tau_col - known
        guess, names = [0.0, -1.0], ("c0", "c1")

    report = nonlinear_least_squares(residuals, guess, names=names)
    c = report.values
    delta_gamma = -2.0 * c[1] * scale
    dg_err = 2.0 * report.stderr[1] * scale
    if free_kappa:
        kappa_fit, kappa_err = -2.0 * c[2] * scale, 2.0 * report.stderr[2] * scale
    else:
        kappa_fit, kappa_err = float(kappa_r), 0.0
    edges = t_rise + t_fall
    delta_gamma_rf = delta_gamma - 2.0 * c[0] / edges if edges > 0 else float("nan")

    warnings = []
    if delta_gamma < -3.0 * dg_err:
        warnings.append(ValidationWarning(
            f"Fitted delta_gamma = {delta_gamma:.3e} 1/s is negative beyond 3 sigma",
            context={'V_b': V_b},
        ))
    return RingdownResult(
        V_b=V_b,
        taus=taus,
        delays=delays,
        ratios=ratios,
        delta_gamma=float(delta_gamma),
        delta_gamma_stderr=float(dg_err),
        kappa_r=float(kappa_fit),
        kappa_r_stderr=float(kappa_err),
        delta_gamma_rf=float(delta_gamma_rf),
        residual_norm=report.residual_norm,
        report=report,
        warnings=warnings,
    )


def _pulse_loss(table: qcr.RateTable | None, tau: float, t_rise: float, t_fall: float) -> float:
    """Integral of delta_gamma(V(t)) dt over a bias pulse of length tau."""
    if table is None:
        return 0.0
    pulse = FlatTopPulse(table.V_b, 0.0, tau, t_rise, t_fall)
    plateau = table.delta_gamma(1.0) * (tau - t_rise - t_fall)
    lo, hi = pulse.support
    total = plateau
    for a, b in ((lo, t_rise), (tau - t_fall, hi)):
        if b > a:
            spec = QuadratureSpec.over(a, b, abs_tol=1e-6, rel_tol=1e-9)
            total += integrate(lambda t: table.delta_gamma(envelope(pulse, t) / table.V_b), spec).value
    return total


def ringdown(
    V_b: float,
    taus: Sequence[float],
    p: DeviceParams,
    delays: Sequence[float] = DEFAULT_DELAYS,
    t_rise: float = DEFAULT_EDGE,
    t_fall: float = DEFAULT_EDGE,
    noise: float = 0.0,
    seed: int | None = None,
    table: qcr.RateTable | None = None,
) -> RingdownResult:
    """
    Simulated ringdown at bias V_b and fit of the amplitude ratios.

    Raises:
        PulseShapeError: a tau shorter than rise + fall
        DomainError: noise drove an amplitude ratio non-positive
    """
    taus = np.asarray(taus, dtype=float)
    delays = np.asarray(delays, dtype=float)
    if V_b > 0 and table is None:
        table = qcr.rate_table(V_b, p.omega_r_eff, qcr.junction_params(p), n_points=17)
    elif V_b <= 0:
        table = None

    losses = np.array([_pulse_loss(table, tau, t_rise, t_fall) for tau in taus])
    ratios = np.exp(-0.5 * (p.kappa_r * delays[:, None] + losses[None, :]))
    if noise:
        rng = np.random.default_rng(seed)
        ratios = ratios * (1.0 + noise * rng.standard_normal(ratios.shape))

    result = fit_ringdown(taus, delays, ratios, t_rise, t_fall, kappa_r=p.kappa_r, V_b=V_b)
    logger.debug("ringdown at V_b = %.4e V: delta_gamma = %.4e +- %.1e 1/s",
                 V_b, result.delta_gamma, result.delta_gamma_stderr)
    return result


@dataclass(frozen=True)
class KappaSweepRow:
    ratio: float
    V_b: float
    gamma_down: float
    gamma_up: float
    delta_gamma: float
    kappa_eff_theory: float
    kappa_eff_ringdown: float


KAPPA_SWEEP_COLUMNS = [
    "eVb_over_2Delta", "gamma_down", "gamma_up", "delta_gamma", "kappa_eff_theory", "kappa_eff_ringdown",
]


def kappa_sweep_point(ratio: float, p: DeviceParams, taus: Sequence[float],
                      delays: Sequence[float] = DEFAULT_DELAYS) -> KappaSweepRow:
    """Theory rates and the ringdown-extracted kappa_eff at one bias."""
    jp = qcr.junction_params(p)
    V_b = qcr.bias_from_ratio(ratio, p.Delta)
    point = qcr.bias_point(V_b, p.omega_r_eff, jp, p.kappa_r)
    fit = ringdown(V_b, taus, p, delays=delays)
    return KappaSweepRow(
        ratio=ratio,
        V_b=V_b,
        gamma_down=point.Gamma_down,
        gamma_up=point.Gamma_up,
        delta_gamma=point.delta_gamma,
        kappa_eff_theory=point.kappa_eff,
        kappa_eff_ringdown=fit.kappa_eff,
    )


def kappa_sweep(
    ratios: Sequence[float],
    p: DeviceParams,
    taus: Sequence[float] = (50e-9, 100e-9, 150e-9, 200e-9),
    delays: Sequence[float] = DEFAULT_DELAYS,
    jobs: int = 1,
) -> tuple[List[KappaSweepRow], List[ValidationWarning]]:
    """
    kappa_eff(V_b) from theory and from simulated ringdowns on a grid of eV_b / 2 Delta.
    Bias points are spread over `jobs` worker processes; rows keep the grid order.

    Raises:
        ParamValidationError: a grid point outside [0, 2.2]
    """
    for r in ratios:
        if not 0.0 <= r <= MAX_BIAS_RATIO:
            raise ParamValidationError(f"0 <= eV_b/2Delta <= {MAX_BIAS_RATIO}", f"got {r}")
    points = [float(r) for r in ratios]
    logger.info("kappa sweep: %d bias points on %d worker(s)", len(points), jobs)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            computed = list(pool.map(kappa_sweep_point, points, repeat(p), repeat(taus), repeat(delays)))
    else:
        computed = [kappa_sweep_point(r, p, taus, delays) for r in points]

    rows, warnings = [], []
    for r, row in zip(points, computed):
        if row.delta_gamma <= 0 and row.V_b > 0:
            warnings.append(ValidationWarning(
                f"Heating at eV_b/2Delta = {r:.4g}: delta_gamma = {row.delta_gamma:.3e} 1/s",
                context={'ratio': float(r)},
            ))
        rows.append(row)
    logger.info("kappa sweep: %d bias points, %d heating", len(rows), len(warnings))
    return rows, warnings
