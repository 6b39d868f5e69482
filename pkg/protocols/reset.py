"""
Unconditional reset: single runs, bias x duration sweeps and derived figures of merit.

The residual excitation is what an RPM readout reports at the end of the reset
window (`rpm_readout`). Leakage 1 - P_g and the unreset population 1 - P_{g,0}
are carried alongside: under a biased refrigerator the qubit settles to a
floor with P_e close to P_f, which RPM does not register.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

import qcr
from dynamics import PopulationTrace, build_dissipators, build_model, evolve
from hilbert import DensityMatrix, SpaceDims, populations, thermal_state
from numerics import FitReport, nonlinear_least_squares
from params import MHZ, DeviceParams
from pulses import DEFAULT_EDGE, idle_schedule, reset_schedule
from validation import DomainError, FitError, QcrSimError, ValidationWarning

from .drive import optimal_drive
from .rpm import rpm_estimate, rpm_readout, simulate_rpm

logger = logging.getLogger(__name__)

RESET_THRESHOLD = 0.01
DEFAULT_G_RABI = 28.4 * MHZ
DEFAULT_SAMPLES = 101


@dataclass(frozen=True, eq=False)
class ResetResult:
    trace: PopulationTrace
    tau_reset: float
    V_b: float
    g_rabi: float
    omega_rabi: float
    kappa_eff: float
    warnings: List[ValidationWarning] = field(default_factory=list)

    @property
    def residual(self) -> float:
        """Excited population as read out by RPM at the end of the window."""
        return rpm_readout(self.P_g, self.P_e, self.P_f)

    @property
    def P_g(self) -> float:
        return float(self.trace.P_g[-1])

    @property
    def leakage(self) -> float:
        return float(self.trace.residual[-1])

    @property
    def unreset(self) -> float:
        """1 - P(g, 0): everything not yet in the ground state of both modes."""
        return float(1.0 - self.trace.levels[-1, 0, 0])

    @property
    def P_e(self) -> float:
        return float(self.trace.P_e[-1])

    @property
    def P_f(self) -> float:
        return float(self.trace.P_f[-1])


def _still_trace(rho0: DensityMatrix) -> PopulationTrace:
    """Single-sample trace for a zero-length reset."""
    pops = populations(rho0)
    return PopulationTrace(
        t=np.zeros(1),
        levels=pops.levels[None, :, :],
        P_g=np.array([pops.P_g]),
        P_e=np.array([pops.P_e]),
        P_f=np.array([pops.P_f]),
        n_mean=np.array([pops.n_mean]),
        trace_err=np.array([abs(np.trace(rho0.entries).real - 1.0)]),
        min_eig=np.array([float(np.linalg.eigvalsh(rho0.entries)[0])]),
        final=np.array(rho0.entries),
        dims=rho0.dims,
    )


def resolve_omega(omega_rule, g_rabi: float, kappa_eff: float):
    """("optimal" | explicit rad/s) -> (Omega, warnings)."""
    if isinstance(omega_rule, str):
        if omega_rule != "optimal":
            raise ValueError(f"Unknown omega rule {omega_rule!r}")
        setting = optimal_drive(g_rabi, kappa_eff)
        return setting.omega_rabi, list(setting.warnings)
    return float(omega_rule), []


def simulate_reset(
    V_b: float,
    tau_reset: float,
    p: DeviceParams,
    g_rabi: float = DEFAULT_G_RABI,
    omega_rule="optimal",
    rho0: DensityMatrix | None = None,
    frame: str = "rotating",
    n_fock: int | None = None,
    samples: int = DEFAULT_SAMPLES,
    t_rise: float = DEFAULT_EDGE,
    t_fall: float = DEFAULT_EDGE,
    f0g1_detuning: float = 0.0,
    table: qcr.RateTable | None = None,
    rtol: float = 1e-8,
    atol: float = 1e-10,
) -> ResetResult:
    """
    Full Lindblad evolution of one reset window.

    omega_rule "optimal" picks the ef-drive from the optimal-drive formula at
    kappa_eff(V_b); a number is used as Omega in rad/s. rho0 defaults to the
    thermal state.
    """
    dims = SpaceDims(n_fock or p.n_fock)
    rho0 = rho0 or thermal_state(dims, p.P_e_thermal)
    jp = qcr.junction_params(p)
    if V_b > 0:
        table = table or qcr.rate_table(V_b, p.omega_r_eff, jp)
        kappa_eff = p.kappa_r + table.delta_gamma(1.0)
    else:
        table, kappa_eff = None, p.kappa_r
    omega, warnings = resolve_omega(omega_rule, g_rabi, kappa_eff)

    if tau_reset == 0:
        trace = _still_trace(rho0)
    else:
        schedule = reset_schedule(tau_reset, V_b, g_rabi, omega, t_rise=t_rise, t_fall=t_fall,
                                  f0g1_detuning=f0g1_detuning)
        model = build_model(p, frame=frame, n_fock=dims.n_fock)
        diss = build_dissipators(p, V_b=V_b, dims=dims, qcr_table=table)
        t_grid = np.linspace(0.0, schedule.t_end, samples)
        trace = evolve(rho0, model, diss, schedule, t_grid, rtol=rtol, atol=atol)

    result = ResetResult(trace=trace, tau_reset=tau_reset, V_b=V_b, g_rabi=g_rabi,
                         omega_rabi=omega, kappa_eff=kappa_eff, warnings=warnings)
    logger.info("reset: V_b = %.4e V, tau = %.1f ns -> residual %.3e (P_e %.3e, P_f %.3e, leakage %.3e)",
                V_b, tau_reset * 1e9, result.residual, result.P_e, result.P_f, result.leakage)
    return result


# ---- Sweeps ----

@dataclass(frozen=True, eq=False)
class SweepGrid:
    ratios: np.ndarray       # eV_b / 2 Delta
    taus: np.ndarray         # s
    residual: np.ndarray     # (len(ratios), len(taus)), RPM readout
    P_e: np.ndarray
    P_f: np.ndarray
    leakage: np.ndarray      # 1 - P_g
    unreset: np.ndarray      # 1 - P_{g,0}
    failed: np.ndarray       # bool mask of cells that raised
    meta: dict = field(default_factory=dict)

    @property
    def complete(self) -> bool:
        return not self.failed.any()

    def crossing_times(self, threshold: float = RESET_THRESHOLD) -> np.ndarray:
        return np.array([crossing_time(self.taus, row, threshold) for row in self.residual])

    def contour(self, threshold: float = RESET_THRESHOLD) -> list:
        """(ratio, crossing tau) for every bias whose residual crosses the threshold."""
        return [(float(r), float(t)) for r, t in zip(self.ratios, self.crossing_times(threshold))
                if math.isfinite(t)]

    def rows(self):
        for i, r in enumerate(self.ratios):
            for j, tau in enumerate(self.taus):
                yield (r, tau * 1e9, self.residual[i, j], self.P_e[i, j], self.P_f[i, j],
                       self.leakage[i, j], self.unreset[i, j], int(self.failed[i, j]))


SWEEP_COLUMNS = ["eVb_over_2Delta", "tau_ns", "residual", "P_e", "P_f", "leakage", "unreset", "failed"]
CELL_FIELDS = 5


def _reset_cell(args) -> tuple:
    """Worker entry point; returns (residual, P_e, P_f, leakage, unreset, error message)."""
    V_b, tau, p, g_rabi, omega_rule, rho0, table, n_fock = args
    try:
        res = simulate_reset(V_b, tau, p, g_rabi=g_rabi, omega_rule=omega_rule,
                             rho0=rho0, n_fock=n_fock, table=table, samples=2)
        return res.residual, res.P_e, res.P_f, res.leakage, res.unreset, None
    except QcrSimError as e:
        return (math.nan,) * CELL_FIELDS + (str(e),)
    except Exception as e:
        # solver and linear-algebra failures must not take down the other cells
        logger.debug("reset cell V_b = %.4e V, tau = %.4e s raised", V_b, tau, exc_info=True)
        return (math.nan,) * CELL_FIELDS + (f"{type(e).__name__}: {e}",)


def reset_sweep(
    ratios: Sequence[float],
    taus: Sequence[float],
    p: DeviceParams,
    g_rabi: float = DEFAULT_G_RABI,
    omega_rule="optimal",
    rho0: DensityMatrix | None = None,
    n_fock: int | None = None,
    jobs: int = 1,
) -> tuple[SweepGrid, List[ValidationWarning]]:
    """
    Residual excitation on a (bias, duration) grid. Failing cells are flagged
    and reported as warnings; the sweep continues.
    """
    ratios = np.asarray(ratios, dtype=float)
    taus = np.asarray(taus, dtype=float)
    if ratios.size == 0 or taus.size == 0:
        raise DomainError("Sweep grids must be non-empty")

    jp = qcr.junction_params(p)
    biases = [qcr.bias_from_ratio(r, p.Delta) for r in ratios]
    tables = [qcr.rate_table(v, p.omega_r_eff, jp) if v > 0 else None for v in biases]
    cells = [(biases[i], float(tau), p, g_rabi, omega_rule, rho0, tables[i], n_fock)
             for i in range(ratios.size) for tau in taus]

    logger.info("reset sweep: %d x %d cells on %d worker(s)", ratios.size, taus.size, jobs)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_reset_cell, cells))
    else:
        results = [_reset_cell(c) for c in cells]

    shape = (ratios.size, taus.size)
    values = np.array([r[:CELL_FIELDS] for r in results], dtype=float).reshape(shape + (CELL_FIELDS,))
    failed = np.array([r[-1] is not None for r in results]).reshape(shape)
    warnings = [
        ValidationWarning(f"Cell eV_b/2Delta = {ratios[k // taus.size]:.4g}, "
                          f"tau = {taus[k % taus.size] * 1e9:.4g} ns failed: {r[-1]}",
                          context={'cell': k})
        for k, r in enumerate(results) if r[-1] is not None
    ]
    for w in warnings:
        logger.warning(w.message)

    grid = SweepGrid(
        ratios=ratios,
        taus=taus,
        residual=np.clip(values[..., 0], 0.0, 1.0),
        P_e=values[..., 1],
        P_f=values[..., 2],
        leakage=values[..., 3],
        unreset=values[..., 4],
        failed=failed,
        meta={
            'g_rabi_MHz': g_rabi / MHZ,
            'omega_rule': omega_rule if isinstance(omega_rule, str) else float(omega_rule) / MHZ,
            'initial_state': 'thermal' if rho0 is None else 'custom',
        },
    )
    return grid, warnings


# ---- Figures of merit ----

def crossing_time(taus: Sequence[float], residuals: Sequence[float],
                  threshold: float = RESET_THRESHOLD) -> float:
    """
    Settling time: the tau after which the residual stays at or below the
    threshold for the rest of the grid, linearly interpolated on the last
    downward crossing.

    Returns taus[0] when every sample is already below, NaN when the last
    sample is above. Non-finite samples count as above.
    """
    taus = np.asarray(taus, dtype=float)
    res = np.asarray(residuals, dtype=float)
    above = ~np.isfinite(res) | (res > threshold)
    if res.size == 0 or above[-1]:
        return math.nan
    if not above.any():
        return float(taus[0])
    k = int(np.flatnonzero(above)[-1])
    if not math.isfinite(res[k]):
        return float(taus[k + 1])
    t0, t1, r0, r1 = taus[k], taus[k + 1], res[k], res[k + 1]
    return float(t0 + (r0 - threshold) * (t1 - t0) / (r0 - r1))


@dataclass(frozen=True)
class ResetRate:
    rate: float
    intercept: float     # ln of the decaying amplitude at tau = 0
    floor: float
    report: FitReport


RATE_SCALE = 1e7


def reset_rate(taus: Sequence[float], residuals: Sequence[float], tail_fraction: float = 0.5) -> ResetRate:
    """
    Fit residual = floor + exp(intercept - rate * tau) over the last
    tail_fraction of the positive samples, with relative residuals.

    The floor absorbs the steady population a biased refrigerator keeps
    pumping back; for a pure exponential it comes out zero.

    Raises:
        FitError: fewer than 4 usable tail samples, or no convergence
    """
    taus = np.asarray(taus, dtype=float)
    res = np.asarray(residuals, dtype=float)
    keep = np.isfinite(res) & (res > 0)
    taus, res = taus[keep], res[keep]
    start = int(math.floor(taus.size * (1.0 - tail_fraction)))
    t_tail, y_tail = taus[start:], res[start:]
    if t_tail.size < 4:
        raise FitError(f"Reset-rate fit needs at least 4 tail samples, got {t_tail.size}")

    t0 = t_tail[0]
    span = float(t_tail[-1] - t0)
    slope = math.log(y_tail[0] / y_tail[-1]) / span if y_tail[-1] < y_tail[0] else 1.0 / span

    def model(x):
        floor, log_amp, rate = x
        return floor + np.exp(log_amp - rate * RATE_SCALE * (t_tail - t0))

    report = nonlinear_least_squares(
        lambda x: model(x) / y_tail - 1.0,
        [0.0, math.log(y_tail[0]), slope / RATE_SCALE],
        names=("floor", "log_amplitude", "rate"),
        raise_on_failure=True,
    )
    floor, log_amp, rate = report.values
    rate = float(rate * RATE_SCALE)
    logger.debug("reset rate %.4e 1/s over %d samples (floor %.3e)", rate, t_tail.size, floor)
    return ResetRate(rate=rate, intercept=float(log_amp + rate * t0), floor=float(floor), report=report)


# ---- Re-thermalization after reset ----

@dataclass(frozen=True, eq=False)
class Rethermalization:
    delays: np.ndarray
    P_e_rpm: np.ndarray
    P_e_true: np.ndarray
    time_constant: float
    P_inf: float


def rethermalization(rho_reset: DensityMatrix, delays: Sequence[float], p: DeviceParams) -> Rethermalization:
    """
    Idle evolution after a reset, read out by RPM at each delay, and the fitted
    recovery time constant of P_e.
    """
    from .fits import t1_fit

    delays = np.asarray(delays, dtype=float)
    if delays.size < 4 or np.any(np.diff(delays) <= 0):
        raise DomainError("Need at least 4 increasing delays")
    dims = rho_reset.dims
    model = build_model(p, include_coupling=False, n_fock=dims.n_fock)
    diss = build_dissipators(p, dims=dims)

    estimates, truth = [], []
    rho = rho_reset
    t_prev = 0.0
    for t in delays:
        if t > t_prev:
            trace = evolve(rho, model, diss, idle_schedule(t - t_prev), np.array([0.0, t - t_prev]))
            rho = trace.final_state()
            t_prev = t
        amps = simulate_rpm(rho)
        estimates.append(rpm_estimate(amps.a1, amps.a2, amps.b1, amps.b2).P_e)
        truth.append(populations(rho).P_e)
    fit = t1_fit(delays, np.array(estimates))
    logger.info("re-thermalization time constant %.4g s (P_inf %.4f)", fit.T1, fit.P_inf)
    return Rethermalization(
        delays=delays,
        P_e_rpm=np.array(estimates),
        P_e_true=np.array(truth),
        time_constant=fit.T1,
        P_inf=fit.P_inf,
    )
