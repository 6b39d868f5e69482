"""
Qubit T1 and SINIS I-V fits.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

import qcr
from numerics import FitReport, nonlinear_least_squares
from validation import DomainError, FitError, ValidationWarning

logger = logging.getLogger(__name__)

# RMS change of ln I per unit change of ln p below which p is not identified
MIN_LOG_SENSITIVITY = 1e-3


@dataclass(frozen=True)
class T1Fit:
    T1: float
    P_inf: float
    P0: float
    degenerate: bool
    report: FitReport | None = None
    warnings: List[ValidationWarning] = field(default_factory=list, compare=False)


def t1_fit(trace, P_e: Sequence[float] | None = None) -> T1Fit:
    """
    Fit P_e(t) = P_inf + (P0 - P_inf) exp(-t / T1) to a free decay.

    `trace` is a PopulationTrace, or a time array when P_e is given.
    A trace with no visible decay is returned with degenerate=True.

    Raises:
        FitError: least squares did not converge
    """
    if P_e is None:
        trace, P_e = trace.t, trace.P_e
    t = np.asarray(trace, dtype=float)
    y = np.asarray(P_e, dtype=float)
    if t.size < 4:
        raise DomainError(f"T1 fit needs at least 4 samples, got {t.size}")

    span = float(t[-1] - t[0])
    if abs(y[0] - y[-1]) < 1e-9:
        warning = ValidationWarning("No decay in the trace (P0 = P_inf); T1 is undefined",
                                    context={'P0': float(y[0])})
        logger.warning(warning.message)
        return T1Fit(T1=float("nan"), P_inf=float(y[-1]), P0=float(y[0]),
                     degenerate=True, warnings=[warning])

    t0 = t[0]

    def residuals(x):
        p_inf, p0, log_t1 = x
        return p_inf + (p0 - p_inf) * np.exp(-(t - t0) / (span * math.exp(log_t1))) - y

    guess = [float(y[-1]), float(y[0]), math.log(1.0 / 3.0)]
    report = nonlinear_least_squares(
        residuals, guess, names=("P_inf", "P0", "log_T1"), raise_on_failure=True,
    )
    p_inf, p0, log_t1 = report.values
    T1 = span * math.exp(log_t1)
    logger.info("T1 fit: T1 = %.4g s, P_inf = %.4g (residual %.2e)", T1, p_inf, report.residual_norm)
    return T1Fit(T1=T1, P_inf=float(p_inf), P0=float(p0), degenerate=report.singular, report=report)


# ---- I-V ----

IV_NAMES = ("R_T", "Delta", "T_N", "gamma_D")


@dataclass(frozen=True)
class IvFit:
    R_T: float
    Delta: float
    T_N: float
    gamma_D: float
    report: FitReport
    stderr: dict = field(default_factory=dict)
    unidentified: tuple = ()
    warnings: List[ValidationWarning] = field(default_factory=list, compare=False)

    @property
    def params(self) -> dict:
        return {name: getattr(self, name) for name in IV_NAMES}


def synth_iv(
    jp: qcr.JunctionParams,
    voltages: Sequence[float],
    noise: float = 0.0,
    seed: int | None = None,
) -> np.ndarray:
    """Model currents at the given voltages, with optional multiplicative Gaussian noise."""
    current = qcr.iv_curve(voltages, jp)
    if noise:
        rng = np.random.default_rng(seed)
        current = current * (1.0 + noise * rng.standard_normal(current.size))
    return current


def _default_guess(V: np.ndarray, I: np.ndarray) -> dict:
    k = int(np.argmax(np.abs(V)))
    R_T = abs(V[k] / I[k])
    # the gap edge is where the current reaches half the ohmic line
    ohmic = np.abs(V) / R_T
    above = np.abs(V)[np.abs(I) > 0.5 * ohmic]
    Delta = qcr.E_CHARGE * float(above.min()) if above.size else 200e-6 * qcr.E_CHARGE
    return {"R_T": R_T, "Delta": Delta, "T_N": 0.1, "gamma_D": 1e-4}


def fit_iv(
    V: Sequence[float],
    I: Sequence[float],
    guess: dict | None = None,
    E_N: float = 0.0,
) -> IvFit:
    """
    Least-squares fit of qcr.iv_current to (V, I) samples with relative residuals.

    Parameters are scaled by the guess (gamma_D in log space). A parameter whose
    RMS log-sensitivity d ln I / d ln p over the samples is below
    MIN_LOG_SENSITIVITY is reported in `unidentified`; e.g. gamma_D when no
    subgap samples are given.

    Raises:
        DomainError: fewer than 20 samples
        FitError: no convergence (carries the best iterate)
    """
    V = np.asarray(V, dtype=float)
    I = np.asarray(I, dtype=float)
    if V.size < 20:
        raise DomainError(f"I-V fit needs at least 20 samples, got {V.size}")
    mask = (V != 0) & (I != 0)
    V, I = V[mask], I[mask]
    g = guess or _default_guess(V, I)

    def junction(x) -> qcr.JunctionParams:
        return qcr.JunctionParams(
            R_T=x[0] * g["R_T"],
            Delta=x[1] * g["Delta"],
            gamma_D=math.exp(x[3]),
            T_N=x[2] * g["T_N"],
            E_N=E_N,
        )

    def residuals(x):
        jp = junction(x)
        return qcr.iv_curve(V, jp) / I - 1.0

    x0 = [1.0, 1.0, 1.0, math.log(g["gamma_D"])]
    bounds = ([0.1, 0.1, 0.01, math.log(1e-9)], [10.0, 10.0, 100.0, math.log(0.5)])
    logger.info("I-V fit on %d samples", V.size)
    report = nonlinear_least_squares(
        residuals, x0, names=IV_NAMES, bounds=bounds, x_scale=1.0,
    )
    if not report.converged:
        raise FitError(f"I-V fit did not converge: {report.message}", report=report)

    jp = junction(report.values)
    # columns are d(I_model / I) / dx; x = p / guess for the first three, ln gamma_D last
    x = report.values
    log_scale = np.array([abs(x[0]), abs(x[1]), abs(x[2]), 1.0])
    sensitivity = report.extra['column_norms'] * log_scale / math.sqrt(V.size)
    weak = tuple(name for name, s in zip(IV_NAMES, sensitivity) if s < MIN_LOG_SENSITIVITY)
    warnings = [
        ValidationWarning(f"{name} is not identified by the data (no leverage in the sampled range)",
                          context={'parameter': name})
        for name in weak
    ]
    for w in warnings:
        logger.warning(w.message)
    s = report.stderr
    stderr = {
        "R_T": s[0] * g["R_T"],
        "Delta": s[1] * g["Delta"],
        "T_N": s[2] * g["T_N"],
        "gamma_D": s[3] * jp.gamma_D,
    }
    return IvFit(
        R_T=jp.R_T, Delta=jp.Delta, T_N=jp.T_N, gamma_D=jp.gamma_D,
        report=report, stderr=stderr, unidentified=weak, warnings=warnings,
    )
