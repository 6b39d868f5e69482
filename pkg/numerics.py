"""
Shared numerical kernels.

Thin, contract-checking wrappers around scipy: adaptive Gauss-Kronrod
quadrature with panel breakpoints, Dormand-Prince 5(4) integration (plus a
fixed-step RK4 for cross-checks), damped least squares, and Hermitian
eigendecomposition. Every kernel is a pure function of its inputs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import least_squares

from validation import (
    ConfigError,
    FitError,
    IntegrationError,
    NumericalIntegrityError,
    QuadratureError,
)

logger = logging.getLogger(__name__)


# ---- Quadrature ----

@dataclass(frozen=True)
class QuadratureSpec:
    """Integration panels [a, p1, ..., b] and tolerances."""
    panels: tuple
    abs_tol: float = 1e-14
    rel_tol: float = 1e-10
    max_subdivisions: int = 500

    def __post_init__(self):
        panels = tuple(float(p) for p in self.panels)
        if len(panels) < 2 or any(b <= a for a, b in zip(panels, panels[1:])):
            raise ConfigError(f"Breakpoints must be strictly increasing: {panels}")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ConfigError("Quadrature tolerances must be positive")
        object.__setattr__(self, 'panels', panels)

    @classmethod
    def over(cls, a: float, b: float, breakpoints: Sequence[float] = (), **kwargs) -> "QuadratureSpec":
        """Build panels on [a, b], keeping only breakpoints strictly inside."""
        inner = sorted({float(p) for p in breakpoints if a < p < b})
        return cls(panels=(a, *inner, b), **kwargs)


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error: float
    subdivisions: int
    evaluations: int


def integrate(f: Callable[[float], float], spec: QuadratureSpec) -> QuadratureResult:
    """
    Adaptive Gauss-Kronrod integral of f over spec.panels.

    Raises:
        QuadratureError: subdivision budget exhausted or tolerance missed
    """
    a, b = spec.panels[0], spec.panels[-1]
    points = spec.panels[1:-1] or None
    out = quad(
        f, a, b,
        points=points,
        epsabs=spec.abs_tol,
        epsrel=spec.rel_tol,
        limit=spec.max_subdivisions,
        full_output=1,
    )
    value, error, info = out[0], out[1], out[2]
    target = max(spec.abs_tol, spec.rel_tol * abs(value))
    if len(out) > 3 or not math.isfinite(value) or abs(error) > target:
        message = out[3] if len(out) > 3 else "tolerance not met"
        raise QuadratureError(
            f"Quadrature on [{a:.4g}, {b:.4g}] failed: achieved error {error:.3e} "
            f"vs target {target:.3e} ({str(message).splitlines()[0]})",
            error=error,
        )
    return QuadratureResult(
        value=float(value),
        error=float(error),
        subdivisions=int(info['last']),
        evaluations=int(info['neval']),
    )


# ---- ODE integration ----

@dataclass(frozen=True)
class OdeSolution:
    t: np.ndarray
    y: np.ndarray  # shape (len(t), n)
    steps: int


def integrate_ode(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    t_eval: Sequence[float],
    y0: np.ndarray,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    max_step: float = np.inf,
    method: str = "RK45",
) -> OdeSolution:
    """
    Integrate y' = rhs(t, y) and sample at t_eval (first point is the start).

    method="RK45" is the embedded Dormand-Prince 5(4) pair with adaptive steps;
    method="RK4" is classical fixed-step RK4 with step max_step.

    Raises:
        IntegrationError: step size collapsed before reaching the end
    """
    t_eval = np.asarray(t_eval, dtype=float)
    if t_eval.ndim != 1 or t_eval.size < 1 or np.any(np.diff(t_eval) <= 0):
        raise ValueError("t_eval must be a strictly increasing 1-D grid")
    y0 = np.asarray(y0)
    if t_eval.size == 1:
        return OdeSolution(t=t_eval, y=y0[None, :].copy(), steps=0)

    if method == "RK4":
        return _rk4_fixed(rhs, t_eval, y0, max_step)
    if method != "RK45":
        raise ValueError(f"Unknown integrator: {method}")

    sol = solve_ivp(
        rhs, (t_eval[0], t_eval[-1]), y0,
        method="RK45", t_eval=t_eval, rtol=rtol, atol=atol, max_step=max_step,
    )
    if sol.status < 0 or sol.y.shape[1] != t_eval.size:
        t_fail = float(sol.t[-1]) if sol.t.size else float(t_eval[0])
        raise IntegrationError(f"Integration failed at t = {t_fail:.6e} s: {sol.message}", t=t_fail)
    logger.debug("RK45: %d rhs evaluations over %d samples", sol.nfev, t_eval.size)
    return OdeSolution(t=sol.t, y=sol.y.T, steps=int(sol.nfev // 6))


def _rk4_fixed(rhs, t_eval, y0, dt) -> OdeSolution:
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError("Fixed-step RK4 needs a finite positive max_step")
    ys = [y0.copy()]
    y = y0.copy()
    steps = 0
    for t0, t1 in zip(t_eval[:-1], t_eval[1:]):
        n = max(1, math.ceil((t1 - t0) / dt))
        h = (t1 - t0) / n
        t = t0
        for _ in range(n):
            k1 = rhs(t, y)
            k2 = rhs(t + h / 2, y + h / 2 * k1)
            k3 = rhs(t + h / 2, y + h / 2 * k2)
            k4 = rhs(t + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        steps += n
        if not np.all(np.isfinite(y)):
            raise IntegrationError(f"RK4 diverged before t = {t1:.6e} s", t=float(t1))
        ys.append(y.copy())
    return OdeSolution(t=t_eval, y=np.array(ys), steps=steps)


# ---- Least squares ----

@dataclass
class FitReport:
    """Outcome of a least-squares fit. Non-converged fits still carry the best iterate."""
    names: tuple
    values: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    jacobian_condition: float
    stderr: np.ndarray
    active_bounds: tuple = ()
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def params(self) -> dict:
        return dict(zip(self.names, (float(v) for v in self.values)))

    @property
    def singular(self) -> bool:
        return not math.isfinite(self.jacobian_condition) or self.jacobian_condition > 1e14


def nonlinear_least_squares(
    residuals: Callable[[np.ndarray], np.ndarray],
    guess: Sequence[float],
    names: Sequence[str] | None = None,
    bounds: tuple | None = None,
    xtol: float = 1e-10,
    max_iterations: int = 200,
    x_scale="jac",
    raise_on_failure: bool = False,
) -> FitReport:
    """
    Damped Gauss-Newton (Levenberg-Marquardt without bounds, trust-region
    reflective with bounds) on a residual vector function.

    Convergence: relative step below xtol, or max_iterations Jacobian updates.
    """
    guess = np.asarray(guess, dtype=float)
    names = tuple(names) if names else tuple(f"p{i}" for i in range(guess.size))
    n = guess.size
    m = np.asarray(residuals(guess)).size
    if m < n:
        raise ValueError(f"Need at least {n} residuals, got {m}")

    if bounds is None:
        method, scipy_bounds = ("lm" if m >= n else "trf"), (-np.inf, np.inf)
    else:
        method, scipy_bounds = "trf", bounds
    res = least_squares(
        residuals, guess,
        method=method,
        bounds=scipy_bounds,
        xtol=xtol,
        ftol=1e-15,
        gtol=1e-15,
        x_scale=x_scale,
        max_nfev=max_iterations * (n + 1),
    )

    jac = np.atleast_2d(res.jac)
    try:
        condition = float(np.linalg.cond(jac))
    except np.linalg.LinAlgError:
        condition = float("inf")
    dof = max(m - n, 1)
    s2 = 2.0 * res.cost / dof
    try:
        cov = np.linalg.pinv(jac.T @ jac) * s2
        stderr = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    except np.linalg.LinAlgError:
        stderr = np.full(n, np.nan)
    active = tuple(name for name, flag in zip(names, res.active_mask) if flag != 0)

    report = FitReport(
        names=names,
        values=res.x,
        residual_norm=float(np.linalg.norm(res.fun)),
        iterations=int(res.nfev),
        converged=bool(res.status > 0),
        jacobian_condition=condition,
        stderr=stderr,
        active_bounds=active,
        message=str(res.message),
        extra={'column_norms': np.linalg.norm(jac, axis=0)},
    )
    logger.debug("least squares %s: %s after %d evaluations", names, res.message, res.nfev)
    if raise_on_failure and not report.converged:
        raise FitError(f"Fit did not converge: {res.message}", report=report)
    return report


# ---- Linear algebra ----

def hermitian_eigen(m, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """
    Ascending eigenvalues and orthonormal eigenvectors (columns) of a Hermitian matrix.

    tol is relative to max(1, max|m|).

    Raises:
        NumericalIntegrityError: input not Hermitian within tolerance
    """
    a = np.asarray(getattr(m, 'entries', m))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NumericalIntegrityError(f"Expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    defect = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
    if defect > tol * scale:
        raise NumericalIntegrityError(f"Matrix not Hermitian: defect {defect:.3e}")
    values, vectors = np.linalg.eigh(a)
    return values, vectors
