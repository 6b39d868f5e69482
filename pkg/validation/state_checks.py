"""
Integrity checks for density matrices produced by the integrator.

Checks:
- Hermiticity (max |rho - rho^dagger|)
- Unit trace
- Positivity (smallest eigenvalue)
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalIntegrityError


class StateLimits:
    """Tolerances for density-matrix integrity."""
    HERMITIAN_TOL = 1e-10
    TRACE_TOL = 1e-8
    MIN_EIGENVALUE = -1e-7


@dataclass(frozen=True)
class StateDiagnostics:
    trace_err: float
    min_eig: float
    hermitian_err: float


def diagnose(rho: np.ndarray) -> StateDiagnostics:
    """Measure trace error, smallest eigenvalue and Hermiticity defect."""
    hermitian_err = float(np.max(np.abs(rho - rho.conj().T))) if rho.size else 0.0
    trace_err = float(abs(np.trace(rho) - 1.0))
    # eigvalsh only reads one triangle, so symmetrize first
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    return StateDiagnostics(trace_err=trace_err, min_eig=min_eig, hermitian_err=hermitian_err)


def check_density_matrix(
    rho: np.ndarray,
    hermitian_tol: float = StateLimits.HERMITIAN_TOL,
    trace_tol: float = StateLimits.TRACE_TOL,
    min_eigenvalue: float = StateLimits.MIN_EIGENVALUE,
    where: str = "",
) -> StateDiagnostics:
    """
    Raise NumericalIntegrityError if rho is not a valid density matrix.

    Returns:
        The measured diagnostics
    """
    diag = diagnose(rho)
    suffix = f" at {where}" if where else ""
    if diag.hermitian_err > hermitian_tol:
        raise NumericalIntegrityError(
            f"Density matrix not Hermitian{suffix}: defect {diag.hermitian_err:.3e}"
        )
    if diag.trace_err > trace_tol:
        raise NumericalIntegrityError(
            f"Trace drifted{suffix}: |tr rho - 1| = {diag.trace_err:.3e}"
        )
    if diag.min_eig < min_eigenvalue:
        raise NumericalIntegrityError(
            f"Positivity lost{suffix}: min eigenvalue {diag.min_eig:.3e}"
        )
    return diag
