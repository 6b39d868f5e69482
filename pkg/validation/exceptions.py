"""
Custom exceptions for the simulator.

Hard errors: the run cannot continue (bad config, numerics broke down)
Soft warnings: the result is usable but the caller should know about it
"""

from dataclasses import dataclass, field


# ============ HARD ERRORS ============
# These stop the computation that raised them

class QcrSimError(Exception):
    """Base exception for all simulator errors."""
    def __init__(self, message: str, user_message: str = None):
        super().__init__(message)
        self.user_message = user_message or message


class ConfigError(QcrSimError):
    """Configuration document is unusable."""
    pass


class MissingKeyError(ConfigError):
    """A required config key is absent."""
    def __init__(self, key: str, symbol: str = None):
        label = f"{key} ({symbol})" if symbol else key
        super().__init__(
            f"Missing config key: {label}",
            user_message=f"The configuration is missing the required key \"{label}\".",
        )
        self.key = key
        self.symbol = symbol


class ParamValidationError(ConfigError):
    """A parameter invariant is violated."""
    def __init__(self, rule: str, detail: str = ""):
        message = f"Parameter rule violated: {rule}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)
        self.rule = rule


class PulseShapeError(ConfigError):
    """Pulse timing is inconsistent (e.g. tau shorter than rise + fall)."""
    pass


class NumericalError(QcrSimError):
    """Base class for numerical failures."""
    pass


class QuadratureError(NumericalError):
    """Adaptive quadrature did not reach the requested tolerance."""
    def __init__(self, message: str, error: float = float("nan")):
        super().__init__(message)
        self.error = error


class IntegrationError(NumericalError):
    """ODE integration failed (step size collapsed)."""
    def __init__(self, message: str, t: float = float("nan")):
        super().__init__(message)
        self.t = t


class NumericalIntegrityError(NumericalError):
    """A density matrix lost Hermiticity, trace or positivity."""
    pass


class DomainError(NumericalError):
    """Quantity is undefined for the given inputs."""
    pass


class ModelConsistencyError(QcrSimError):
    """Two model pieces disagree beyond tolerance."""
    pass


class DegenerateMeasurementError(QcrSimError):
    """Measurement amplitudes carry no information (zero denominator)."""
    pass


class FitError(QcrSimError):
    """Least-squares fit did not converge; `report` holds the best iterate."""
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


# ============ SOFT WARNINGS ============
# These are returned next to results

@dataclass
class ValidationWarning:
    """
    A soft warning that doesn't invalidate the result.
    """
    message: str  # Human-readable, e.g. "delta_gamma < 0 at V_b = 0.1 mV (heating)"
    context: dict = field(default_factory=dict)
