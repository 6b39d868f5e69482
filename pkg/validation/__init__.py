"""
Validation module for the QCR reset simulator.

Provides parameter validation (after config parsing), density-matrix
integrity checks (during integration) and the exception hierarchy
shared by every module.

Usage:
    from validation import (
        get_param_validator,
        check_density_matrix,
        QcrSimError,
        ValidationWarning,
    )
"""

# Exceptions and warnings
from .exceptions import (
    QcrSimError,
    ConfigError,
    MissingKeyError,
    ParamValidationError,
    PulseShapeError,
    NumericalError,
    QuadratureError,
    IntegrationError,
    NumericalIntegrityError,
    DomainError,
    ModelConsistencyError,
    DegenerateMeasurementError,
    FitError,
    ValidationWarning,
)

# Validators
from .param_validator import get_param_validator, ParamValidator, ParamLimits
from .state_checks import check_density_matrix, diagnose, StateDiagnostics, StateLimits

__all__ = [
    # Exceptions
    'QcrSimError',
    'ConfigError',
    'MissingKeyError',
    'ParamValidationError',
    'PulseShapeError',
    'NumericalError',
    'QuadratureError',
    'IntegrationError',
    'NumericalIntegrityError',
    'DomainError',
    'ModelConsistencyError',
    'DegenerateMeasurementError',
    'FitError',
    # Warnings
    'ValidationWarning',
    # Validators
    'get_param_validator',
    'ParamValidator',
    'check_density_matrix',
    'diagnose',
    'StateDiagnostics',
    # Limits (for reference/testing)
    'ParamLimits',
    'StateLimits',
]
