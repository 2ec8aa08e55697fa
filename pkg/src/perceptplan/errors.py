"""Exception types shared across the package.

Each maps to one CLI exit code (see cli module): InputError and
ConfigError -> 2, NonFiniteGradientError -> 3,
EnumerationInfeasibleError -> 4, EvidenceImpossibleError -> 5.
"""


class PerceptPlanError(Exception):
    """Base class for all package errors."""


class InputError(PerceptPlanError):
    """An argument names an unknown state/symbol or has inconsistent shape."""


class ConfigError(PerceptPlanError):
    """A model, scenario, or run configuration is malformed."""


class EvidenceImpossibleError(PerceptPlanError):
    """Conditioning on an observation/action sequence with probability zero."""


class EnumerationInfeasibleError(PerceptPlanError):
    """Exact enumeration would exceed the configured cap."""

    def __init__(self, message: str, required: int, cap: int):
        super().__init__(message)
        self.required = required
        self.cap = cap


class NonFiniteGradientError(PerceptPlanError):
    """A gradient coordinate became NaN or infinite during training."""

    def __init__(self, message: str, iteration: int, coordinate: tuple):
        super().__init__(message)
        self.iteration = iteration
        self.coordinate = coordinate
