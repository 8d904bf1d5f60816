"""Exception hierarchy shared by all modules."""


class CavityIsingError(Exception):
    """Base class for package errors."""

    exit_code = 1


class InvalidParameterError(CavityIsingError, ValueError):
    """A physical or numerical parameter violates a precondition."""

    exit_code = 2


class ConfigError(InvalidParameterError):
    """Malformed or inconsistent run configuration."""

    exit_code = 2


class NoBistabilityError(CavityIsingError):
    """The stationary curve eps(x_a) is monotone: no fold, no bifurcation points."""

    exit_code = 4


class BranchNotFoundError(CavityIsingError):
    """Requested stationary branch does not exist at the given drive."""


class IntegrationQualityError(CavityIsingError):
    """Per-pair norm drift exceeded the allowed budget; use a smaller dt."""

    exit_code = 3


class AdiabaticityError(CavityIsingError):
    """A readout ramp created more excitations than its budget allows."""

    exit_code = 3
