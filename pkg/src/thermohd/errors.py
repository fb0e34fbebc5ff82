"""Exception hierarchy shared by all modules."""


class ThermoError(Exception):
    """Base class for every error raised by thermohd."""


class DimensionMismatch(ThermoError, ValueError):
    pass


class DomainError(ThermoError, ValueError):
    """The state left the admissible domain of the model (e.g. N_k <= 0 under a log)."""


class NonPositiveTemperature(DomainError):
    pass


class IndefiniteCoefficient(ThermoError, ValueError):
    """Symmetric part of a phenomenological matrix has a negative eigenvalue."""


class SingularMultiplierSystem(ThermoError):
    pass


class ConstraintDriftExceeded(ThermoError):
    pass


class UnsupportedConstraintStructure(ThermoError):
    pass


class LegendreInversionFailure(ThermoError):
    pass


class LavoisierViolation(ThermoError, ValueError):
    pass


class StepUnderflow(ThermoError):
    pass


class AbortedDomainError(ThermoError):
    """Integration stopped early because the field raised a DomainError."""


class ConfigError(ThermoError, ValueError):
    """Invalid scenario file or CLI arguments."""
