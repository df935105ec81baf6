"""
Simulation Errors
Exception hierarchy shared by the numerical core and the experiment harness
"""


class SimulationError(Exception):
    """Base class for every error raised by svwave"""


class InvalidArgumentError(SimulationError, ValueError):
    """An operation received an argument outside its domain"""


class ConstraintViolationError(InvalidArgumentError):
    """
    A field violates the zero-mean constraint.
    
    Attributes:
        mean: The offending spatial mean
    """
    
    def __init__(self, message, mean):
        super().__init__(f"{message} (mean={mean:.3e})")
        self.mean = mean


class InvalidConfigurationError(SimulationError, ValueError):
    """
    A configuration was rejected.
    
    Attributes:
        violations: Every violation found, as "section.key: message" strings
    """
    
    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class NumericalFailureError(SimulationError, RuntimeError):
    """An iterative method failed to converge"""


class BlowUpError(SimulationError, RuntimeError):
    """
    A trajectory left the representable range.
    
    Attributes:
        t: Simulation time at which the blow-up was detected
        norm: The offending norm (may be nan or inf)
    """
    
    def __init__(self, t, norm):
        super().__init__(f"Blow-up at t={t:.6g}: norm={norm:.3e}")
        self.t = t
        self.norm = norm
