"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    pass


class InfeasibleConfigError(ValueError):
    """The requested geometry cannot be simulated with the given signal timing."""


class NoPeakError(ValueError):
    pass


class UnderdeterminedError(ValueError):
    pass


class DegenerateGeometryError(ValueError):
    """Anchor geometry is rank deficient.

    ``linear_estimate`` holds the minimum-norm solution of the linearized system.
    """

    def __init__(self, message, linear_estimate=None, condition_number=None):
        super().__init__(message)
        self.linear_estimate = linear_estimate
        self.condition_number = condition_number


class DegenerateDataError(ValueError):
    pass


class BudgetExceededError(ValueError):
    def __init__(self, message, count):
        super().__init__(message)
        self.count = count


class OptimizationFailedError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass
