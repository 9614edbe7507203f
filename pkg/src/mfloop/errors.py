"""Exception hierarchy shared by every module."""


class MfloopError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(MfloopError, ValueError):
    pass


class DomainViolation(MfloopError, ValueError):
    """A design point lies outside the declared box or has the wrong dimension."""


class IllConditioned(MfloopError, ArithmeticError):
    pass


class MissingData(MfloopError, ValueError):
    pass


class NoCandidates(MfloopError, RuntimeError):
    def __init__(self, level, message=None):
        self.level = level
        super().__init__(message or f"no feasible candidate points remain for level {level}")


class ConfigurationError(MfloopError, ValueError):
    pass


class StateViolation(MfloopError, RuntimeError):
    pass


class IntegrityError(MfloopError, RuntimeError):
    def __init__(self, path, message):
        self.path = str(path)
        super().__init__(f"{path}: {message}")
