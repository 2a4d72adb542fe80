"""
Exceptions raised by the thermovisco solver
"""


class ThermoError(Exception):
    """Base class for every error raised by the solver app"""
    pass


class ParameterError(ThermoError, ValueError):
    """A physical or numerical parameter violates its admissible range"""
    pass


class ExpressionError(ParameterError):
    """An expression string uses syntax or names outside the whitelist"""
    pass


class AssemblyError(ThermoError):
    """The mesh cannot be assembled (inverted cells, inconsistent boundary)"""
    pass


class IoError(ThermoError):
    """Reading or writing a mesh or result file failed"""
    pass


class ConfigError(ThermoError):
    """
    A run configuration is invalid.
    `key` is the dotted path of the offending entry, e.g. 'material.r_exp'.
    """

    def __init__(self, message, key=None):
        self.key = key
        self.reason = message
        super().__init__(f"{key}: {message}" if key else message)


class SolverError(ThermoError):
    """A time step could not be completed"""

    def __init__(self, message, time=None):
        self.time = time
        super().__init__(message)

    def at_time(self, time):
        """Copy of this error tagged with the time level that failed."""
        return type(self)(f"{self} (t = {time:.6g})", time=time)


class NonConvergence(SolverError):
    pass


class LinearSolveFailure(SolverError):
    pass
