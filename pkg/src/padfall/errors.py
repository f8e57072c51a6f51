class PadfallError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(PadfallError, ValueError):
    pass


class StateCorruptionError(PadfallError, FloatingPointError):
    """A non-finite value reached the physics integrator."""


class UsageError(PadfallError, RuntimeError):
    pass


class SingularInputError(PadfallError, ZeroDivisionError):
    pass


class FilterDivergenceError(PadfallError, ArithmeticError):
    pass


class NotReadyError(PadfallError, RuntimeError):
    """Replay buffer holds fewer transitions than required."""


class TrainingDivergedError(PadfallError, FloatingPointError):
    pass
