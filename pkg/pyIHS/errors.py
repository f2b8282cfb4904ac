"""Exception taxonomy shared by all modules.

Every error carries the process exit code the CLI maps it to, so scripted
pipelines can branch on failures without parsing messages.
"""


class PyIHSError(Exception):
    """Base class for all pyIHS errors."""

    exit_code: int = 1


class ConfigError(PyIHSError, ValueError):
    """Invalid or unknown configuration value."""

    exit_code = 1


class InputError(PyIHSError, ValueError):
    """Malformed input to a geometric operation (dimension, radius, empty sample)."""

    exit_code = 1


class ParameterError(PyIHSError, ValueError):
    """Algorithm parameter outside its domain."""

    exit_code = 1


class StarvationError(PyIHSError, RuntimeError):
    """A conditioned stream exhausted its rejection budget."""

    exit_code = 2

    def __init__(self, message: str, rejections: int = 0):
        super().__init__(message)
        self.rejections = rejections


class GenerationError(PyIHSError, RuntimeError):
    """A synthetic source could not meet its construction constraints."""

    exit_code = 2


class ThinBodyError(PyIHSError, RuntimeError):
    """The convex body is empty or too thin for the random walk."""

    exit_code = 3


class InfeasibleError(ThinBodyError):
    """No interior point with the requested slack was found."""

    def __init__(self, message: str, best_slack: float = float('-inf')):
        super().__init__(message)
        self.best_slack = best_slack


class DegenerateChordError(ThinBodyError):
    """A chord through the current point has (numerically) zero length."""


class BoostStallError(PyIHSError, RuntimeError):
    """Boosting found no weak hypothesis with a positive edge."""

    exit_code = 4

    def __init__(self, message: str, round_reached: int = 0):
        super().__init__(message)
        self.round_reached = round_reached


class AcceptanceError(PyIHSError, RuntimeError):
    """At least one acceptance criterion failed."""

    exit_code = 5
