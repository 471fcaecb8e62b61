"""Exception hierarchy.

Every error raised by levsim derives from :class:`LevsimError`. When a failure
also belongs to a natural builtin category, the class derives from that
builtin too, so callers can catch either.
"""

__all__ = [
    "LevsimError",
    "ConfigError",
    "MissingKey",
    "OutOfRange",
    "ParseError",
    "DegenerateTrap",
    "EmptyGrid",
    "StepTooLarge",
    "NonFinite",
    "NegativePopulation",
    "InsufficientData",
    "PoleHit",
    "UnknownSubcommand",
    "UnknownFigure",
    "IoError",
]


class LevsimError(Exception):
    pass


class ConfigError(LevsimError, ValueError):
    pass


class MissingKey(ConfigError, KeyError):
    def __init__(self, key):
        super().__init__(key)
        self.key = key

    def __str__(self):
        return f"missing required key {self.key!r}"


class OutOfRange(ConfigError):
    """A value violates its documented range. ``field`` names the offender."""

    def __init__(self, field, message=""):
        super().__init__(field, message)
        self.field = field
        self.message = message

    def __str__(self):
        if self.message:
            return f"{self.field}: {self.message}"
        return f"{self.field} out of range"


class ParseError(ConfigError):
    pass


class DegenerateTrap(LevsimError, ValueError):
    pass


class EmptyGrid(LevsimError, ValueError):
    pass


class StepTooLarge(LevsimError, ArithmeticError):
    def __init__(self, step, t):
        super().__init__(step, t)
        self.step = step
        self.t = t

    def __str__(self):
        return f"non-finite state at step {self.step} (t={self.t!r}); reduce dt"


class NonFinite(LevsimError, ArithmeticError):
    def __init__(self, step, trajectory=None):
        super().__init__(step, trajectory)
        self.step = step
        self.trajectory = trajectory

    def __str__(self):
        where = f"step {self.step}"
        if self.trajectory is not None:
            where = f"trajectory {self.trajectory}, {where}"
        return f"non-finite Langevin state at {where}"


class NegativePopulation(LevsimError, ArithmeticError):
    def __init__(self, count):
        super().__init__(count)
        self.count = count

    def __str__(self):
        return f"phonon number clamped at zero {self.count} time(s) in strict mode"


class InsufficientData(LevsimError, ValueError):
    pass


class PoleHit(LevsimError, ZeroDivisionError):
    def __init__(self, denominator, omega):
        super().__init__(denominator, omega)
        self.denominator = denominator
        self.omega = omega

    def __str__(self):
        return f"{self.denominator} denominator vanishes at omega={self.omega!r}"


class UnknownSubcommand(LevsimError, LookupError):
    pass


class UnknownFigure(LevsimError, LookupError):
    pass


class IoError(LevsimError, OSError):
    pass
