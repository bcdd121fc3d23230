"""Exception types raised by dpnash."""


class DpNashError(Exception):
    """Base class for all library errors."""


class ParameterError(DpNashError, ValueError):
    """A model parameter violates its domain (c <= 0, I < 2, ...)."""


class SingularGameError(DpNashError):
    """The reduced game has no unique Nash equilibrium."""


class GraphError(DpNashError, ValueError):
    """Invalid communication graph or consensus weight."""


class StepSizeError(DpNashError, ValueError):
    """No admissible step size exists for the given game and graph."""


class DivergenceError(DpNashError):
    """The seeking iteration blew up (step size too large for the game)."""

    def __init__(self, iteration, value):
        super().__init__(f"iteration diverged at k={iteration} (|y| = {value:.3g})")
        self.iteration = iteration
        self.value = value


class AttackWindowError(DpNashError, ValueError):
    """The observation window is too short to set up the inference."""


class ConfigError(DpNashError, ValueError):
    """Malformed experiment configuration."""
