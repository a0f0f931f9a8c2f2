"""
Errors Module

Exception hierarchy shared by every FOSSA module, plus the CLI exit codes
each family maps to.
"""

from typing import List, Optional


EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_NUMERICAL_FAILURE = 3


class FossaError(Exception):
    """Base class for all FOSSA errors."""

    exit_code = 1


class ConfigError(FossaError, ValueError):
    """
    Invalid configuration, argument or input file content.

    Args:
        message: Human readable description
        field: Name of the offending config field, if any
    """

    exit_code = EXIT_CONFIG_ERROR

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


class MeshError(ConfigError):
    """Invalid mesh, graph or geometry configuration."""


class NumericalError(FossaError, ArithmeticError):
    """Base class for numerical failures."""

    exit_code = EXIT_NUMERICAL_FAILURE


class NonFiniteError(NumericalError):
    """A NaN or infinity appeared; `location` says where."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{message} ({location})" if location else message)


class SingularityError(NumericalError):
    """Division by zero in the Aliev-Panfilov coupling term at `node`."""

    def __init__(self, node: int):
        self.node = node
        super().__init__(f"coupling term singular at node {node} (u + mu2 = 0)")


class DivergenceError(NumericalError):
    """Training loss became non-finite. Keeps the loss history for inspection."""

    def __init__(self, iteration: int, history: List[float]):
        self.iteration = iteration
        self.history = list(history)
        super().__init__(f"training diverged at iteration {iteration}")


class CgAbortError(NumericalError):
    """Conjugate gradient could not continue (non-finite iterate or curvature <= 0)."""


class OptimalityError(NumericalError):
    """The trained parameters do not satisfy the gradient-norm certificate."""

    def __init__(self, grad_norm: float, g_tol: float):
        self.grad_norm = grad_norm
        self.g_tol = g_tol
        super().__init__(
            f"gradient norm {grad_norm:.3e} exceeds g_tol {g_tol:.3e}; "
            f"train to convergence before scoring"
        )


class StageError(FossaError):
    """
    Failure inside one pipeline stage.

    The exit code follows the wrapped cause so numerical failures still
    surface as numerical failures.
    """

    def __init__(self, stage: str, cause: Exception, seed: Optional[int] = None,
                 sensor: Optional[int] = None):
        self.stage = stage
        self.cause = cause
        self.seed = seed
        self.sensor = sensor
        where = [f"stage '{stage}'"]
        if seed is not None:
            where.append(f"seed {seed}")
        if sensor is not None:
            where.append(f"sensor {sensor}")
        super().__init__(f"{', '.join(where)} failed: {cause}")

    @property
    def exit_code(self) -> int:
        return getattr(self.cause, 'exit_code', 1)
