"""
Custom exceptions module.

This module contains custom exceptions for the different layers of the solver
(denoisers, engine, problem builders, data generation, experiment runner)
to improve error handling, reporting, and debugging.
"""


class UampMfException(Exception):
    """Base exception class for all application-specific exceptions."""

    def __init__(
        self,
        message: str = "An error occurred in the UAMP-MF solver",
        exit_code: int = 1,
    ):
        self.message = message
        self.exit_code = exit_code
        super().__init__(self.message)


# Denoiser Exceptions
class DenoiserException(UampMfException):
    """Base exception for denoiser operations."""

    def __init__(self, message: str = "Denoiser operation failed", exit_code: int = 1):
        super().__init__(message, exit_code)


class DimensionMismatchError(DenoiserException):
    """Raised when a field or parameter has the wrong shape."""

    def __init__(self, what: str, expected: tuple, actual: tuple):
        message = f"Dimension mismatch for {what}: expected {expected}, got {actual}"
        super().__init__(message)


class InvalidPseudoObservationError(DenoiserException):
    """Raised when pseudo-observation variances are non-positive or inputs non-finite."""

    def __init__(self, details: str):
        message = f"Invalid pseudo-observation field: {details}"
        super().__init__(message)


class InvalidHyperParameterError(DenoiserException):
    """Raised when a prior hyper-parameter is outside its admissible range."""

    def __init__(self, name: str, reason: str):
        message = f"Invalid hyper-parameter '{name}': {reason}"
        super().__init__(message)


# Solver Exceptions
class SolverException(UampMfException):
    """Base exception for UAMP and UAMP-MF iterations."""

    def __init__(self, message: str = "Solver operation failed", exit_code: int = 1):
        super().__init__(message, exit_code)


class DivergenceError(SolverException):
    """Raised when an iteration produces non-finite or non-positive variances."""

    def __init__(self, stage: str, iteration: int, reason: str):
        self.stage = stage
        self.iteration = iteration
        message = f"Divergence in {stage} at iteration {iteration}: {reason}"
        super().__init__(message)


class DegenerateModelError(SolverException):
    """Raised when a whitened pseudo-model cannot be formed."""

    def __init__(self, side: str, reason: str):
        message = f"Degenerate {side}-side model: {reason}"
        super().__init__(message)


# Problem / Metric / Data Exceptions
class ProblemBuildError(UampMfException):
    """Raised when an application problem cannot be assembled."""

    def __init__(self, application: str, reason: str):
        message = f"Failed to build {application} problem: {reason}"
        super().__init__(message)


class MetricError(UampMfException):
    """Raised when a metric is undefined for its inputs."""

    def __init__(self, metric: str, reason: str):
        message = f"Cannot evaluate {metric}: {reason}"
        super().__init__(message)


class DataGenerationError(UampMfException):
    """Raised when synthetic data cannot be generated for the requested parameters."""

    def __init__(self, generator: str, reason: str):
        message = f"Data generator {generator} failed: {reason}"
        super().__init__(message)


class MatrixFormatError(UampMfException):
    """Raised when a matrix file cannot be parsed."""

    def __init__(self, path: str, reason: str):
        message = f"Malformed matrix file {path}: {reason}"
        super().__init__(message)


# Experiment Exceptions
class ConfigValidationError(UampMfException):
    """Raised when an experiment configuration is invalid."""

    def __init__(self, path: str, details: str):
        message = f"Invalid configuration {path}: {details}"
        super().__init__(message, exit_code=2)


class ExperimentError(UampMfException):
    """Raised when an experiment cannot be run or its artifacts cannot be written."""

    def __init__(self, name: str, reason: str):
        message = f"Experiment {name} failed: {reason}"
        super().__init__(message)
