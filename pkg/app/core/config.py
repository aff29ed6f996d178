"""
Configuration module implementing the Singleton pattern for solver settings.

This module provides a centralized configuration management system using Pydantic Settings.
Settings are loaded from environment variables and/or .env files, with type validation.
The Settings class is implemented as a Singleton to ensure the numerical constants
(clamps, floors, defaults) are identical across every module of a run.
"""

from functools import lru_cache

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Application settings using Pydantic BaseSettings.

    This class defines all configuration parameters for the solver, the data
    generators and the experiment runner. Configuration values can be overridden
    by environment variables or values in a .env file.

    Attributes:
        GAMMA_FLOOR: Lower clamp for Gaussian-Gamma precisions
        GAMMA_CEILING: Upper clamp for Gaussian-Gamma precisions
        GAMMA_INIT: Initial precision of every Gaussian-Gamma entry
        ALPHA_INIT: Initial variance of the learned-variance Gaussian prior
        VARIANCE_FLOOR: Floor for learned prior variances
        EIGENVALUE_FLOOR_RATIO: Eigenvalues below max(eig) times this ratio are clamped
        RESIDUAL_FLOOR_RATIO: Floor of C relative to the data energy in the noise update
        NMSE_FLOOR_DB: Reported value for exact reconstructions
        UAMPMF_THREADS: Worker cap for the experiment runner (0 = auto)
    """

    # Logging configuration
    LOG_LEVEL: str = "INFO"
    LOG_DIR: str = "logs"

    # Denoiser constants
    GAMMA_FLOOR: float = 1e-10
    GAMMA_CEILING: float = 1e12
    GAMMA_INIT: float = 1.0
    GAMMA_EPSILON: float = 0.0
    GAMMA_ETA: float = 0.0
    ALPHA_INIT: float = 1.0
    VARIANCE_FLOOR: float = 1e-10
    TRUNCATION_ASYMPTOTIC_Z: float = 6.0
    CONTINUED_FRACTION_DEPTH: int = 120
    SPARSITY_RATE_CLIP: float = 1e-6

    # Standalone UAMP
    UAMP_TOL: float = 1e-8
    UAMP_MAX_ITERS: int = 500
    UAMP_TAU_INIT: float = 1.0

    # Matrix factorization engine
    EIGENVALUE_FLOOR_RATIO: float = 1e-12
    RESIDUAL_FLOOR_RATIO: float = 1e-12
    LAMBDA_INIT: float = 1.0
    SOLVER_TOL: float = 1e-7
    SOLVER_MAX_ITERS: int = 500
    SOLVER_RESTARTS: int = 3
    MAX_INNER_DIMENSION: int = 4096

    # Data generation
    RNG_BIT_GENERATOR: str = "PCG64"
    DL_SPARSITY_FRACTION: float = 0.2
    OUTLIER_LOW: float = -10.0
    OUTLIER_HIGH: float = 10.0
    MATRIX_PRECISION: int = 17

    # Metrics and reports
    NMSE_FLOOR_DB: float = -300.0
    FAILED_TRIAL_DB: float = 0.0

    # Experiment runner
    OUTPUT_DIR: str = "./results"
    UAMPMF_THREADS: int = 0

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        case_sensitive=True,
    )


@lru_cache()
def get_settings() -> Settings:
    """
    Create and return a cached instance of the Settings class.

    This function implements the Singleton pattern using lru_cache to ensure
    that only one instance of Settings is created and reused throughout the
    application lifecycle.

    Returns:
        Settings: The singleton instance of application settings
    """
    return Settings()


# Create a single instance of the settings to be used throughout the application
settings = get_settings()
