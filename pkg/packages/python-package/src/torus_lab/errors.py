"""Exception hierarchy shared by the numerical modules and the lab harness."""

from __future__ import annotations


class LabError(RuntimeError):
    """Base class for all torus-lab failures."""


class InvalidParameter(LabError, ValueError):
    """Raised when an argument lies outside the documented domain."""


class SingularAbscissa(LabError):
    """Raised when a density is evaluated exactly at one of its singular points."""

    def __init__(self, abscissa: float, message: str | None = None) -> None:
        self.abscissa = abscissa
        super().__init__(message or f"density is singular at {abscissa!r}")


class CovarianceNotPSD(LabError):
    """Raised when a covariance has an eigenvalue below the clipping tolerance."""

    def __init__(self, min_eigenvalue: float, clip: float) -> None:
        self.min_eigenvalue = min_eigenvalue
        self.clip = clip
        super().__init__(
            f"covariance has eigenvalue {min_eigenvalue:.3e} below -{clip:.3e}"
        )


class EigDidNotConverge(LabError):
    """Raised when the Hermitian eigensolver fails or violates its residual contract."""

    def __init__(self, worst_residual: float, message: str | None = None) -> None:
        self.worst_residual = worst_residual
        super().__init__(message or f"eigensolver residual {worst_residual:.3e} too large")


class EmptyWindow(LabError):
    """Raised when a spectral window contains no eigenvalues."""


class RootBracketError(LabError):
    """Raised when bisection is started on an interval without a sign change."""


class ArtifactError(LabError):
    """Raised when an output directory or artifact cannot be written."""


class ConfigError(LabError):
    """Raised when an experiment configuration cannot be read or is invalid."""
