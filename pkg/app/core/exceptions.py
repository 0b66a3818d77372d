"""Custom exception classes for the toolkit."""


class PeerInfluenceError(Exception):
    """Base class for every error raised by the toolkit.

    ``exit_code`` is what the CLI returns when the error escapes a subcommand.
    """

    exit_code: int = 1

    def __init__(self, message: str) -> None:
        self.message = message
        super().__init__(self.message)


class ParameterValidationError(PeerInfluenceError):
    """Generator or model parameters violate their invariants."""


class DomainError(PeerInfluenceError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(PeerInfluenceError):
    """Configuration is malformed, incomplete, or names something unsupported."""


class ShapeError(PeerInfluenceError):
    """Array dimensions do not agree."""


class InstabilityError(PeerInfluenceError):
    """The behavior recursion diverged past the overflow guard."""

    def __init__(self, message: str, spectral_radius: float) -> None:
        self.spectral_radius = spectral_radius
        super().__init__(message)


class DegenerateClusteringError(PeerInfluenceError):
    """k-means kept producing empty clusters after every restart."""


class RankDeficiencyError(PeerInfluenceError):
    """The design matrix does not have full column rank."""

    def __init__(self, message: str, dependent_columns: list[str]) -> None:
        self.dependent_columns = dependent_columns
        super().__init__(message)


class OutputExistsError(PeerInfluenceError):
    """Report files already exist and overwriting was not requested."""


class ReportError(PeerInfluenceError):
    """Result files could not be written or read."""


class ResultIntegrityError(PeerInfluenceError):
    """Summary statistics on disk disagree with the ones recomputed from raw rows."""


class ExcessiveFailuresError(PeerInfluenceError):
    """Too many replications failed for the experiment to count as a success."""

    exit_code = 2
