"""Custom exception hierarchy for qalretrieve."""


class QalRetrieveError(Exception):
    """Base exception for all qalretrieve errors."""

    def __init__(self, message: str = "An error occurred in qalretrieve"):
        self.message = message
        super().__init__(self.message)


class ParameterError(QalRetrieveError):
    """Invalid argument, out-of-range value or dimension mismatch."""

    def __init__(self, message: str = "Invalid parameter"):
        super().__init__(message)


class DegenerateStatisticsError(ParameterError):
    """Feature statistics cannot be fitted (too few points or zero variance)."""

    def __init__(self, message: str = "Degenerate feature statistics"):
        super().__init__(message)


class ModelKindError(ParameterError):
    """Operation not defined for this model kind."""

    def __init__(self, message: str = "Operation not supported for this model kind"):
        super().__init__(message)


class SelectionError(QalRetrieveError):
    """No candidate could be selected."""

    def __init__(self, message: str = "Candidate set is empty"):
        super().__init__(message)


class ConfigError(QalRetrieveError):
    """Configuration is invalid or missing."""

    def __init__(self, message: str = "Configuration error"):
        super().__init__(message)


class UsageError(ConfigError):
    """Command-line usage error (exit status 2)."""

    exit_status = 2

    def __init__(self, message: str = "Invalid command-line usage"):
        super().__init__(message)


class OutputError(QalRetrieveError):
    """Writing an output artifact failed (exit status 1)."""

    exit_status = 1

    def __init__(self, message: str = "Failed to write output"):
        super().__init__(message)


class SchemaError(OutputError):
    """Rows do not conform to the CSV schema. Indicates a bug, not a user error."""

    def __init__(self, message: str = "Rows do not match the CSV schema"):
        super().__init__(message)
