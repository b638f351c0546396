"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes: config/usage problems exit 2,
data and contract problems exit 3, embedding-service transport problems
exit 4.
"""


class CheckrankError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(CheckrankError):
    """Invalid configuration value or unusable config file."""


class ParseError(CheckrankError):
    """Malformed input file; message names the file and line."""


class ContractError(CheckrankError, ValueError):
    """An operation was called with inputs violating its contract."""


class CoverageError(ContractError):
    """Run entries do not cover a debate's line numbers exactly."""


class FormatError(CheckrankError):
    """Binary container is corrupt, truncated, or of an unknown version."""


class MissingKeyError(CheckrankError):
    """A required key (word or text) is absent from a vector store."""


class MissingAnnotationError(CheckrankError):
    """A sidecar annotation source does not cover a requested sentence."""


class TransportError(CheckrankError):
    """The embedding service could not be reached or answered garbage."""
