"""Exception taxonomy shared across the package.

The CLI maps this hierarchy onto exit codes: ConfigError exits 2,
TrainingError exits 4, every other SpmlError exits 3.
"""


class SpmlError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(SpmlError):
    """Malformed input document; the message names the offending path."""


class IntegrityError(SpmlError):
    """Cross-reference violation between otherwise well-formed inputs."""


class FormatError(SpmlError):
    """Corrupt or inconsistent artifact in one of the package's own formats."""


class ConfigError(SpmlError):
    """Invalid configuration or command usage."""


class NoPositiveError(SpmlError):
    """An operation that needs at least one positive label got none."""


class DegenerateGeometryError(SpmlError):
    """A positive category has no usable instance geometry."""


class SemanticDegenerateError(SpmlError):
    """Every present category has zero spotting frequency and the fallback is 'error'."""


class UndefinedApError(SpmlError):
    """Average precision is undefined because the ranking has no positives."""


class TrainingError(SpmlError):
    """Training diverged or hit inconsistent state mid-run."""
