"""Exception types shared across the toolkit."""

from __future__ import annotations


class RagkitError(Exception):
    """Base class for all ragkit errors."""


class EmptyCorpus(RagkitError):
    """Source text contained no ingestible content."""


class EncodingError(RagkitError):
    """Source bytes could not be decoded as UTF-8."""


class MalformedEntry(RagkitError):
    """A glossary record is missing required fields or is not valid JSON."""

    def __init__(self, record_index: int, message: str):
        super().__init__(f"record {record_index}: {message}")
        self.record_index = record_index


class EmptyInput(RagkitError):
    """Text handed to an embedder or prompt builder carries no content."""


class ProviderUnavailable(RagkitError):
    """A remote provider could not be reached after the configured retries."""

    def __init__(self, message: str, attempts: int = 1, last_error: str = ""):
        super().__init__(message)
        self.attempts = attempts
        self.last_error = last_error


class DimensionError(RagkitError):
    """Vector dimensions disagree."""


class IncompatibleIndex(RagkitError):
    """Index file magic or format version is not one we can read."""


class ChecksumError(RagkitError):
    """Index file payload does not match its trailing checksum."""


class InsufficientData(RagkitError):
    """Fewer samples or entries than the operation requires."""


class DegenerateDistribution(RagkitError):
    """All samples are identical; a point mass is reported instead of a curve."""

    def __init__(self, value: float, n_samples: int):
        super().__init__(f"all {n_samples} samples equal {value!r}")
        self.value = value
        self.n_samples = n_samples


class ProbeInvalid(RagkitError):
    """A keyword probe does not occur in its gold sentence."""

    def __init__(self, probe_index: int, message: str):
        super().__init__(f"probe {probe_index}: {message}")
        self.probe_index = probe_index


class EmptyContext(RagkitError):
    """Prompt assembly was handed an empty context list."""


class TooManyPermutations(RagkitError):
    """Context count outside the 2..5 window the permutation harness allows."""


class ContextOverflow(RagkitError):
    """Chat provider rejected the prompt as exceeding its context window."""

    def __init__(self, message: str, token_estimate: int):
        super().__init__(message)
        self.token_estimate = token_estimate


class ValidationError(RagkitError):
    """One or more query records failed validation."""

    def __init__(self, message: str, offenders: tuple[str, ...] = ()):
        super().__init__(message)
        self.offenders = offenders


class CoverageError(RagkitError):
    """Two strategies share no evaluated queries."""


class MissingData(RagkitError):
    """A hypothesis report needs a run that was not supplied."""


class ConfigError(RagkitError):
    """Configuration file, environment, or flag values are inconsistent."""
