"""Exception hierarchy shared by every harness module."""

from __future__ import annotations


class HarnessError(Exception):
    """Base class for all harness-specific failures."""


class CorpusError(HarnessError):
    """Corpus root or a required exercise file is missing or unreadable."""


class ConfigError(HarnessError):
    """Invalid configuration value or combination."""


class ProviderUnavailable(HarnessError):
    """The live provider could not be reached after the configured retries."""


class ReplayMiss(HarnessError):
    """The replay fixture holds no entry for a request digest.

    Signals a mismatch between the fixture and the run being replayed,
    never a recoverable condition.
    """


class CodeExtractionError(HarnessError):
    """No code could be extracted from a model response."""

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text


class ToolchainUnavailable(HarnessError):
    """The configured compiler or test binary is not installed."""


class PathEscape(HarnessError):
    """An exercise file path would land outside its workspace directory."""


class DegenerateInput(HarnessError):
    """Regression input has fewer than two points or no x variance."""


class ManifestError(HarnessError):
    """A run manifest line could not be parsed."""

    def __init__(self, message: str, line_number: int = 0):
        super().__init__(message)
        self.line_number = line_number
