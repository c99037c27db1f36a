"""Typed exceptions shared across the toolkit.

Every loader and validator raises one of these instead of letting a bare
ValueError or an OS-level exception escape, so callers (and the CLI) can map
failures to exit codes reliably.
"""


class DocdetError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(DocdetError):
    """Input is structurally readable but violates an invariant."""


class FormatError(DocdetError):
    """Input bytes do not match the expected file format."""


class ConfigError(DocdetError):
    """A configuration value is out of range or inconsistent."""
