"""Exception types shared across the package.

Invalid arguments raise the builtin ValueError, degenerate numerics raise
ArithmeticError. The two classes here cover the remaining error surface:
malformed external files and bad configuration.
"""

__all__ = ["FormatError", "ConfigError"]


class FormatError(Exception):
    """A dataset or table file violates its expected layout.

    Carries an optional 1-based line number so callers can point at the
    offending line.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix += str(path)
        if line is not None:
            prefix += f":{line}"
        super().__init__(f"{prefix}: {message}" if prefix else message)


class ConfigError(Exception):
    """A configuration key or value is not accepted."""
