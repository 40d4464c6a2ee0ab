"""Exception types shared across modules; the CLI maps them to exit codes."""


class ConfigError(ValueError):
    """Invalid user configuration (CLI exit code 2)."""


class UnsupportedCaseError(ValueError):
    """A scheme/width combination for which no analytic formula exists (CLI exit code 3)."""


class DegenerateDataError(ValueError):
    """Training inputs that cannot be ordered along any direction (duplicates)."""
