"""Exception types shared across the pipeline."""


class TableError(ValueError):
    """Malformed or contract-violating tabular data."""


class ConfigError(ValueError):
    """Unusable job configuration (bad flags, missing paths, bad backend spec)."""


class BackendError(RuntimeError):
    """A completion backend failed or was exhausted.

    Carries the request tag so call accounting stays auditable.
    """

    def __init__(self, message: str, tag: str = ""):
        super().__init__(message)
        self.tag = tag


class ExecutorError(RuntimeError):
    """A snippet execution session could not be started or broke protocol."""


class WrangleTaskError(RuntimeError):
    """The task produced no applicable snippets; carries the report for auditing."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report
