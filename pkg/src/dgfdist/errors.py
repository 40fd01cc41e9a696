"""Exception types shared across the package."""


class FormatError(ValueError):
    """A text input (graph, subject, target list, log, manifest) is malformed.

    Carries the 1-based line number when one is known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GraphFormatError(FormatError):
    pass


class SubjectFormatError(FormatError):
    pass


class LogFormatError(FormatError):
    pass


class ManifestError(FormatError):
    pass


class ExperimentError(RuntimeError):
    """A campaign inside an experiment failed; names the offending run."""
