"""Exception hierarchy shared across the toolkit.

``DataError`` covers everything caused by bad input (malformed files,
inconsistent annotations, incompatible models); the CLI maps it to exit
code 2. Anything else escaping a command is treated as an internal
invariant violation (exit code 3).
"""


class DataError(Exception):
    """Invalid or inconsistent input data."""


class ConlluParseError(DataError):
    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class ConlluSerializeError(DataError):
    pass


class GraphTransformError(DataError):
    pass


class BasicTreeError(DataError):
    pass


class ExtractionError(DataError):
    pass


class ModelFormatError(DataError):
    pass


class EvalError(DataError):
    pass


class ConfigError(DataError):
    pass


class MwtRuleError(DataError):
    pass
