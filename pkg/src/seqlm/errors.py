"""Exception hierarchy.

Each exception carries the process exit code the CLI reports for it and the
name of the module it originates from.
"""


class SeqlmError(Exception):
    exit_code = 2
    module = "seqlm"


class ConfigError(SeqlmError):
    exit_code = 1
    module = "config"


class DataError(SeqlmError):
    exit_code = 2
    module = "data"


class ParseError(DataError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyCorpusError(DataError):
    pass


class InvalidTokenError(DataError):
    pass


class LabelError(DataError):
    module = "eval"


class StateError(DataError):
    module = "model"


class ModelFormatError(DataError):
    module = "model"


class ShapeError(SeqlmError, ValueError):
    exit_code = 3
    module = "autodiff"


class GraphIndexError(SeqlmError, IndexError):
    exit_code = 3
    module = "autodiff"


class NumericError(SeqlmError, ArithmeticError):
    exit_code = 3
    module = "autodiff"


class DeterminismError(SeqlmError):
    exit_code = 4
    module = "autodiff"


class VerificationError(SeqlmError):
    exit_code = 4
    module = "gradcheck"
