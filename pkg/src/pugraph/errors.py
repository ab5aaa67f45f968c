"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, InputError and
ParseError -> 2, NumericError / TrainingAbort -> 3.
"""


class InputError(ValueError):
    """Invalid data passed to an operation (bad ids, empty sets, bad files)."""


class ParseError(InputError):
    """Malformed record in a dataset file; carries the offending line number."""

    def __init__(self, message: str, path: str = "", line: int = 0):
        super().__init__(f"{path}:{line}: {message}" if path else message)
        self.path = path
        self.line = line


class ConfigError(ValueError):
    """Inconsistent or invalid configuration (shapes, hyperparameters, flags)."""


class NumericError(ArithmeticError):
    """A non-finite value appeared where the computation requires finite numbers."""


class TrainingAbort(RuntimeError):
    """Training stopped on a non-finite loss; carries the last finite parameters."""

    def __init__(self, message: str, epoch: int, last_good=None):
        super().__init__(message)
        self.epoch = epoch
        self.last_good = last_good
