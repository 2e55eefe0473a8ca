"""Domain errors and the exit codes the command line maps them to."""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERIC = 3


class SymotError(Exception):
    exit_code = EXIT_USAGE


class ParameterError(SymotError, ValueError):
    """An argument is outside its documented range."""


class DimensionError(SymotError, ValueError):
    exit_code = EXIT_IO


class GraphError(SymotError, RuntimeError):
    """backward() was called on something that is not a live scalar graph."""


class NumericError(SymotError, ArithmeticError):
    exit_code = EXIT_NUMERIC


class TrainingAborted(NumericError):
    def __init__(self, step: int, detail: str):
        super().__init__(f"training aborted at step {step}: {detail}")
        self.step = step
        self.detail = detail


class MalformedFileError(SymotError, ValueError):
    exit_code = EXIT_IO


class CheckpointError(MalformedFileError):
    pass


class ConfigError(SymotError, ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.key = key
        self.line = line


class SweepError(SymotError):
    exit_code = EXIT_NUMERIC

    def __init__(self, failures: dict[float, str], rows: list):
        listed = "; ".join(f"beta={beta:g}: {reason}" for beta, reason in sorted(failures.items()))
        super().__init__(f"{len(failures)} sweep point(s) failed: {listed}")
        self.failures = failures
        self.rows = rows
