"""Exception hierarchy.

Every error carries the CLI exit code it maps to: 1 for configuration and
I/O problems, 2 for data and coverage problems, 3 for numerical failures.
"""


class ScmError(Exception):
    exit_code = 1


class ConfigError(ScmError):
    exit_code = 1


class InvalidConfig(ConfigError):
    pass


class SpecError(ConfigError):
    pass


class DataError(ScmError):
    exit_code = 2


class EmptyInput(DataError):
    def __init__(self):
        super().__init__("EmptyInput: no data rows")


class MalformedRow(DataError):
    def __init__(self, line: int, reason: str):
        self.line = line
        super().__init__(f"MalformedRow: line {line}: {reason}")


class DuplicateKey(DataError):
    def __init__(self, unit: str, time: int, variable: str):
        self.key = (unit, time, variable)
        super().__init__(f"DuplicateKey: ({unit}, {time}, {variable})")


class UnknownUnit(DataError):
    def __init__(self, unit: str):
        self.unit = unit
        super().__init__(f"UnknownUnit: {unit!r}")


class UnknownVariable(DataError):
    def __init__(self, variable: str):
        self.variable = variable
        super().__init__(f"UnknownVariable: {variable!r}")


class WindowOutOfRange(DataError):
    def __init__(self, window, times_range):
        self.window = tuple(window)
        super().__init__(
            f"WindowOutOfRange: [{window[0]}, {window[1]}] outside panel "
            f"[{times_range[0]}, {times_range[1]}]"
        )


class CoverageError(DataError):
    def __init__(self, variable: str, unit: str, window):
        self.variable = variable
        self.unit = unit
        self.window = tuple(window)
        super().__init__(
            f"CoverageError: {variable!r} missing for unit {unit!r} "
            f"in window [{window[0]}, {window[1]}]"
        )


class DonorPoolTooSmall(DataError):
    def __init__(self, n: int, needed: int = 2):
        self.n = n
        super().__init__(f"DonorPoolTooSmall: {n} units available, need >= {needed}")


class TreatedInDonors(DataError):
    def __init__(self, unit: str):
        super().__init__(f"TreatedInDonors: {unit!r} is listed as a donor")


class ZeroVariancePredictor(DataError):
    def __init__(self, k: int, label: str = ""):
        self.k = k
        super().__init__(f"ZeroVariancePredictor: predictor {k} {label}".rstrip())


class EmptyWindow(DataError):
    pass


class YearNotInPost(DataError):
    def __init__(self, year: int):
        super().__init__(f"YearNotInPost: {year}")


class NumericalError(ScmError):
    exit_code = 3


class NonFiniteInput(NumericalError):
    pass


class NoConvergence(NumericalError):
    def __init__(self, iterations: int, rel_change: float):
        self.iterations = iterations
        super().__init__(
            f"NoConvergence: relative objective change {rel_change:.3e} "
            f"after {iterations} iterations"
        )


class TooManyDonors(NumericalError):
    def __init__(self, j: int, limit: int = 6):
        super().__init__(f"TooManyDonors: J={j} exceeds brute-force limit {limit}")


class OracleMismatch(NumericalError):
    pass
