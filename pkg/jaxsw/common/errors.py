"""Exception hierarchy. Every error kind a public operation can raise has its
own class so the command line can map it to an exit code."""


class JaxswError(Exception):
    pass


class InvalidParameterError(JaxswError, ValueError):
    pass


class InvalidMeasureError(JaxswError, ValueError):
    pass


class UnsupportedDimensionError(JaxswError, ValueError):
    pass


class InvalidWitnessError(JaxswError, ValueError):
    pass


class BudgetExceededError(JaxswError, ValueError):
    pass


class NumericalDegeneracyError(JaxswError, RuntimeError):
    pass


class ConstructionBugError(JaxswError, RuntimeError):
    pass


class CsvParseError(InvalidParameterError):
    def __init__(self, path, line, column, message):
        self.path = path
        self.line = line
        self.column = column
        super().__init__(f"{path}:{line}:{column}: {message}")
