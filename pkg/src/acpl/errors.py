"""Exception hierarchy. ``exit_code`` is what the CLI returns for each family."""


class AcplError(Exception):
    exit_code = 3


class ConfigError(AcplError):
    exit_code = 1


class DataError(AcplError):
    exit_code = 2


class ParseError(DataError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(DataError):
    pass


class LabelError(DataError):
    pass


class SpecError(DataError):
    pass


class SplitError(DataError):
    pass


class ShapeError(AcplError, ValueError):
    pass


class TrainingError(AcplError):
    pass


class NormalizationError(AcplError, ValueError):
    pass


class IndexBuildError(AcplError, ValueError):
    pass


class FitError(AcplError):
    pass


class DegenerateDataError(FitError):
    pass


class ConsistencyError(AcplError):
    pass


class UndefinedMetricError(AcplError, ValueError):
    pass
