"""Exception hierarchy shared by every stage of the pipeline.

Each family carries the process exit code the CLI reports for it.
"""


class PpidError(Exception):
    exit_code = 1


class ConfigError(PpidError, ValueError):
    exit_code = 2


class DataError(PpidError, ValueError):
    exit_code = 3


class MissingColumnError(DataError):
    def __init__(self, column, source=None):
        self.column = column
        where = f" in {source}" if source else ""
        super().__init__(f"column {column!r} not found{where}")


class EmptyDatasetError(DataError):
    pass


class UnmappedLabelError(DataError):
    def __init__(self, label):
        self.label = label
        super().__init__(f"scenario {label!r} has no entry in the label map")


class NumericalError(PpidError, ArithmeticError):
    exit_code = 4


class UndefinedCorrelationError(NumericalError):
    pass


class DegenerateComponentError(NumericalError):
    def __init__(self, component):
        self.component = component
        super().__init__(
            f"mixture component {component} received zero total responsibility; "
            "re-seed or reduce the number of components"
        )


class UndefinedMetricError(PpidError, ZeroDivisionError):
    exit_code = 5
