"""Exception types raised across the package."""


class OrdinalCSError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(OrdinalCSError, ValueError):
    pass


class ZeroRowError(OrdinalCSError, ValueError):
    def __init__(self, grade: int):
        self.grade = grade
        super().__init__(f"confusion counts row for grade {grade} sums to zero")


class InvalidInputError(OrdinalCSError, ValueError):
    pass


class InvalidHyperparameterError(OrdinalCSError, ValueError):
    pass


class EmptyInputError(OrdinalCSError, ValueError):
    pass


class UndefinedStatisticError(OrdinalCSError, ValueError):
    pass


class UnstableStatisticError(OrdinalCSError, RuntimeError):
    pass


class ParseError(OrdinalCSError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TrainingDivergedError(OrdinalCSError, RuntimeError):
    def __init__(self, epoch: int, batch: int, lam: float | None = None):
        self.epoch = epoch
        self.batch = batch
        self.lam = lam
        msg = f"non-finite loss at epoch {epoch}, batch {batch}"
        if lam is not None:
            msg += f" (lambda={lam:g})"
        super().__init__(msg)
