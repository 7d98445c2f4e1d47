"""Exception types shared across the package."""


class DyStratError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(DyStratError, ValueError):
    pass


class InvalidInputError(DyStratError, ValueError):
    pass


class IngestionError(DyStratError, ValueError):
    pass


class DegenerateSeriesError(DyStratError, ValueError):
    pass


class InvalidSplitError(DyStratError, ValueError):
    pass


class InvalidSpecError(DyStratError, ValueError):
    pass


class TrainingDivergedError(DyStratError, ArithmeticError):
    def __init__(self, epoch, loss):
        super().__init__(f"training diverged at epoch {epoch}: loss={loss!r}")
        self.epoch = epoch
        self.loss = loss


class FingerprintMismatchError(DyStratError):
    pass


class StrategyTrainingError(DyStratError):
    def __init__(self, name, cause):
        super().__init__(f"strategy {name}: {cause}")
        self.strategy = name
