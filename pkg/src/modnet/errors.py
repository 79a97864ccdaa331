"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operands have incompatible dimensions."""


class EmptyMaskError(ValueError):
    """A masked loss was asked to average over zero selected cells."""


class IngestionError(ValueError):
    """A CSV file could not be parsed into a dataset."""


class ConfigError(ValueError):
    """An experiment or network configuration is inconsistent."""


class ImputationError(ValueError):
    """A feature has no observed donor values to impute from."""


class MetricError(ValueError):
    """A metric is undefined on the given inputs (e.g. single-class labels)."""


class DegenerateVarianceError(ValueError):
    """A hypothesis test has zero error variance and no valid statistic."""


class EvaluationError(RuntimeError):
    """Bootstrap evaluation failed (too many degenerate folds)."""


class TrainingDivergenceError(RuntimeError):
    """Training loss became non-finite."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"training loss became non-finite at epoch {epoch}")
