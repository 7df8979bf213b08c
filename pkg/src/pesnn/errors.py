"""Exception types raised across the package."""


class PESError(ValueError):
    """Base class for invalid inputs and configurations."""


class DimensionError(PESError):
    pass


class ConstraintError(PESError):
    pass


class StandardizerError(PESError):
    pass


class UndefinedMetricError(PESError):
    pass


class TrainingDivergenceError(FloatingPointError):
    """A loss or prediction became non-finite (or left its valid domain).

    ``term`` names the offending loss term, e.g. ``"pred"`` or ``"meta[2]"``.
    """

    def __init__(self, message, term=None, epoch=None, batch=None):
        self.term = term
        self.epoch = epoch
        self.batch = batch
        where = []
        if epoch is not None:
            where.append(f"epoch={epoch}")
        if batch is not None:
            where.append(f"batch={batch}")
        if term is not None:
            where.append(f"term={term}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)
