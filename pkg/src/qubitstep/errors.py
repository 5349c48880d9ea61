class QubitStepError(Exception):
    """Base class for numerical failures raised by this package."""


class SingularInformation(QubitStepError):
    def __init__(self, det: float, threshold: float):
        self.det = det
        self.threshold = threshold
        super().__init__(
            f"information matrix is singular: det={det:.3e} <= threshold {threshold:.3e}; "
            "use pinv_crb or report non-identifiability"
        )


class DegenerateSplit(QubitStepError, ValueError):
    pass


class OptimizerNotConverged(QubitStepError):
    def __init__(self, message: str, best: float):
        self.best = best
        super().__init__(f"{message} (best value found: {best!r})")


class QuadratureNotConverged(QubitStepError):
    def __init__(self, message: str, last_change: float):
        self.last_change = last_change
        super().__init__(f"{message} (relative change {last_change:.3e})")


class DegeneratePosterior(QubitStepError):
    pass
