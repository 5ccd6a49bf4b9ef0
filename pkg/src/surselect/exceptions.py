"""Exception types raised across the package."""


class SurSelectError(Exception):
    """Base class for package errors."""


class InvalidParameterError(SurSelectError, ValueError):
    pass


class SingularDesignError(SurSelectError, ValueError):
    """Raised when a selected predictor block is rank deficient."""


class IllConditionedMomentsError(SurSelectError, ValueError):
    pass


class ConvergenceError(SurSelectError, RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateGridError(SurSelectError, ValueError):
    pass


class IngestionError(SurSelectError, ValueError):
    pass


class ConfigError(SurSelectError, ValueError):
    pass


class PipelineError(SurSelectError, RuntimeError):
    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
