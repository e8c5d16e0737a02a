"""Custom exceptions for blowuplab."""


class BlowupLabError(Exception):
    """Base exception for all blowuplab errors."""


class ConfigLoadError(BlowupLabError):
    """Raised when a run configuration file cannot be loaded or is invalid."""

    def __init__(self, config_path: str, reason: str) -> None:
        super().__init__(f"Failed to load config '{config_path}': {reason}")
        self.config_path = config_path
        self.reason = reason


class DomainError(BlowupLabError):
    """Raised when a kernel is evaluated outside its mathematical domain."""

    def __init__(self, quantity: str, reason: str) -> None:
        super().__init__(f"Domain error in {quantity}: {reason}")
        self.quantity = quantity
        self.reason = reason


class ScenarioError(BlowupLabError):
    """Raised when a scenario or its initial data cannot be built."""

    def __init__(self, reason: str) -> None:
        super().__init__(f"Invalid scenario: {reason}")
        self.reason = reason


class SolverError(BlowupLabError):
    """Raised when the time integration produces values the ceiling did not catch."""

    def __init__(self, step: int, reason: str) -> None:
        super().__init__(f"Solver failed at step {step}: {reason}")
        self.step = step
        self.reason = reason


class EmptyCurveError(BlowupLabError):
    """Raised when a blow-up curve is requested from a history with no blow-up."""

    def __init__(self) -> None:
        super().__init__("No node blew up; the blow-up curve is empty")


class FrameError(BlowupLabError):
    """Raised when a similarity frame falls outside the recorded data."""

    def __init__(self, r0: float, s: float, reason: str) -> None:
        super().__init__(f"Cannot build frame at r0={r0:g}, s={s:g}: {reason}")
        self.r0 = r0
        self.s = s
        self.reason = reason


class FitError(BlowupLabError):
    """Raised when a fit receives unusable input."""

    def __init__(self, reason: str) -> None:
        super().__init__(f"Fit failed: {reason}")
        self.reason = reason


class PipelineError(BlowupLabError):
    """Raised when a pipeline stage fails in a way that stops the run."""

    def __init__(self, stage: str, reason: str) -> None:
        super().__init__(f"Pipeline stage '{stage}' failed: {reason}")
        self.stage = stage
        self.reason = reason
