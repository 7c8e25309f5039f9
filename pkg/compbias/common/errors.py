"""
Exception hierarchy shared by all lab modules.

Every error carries a human readable ``detail`` and the process ``exit_code``
the CLI should return for it.
"""
from typing import List, Optional


class LabError(Exception):
    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class CountExceedsLimit(LabError):
    pass


class NotABijection(LabError):
    pass


class InvalidK(LabError):
    pass


class EmptySequence(LabError):
    pass


class EmptyCurve(LabError):
    pass


class DegenerateInput(LabError):
    pass


class LengthMismatch(LabError):
    pass


class ShapeMismatch(LabError):
    pass


class InvalidSize(LabError):
    pass


class InputCollision(LabError):
    pass


class EmptyData(LabError):
    pass


class NonFiniteLoss(LabError):
    """Training produced a NaN/inf loss; ``losses`` holds the finite prefix."""

    def __init__(self, detail: str, losses: Optional[List[float]] = None):
        super().__init__(detail)
        self.losses = list(losses or [])


class InputMismatch(LabError):
    """Runs of one sweep did not see identical inputs."""
