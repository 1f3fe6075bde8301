#!/usr/bin/python3
"""
Hamming Forge Errors
Exception hierarchy shared by the engines, the shift pipeline and the experiment manager
"""

from typing import Any, Optional


class ForgeError(Exception):
    """Base class for every error raised by hamming-forge"""


class PreconditionViolation(ForgeError, ValueError):
    """An operation was called outside its domain"""


class EmptyFamily(PreconditionViolation):
    """Sparsity is undefined for an empty family"""


class FullFamily(PreconditionViolation):
    """Complement sparsity is undefined for the full family"""


class TooLarge(ForgeError):
    """Predicted enumeration size exceeds the configured cap"""

    def __init__(self, what: str, predicted: int, cap: int):
        self.what = what
        self.predicted = predicted
        self.cap = cap
        super().__init__(f"{what}: predicted {predicted} items exceeds cap {cap}")


class MalformedInput(ForgeError, ValueError):
    """A family, circuit, config or constants file could not be parsed"""


class ShiftFailure(ForgeError):
    """Structured failure of one shift-pipeline attempt"""

    stage = "shift"
    reason = "ShiftFailure"

    def __init__(self, detail: str, state: Optional[Any] = None):
        self.detail = detail
        self.state = state
        super().__init__(f"{self.reason} at {self.stage}: {detail}")


class NoValidSplit(ShiftFailure):
    stage = "build_splits"
    reason = "NoValidSplit"


class NoCliquelessBlock(ShiftFailure):
    stage = "blocked_edges"
    reason = "NoCliquelessBlock"


class ResidualQ(ShiftFailure):
    stage = "blocked_edges"
    reason = "ResidualQ"


class ChainPropertyViolation(ShiftFailure):
    stage = "local_shift"
    reason = "ChainPropertyViolation"


class NoRootTerm(ShiftFailure):
    stage = "root_term"
    reason = "NoRootTerm"


class AuditFailure(ShiftFailure):
    stage = "audit"
    reason = "AuditFailure"
