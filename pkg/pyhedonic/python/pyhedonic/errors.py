"""Exception hierarchy shared by every pyhedonic module"""

from typing import Iterable, Tuple


class HedonicError(Exception):
    """Root of all pyhedonic errors"""


class DuplicateOrder(HedonicError):
    pass


class ZeroQuantity(HedonicError):
    pass


class AsymmetricRelation(HedonicError):
    pass


class SelfRelation(HedonicError):
    pass


class MemberNotInGraph(HedonicError):
    pass


class WeightsDoNotSumToOne(HedonicError):
    pass


class EmptySide(HedonicError):
    pass


class PopulationTooSmall(HedonicError):
    pass


class UnknownOrderInDelivery(HedonicError):
    pass


class StorageFailure(HedonicError):
    pass


class InvalidSpec(HedonicError):
    pass


class ScenarioFormatError(HedonicError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class ConfigError(HedonicError):
    pass


class SessionValidationError(HedonicError):
    """Raised by validate_session with every violation it found"""

    def __init__(self, violations: Iterable[HedonicError]):
        self.violations: Tuple[HedonicError, ...] = tuple(violations)
        summary = "; ".join(f"{type(v).__name__}: {v}" for v in self.violations)
        super().__init__(f"{len(self.violations)} violation(s): {summary}")

    def kinds(self) -> Tuple[type, ...]:
        return tuple(type(v) for v in self.violations)
