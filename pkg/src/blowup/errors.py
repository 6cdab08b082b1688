"""Exception hierarchy shared by all modules."""


class BlowupError(Exception):
    """Base class for every error raised by the package."""


class EmptyOverlap(BlowupError):
    pass


class InverseMismatch(BlowupError):
    pass


class DomainExit(BlowupError):
    pass


class ZeroVector(BlowupError):
    pass


class ChartMiss(BlowupError):
    pass


class SliceViolation(BlowupError):
    pass


class QuadratureFail(BlowupError):
    pass


class CollapsedLine(BlowupError):
    pass


class GluingMiss(BlowupError):
    pass


class MembershipViolation(BlowupError):
    pass


class SectorEscape(BlowupError):
    pass


class LimitDivergence(BlowupError):
    pass


class ContractViolation(BlowupError):
    pass


class FNonPositive(BlowupError):
    pass


class CoverGap(BlowupError):
    pass


class MergeFail(BlowupError):
    pass


class UnknownExample(BlowupError):
    pass


class IoFailure(BlowupError):
    pass


class DimensionUnsupported(BlowupError):
    pass
