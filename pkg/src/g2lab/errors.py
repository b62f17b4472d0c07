"""Exception hierarchy.

``InputError`` subclasses signal bad input or singular data (CLI exit 2);
``ConditionViolation`` subclasses signal that a checked geometric
condition fails (CLI exit 1).
"""


class G2LabError(Exception):
    pass


class InputError(G2LabError, ValueError):
    pass


class ConditionViolation(G2LabError):
    """A checked condition failed; ``witness`` carries the offending data."""

    condition = "unspecified"

    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness if witness is not None else {}


class DimensionError(InputError):
    pass


class DegreeError(InputError):
    pass


class SingularFrame(InputError):
    pass


class JacobiError(InputError):
    pass


class ZeroVolume(InputError):
    pass


class FiberNonVanishing(InputError):
    pass


class NotDecomposable(InputError):
    pass


class NotInPencil(InputError):
    pass


class TooFewRecords(InputError):
    pass


class TooFewSamples(TooFewRecords):
    pass


class NonSPDSample(InputError):
    pass


class FrameMetricMismatch(InputError):
    pass


class MetricMismatch(InputError):
    pass


class NonHorizontalCurvature(ConditionViolation):
    condition = "horizontal-curvature"


class NotDefinite(ConditionViolation):
    condition = "definite"


class OrientationFlip(ConditionViolation):
    condition = "orientation"


class PolicyViolation(ConditionViolation):
    condition = "positive-symmetric-K"


class NonPositiveF(ConditionViolation):
    condition = "positive-f"


class WitnessFailure(ConditionViolation):
    condition = "rigid-witness"
