"""Exception hierarchy.

Three families map onto CLI exit codes: validation problems (2),
mathematical failures such as a failed ping-pong certificate or an empty
limit-set sample (3), and resource caps (4).
"""


class AnosovError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ValidationError(AnosovError, ValueError):
    exit_code = 2


class MathematicalFailure(AnosovError):
    exit_code = 3


class ResourceCap(AnosovError):
    exit_code = 4


class SingularInput(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class DegenerateForm(ValidationError):
    pass


class UnsupportedRank(ValidationError):
    pass


class RankMismatch(ValidationError):
    pass


class UnsupportedFamily(ValidationError):
    pass


class KindMismatch(ValidationError):
    pass


class InvalidParams(ValidationError):
    pass


class NonconvergentEigen(MathematicalFailure):
    pass


class PingPongFailed(MathematicalFailure):
    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class NotProximal(MathematicalFailure):
    pass


class EmptySample(MathematicalFailure):
    pass


class NoPairs(MathematicalFailure):
    pass


class MalformedFlag(MathematicalFailure):
    pass


class TooLarge(ResourceCap):
    pass
