"""Exception types raised across the package."""


class SaliencyFusionError(ValueError):
    """Base class for all input/validation errors of this package."""


class AllZeroMap(SaliencyFusionError):
    pass


class NoValidPositions(SaliencyFusionError):
    pass


class MissingHeader(SaliencyFusionError):
    pass


class BadMagic(SaliencyFusionError):
    pass


class DimensionMismatch(SaliencyFusionError):
    pass


class TruncatedStream(SaliencyFusionError):
    pass


class RankDeficient(SaliencyFusionError):
    pass


class DegeneratePosition(SaliencyFusionError):
    pass


class NoGazeData(SaliencyFusionError):
    pass


class EmptyCategory(SaliencyFusionError):
    pass


class NoValidFixations(SaliencyFusionError):
    pass


class GeometryMismatch(SaliencyFusionError):
    pass
