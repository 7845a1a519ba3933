"""Exception types raised across the package."""


class ModelError(ValueError):
    """Base class for precondition and data errors."""


class TargetBelowCurrent(ModelError):
    pass


class TargetAboveCurrent(ModelError):
    pass


class ZeroPower(ModelError):
    pass


class LengthMismatch(ModelError):
    pass


class ZeroDenominator(ModelError):
    pass


class TooShort(ModelError):
    pass


class EmptyInput(ModelError):
    pass


class UnknownEntity(ModelError):
    pass


class EmptyFleet(ModelError):
    pass


class EmptyStations(ModelError):
    pass


class ShapeMismatch(ModelError):
    pass


class EmptyPopulation(ModelError):
    pass


class EmptyArchive(ModelError):
    pass


class ParseError(ModelError):
    pass


class GapError(ParseError):
    pass


class DuplicateSlot(ParseError):
    pass


class EmptyFront(ModelError):
    pass


class DimensionMismatch(ModelError):
    pass


class TooFewPoints(ModelError):
    pass


class ConstantInput(ModelError):
    pass


class ZeroPeak(ModelError):
    pass
