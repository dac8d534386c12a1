"""Exception taxonomy shared across the toolkit.

Every error raised on bad data (as opposed to programmer mistakes, which
stay plain ValueError/TypeError) derives from OForgeError so callers and
the CLI can catch one base class.
"""


class OForgeError(Exception):
    pass


# dataset IO
class MissingFile(OForgeError):
    pass


class MalformedAnnotation(OForgeError):
    pass


class DanglingReference(OForgeError):
    pass


class IoFailure(OForgeError):
    pass


# mask primitives
class CountSumMismatch(OForgeError):
    pass


class DegeneratePolygon(OForgeError):
    pass


class DimensionMismatch(OForgeError):
    pass


# court detection / placement
class InvalidDimensions(OForgeError):
    pass


class EmptyRegion(OForgeError):
    pass


# entity bank
class EmptyBank(OForgeError):
    pass


class CorruptBank(OForgeError):
    pass


# augmentation
class DegenerateResult(OForgeError):
    pass


# metric
class EmptyGroundTruth(OForgeError):
    pass


# checkpoint files
class BadMagic(OForgeError):
    pass


class UnsupportedVersion(OForgeError):
    pass


class TruncatedFile(OForgeError):
    pass


class ShapeOverflow(OForgeError):
    pass


class SchemaMismatch(OForgeError):
    pass


class MalformedCheckpoint(OForgeError):
    pass


class EmptyInput(OForgeError):
    pass
