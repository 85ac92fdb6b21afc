"""Exception types shared across the package."""


class TiergaeError(Exception):
    """Base class for all package errors."""


class ShapeMismatchError(TiergaeError, ValueError):
    pass


class IndexOutOfRangeError(TiergaeError, ValueError):
    pass


class DuplicateEdgeError(TiergaeError, ValueError):
    pass


class DomainError(TiergaeError, ValueError):
    """Math-domain violation, e.g. log of a non-positive entry."""


class NonScalarLossError(TiergaeError, ValueError):
    pass


class NegativeWeightError(TiergaeError, ValueError):
    pass


class EmptyGroupError(TiergaeError, ValueError):
    pass


class IncompleteCoverError(TiergaeError, ValueError):
    pass


class SdfError(TiergaeError, ValueError):
    """Base class for SDF / CTfile parse failures."""


class MalformedCountsLineError(SdfError):
    pass


class TruncatedBlockError(SdfError):
    pass


class V3000UnsupportedError(SdfError):
    pass


class InvalidBondError(SdfError):
    pass


class FetchError(TiergaeError):
    """Base class for record-download failures."""


class NotFoundError(FetchError):
    pass


class TransportError(FetchError):
    pass


class ConfigError(TiergaeError, ValueError):
    pass


class CliError(TiergaeError):
    """Fatal command-line failure; message is user-facing."""
