class NgpfbmpError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(NgpfbmpError, ValueError):
    pass


class RankDeficient(NgpfbmpError, ArithmeticError):
    """A support whose columns are numerically linearly dependent."""


class NearSingular(NgpfbmpError, ArithmeticError):
    """A candidate column lying (numerically) in the span of the current support."""


class ZeroColumn(NgpfbmpError, ValueError):
    pass


class EmptySet(NgpfbmpError, ValueError):
    pass


class TooLarge(NgpfbmpError, ValueError):
    pass


class OddDimension(NgpfbmpError, ValueError):
    pass


class ConfigError(NgpfbmpError, ValueError):
    pass
