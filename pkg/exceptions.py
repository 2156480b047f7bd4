"""
Exception types for the single-copy product testing toolkit
"""


class ProdTestError(ValueError):
    """Base class for every error raised by the toolkit"""


class InvalidDimensionError(ProdTestError):
    """A dimension or factor count is zero, negative or inconsistent"""


class InvalidSubsetError(ProdTestError):
    """A set of factor indices is empty, repeated or out of range"""


class InvalidCutError(ProdTestError):
    """A bipartition is trivial (empty or the full set of factors)"""


class DimensionMismatchError(ProdTestError):
    """Two operands live on different spaces"""


class SizeCapError(ProdTestError):
    """The request exceeds a desk-scale size cap"""


class PreconditionError(ProdTestError):
    """An input violates the hypothesis of the inequality being checked"""


class NormalizationError(ProdTestError):
    """A probability vector or state is not normalized"""


class FarStateError(ProdTestError):
    """No verified far-from-product state could be built"""


class InsufficientCopiesError(ProdTestError):
    """A copy source ran out of copies"""


class StrategyScopeError(ProdTestError):
    """A measurement strategy does not fit the state it is applied to"""


class UsageError(ProdTestError):
    """Invalid command-line configuration"""


class NonConvergenceWarning(RuntimeWarning):
    """The product-overlap optimizer hit its iteration limit"""
