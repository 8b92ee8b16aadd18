"""Exception types shared across the package."""


class StoreError(Exception):
    """Base class for all gfstore errors."""


class ChannelMismatch(StoreError):
    """Operands disagree on the number of channels."""


class DictionaryMismatch(StoreError):
    """Histograms reference different dictionaries/binnings and no mapping was given."""


class NegativeWeight(StoreError):
    """Weights must be >= 0."""


class BudgetTooSmall(StoreError):
    """Storage budget cannot give every active level a slot."""


class FutureRange(StoreError):
    """Query interval extends past the newest ingested sample."""


class DepthMismatch(StoreError):
    """Scale-wise variance operands have different depths."""


class EmptySeries(StoreError):
    """An empty coefficient series cannot be summarized."""


class NegativeInput(StoreError):
    """Compressive transforms are defined on [0, inf) only."""


class EmptySample(StoreError):
    """A distribution model needs at least one observation."""


class SingularMatrix(StoreError):
    """Joint diagonalization failed even after regularization."""


class EmptyLeaves(StoreError):
    """A search tree needs at least one leaf."""


class DimensionMismatch(StoreError):
    """Query vector does not match the indexed channel count."""


class LengthMismatch(StoreError):
    """Pattern length does not match the dictionary configuration."""


class TooFewSamples(StoreError):
    """Not enough samples for the requested curation operation."""


class CannotSatisfyBudget(StoreError):
    """No sequence of merges/drops can fit the record into the budget."""


class UnknownId(StoreError):
    """Referenced sample or dictionary entry id does not exist."""


class BadMagic(StoreError):
    """Byte stream does not start with the container magic."""


class VersionUnsupported(StoreError):
    """Container format version is not readable by this build."""


class ChecksumMismatch(StoreError):
    """Data section does not match the checksum recorded in the manifest."""


class InvariantViolation(StoreError):
    """A loaded record fails its structural invariants."""
