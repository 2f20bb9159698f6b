"""Shared exception types."""


class PqlabError(Exception):
    """Base class for all package errors."""


class ConfigError(PqlabError):
    """Invalid device or structure parameters."""


class AddressError(PqlabError):
    """Block address outside [0, 2^w)."""


class BlockSizeError(PqlabError):
    """Block payload does not hold exactly B words of w bits."""


class EmptyQueueError(PqlabError):
    """ExtractMin on an empty queue."""


class DuplicateKeyError(PqlabError):
    """Insert of a key that is currently live."""


class CapabilityError(PqlabError):
    """Workload requires an operation the queue does not support."""


class DivergenceError(PqlabError):
    """A queue answer disagreed with the oracle / recorded transcript."""


class WorkloadUnderflowError(PqlabError):
    """The adaptive generator asked the oracle to extract from an empty queue.

    Possible for unlucky seeds when every key inserted at the root collides
    with a delete key; such seeds are rejected rather than papered over.
    """


class EncodingError(PqlabError):
    """A key or priority does not fit the device word width."""


class StructureOverflowError(PqlabError):
    """A fixed disk arena overflowed; the structure was sized for fewer items."""
