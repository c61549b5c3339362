"""Exception hierarchy shared across the package.

Everything raised on purpose derives from :class:`NavqaError` so callers
(and the CLI exit-code mapping) can distinguish our failures from bugs.
"""

from __future__ import annotations


class NavqaError(Exception):
    """Base class for all errors raised by this package."""


# --- embedding store ---------------------------------------------------------

class ZeroVectorError(NavqaError):
    """A vector with (near-)zero norm cannot be normalized."""


class DimMismatchError(NavqaError):
    """Two vectors (or a vector and a store) disagree on dimensionality."""


class BadMagicError(NavqaError):
    """File does not start with the expected magic bytes."""


class UnsupportedVersionError(NavqaError):
    """Embedding file declares a format version this reader does not know."""


class TruncatedFileError(NavqaError):
    """Embedding file payload does not match the record count in its header."""


class UnknownClipError(NavqaError):
    """Requested clip index is not present in the store."""


class IoError(NavqaError):
    """Wraps OS-level read/write failures (distinct from builtin ``IOError``)."""


# --- narrative memory --------------------------------------------------------

class InvalidSlotCountError(NavqaError):
    """A memory bank needs at least one slot."""


class AlreadyAssignedError(NavqaError):
    """Clip was already placed into a slot; assignment is append-only."""


class AssignerError(NavqaError):
    """Slot assigner failed to produce a decision."""


class SlotOutOfRangeError(NavqaError):
    """Assigner returned a slot id outside [0, n_slots)."""


class MemoryBuildError(NavqaError):
    """Sequential memory build aborted; carries the failing clip index."""

    def __init__(self, clip_index: int, message: str):
        super().__init__(f"clip {clip_index}: {message}")
        self.clip_index = clip_index


class SchemaError(NavqaError):
    """A JSON document does not match its expected schema."""


# --- retrieval ---------------------------------------------------------------

class EmptyClipError(NavqaError):
    """A clip must have at least one frame to be scored."""


class EmptySlotScoresError(NavqaError):
    """Slot score is undefined over an empty member list."""


class AlphaOutOfRangeError(NavqaError):
    """Blend weight must lie in [0, 1]."""


class NegativeLambdaError(NavqaError):
    """Slot boost weight must be >= 0."""


class BankStoreMismatchError(NavqaError):
    """A clip referenced by the memory bank has no embeddings in the store."""


# --- qa dataset --------------------------------------------------------------

class TooFewEvidencesError(NavqaError):
    """Distance bucketing needs at least two evidence indices."""


class PipelineError(NavqaError):
    """Filtering pipeline aborted; message reports progress so far."""


# --- evaluation --------------------------------------------------------------

class EmptyGoldError(NavqaError):
    """Recall is undefined for an empty gold evidence set."""


class ShapeMismatchError(NavqaError):
    """Two reports do not share the same bucket/metric structure."""


# --- gateway -----------------------------------------------------------------

class GatewayError(NavqaError):
    """Model gateway failed after exhausting its retries."""


class GatewayTimeoutError(GatewayError):
    """All attempts against the endpoint timed out."""


class MalformedResponseError(NavqaError):
    """Model response did not match the task's strict JSON schema."""
