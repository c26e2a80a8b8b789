"""Exception hierarchy shared by all swapmix modules."""

from __future__ import annotations


class SwapMixError(Exception):
    """Base class for all toolkit errors."""


class MalformedInput(SwapMixError):
    """An input file or record does not match its declared schema."""


class InvariantViolation(SwapMixError):
    """Parsed data violates a structural invariant.

    Carries the individual violation messages so callers can report
    per-object diagnostics.
    """

    def __init__(self, message: str, violations: list[str] | None = None):
        super().__init__(message)
        self.violations = list(violations or [])


class DanglingDependency(MalformedInput):
    """A reasoning step references a later or absent step."""


class DimensionMismatch(SwapMixError):
    """Vector or matrix dimensions disagree."""


class BadMagic(SwapMixError):
    """A binary feature file does not start with the SMFX magic."""


class VersionUnsupported(SwapMixError):
    """A binary feature file declares an unknown format version."""


class TruncatedFile(SwapMixError):
    """A binary feature file ends before its declared payload."""


class UnknownLabel(SwapMixError):
    """A label has no embedding and the out-of-vocabulary fallback is disabled."""


class ImageMismatch(SwapMixError):
    """A question, scene graph, and match table do not refer to the same image."""


class IndexOutOfRange(SwapMixError):
    """A row index falls outside the feature matrix."""


class DonorUnmatched(SwapMixError):
    """A swap donor has no matched detection row to source its feature from."""


class EmptyClass(SwapMixError):
    """A class has no instances in the dataset index."""


class UnsupportedOperation(SwapMixError):
    """The symbolic executor cannot interpret an operation; the question is excluded."""


class AmbiguousSelection(SwapMixError):
    """A query-style step did not resolve to exactly one object or value."""


class ModelFailure(SwapMixError):
    """A model failed to produce an answer for one input."""


class IncompleteLog(SwapMixError):
    """An answer log is missing, duplicated, or inconsistent for expected pairs.

    ``pairs`` lists the offending (question_id, pert_id) tuples.
    """

    def __init__(self, message: str, pairs: list[tuple[str, int]] | None = None):
        super().__init__(message)
        self.pairs = list(pairs or [])
