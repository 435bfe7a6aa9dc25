"""Exception hierarchy shared across the package.

Every rejection an agent or operator can trigger has a named error class so
callers (and the wire protocol) can report *which* rule was violated.
"""


class SimError(Exception):
    """Base class for all environment errors."""

    code = "SimError"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)


# --- forecast validation -------------------------------------------------

class ValidationError(SimError):
    code = "ValidationError"


class SumExceedsOne(ValidationError):
    code = "SumExceedsOne"


class TooManyOutcomes(ValidationError):
    code = "TooManyOutcomes"


class PlaceholderLabel(ValidationError):
    code = "PlaceholderLabel"


class DuplicateLabel(ValidationError):
    code = "DuplicateLabel"


class NegativeProbability(ValidationError):
    code = "NegativeProbability"


class QuestionClosed(ValidationError):
    code = "QuestionClosed"


class UnknownQuestion(ValidationError):
    code = "UnknownQuestion"


# --- scoring -------------------------------------------------------------

class EmptyWindow(SimError):
    code = "EmptyWindow"


class EmptyInput(SimError):
    code = "EmptyInput"


class InvalidBelief(SimError):
    code = "InvalidBelief"


class EmptyIntersection(SimError):
    code = "EmptyIntersection"


# --- corpus --------------------------------------------------------------

class EmptyQuery(SimError):
    code = "EmptyQuery"


class InvalidDateRange(SimError):
    code = "InvalidDateRange"


# --- answer matching -----------------------------------------------------

class BackendUnavailable(SimError):
    code = "BackendUnavailable"


class UnparseableResponse(SimError):
    code = "UnparseableResponse"


# --- engine --------------------------------------------------------------

class QuestionOutOfWindow(SimError):
    code = "QuestionOutOfWindow"


class DuplicateQid(SimError):
    code = "DuplicateQid"


class ResolvedQuestion(SimError):
    code = "ResolvedQuestion"


class AlreadyTerminated(SimError):
    code = "AlreadyTerminated"


# --- memory --------------------------------------------------------------

class NoteTooLong(SimError):
    code = "NoteTooLong"


class UnknownQid(SimError):
    code = "UnknownQid"


class DuplicateNote(SimError):
    code = "DuplicateNote"


class CapExceeded(SimError):
    code = "CapExceeded"


class UnknownIndex(SimError):
    code = "UnknownIndex"


class MemoryDisabled(SimError):
    code = "MemoryDisabled"


# --- tool server ---------------------------------------------------------

class UnknownTool(SimError):
    code = "UnknownTool"


class MalformedRequest(SimError):
    code = "MalformedRequest"


class BudgetExhausted(SimError):
    code = "BudgetExhausted"


class PhaseViolation(SimError):
    code = "PhaseViolation"


class UnknownTemplate(SimError):
    code = "UnknownTemplate"


class MissingField(SimError):
    code = "MissingField"


# --- cli -----------------------------------------------------------------

class ConfigInvalid(SimError):
    code = "ConfigInvalid"


class CorpusMissing(SimError):
    code = "CorpusMissing"


class QuestionFileInvalid(SimError):
    code = "QuestionFileInvalid"


class TranscriptCorrupt(SimError):
    code = "TranscriptCorrupt"


class StragglerTimeout(SimError):
    code = "StragglerTimeout"
