"""Exception types shared across the library.

Every error raised on a contract boundary derives from ToolchatError so
callers can catch the whole family; the finer-grained classes exist because
tests and the benchmark runner distinguish them.
"""


class ToolchatError(Exception):
    """Base class for all toolchat errors."""


# --- catalog / registry ---------------------------------------------------

class DuplicateToolName(ToolchatError):
    pass


class InvalidCard(ToolchatError):
    """A tool card violates an invariant; message carries the field path."""


class UnknownToolName(ToolchatError):
    pass


class ParseError(ToolchatError):
    """A persisted file could not be parsed; message carries location info."""


class MissingField(ToolchatError):
    pass


class InvariantViolation(ToolchatError):
    pass


# --- retrieval ------------------------------------------------------------

class BackendUnavailable(ToolchatError):
    """A remote backend (LLM or embedding) could not be reached or errored."""

    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class BackendTimeout(ToolchatError):
    pass


class EmptyDim(ToolchatError):
    """An embedding backend is configured with a non-positive dimension."""


class DimMismatch(ToolchatError):
    pass


class EmptyIndex(ToolchatError):
    pass


# --- planner grammar ------------------------------------------------------

class MalformedEmission(ToolchatError):
    """A planner emission did not match the invocation grammar.

    Retains the raw text so metric scoring can still compute IoU on it.
    """

    def __init__(self, reason: str, raw: str):
        super().__init__(reason)
        self.raw = raw


class MalformedGraph(ToolchatError):
    pass


class ForwardReference(ToolchatError):
    """A step references the output of the same or a later step."""


class BadPlaceholder(ToolchatError):
    pass


class MissingRequiredArg(ToolchatError):
    pass


class CycleDetected(ToolchatError):
    pass


# --- executor -------------------------------------------------------------

class MissingUpstream(ToolchatError):
    pass


class ImageIndexOutOfRange(ToolchatError):
    pass


class AdapterMissing(ToolchatError):
    pass


class ScriptedFailure(ToolchatError):
    """Raised by mock adapters when arguments match a configured failure pattern."""


class ToolUnavailable(ToolchatError):
    def __init__(self, message: str, status: int | None = None):
        super().__init__(message)
        self.status = status


class ToolProtocolError(ToolchatError):
    pass


class ToolTimeout(ToolchatError):
    pass


class ToolFailure(ToolchatError):
    """A remote tool answered with an error payload instead of an artifact."""


class ArtifactRenderError(ToolchatError):
    """An artifact kind cannot be inlined into text (it must flow whole)."""


# --- integration ----------------------------------------------------------

class LengthMismatch(ToolchatError):
    pass


class TooFewOptions(ToolchatError):
    pass


class UnparseableSelection(ToolchatError):
    def __init__(self, raw: str):
        super().__init__("no option label found in reply")
        self.raw = raw


class UnparseableRevision(ToolchatError):
    def __init__(self, raw: str):
        super().__init__("no usable revision found in reply")
        self.raw = raw


class MissingSlot(ToolchatError):
    pass


# --- benchmark / service --------------------------------------------------

class DatasetParseError(ToolchatError):
    pass


class EmptyRun(ToolchatError):
    pass


class SessionNotFound(ToolchatError):
    pass


class SessionBusy(ToolchatError):
    pass
