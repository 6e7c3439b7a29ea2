"""Exception hierarchy shared across the package.

Every error raised by library code derives from EditLoopError so callers
can catch the whole family at service boundaries.
"""


class EditLoopError(Exception):
    """Base class for all editloop errors."""


# --- scene / transition -------------------------------------------------

class UnknownObject(EditLoopError):
    def __init__(self, object_id):
        super().__init__(f"unknown object id: {object_id!r}")
        self.object_id = object_id


class ConflictingCommands(EditLoopError):
    def __init__(self, object_id):
        super().__init__(f"multiple commands target object {object_id!r}")
        self.object_id = object_id


class VocabularyViolation(EditLoopError):
    def __init__(self, attribute, value):
        super().__init__(f"value {value!r} not in the {attribute} vocabulary")
        self.attribute = attribute
        self.value = value


class UndoInTransition(EditLoopError):
    def __init__(self):
        super().__init__("undo cannot be applied by the transition operator; "
                         "resolve it against the state graph")


class DimensionTooSmall(EditLoopError):
    pass


# --- history graph ------------------------------------------------------

class UnknownParent(EditLoopError):
    pass


class UnknownTarget(EditLoopError):
    pass


class CycleWouldForm(EditLoopError):
    pass


class NoSuccessfulPath(EditLoopError):
    pass


# --- layer executor -----------------------------------------------------

class EmptyMask(EditLoopError):
    pass


class PatchOutOfBounds(EditLoopError):
    pass


class MissingScene(EditLoopError):
    pass


class BackendTimeout(EditLoopError):
    pass


class BackendRejected(EditLoopError):
    pass


class DimensionMismatch(EditLoopError):
    pass


# --- planner ------------------------------------------------------------

class DslSyntaxError(EditLoopError):
    """Grammar violation with a source position and the expected token set."""

    def __init__(self, line, column, expected, found):
        self.line = line
        self.column = column
        self.expected = tuple(expected)
        self.found = found
        exp = " or ".join(self.expected)
        super().__init__(f"line {line}, column {column}: expected {exp}, found {found!r}")


class DslSemanticError(EditLoopError):
    """Well-formed syntax with an invalid attribute or vocabulary value."""

    def __init__(self, line, column, message):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class ParseFailed(EditLoopError):
    pass


class LlmUnavailable(EditLoopError):
    pass


class PlanTooLarge(EditLoopError):
    def __init__(self, size, limit):
        super().__init__(f"plan has {size} sub-goals, limit is {limit}")
        self.size = size
        self.limit = limit


class SessionClosed(EditLoopError):
    pass


# --- data engine --------------------------------------------------------

class Unsatisfiable(EditLoopError):
    pass


# --- evaluator ----------------------------------------------------------

class EmptyHistogram(EditLoopError):
    pass


class MaskTooThin(EditLoopError):
    """No pixel has full metric-window support inside the mask."""


class ProviderUnavailable(EditLoopError):
    pass


class LayoutError(EditLoopError):
    """A session or output directory does not match the documented layout."""
