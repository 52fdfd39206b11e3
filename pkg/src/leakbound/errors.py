"""Exception hierarchy shared by every stage of the pipeline."""

from __future__ import annotations


class LeakboundError(Exception):
    """Base class for all analysis errors."""


class SourceError(LeakboundError):
    """An error tied to a position in a source file."""

    def __init__(self, message: str, line: int = 0, col: int = 0, path: str = ""):
        self.message = message
        self.line = line
        self.col = col
        self.path = path
        where = f"{path or '<input>'}:{line}:{col}: " if line else ""
        super().__init__(f"{where}{message}")


class ParseError(SourceError):
    def __init__(self, message, line=0, col=0, expected=(), path=""):
        self.expected = tuple(sorted(set(expected)))
        if self.expected:
            message = f"{message} (expected one of: {', '.join(self.expected)})"
        super().__init__(message, line, col, path)


class TypeCheckError(SourceError):
    pass


class HarnessError(SourceError):
    pass


class ConcreteError(LeakboundError):
    """Raised by the concrete interpreter."""


class StepBudgetExceeded(ConcreteError):
    pass


class AssertionFailure(ConcreteError):
    def __init__(self, line: int):
        self.line = line
        super().__init__(f"assertion failed at line {line}")


class UnwindingAssertionFailure(AssertionFailure):
    """A loop would run more iterations than the unwinding bound allows."""

    def __init__(self, line: int):
        super().__init__(line)
        self.args = (f"unwinding assertion failed at line {line}",)


class AssumptionViolated(ConcreteError):
    """The run left the set of executions admitted by an ``assume``."""

    def __init__(self, line: int):
        self.line = line
        super().__init__(f"assumption violated at line {line}")


class MemoryModelError(LeakboundError):
    """A builtin was called on a region that cannot hold the requested bytes."""


class BudgetExceeded(LeakboundError):
    """Enumeration or solving ran past its configured budget."""


class EncodeError(LeakboundError):
    pass


class DriverSizeError(LeakboundError):
    pass


class InternalSoundnessError(LeakboundError):
    """A decoded counterexample failed concrete replay (an encoder bug)."""


class InsufficientBound(LeakboundError):
    """Unwinding assertions failed: the bound k does not cover every execution."""

    def __init__(self, k: int, stats=None):
        self.k = k
        self.stats = dict(stats or {})
        super().__init__(f"unwinding bound k={k} is insufficient")
