"""Exception hierarchy shared by every analysis stage."""

from __future__ import annotations


class SsrlintError(Exception):
    """Base class for all analyzer errors."""


class ParseError(SsrlintError):
    """Input could not be read as a compiler AST or as Solidity source."""


class UnsupportedVersion(SsrlintError):
    def __init__(self, found: str, message: str | None = None):
        self.found = found
        super().__init__(message or f"unsupported solidity version {found!r} (supported: 0.6.x - 0.8.x)")


class CyclicInheritance(SsrlintError):
    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        super().__init__("cyclic inheritance: " + " -> ".join(cycle))


class UnresolvedAlias(SsrlintError):
    """Storage pointer whose base cannot be traced."""


class NotATransfer(SsrlintError):
    """Statement does not move tokens."""


class AmbiguousPath(SsrlintError):
    def __init__(self, name: str, candidates: list):
        self.name = name
        self.candidates = candidates
        super().__init__(f"{name!r} matches {len(candidates)} declarations")


class DepthExceeded(SsrlintError):
    """Interprocedural descent went past the configured bound."""


class ServiceUnavailable(SsrlintError):
    """LLM endpoint unreachable or returned a transport error."""


class MalformedResponse(SsrlintError):
    """LLM answered, but no sample contained usable JSON."""


class LabelMismatch(SsrlintError):
    """Corpus label references a file or contract that was not analyzed."""


class SchemaError(SsrlintError):
    """A labels/gold document does not follow its documented schema."""
