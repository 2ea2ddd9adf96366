"""Exception types shared across the engine."""

from __future__ import annotations


class MotionGraphError(Exception):
    """Base class for all engine errors."""


class ValidationError(MotionGraphError):
    """An input value violates a documented precondition."""


class StructuralError(MotionGraphError):
    """Containers that must agree in shape or length do not."""


class GraphParseError(MotionGraphError):
    """A serialized graph (or other engine file) could not be decoded.

    ``offset`` is the byte offset of the first undecodable position when
    known, else -1.
    """

    def __init__(self, message: str, offset: int = -1):
        super().__init__(message)
        self.offset = offset


class SegmentUnreachableError(MotionGraphError):
    """No path candidate satisfies a target segment's feature + duration gate.

    ``segment`` is the index s of the failing segment (0-based over the
    segment list).
    """

    def __init__(self, segment: int, message: str = ""):
        self.segment = segment
        super().__init__(message or f"segment {segment} is unreachable")


class AssemblyError(MotionGraphError):
    """A path cannot be turned into an edit decision list."""
