"""Shared exception types.

Every module raises subclasses of IrissegError so callers (and the CLI)
can distinguish usage problems from I/O problems with one except clause.
"""


class IrissegError(Exception):
    """Base class for all package errors."""


class ParseError(IrissegError):
    """Malformed input document (JSON, op string, PGM header)."""


class ValidationError(IrissegError):
    """Structurally invalid graph: cycle, disconnected node, duplicate id."""


class InvalidParent(IrissegError):
    """A parent network is not a simple chain, or the parent set is empty."""


class ContractionCycle(IrissegError):
    """Contracting same-label nodes would create a cycle."""


class MissingChannel(IrissegError):
    """A graph node has no channel assignment."""


class NonLinearChannel(IrissegError):
    """A layer's parameter count is not expressible as a*Chp^2 + b*Chp."""


class UnknownKernel(IrissegError):
    """Kernel size not covered by the channel rule."""


class ShapeMismatch(IrissegError):
    """Tensor shapes incompatible with the requested operation."""


class NonBinaryInput(IrissegError):
    """A mask contains values other than 0 and 1."""


class OddSpatialDim(IrissegError):
    """Spatial dims must be even (2x2 pooling) or pool-compatible."""


class EmptyInput(IrissegError):
    """An aggregate was requested over an empty collection."""


class UpscaleRequest(IrissegError):
    """Resize target exceeds the source size."""
