"""Exception types shared across the package.

Every contract violation raises one of these instead of a bare
ValueError so callers (and the CLI) can map failures to diagnostics.
"""


class HetcdError(Exception):
    """Base class for all package errors."""


class UnknownTypeTagError(HetcdError, ValueError):
    """A node-type or edge-type tag outside the snapshot's declared range."""

    def __init__(self, kind: str, tag: int, count: int):
        self.kind = kind
        self.tag = tag
        self.count = count
        super().__init__(f"unknown {kind} tag {tag}; snapshot declares {count} {kind}s")


class GraphInvariantError(HetcdError, ValueError):
    """A snapshot or series violates a structural invariant."""


class ShapeError(HetcdError, ValueError):
    """Operand shapes do not conform."""

    def __init__(self, op: str, *shapes):
        self.op = op
        self.shapes = shapes
        shown = " vs ".join(str(tuple(s)) for s in shapes)
        super().__init__(f"{op}: incompatible shapes {shown}")


class DomainError(HetcdError, ValueError):
    """An operand is outside the mathematical domain of an operation."""


class PairingError(HetcdError, ValueError):
    """Anchor pairing is inconsistent with the snapshots or matrices given."""


class SeriesFormatError(HetcdError, ValueError):
    """A series file cannot be parsed."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)


class ConfigError(HetcdError, ValueError):
    """A configuration field is invalid."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"config field {field!r}: {message}")


class TapeStateError(HetcdError, RuntimeError):
    """A differentiable operation ran without an active tape."""


class TrainingDivergedError(HetcdError, RuntimeError):
    """The training loss became non-finite."""
