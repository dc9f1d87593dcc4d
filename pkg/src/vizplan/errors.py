"""Exception types shared across the package."""


class VizplanError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(VizplanError):
    """A cell could not be parsed as its declared type."""

    def __init__(self, row: int, column: str, reason: str):
        super().__init__(f"row {row}, column {column!r}: {reason}")
        self.row = row
        self.column = column
        self.reason = reason


class SchemaMismatch(VizplanError):
    """CSV header or relation schema differs from the declaration."""


class PlanTypeError(VizplanError):
    """A predicate or aggregate is ill-typed for its column."""


class UnknownRelation(VizplanError):
    """A scan references a relation that is not loaded."""


class UnknownColumn(VizplanError):
    """An operator references a column absent from its input schema."""


class UnboundChoice(VizplanError):
    """A plan still contains a choice the binding does not cover."""


class OutOfDomain(VizplanError):
    """A binding value lies outside the choice's declared domain."""

    def __init__(self, choice_id: str, value):
        super().__init__(f"value {value!r} outside domain of choice {choice_id!r}")
        self.choice_id = choice_id
        self.value = value


class DomainExplosion(VizplanError):
    """A binding cross product exceeds the enumeration cap."""


class CapExceeded(VizplanError):
    """A structure build would exceed its configured cell cap."""

    def __init__(self, cells: int, cap: int):
        super().__init__(f"cube would allocate {cells} cells, cap is {cap}")
        self.cells = cells
        self.cap = cap


class MissingStats(VizplanError):
    """Cost estimation needs statistics for a column that has none."""


class StaleStructure(VizplanError):
    """A structure was evaluated under a binding that invalidates it."""


class InvalidPlanFile(VizplanError):
    """A physical plan document failed to parse or validate."""
