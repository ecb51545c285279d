"""Exception types shared across the package."""


class RLQDagError(Exception):
    pass


class SchemaError(RLQDagError):
    """A term or node is ill-typed (bad rename, missing column, union mismatch...)."""


class FreshnessError(RLQDagError):
    pass


class UnboundReference(RLQDagError):
    pass


class RestrictionError(RLQDagError):
    """Positivity, linearity or non-mutual-recursion violated."""


class ParseError(RLQDagError):
    def __init__(self, message, position=None, line=None):
        self.position = position
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if position is not None:
            where.append(f"position {position}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class InconsistentNode(RLQDagError):
    pass


class BudgetExhausted(RLQDagError):
    """Raised internally when a time budget runs out; callers get a flag instead."""
