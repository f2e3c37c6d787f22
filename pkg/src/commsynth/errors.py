class SpecError(ValueError):
    """Base class for problems found while loading a specification."""

    def __init__(self, message, *, where=None, line=None, col=None):
        self.message = message
        self.where = where
        self.line = line
        self.col = col
        parts = [message]
        if where:
            parts.append(f"in {where}")
        if line is not None:
            parts.append(f"(line {line}, column {col})" if col is not None else f"(line {line})")
        super().__init__(" ".join(parts))


class SpecSyntaxError(SpecError):
    pass


class SortError(SpecError):
    pass


class SpecReferenceError(SpecError):
    """An undeclared variable, sort or operator."""


class PlaceholderArityError(SpecError):
    pass


class SolverError(RuntimeError):
    pass


class DeterminismError(RuntimeError):
    def __init__(self, method, counterexample):
        self.method = method
        self.counterexample = counterexample
        super().__init__(f"method {method!r} is not deterministic: {counterexample}")
