"""Exception types used across the package."""


class SlawError(Exception):
    """Base class for all errors raised by this package."""


class ExprSyntaxError(SlawError):
    """Source text does not conform to the expression grammar."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.message = message
        self.line = line
        self.column = column


class UnboundNameError(SlawError):
    """An identifier was evaluated without a binding."""

    def __init__(self, name: str):
        super().__init__(f"unbound name '{name}'")
        self.name = name


class NonFiniteError(SlawError):
    """An IEEE-double evaluation produced a non-finite value."""


class ModelError(SlawError):
    """A model file failed to load or validate."""


class NonPositiveFieldError(SlawError):
    """A production or decay term left the positive domain."""

    def __init__(self, index: int, sign: str, point, value: float):
        pt = ", ".join(f"{float(c):.6g}" for c in point)
        term = "production" if sign == "+" else "decay"
        super().__init__(
            f"{term} term {index + 1} is non-positive at ({pt}): value {float(value):.6g}"
        )
        self.index = index
        self.sign = sign
        self.point = tuple(float(c) for c in point)
        self.value = float(value)


class DegenerateError(SlawError):
    """The exponent-difference matrix of an S-system is numerically singular."""

    def __init__(self, det: float):
        super().__init__(f"degenerate S-system: det(G-H) = {det:.6g}")
        self.det = float(det)


class NoConvergenceError(SlawError):
    """An eigenvalue computation failed to converge."""
