"""Exception types shared across the package."""


class SizeError(ValueError):
    """A register size, chain length or depth is outside the supported range."""


class ShapeError(ValueError):
    """Array or register dimensions do not agree."""


class DomainError(ValueError):
    """A physical parameter is outside its admissible domain."""


class BoundaryError(ValueError):
    """A coupling sits exactly on the phase boundary and has no label."""


class ConvergenceError(RuntimeError):
    """An iterative eigensolver hit its iteration cap."""


class DivergenceError(RuntimeError):
    def __init__(self, iteration: int, value: float):
        super().__init__(f"non-finite energy {value!r} at iteration {iteration}")
        self.iteration = iteration
        self.value = value


class RecordError(ValueError):
    """A dataset line could not be parsed into a record."""

    def __init__(self, path, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line
