"""Exception types shared across the package."""


class ShepherdingError(Exception):
    pass


class InsideObstacle(ShepherdingError):
    """A point that must lie outside an obstacle is strictly inside it."""


class SingularProximity(ShepherdingError):
    """Two interacting points are closer than the singular band."""


class DegenerateDirection(ShepherdingError):
    """A unit vector was requested for a zero-length vector."""


class NoPath(ShepherdingError):
    pass


class PhysicsViolation(ShepherdingError):
    pass


class ParseError(ShepherdingError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(ShepherdingError):
    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class GenerationError(ValidationError):
    """The random scenario generator ran out of resampling attempts."""
