# core/errors.py
from typing import Optional


class LaneEmdenError(Exception):
    """Base class of every error raised by the laboratory."""
    pass

# geometry
class PoleProjection(LaneEmdenError):
    """The point is the projection pole (or too close to it)."""
    pass

class NonUnitNormal(LaneEmdenError):
    pass

class DegenerateBoundary(LaneEmdenError):
    pass

# domain / mesh
class NotInDisk(LaneEmdenError):
    """A planarized boundary sample left the closed unit disk."""
    pass

class SelfIntersection(LaneEmdenError):
    pass

class MeshFailure(LaneEmdenError):
    pass

# solver
class NoConvergence(LaneEmdenError):
    pass

class ExperimentalExponent(LaneEmdenError):
    """p > 3 requested without the experimental flag."""
    pass

# verify
class NonPositive(LaneEmdenError):
    pass

class PatchDeficient(LaneEmdenError):
    pass

class EmptyInterior(LaneEmdenError):
    pass

class NotRegularValue(LaneEmdenError):
    pass

class EmptyLevel(LaneEmdenError):
    pass

class LayerTooThin(LaneEmdenError):
    pass

# oracle
class ShootingFailed(LaneEmdenError):
    pass

class DomainMismatch(LaneEmdenError):
    pass

# cli
class NotConvex(LaneEmdenError):
    """The domain gate rejected a domain that is not geodesically convex."""
    pass

class ConfigError(LaneEmdenError):
    """Malformed run configuration, with line/field diagnostics when known."""

    def __init__(self, message: str, line: Optional[int] = None, field: Optional[str] = None):
        self.line = line
        self.field = field
        where = ", ".join(
            part for part in (
                f"line {line}" if line is not None else "",
                f"field '{field}'" if field else "",
            ) if part
        )
        super().__init__(f"{message} ({where})" if where else message)

# storage
class OutputLocked(LaneEmdenError):
    """Another live process holds the output directory."""
    pass
