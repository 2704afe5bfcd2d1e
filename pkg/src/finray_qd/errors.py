"""Exception types shared across the package."""


class FinrayError(Exception):
    """Base class for all package-specific errors."""


class InvalidGenotype(FinrayError):
    """Genotype vector has the wrong number of entries."""


class OutOfUnitBox(FinrayError):
    """Genotype entry outside [0, 1]; callers must clamp before decoding."""


class BoundsViolation(FinrayError):
    """Design field outside its allowed range (strict encoding mode).

    Carries the offending dimension indices in ``dimensions``.
    """

    def __init__(self, message, dimensions=()):
        super().__init__(message)
        self.dimensions = tuple(dimensions)


class GeometryError(FinrayError):
    """Finger outline cannot be constructed (overlapping walls, bad ribs).

    ``rib_index`` identifies the offending rib when applicable, else None.
    """

    def __init__(self, message, rib_index=None):
        super().__init__(message)
        self.rib_index = rib_index


class MeshError(FinrayError):
    """Triangulation failed on a degenerate or unresolvable outline."""


class ElementInversion(FinrayError):
    """One or more triangles inverted in the deformed configuration."""

    def __init__(self, element_indices):
        indices = [int(i) for i in element_indices]
        super().__init__(f"inverted elements: {indices}")
        self.element_indices = tuple(indices)


class StepNotConverged(FinrayError):
    """Linear solve inside a time step hit its iteration cap."""

    def __init__(self, residual):
        super().__init__(f"CG did not converge, final residual {residual:.3e}")
        self.residual = float(residual)


class UnknownShape(FinrayError):
    """Rigid object shape name not recognised."""


class EmptyObjectSet(FinrayError):
    """Evaluation requested against zero objects."""


class EmitterDegenerate(FinrayError):
    """CMA distribution collapsed (non-SPD covariance or non-finite state)."""


class ConfigError(FinrayError):
    """Malformed run configuration; carries a line number when known."""

    def __init__(self, message, line=None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line
