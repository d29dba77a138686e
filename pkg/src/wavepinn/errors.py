"""Exception types shared across the package."""


class WavePinnError(Exception):
    """Base class for all package errors."""


class ConfigurationError(WavePinnError):
    """Invalid static configuration (dimensions, geometry, schema)."""


class UsageError(WavePinnError):
    """An operation was called outside its contract (wrong dim, no tape, ...)."""


class DomainError(WavePinnError):
    """Elementary function evaluated outside its mathematical domain."""


class SingularityError(WavePinnError):
    """Spherical kernel evaluated too close to its center."""


class TotalInternalReflectionError(WavePinnError):
    """Snell radicand negative: no transmitted direction exists."""


class GeometryError(WavePinnError):
    """Inconsistent scenario geometry (overlaps, degenerate interfaces)."""


class SolverError(WavePinnError):
    """Finite-difference solver failed (near-singular or non-convergent)."""


class DivergenceError(WavePinnError):
    """Training loss diverged past the abort threshold."""


class ValidationError(ConfigurationError):
    """Scenario config failed schema validation. Carries all violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid scenario config:\n" + "\n".join(f"  - {v}" for v in self.violations))
