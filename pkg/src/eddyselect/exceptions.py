"""Exception types shared across the package."""


class EddySelectError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(EddySelectError):
    """Invalid or malformed run configuration."""


class GeometryError(EddySelectError):
    """Invalid boundary geometry input."""


class NonMonotoneMapError(EddySelectError):
    """A coordinate map that must be strictly increasing is not."""


class DegenerateLayerError(EddySelectError):
    """The layer speed q = sqrt(omega^2 q_e^2 + Q) degenerates (stagnant layer)."""


class CompatibilityError(EddySelectError):
    """The zero-mode solvability condition is violated beyond tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConvergenceError(EddySelectError):
    """An iterative procedure failed to converge within its budget."""


class OracleError(EddySelectError):
    """The marching oracle failed (no contraction, or bad bracket)."""


class OracleBracketError(OracleError):
    """Shooting bracket does not straddle a sign change of the drift."""

    def __init__(self, message, r_lo=None, r_hi=None):
        super().__init__(message)
        self.r_lo = r_lo
        self.r_hi = r_hi
