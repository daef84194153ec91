"""Exception types shared across the simulator."""


class MaggError(Exception):
    """Base class for all simulator errors."""


class ConfigError(MaggError):
    """Invalid configuration: unknown key, bad value, broken constraint."""


class SeparationViolation(MaggError):
    """Logarithmic potential evaluated at |s| >= 1 - floor."""

    def __init__(self, value, location=None):
        self.value = value
        self.location = location
        where = f" at grid index {location}" if location is not None else ""
        super().__init__(
            f"phase field reached |s| = {abs(value):.17g}{where}; "
            "the logarithmic potential requires |s| < 1"
        )


class MeanModeError(MaggError):
    """Singular zero-mode solve: a = 0 with nonzero-mean right-hand side."""


class CflViolation(MaggError):
    """Requested dt exceeds the advective CFL limit."""


class PositivityLoss(MaggError):
    """Density or a viscosity coefficient lost positivity."""


class NonConvergence(MaggError):
    """Iterative solver failed to reach its residual target."""


class SnapshotError(MaggError):
    """Malformed snapshot file: bad version or truncated payload."""


class MagicMismatch(SnapshotError):
    """Snapshot file does not start with the expected magic bytes."""


class GridMismatch(MaggError):
    """Operation mixing fields that live on different grids."""
