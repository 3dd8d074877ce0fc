"""Exception hierarchy shared by the solver modules."""


class WC2PError(Exception):
    """Base class for all solver errors."""


class ConfigError(WC2PError):
    """Invalid case configuration or command-line input."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class MeshError(WC2PError):
    """Mesh document could not be parsed or has invalid topology."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class GeometryError(WC2PError):
    """Degenerate geometry (rank-deficient stencil, zero-area diamond, ...)."""

    def __init__(self, message, cell=None, face=None):
        super().__init__(message)
        self.cell = cell
        self.face = face


class AdmissibilityError(WC2PError):
    """State with non-positive mixture density."""

    def __init__(self, message, cell=None, face=None, time=None):
        super().__init__(message)
        self.cell = cell
        self.face = face
        self.time = time


class HyperbolicityError(WC2PError):
    """Sound-speed radicand became non-positive; beta is too small."""

    def __init__(self, message, cell=None, face=None):
        super().__init__(message)
        self.cell = cell
        self.face = face


class WaveCollapseError(WC2PError):
    """An outer wave speed coincides with the contact speed."""

    def __init__(self, message, face=None):
        super().__init__(message)
        self.face = face


class SolverError(WC2PError):
    """Non-finite time step or other unrecoverable solver state."""


class ProbeError(WC2PError):
    """Interface probe found no crossing."""


class FitError(WC2PError):
    """Regression window is empty or data is unusable."""


class OracleError(WC2PError):
    """Analytical reference solution could not be evaluated reliably."""


class MetricError(WC2PError, ValueError):
    """Error measure requested on unusable data (e.g. non-positive errors)."""
