"""Exception types shared across the package."""


class KinoplanError(Exception):
    """Base class for all package-specific errors."""


class MeshParseError(KinoplanError):
    """Malformed mesh file. Carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MeshFormatError(KinoplanError):
    """Mesh is syntactically valid but outside the supported subset."""


class MeshValidationError(KinoplanError):
    """Mesh content violates a structural invariant (degenerate or duplicate face, ...)."""


class NonManifoldWarning(UserWarning):
    """An undirected edge is shared by more than two faces."""


class InfeasibleRequestError(KinoplanError):
    """Start or goal vertex has no pitch-admissible incident edge."""


class UnboundedError(KinoplanError):
    """LP objective unbounded below (cannot happen for planner-built models)."""


class SolverNumericalError(KinoplanError):
    """LP backend reported a numerical failure."""


class ExtractionError(KinoplanError):
    """Solved assignment does not encode a clean source-to-sink path.

    The message states the failure kind: "branching", "cycle" or "continuity".
    These indicate solver bugs, not tolerated outcomes.
    """


class ModelFormatError(KinoplanError):
    """Malformed LP/MPS text. Carries the 1-based line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
