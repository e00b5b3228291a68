"""Exception types shared across the package."""


class FracBurgersError(Exception):
    """Base class for all structured errors raised by this package."""


class DomainError(FracBurgersError):
    """Evaluation requested outside the admissible domain of a function."""


class ParameterError(FracBurgersError):
    """A numeric parameter violates its documented range."""


class MeshMismatchError(FracBurgersError):
    """Two objects built on incompatible meshes were combined."""


class AssemblyError(FracBurgersError):
    """Quadrature failed to converge while assembling an operator entry."""


class EigenSolverError(FracBurgersError):
    """The generalized eigensolver failed or produced residuals above tolerance."""


class BlowUpError(FracBurgersError):
    """Time integration produced non-finite or runaway coefficients."""

    def __init__(self, message, t=None, norm=None, path_id=None):
        super().__init__(message)
        self.t = t
        self.norm = norm
        self.path_id = path_id


class ConfigError(FracBurgersError):
    """Configuration text failed validation."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no
