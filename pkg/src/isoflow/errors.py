"""Exception hierarchy shared by the library and the command line."""


class IsoflowError(Exception):
    """Base class for all library errors."""


class ConfigError(IsoflowError):
    """Invalid run configuration.

    Parameters
    ----------
    message : str
        Human readable description.
    key : str, optional
        Fully qualified ``section.key`` the error refers to.
    line : int, optional
        One-based line number in the configuration file.
    """

    def __init__(self, message, key=None, line=None):
        self.key = key
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if key is not None:
            prefix += f"{key}: "
        super().__init__(prefix + message)


class FieldError(IsoflowError, ValueError):
    """A field has the wrong shape or contains non-finite values."""


class StratificationError(IsoflowError):
    """Total thickness dropped below the stratification floor."""

    def __init__(self, message, report=None):
        self.report = report
        super().__init__(message)


class CFLError(IsoflowError):
    """Requested time step violates the stability limit."""

    def __init__(self, message, number=None):
        self.number = number
        super().__init__(message)


class SolverError(IsoflowError):
    """The iterative pressure solver did not converge.

    Attributes
    ----------
    residuals : list of float
        Relative residual after every iteration.
    """

    def __init__(self, message, residuals=()):
        self.residuals = list(residuals)
        super().__init__(message)
