"""Exception hierarchy shared by all covbound modules."""


class CovboundError(ValueError):
    """Base class; every error raised deliberately by covbound derives from it."""


class InvalidInputError(CovboundError):
    """Malformed or non-finite input data."""


class DomainError(CovboundError):
    """An argument lies outside the mathematical domain of the operation."""


class NotPSDError(CovboundError):
    """Matrix has an eigenvalue below -tol_psd * lambda_1."""


class DegenerateSpectrumError(CovboundError):
    """Top eigenvalue is zero, so r, kappa and r_l are undefined."""


class UndefinedBoundError(CovboundError):
    """Requested eigenvalue index has lambda_l numerically zero (kappa infinite)."""


class DegenerateParamsError(CovboundError):
    """Bernstein parameters sigma^2 and B cannot support the requested quantity."""


class SizeLimitError(CovboundError):
    """Combinatorial enumeration would exceed the configured work guard."""
