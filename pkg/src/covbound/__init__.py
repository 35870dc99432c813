"""Tail bounds, sample-size planning and Monte Carlo audits for Wishart scatter matrices."""

from .bounds import (
    BernsteinParams,
    Equation,
    TailBound,
    bernstein_eps,
    bernstein_tail,
    bound,
    bound_eq15,
    bound_eq16,
    bound_eq17,
    bound_eq18,
    bound_eq19,
    bound_eq20,
    deviation_factor_eq15,
    exact_rate,
    plan_n,
    solve_n,
    theta_for_confidence,
)
from .errors import CovboundError
from .spectra import CovarianceMatrix, Spectrum, cholesky_factor, eig_sym, spectrum_of

__version__ = "0.1.0"
