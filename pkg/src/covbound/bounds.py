"""Closed-form tail bounds for Wishart scatter matrices and their inverses.

Notation: ``S ~ W_d(n, C)``, ``theta >= 0`` the exponent in the failure
probability.  Each ``bound_eqXX`` returns a :class:`TailBound` holding the
relative deviation factor and the probability budget:

====== ========================================== ===================
event  threshold                                  budget
====== ========================================== ===================
EQ15   lambda_1(S/n - C) >= dev * lambda_1(C)      d e^-theta
EQ16   lambda_1(C - S/n) >= dev * lambda_1(C)      d e^-theta
EQ17   ||S/n - C||       >= dev * ||C||            2d e^-theta
EQ18   exists l: |lambda_l(S/n) - lambda_l(C)|
       >= dev_l * lambda_l(C)                      2d e^-theta (shared)
EQ19   lambda_l(S/n) >= (1 + dev) lambda_l(C)      (d - l + 1) e^-theta
EQ20   lambda_l(S/n) <= (1 - dev) lambda_l(C)      l e^-theta
====== ========================================== ===================

The scalar Bernstein helpers (:func:`bernstein_eps`, :func:`bernstein_tail`,
:func:`exact_rate`) cover a variable whose log-MGF is bounded by
``sigma2 u^2 / (2 (1 - u B))`` on ``0 <= u < 1/B``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .errors import DegenerateParamsError, DomainError, UndefinedBoundError
from .spectra import Spectrum


class Equation(str, enum.Enum):
    EQ15 = "eq15"
    EQ16 = "eq16"
    EQ17 = "eq17"
    EQ18 = "eq18"
    EQ19 = "eq19"
    EQ20 = "eq20"

    @classmethod
    def parse(cls, name: str) -> Equation:
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise DomainError(f"unknown equation {name!r}; expected one of eq15..eq20") from None


PER_EIGENVALUE = frozenset({Equation.EQ18, Equation.EQ19, Equation.EQ20})


@dataclass(frozen=True)
class BernsteinParams:
    sigma2: float
    B: float

    def __post_init__(self):
        if not (self.sigma2 >= 0 and self.B >= 0):
            raise DomainError(f"need sigma2 >= 0 and B >= 0, got ({self.sigma2}, {self.B})")


@dataclass(frozen=True)
class TailBound:
    """One evaluated tail bound.

    ``deviation`` is relative to ``lambda_ell(C)`` (``lambda_1`` for
    EQ15-EQ17).  For EQ20 it is the amount subtracted from one, so the
    multiplicative factor is ``1 - deviation``; see :attr:`factor`.
    """

    equation: Equation
    ell: int
    theta: float
    n: int
    deviation: float
    prob_budget: float

    @property
    def factor(self) -> float:
        """Multiplier applied to ``lambda_ell(C)`` at the event threshold."""
        if self.equation is Equation.EQ20:
            return 1.0 - self.deviation
        if self.equation is Equation.EQ19:
            return 1.0 + self.deviation
        return self.deviation

    @property
    def vacuous(self) -> bool:
        if self.prob_budget >= 1.0:
            return True
        return self.equation is Equation.EQ20 and self.factor < 0.0

    def to_dict(self) -> dict:
        return {
            "equation": self.equation.value,
            "ell": self.ell,
            "theta": self.theta,
            "n": self.n,
            "deviation": self.deviation,
            "factor": self.factor,
            "prob_budget": self.prob_budget,
            "vacuous": self.vacuous,
        }


def _check_theta(theta: float) -> None:
    if not theta >= 0:
        raise DomainError(f"theta must be >= 0, got {theta}")


def _check_n(n: int) -> None:
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")


# -- scalar Bernstein machinery ---------------------------------------------


def bernstein_eps(theta: float, p: BernsteinParams) -> float:
    """Deviation ``sqrt(2 theta sigma2) + theta B`` exceeded with probability <= e^-theta."""
    _check_theta(theta)
    return math.sqrt(2.0 * theta * p.sigma2) + theta * p.B


def bernstein_tail(eps: float, p: BernsteinParams) -> float:
    """Upper bound ``exp(-eps^2 / (2 sigma2 + 2 eps B))`` on ``P(Z >= eps)``."""
    if not eps >= 0:
        raise DomainError(f"eps must be >= 0, got {eps}")
    if eps == 0:
        return 1.0
    denom = 2.0 * p.sigma2 + 2.0 * eps * p.B
    if denom == 0:
        raise DegenerateParamsError("sigma2 = B = 0 gives no tail bound for eps > 0")
    return math.exp(-eps * eps / denom)


def exact_rate(eps: float, p: BernsteinParams) -> float:
    """Legendre transform ``h(eps) = sup_u [u eps - sigma2 u^2 / (2 (1 - u B))]``.

    Closed form ``eps^2 / (eps B + sigma2 + sigma2 sqrt(1 + 2 eps B / sigma2))``,
    evaluated as ``eps^2 / (eps B + sigma2 + sqrt(sigma2) sqrt(sigma2 + 2 eps B))``
    to stay accurate for small ``sigma2``.
    """
    if not eps >= 0:
        raise DomainError(f"eps must be >= 0, got {eps}")
    if p.sigma2 <= 0:
        raise DegenerateParamsError("exact_rate needs sigma2 > 0")
    s2 = p.sigma2
    root = math.sqrt(s2) * math.sqrt(s2 + 2.0 * eps * p.B)
    return eps * eps / (eps * p.B + s2 + root)


def matrix_bernstein_eps(theta: float, n: int, sigma2_top: float, B: float) -> float:
    """Upper-tail deviation ``sqrt(2 n theta lambda_1(Sigma_2)) + theta B`` for a sum of n terms.

    The probability that ``lambda_1(sum X_k) - lambda_1(sum E X_k)`` exceeds
    it is at most ``d e^-theta`` when every ``X_k`` satisfies the matrix
    Bernstein moment condition with parameters ``(B, Sigma_2)``.
    """
    _check_theta(theta)
    _check_n(n)
    if sigma2_top < 0 or B < 0:
        raise DomainError("lambda_1(Sigma_2) and B must be non-negative")
    return math.sqrt(2.0 * n * theta * sigma2_top) + theta * B


def matrix_bernstein_eps_lower(theta: float, n: int, sigma2_top: float) -> float:
    """Lower-tail deviation ``sqrt(2 theta n lambda_1(Sigma_2))`` for PSD summands."""
    _check_theta(theta)
    _check_n(n)
    if sigma2_top < 0:
        raise DomainError("lambda_1(Sigma_2) must be non-negative")
    return math.sqrt(2.0 * theta * n * sigma2_top)


# -- Wishart deviation factors ----------------------------------------------


def deviation_factor_eq15(theta: float, n: int, r: float) -> float:
    """``sqrt(2 theta (r + 1) / n) + 2 theta r / n``; also serves EQ16 and EQ17."""
    _check_theta(theta)
    _check_n(n)
    if not r >= 1:
        raise DomainError(f"intrinsic dimension r must be >= 1, got {r}")
    return math.sqrt(2.0 * theta * (r + 1.0) / n) + 2.0 * theta * r / n


def _defined_kappa(sp: Spectrum, ell: int) -> float:
    kappa = sp.kappa_l(ell)
    if math.isinf(kappa):
        raise UndefinedBoundError(f"lambda_{ell}(C) is numerically zero; the bound is undefined")
    return kappa


def bound_eq15(sp: Spectrum, n: int, theta: float) -> TailBound:
    dev = deviation_factor_eq15(theta, n, sp.r)
    return TailBound(Equation.EQ15, 1, theta, n, dev, sp.d * math.exp(-theta))


def bound_eq16(sp: Spectrum, n: int, theta: float) -> TailBound:
    dev = deviation_factor_eq15(theta, n, sp.r)
    return TailBound(Equation.EQ16, 1, theta, n, dev, sp.d * math.exp(-theta))


def bound_eq17(sp: Spectrum, n: int, theta: float) -> TailBound:
    dev = deviation_factor_eq15(theta, n, sp.r)
    return TailBound(Equation.EQ17, 1, theta, n, dev, 2 * sp.d * math.exp(-theta))


def bound_eq18(sp: Spectrum, n: int, theta: float, ell: int) -> TailBound:
    """Collective band for all eigenvalues; the 2d e^-theta budget covers every l at once."""
    _check_theta(theta)
    _check_n(n)
    kappa = _defined_kappa(sp, ell)
    if ell == 1:
        dev = deviation_factor_eq15(theta, n, sp.r)
    else:
        dev = math.sqrt(2.0 * theta * kappa**2 * (sp.r + 1.0) / n) + 2.0 * theta * kappa * sp.r / n
    return TailBound(Equation.EQ18, ell, theta, n, dev, 2 * sp.d * math.exp(-theta))


def bound_eq19(sp: Spectrum, n: int, theta: float, ell: int) -> TailBound:
    _check_theta(theta)
    _check_n(n)
    kr = _defined_kappa(sp, ell) * sp.r_l(ell)
    if ell == 1:
        kr = sp.r
    dev = math.sqrt(2.0 * theta * (kr + 2.0) / n) + 2.0 * theta * kr / n
    return TailBound(Equation.EQ19, ell, theta, n, dev, (sp.d - ell + 1) * math.exp(-theta))


def bound_eq20(sp: Spectrum, n: int, theta: float, ell: int) -> TailBound:
    _check_theta(theta)
    _check_n(n)
    kappa = _defined_kappa(sp, ell)
    # r_1 - r_{l+1} = sum_{i <= l} lambda_i / lambda_1, summed directly to avoid cancellation
    head = sum(sp.eigenvalues[:ell]) / sp.top
    dev = math.sqrt(2.0 * theta * kappa**2 * (head + 2.0) / n)
    return TailBound(Equation.EQ20, ell, theta, n, dev, ell * math.exp(-theta))


def bound(eq: Equation, sp: Spectrum, n: int, theta: float, ell: int = 1) -> TailBound:
    if eq is Equation.EQ15:
        return bound_eq15(sp, n, theta)
    if eq is Equation.EQ16:
        return bound_eq16(sp, n, theta)
    if eq is Equation.EQ17:
        return bound_eq17(sp, n, theta)
    if eq is Equation.EQ18:
        return bound_eq18(sp, n, theta, ell)
    if eq is Equation.EQ19:
        return bound_eq19(sp, n, theta, ell)
    return bound_eq20(sp, n, theta, ell)


def multiplicity(eq: Equation, d: int, ell: int = 1) -> int:
    """Factor ``m`` in the budget ``m e^-theta``."""
    if eq in (Equation.EQ15, Equation.EQ16):
        return d
    if eq in (Equation.EQ17, Equation.EQ18):
        return 2 * d
    if eq is Equation.EQ19:
        return d - ell + 1
    return ell


# -- planners ---------------------------------------------------------------


def theta_for_confidence(delta_fail: float, multiplicity: float) -> float:
    """Exponent ``theta = ln(multiplicity / delta_fail)`` making the budget equal ``delta_fail``."""
    if not 0 < delta_fail < 1:
        raise DomainError(f"delta_fail must lie in (0, 1), got {delta_fail}")
    if not multiplicity > 0:
        raise DomainError(f"multiplicity must be positive, got {multiplicity}")
    return math.log(multiplicity / delta_fail)


def _min_n(a: float, b: float, eps: float, dev) -> int:
    """Smallest integer n with ``dev(n) <= eps`` where ``dev(n) = b / sqrt(n) + a / n``.

    ``(a, b)`` seed a closed-form guess; ``dev`` is the authoritative evaluator
    used to correct floating-point misplacement of the ceiling.
    """
    if dev(1) <= eps:
        return 1
    # substitute x = 1/sqrt(n): a x^2 + b x - eps = 0, stable root
    x = 2.0 * eps / (b + math.sqrt(b * b + 4.0 * a * eps))
    n = max(1, math.ceil(1.0 / (x * x)))
    while dev(n) > eps:
        n += 1
    while n > 1 and dev(n - 1) <= eps:
        n -= 1
    return n


def _check_plan_args(eps_rel: float, theta: float) -> None:
    if not eps_rel > 0:
        raise DomainError(f"eps_rel must be > 0, got {eps_rel}")
    if not theta > 0:
        raise DomainError(f"theta must be > 0, got {theta}")


def solve_n(eps_rel: float, theta: float, r: float) -> int:
    """Minimal sample size for which the EQ15 deviation factor is at most ``eps_rel``."""
    _check_plan_args(eps_rel, theta)
    if not r >= 1:
        raise DomainError(f"intrinsic dimension r must be >= 1, got {r}")
    a = 2.0 * theta * r
    b = math.sqrt(2.0 * theta * (r + 1.0))
    return _min_n(a, b, eps_rel, lambda m: deviation_factor_eq15(theta, m, r))


def plan_n(eq: Equation, sp: Spectrum, eps_rel: float, theta: float, ell: int = 1) -> int:
    """Minimal n for which ``eq``'s deviation at index ``ell`` is at most ``eps_rel``."""
    _check_plan_args(eps_rel, theta)
    if eq in (Equation.EQ15, Equation.EQ16, Equation.EQ17):
        return solve_n(eps_rel, theta, sp.r)
    if eq is Equation.EQ18:
        kappa = _defined_kappa(sp, ell)
        a = 2.0 * theta * kappa * sp.r
        b = kappa * math.sqrt(2.0 * theta * (sp.r + 1.0))
    elif eq is Equation.EQ19:
        kr = sp.r if ell == 1 else _defined_kappa(sp, ell) * sp.r_l(ell)
        a = 2.0 * theta * kr
        b = math.sqrt(2.0 * theta * (kr + 2.0))
    else:
        a = 0.0
        b = bound_eq20(sp, 1, theta, ell).deviation
    return _min_n(a, b, eps_rel, lambda m: bound(eq, sp, m, theta, ell).deviation)
