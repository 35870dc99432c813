"""Monte Carlo audit of the Wishart tail bounds.

Random streams: trial ``t`` of a run seeded with ``seed`` draws from a
Philox-4x64 counter-based generator keyed by ``SeedSequence([seed, t])``,
and Gaussian variates come from numpy's ziggurat ``standard_normal``.
Because every trial owns its stream, chunked or threaded execution yields
bit-identical results to a serial run.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import Equation, bound
from .errors import DomainError, UndefinedBoundError
from .spectra import CovarianceMatrix, Spectrum, cholesky_factor, spectrum_of

Z95 = 1.959964
DEFAULT_THETAS = (0.5, 1.0, 2.0, 3.0, 5.0)
CHUNK = 2048


def trial_rng(seed: int, t: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(t)])))


def sample_scatter(C: CovarianceMatrix, n: int, rng: np.random.Generator, factor=None) -> np.ndarray:
    """Scatter matrix ``sum_k (L z_k)(L z_k)^T`` of ``n`` draws from ``N(0, C)``."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    L = cholesky_factor(C) if factor is None else factor
    Y = rng.standard_normal((n, L.shape[0])) @ L.T
    S = Y.T @ Y
    return 0.5 * (S + S.T)


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials < 1:
        raise DomainError("wilson interval needs trials >= 1")
    if not 0 <= successes <= trials:
        raise DomainError(f"successes must lie in 0..{trials}, got {successes}")
    phat = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (phat + z2 / (2 * trials)) / denom
    half = z / denom * math.sqrt(phat * (1 - phat) / trials + z2 / (4 * trials * trials))
    low = 0.0 if successes == 0 else max(0.0, min(center - half, phat))
    high = 1.0 if successes == trials else min(1.0, max(center + half, phat))
    return low, high


class Verdict(str, enum.Enum):
    CONSISTENT = "CONSISTENT"
    VIOLATED = "VIOLATED"
    VACUOUS = "VACUOUS"


@dataclass(frozen=True)
class TrialConfig:
    C: CovarianceMatrix
    n: int
    trials: int
    thetas: tuple[float, ...] = DEFAULT_THETAS
    seed: int = 0
    equations: tuple[Equation, ...] = tuple(Equation)
    workers: int | None = None

    def __post_init__(self):
        if not isinstance(self.C, CovarianceMatrix):
            object.__setattr__(self, "C", CovarianceMatrix(self.C))
        if self.n < 1 or self.trials < 1:
            raise DomainError("n and trials must be >= 1")
        thetas = tuple(float(t) for t in self.thetas)
        if not thetas or any(not t >= 0 for t in thetas):
            raise DomainError("thetas must be a non-empty list of values >= 0")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "equations", tuple(Equation(e) for e in self.equations))


@dataclass(frozen=True)
class ExceedanceReport:
    """Empirical frequency of one tail event next to its theoretical budget.

    ``ell`` is ``None`` for events over the whole spectrum (EQ15-EQ18).
    """

    equation: Equation
    theta: float
    successes: int
    trials: int
    bound: float
    ell: int | None = None
    empirical_rate: float = field(init=False)
    ci_low: float = field(init=False)
    ci_high: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "equation", Equation(self.equation))
        object.__setattr__(self, "empirical_rate", self.successes / self.trials)
        low, high = wilson_interval(self.successes, self.trials)
        object.__setattr__(self, "ci_low", low)
        object.__setattr__(self, "ci_high", high)

    @property
    def verdict(self) -> Verdict:
        if self.bound >= 1.0:
            return Verdict.VACUOUS
        if self.ci_low > self.bound:
            return Verdict.VIOLATED
        return Verdict.CONSISTENT

    def to_dict(self) -> dict:
        return {
            "equation": self.equation.value,
            "ell": self.ell,
            "theta": self.theta,
            "successes": self.successes,
            "trials": self.trials,
            "rate": self.empirical_rate,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "bound": self.bound,
            "verdict": self.verdict.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ExceedanceReport:
        return cls(
            equation=Equation(d["equation"]),
            theta=d["theta"],
            successes=d["successes"],
            trials=d["trials"],
            bound=d["bound"],
            ell=d.get("ell"),
        )


@dataclass
class TrialStats:
    """Per-trial spectral statistics of ``S/n``; rows are trials."""

    upper: np.ndarray  # lambda_1(S/n - C)
    lower: np.ndarray  # lambda_1(C - S/n)
    eigs: np.ndarray  # lambda_l(S/n), descending


def _chunk_stats(C: CovarianceMatrix, L: np.ndarray, n: int, seed: int, start: int, stop: int) -> TrialStats:
    d = C.d
    S = np.empty((stop - start, d, d))
    for i, t in enumerate(range(start, stop)):
        S[i] = sample_scatter(C, n, trial_rng(seed, t), factor=L)
    S /= n
    diff_eigs = np.linalg.eigvalsh(S - C.entries)
    return TrialStats(
        upper=diff_eigs[:, -1],
        lower=-diff_eigs[:, 0],
        eigs=np.linalg.eigvalsh(S)[:, ::-1],
    )


def default_workers() -> int:
    env = os.environ.get("COVBOUND_THREADS")
    cap = int(env) if env and env.isdigit() and int(env) > 0 else (os.cpu_count() or 1)
    return max(1, cap)


def simulate(C: CovarianceMatrix, n: int, trials: int, seed: int, workers: int | None = None) -> TrialStats:
    L = cholesky_factor(C)
    bounds_ = [(s, min(s + CHUNK, trials)) for s in range(0, trials, CHUNK)]
    workers = workers or default_workers()
    if workers == 1 or len(bounds_) == 1:
        parts = [_chunk_stats(C, L, n, seed, a, b) for a, b in bounds_]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda ab: _chunk_stats(C, L, n, seed, *ab), bounds_))
    return TrialStats(
        upper=np.concatenate([p.upper for p in parts]),
        lower=np.concatenate([p.lower for p in parts]),
        eigs=np.concatenate([p.eigs for p in parts]),
    )


def _defined_indices(sp: Spectrum) -> list[int]:
    return [ell for ell in range(1, sp.d + 1) if math.isfinite(sp.kappa_l(ell))]


def count_events(stats: TrialStats, sp: Spectrum, n: int, theta: float, eq: Equation) -> list[tuple[int | None, int, float]]:
    """(ell, exceedance count, budget) for one equation at one theta."""
    lam = np.asarray(sp.eigenvalues)
    top = sp.top
    if eq in (Equation.EQ15, Equation.EQ16, Equation.EQ17):
        tb = bound(eq, sp, n, theta)
        thr = tb.deviation * top
        stat = {
            Equation.EQ15: stats.upper,
            Equation.EQ16: stats.lower,
            Equation.EQ17: np.maximum(stats.upper, stats.lower),
        }[eq]
        return [(None, int(np.count_nonzero(stat >= thr)), tb.prob_budget)]
    ells = _defined_indices(sp)
    if eq is Equation.EQ18:
        hit = np.zeros(stats.eigs.shape[0], dtype=bool)
        budget = None
        for ell in ells:
            tb = bound(eq, sp, n, theta, ell)
            budget = tb.prob_budget
            hit |= np.abs(stats.eigs[:, ell - 1] - lam[ell - 1]) >= tb.deviation * lam[ell - 1]
        if budget is None:
            raise UndefinedBoundError("no eigenvalue index has a defined EQ18 band")
        return [(None, int(np.count_nonzero(hit)), budget)]
    out = []
    for ell in ells:
        tb = bound(eq, sp, n, theta, ell)
        col = stats.eigs[:, ell - 1]
        if eq is Equation.EQ19:
            hit = col >= tb.factor * lam[ell - 1]
        else:
            hit = col <= tb.factor * lam[ell - 1]
        out.append((ell, int(np.count_nonzero(hit)), tb.prob_budget))
    return out


def exceedance(cfg: TrialConfig) -> list[ExceedanceReport]:
    """Reports ordered by equation, then eigenvalue index, then theta."""
    sp = spectrum_of(cfg.C)
    stats = simulate(cfg.C, cfg.n, cfg.trials, cfg.seed, cfg.workers)
    reports = []
    for eq in cfg.equations:
        rows: dict[int | None, list[ExceedanceReport]] = {}
        for theta in cfg.thetas:
            for ell, hits, budget in count_events(stats, sp, cfg.n, theta, eq):
                rows.setdefault(ell, []).append(
                    ExceedanceReport(eq, theta, hits, cfg.trials, budget, ell)
                )
        for ell in rows:
            reports.extend(rows[ell])
    return reports

