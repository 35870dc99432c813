"""Exit criteria for the package, one test per criterion.

A ``[PASS]``/``[FAIL]`` line per criterion is printed in the terminal summary.
"""

import itertools
import math
import time

import numpy as np
import pytest

from covbound.bounds import (
    BernsteinParams,
    Equation,
    bernstein_eps,
    bound_eq15,
    bound_eq19,
    deviation_factor_eq15,
    exact_rate,
    solve_n,
)
from covbound.isserlis import (
    KNOWN_CLOSED_FORMS,
    MomentKind,
    Sign,
    SymbolicMoment,
    _centered_cached,
    _symbolic_cached,
    centered_moment,
    double_factorial,
    enumerate_term_counts,
    evaluate_symbolic,
    numeric_word_moment,
    symbolic_word_moment,
    term_counts,
    verify_bernstein,
)
from covbound.montecarlo import (
    TrialConfig,
    Verdict,
    count_events,
    exceedance,
    simulate,
    wilson_interval,
)
from covbound.spectra import CovarianceMatrix, Spectrum, random_psd, spectrum_of

from conftest import seeded_psd

THETA_GRID = [round(0.1 * i, 1) for i in range(1, 101)]  # 0.1, 0.2, ..., 10.0


@pytest.mark.criterion("AC-1", "chi-square reduction of EQ15 to machine precision")
def test_ac1_chi_square_reduction():
    sp = Spectrum.from_eigenvalues([1.0])
    assert sp.d == 1 and sp.r == 1
    worst = 0.0
    for theta in THETA_GRID:
        for n in range(1, 10**4 + 1):
            got = bound_eq15(sp, n, theta).deviation
            want = math.sqrt(4 * theta / n) + 2 * theta / n
            worst = max(worst, abs(got - want) / want)
    assert worst <= 1e-15
    for theta in THETA_GRID:
        assert bound_eq15(sp, 10, theta).prob_budget == math.exp(-theta)


@pytest.mark.criterion("AC-2", "closed-form moment identities, exact integer coefficients")
def test_ac2_closed_forms():
    _symbolic_cached.cache_clear()
    _centered_cached.cache_clear()
    start = time.perf_counter()
    got = {
        "E[XX]": symbolic_word_moment("XX"),
        "E[XXX]": symbolic_word_moment("XXX"),
        "E[XCX]": symbolic_word_moment("XCX"),
        "Sigma_2": centered_moment(2, Sign.PLUS),
        "Sigma_3": centered_moment(3, Sign.PLUS),
    }
    elapsed = time.perf_counter() - start
    # (coeff, chain, loops): coeff * C^chain * prod tr(C^l)
    want = {
        "E[XX]": {(1, 1, (1,)), (2, 2, ())},
        "E[XXX]": {(1, 1, (1, 1)), (2, 1, (2,)), (4, 2, (1,)), (8, 3, ())},
        "E[XCX]": {(2, 3, ()), (1, 1, (2,))},
        "Sigma_2": {(1, 1, (1,)), (1, 2, ())},
        "Sigma_3": {(1, 1, (1, 1)), (1, 1, (2,)), (2, 2, (1,)), (4, 3, ())},
    }
    for name, sm in got.items():
        assert set(map(tuple, sm.terms)) == want[name], name
        assert len(sm.terms) == len(want[name])
        assert sm == KNOWN_CLOSED_FORMS[name]
    assert elapsed < 1.0


@pytest.mark.criterion("AC-3", "symbolic vs brute-force numeric moments, all words p <= 5")
def test_ac3_oracle_equivalence():
    start = time.perf_counter()
    mats = seeded_psd(10, dims=(2, 3), seed=303)
    worst = 0.0
    for C in mats:
        for p in range(1, 6):
            for letters in itertools.product("XC", repeat=p):
                w = "".join(letters)
                num = numeric_word_moment(w, C)
                sym = evaluate_symbolic(symbolic_word_moment(w), C)
                worst = max(worst, np.linalg.norm(sym - num) / np.linalg.norm(num))
    assert worst <= 1e-9
    assert time.perf_counter() - start < 120


@pytest.mark.criterion("AC-4", "Bernstein moment condition as PSD dominance, p = 2..7")
def test_ac4_psd_dominance():
    start = time.perf_counter()
    mats = seeded_psd(20, dims=(1, 2, 3), seed=404, rank_deficient_every=5)
    mats += [CovarianceMatrix.identity(3), CovarianceMatrix.diag([1.0, 0.0])]
    failures = []
    for C in mats:
        for p in range(2, 8):
            for kind in MomentKind:
                cert = verify_bernstein(p, C, kind)
                if not cert.passed:
                    failures.append(cert)
                if p == 2 and kind is MomentKind.RAW:
                    assert abs(cert.min_eig_of_slack) <= 1e-8 * cert.dominator_norm
    assert not failures
    assert time.perf_counter() - start < 300


@pytest.mark.criterion("AC-5", "pairing counts and singleton-chain fractions")
def test_ac5_counting():
    for p in range(2, 7):
        for k in range(p + 1):
            total, single = enumerate_term_counts(p, k)
            assert total == math.comb(p, k) * double_factorial(2 * p - 2 * k - 1)
            want_single = math.comb(p - 2, k) * double_factorial(2 * p - 2 * k - 3) if k <= p - 2 else 0
            assert single == want_single
            assert (total, single) == term_counts(p, k)
    for p in range(2, 11):
        total0, single0 = term_counts(p, 0)
        assert 3 * single0 <= total0
        totals = [term_counts(p, k) for k in range(p + 1)]
        assert 2 * sum(s for _, s in totals) <= sum(t for t, _ in totals)


@pytest.mark.criterion("AC-6", "exact chi-square(2) tail anchor for the Monte Carlo engine")
def test_ac6_exact_distribution_anchor():
    start = time.perf_counter()
    C = CovarianceMatrix.identity(1)
    trials = 10**5
    stats = simulate(C, 2, trials, seed=606)
    for t in (0.25, 0.5, 1.0, 2.0):
        hits = int(np.count_nonzero(stats.upper >= t))
        lo, hi = wilson_interval(hits, trials)
        assert lo <= math.exp(-(1 + t)) <= hi, t
    sp = spectrum_of(C)
    for theta in (0.5, 1.0, 2.0, 3.0):
        ((_, hits, budget),) = count_events(stats, sp, 2, theta, Equation.EQ15)
        assert budget == pytest.approx(math.exp(-theta), rel=1e-15)
        assert hits / trials <= budget
    assert time.perf_counter() - start < 30


@pytest.mark.criterion("AC-7", "soundness sweep over random covariances, no VIOLATED verdict")
def test_ac7_soundness_sweep():
    start = time.perf_counter()
    mats = [CovarianceMatrix.identity(2), CovarianceMatrix.identity(5),
            random_psd(5, np.random.default_rng(707))]
    eqs = (Equation.EQ15, Equation.EQ16, Equation.EQ17, Equation.EQ18)
    violated = []
    for i, C in enumerate(mats):
        for n in (50, 200):
            cfg = TrialConfig(C, n, 10**4, thetas=(0.5, 1, 2, 3, 5), seed=7000 + 10 * i + n, equations=eqs)
            reports = exceedance(cfg)
            assert len(reports) == 4 * 5
            violated += [r for r in reports if r.verdict is Verdict.VIOLATED]
    assert not violated
    assert time.perf_counter() - start < 300


@pytest.mark.criterion("AC-8", "scalar Bernstein deviation and exact rate are inverse")
def test_ac8_bernstein_inverse():
    g = np.random.default_rng(808)
    thetas = 10 ** g.uniform(-3, 2, 1000)
    sigma2s = 10 ** g.uniform(-3, 3, 1000)
    Bs = 10 ** g.uniform(-3, 3, 1000)
    for theta, s2, B in zip(thetas, sigma2s, Bs):
        p = BernsteinParams(float(s2), float(B))
        eps = bernstein_eps(float(theta), p)
        assert exact_rate(eps, p) == pytest.approx(theta, rel=1e-9)
        for e in (eps, 0.1 * eps, 10 * eps, 0.0):
            assert exact_rate(e, p) >= e * e / (2 * s2 + 2 * e * B) * (1 - 1e-15)


@pytest.mark.criterion("AC-9", "per-eigenvalue top bound no tighter than EQ15")
def test_ac9_top_eigenvalue_vs_eq15():
    for r in (1, 2, 5, 20):
        sp = Spectrum.from_eigenvalues([1.0] * r)
        assert sp.r == r
        for theta in THETA_GRID:
            for n in range(1, 1001):
                assert bound_eq19(sp, n, theta, 1).deviation >= bound_eq15(sp, n, theta).deviation


@pytest.mark.criterion("AC-10", "sample-size planner returns the minimal n")
def test_ac10_planner_minimality():
    g = np.random.default_rng(1010)
    for _ in range(100):
        eps = float(10 ** g.uniform(-2.5, 0.5))
        theta = float(10 ** g.uniform(-1, 1.5))
        r = float(g.uniform(1, 50))
        n = solve_n(eps, theta, r)
        assert deviation_factor_eq15(theta, n, r) <= eps
        if n > 1:
            assert deviation_factor_eq15(theta, n - 1, r) > eps
