import numpy as np
import pytest

from covbound.spectra import random_psd

_criteria: list[tuple[str, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion id and title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        status = "PASS" if report.outcome == "passed" else "FAIL"
        _criteria.append((marker.args[0], marker.args[1], status))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for label, title, status in sorted(_criteria, key=lambda c: int(c[0].split("-")[1])):
        terminalreporter.write_line(f"[{status}] {label}: {title}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def seeded_psd(count, dims=(2, 3), seed=1234, rank_deficient_every=0):
    """Deterministic list of random PSD matrices cycling through ``dims``."""
    g = np.random.default_rng(seed)
    out = []
    for i in range(count):
        d = dims[i % len(dims)]
        rank = d - 1 if d > 1 and rank_deficient_every and i % rank_deficient_every == 0 else None
        out.append(random_psd(d, g, rank=rank))
    return out
