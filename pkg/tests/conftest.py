import numpy as np
import pytest

from cogrelay.channels import MPH, FsoParams, RfLinkConfig, jakes_rho
from cogrelay.scenarios import TURBULENCE

P_M = 10 ** 2.7
RHO17 = jakes_rho(17 * MPH)


def turbulence(name: str, theta: int = 1, mu: float = 100.0) -> FsoParams:
    t = TURBULENCE[name]
    return FsoParams(t["alpha"], t["beta"], t["xi"], t["H_l"], theta, mu)


def link(**kw) -> RfLinkConfig:
    """Reference SU link: N_S=3, N_R=N_P=2, N_b=50, G3 code geometry."""
    return RfLinkConfig(**kw)


def mobile_link(**kw) -> RfLinkConfig:
    base = dict(sigma2_eps_SR=0.1, sigma2_eps_SP=0.1, rho_SR=RHO17, rho_SP=RHO17)
    base.update(kw)
    return RfLinkConfig(**base)


def ks_distance(samples, cdf_values) -> float:
    """Two-sided KS statistic of sorted samples against their model CDF values."""
    n = len(samples)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf_values), np.max(cdf_values - (i - 1) / n)))


def subgrid_ks_bound(sorted_samples, cdf, points: int) -> float:
    """Upper bound on the KS statistic from the model CDF at a subset of order statistics.

    Between two evaluated order statistics both the empirical and the model CDF
    are nondecreasing, so the deviation can exceed the subgrid maximum by at
    most the largest empirical-CDF step across a gap.
    """
    n = len(sorted_samples)
    idx = np.unique(np.linspace(0, n - 1, points).astype(int))
    F = np.asarray(cdf(sorted_samples[idx]))
    d = max(np.max((idx + 1) / n - F), np.max(F - idx / n))
    return float(d + np.max(np.diff(idx)) / n)


@pytest.fixture
def moderate():
    return turbulence("moderate")


@pytest.fixture
def strong():
    return turbulence("strong")


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
