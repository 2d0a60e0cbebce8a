"""Channel models: Jakes correlation, AR1 MIMO fading, estimated gains, FSO SNR law."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq
from scipy.special import gammaln

from .specfun import MeijerGSpec, SpecfunDomainError, bessel_j0, meijer_g

__all__ = [
    "SPEED_OF_LIGHT",
    "MPH",
    "RfLinkConfig",
    "FsoParams",
    "jakes_rho",
    "ar1_evolve",
    "sample_estimated_gain",
    "predict_cross_gain",
    "fso_snr_pdf",
    "fso_snr_cdf",
    "fso_snr_quantile",
    "fso_snr_sample",
    "FsoSampler",
    "fso_sampler",
    "gamma_gamma_sample",
]

SPEED_OF_LIGHT = 2.998e8
MPH = 0.44704  # m/s


def jakes_rho(speed: float, f_c: float = 5.9e9, R_s: float = 9500.0) -> float:
    """Per-symbol correlation ``J0(2 pi f_c v / (R_s c))`` for relative speed ``v`` in m/s."""
    for name, v in (("speed", speed), ("f_c", f_c), ("R_s", R_s)):
        if not math.isfinite(v):
            raise SpecfunDomainError(f"{name} must be finite")
    if speed < 0 or f_c <= 0 or R_s <= 0:
        raise SpecfunDomainError("need speed >= 0, f_c > 0, R_s > 0")
    return float(bessel_j0(2.0 * math.pi * f_c * speed / (R_s * SPEED_OF_LIGHT)))


@dataclass(frozen=True)
class RfLinkConfig:
    """One SU-TX: its link to the relay (SR) and to its primary receiver (SP).

    ``sigma2_innov`` is the per-entry variance of the AR1 innovations; ``None``
    means "equal to ``delta2_SR``", which keeps the AR1 process stationary.
    """

    N_S: int = 3
    N_R: int = 2
    N_P: int = 2
    delta2_SR: float = 1.0
    delta2_SP: float = 1.0
    sigma2_eps_SR: float = 0.0
    sigma2_eps_SP: float = 0.0
    sigma2_innov: float | None = None
    rho_SR: float = 1.0
    rho_SP: float = 1.0
    L: int = 1
    N_b: int = 50
    N_a: int = 3
    B: int = 4
    T: int = 8
    R_c: Fraction = field(init=False)

    def __post_init__(self):
        for name in ("N_S", "N_R", "N_P", "N_b", "N_a", "B", "T", "L"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.L > self.N_b:
            raise ValueError(f"L must lie in [1, N_b={self.N_b}], got {self.L}")
        if self.B > self.T:
            raise ValueError("B must not exceed T (code rate above 1)")
        object.__setattr__(self, "R_c", Fraction(self.B, self.T))
        for name in ("delta2_SR", "delta2_SP"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("sigma2_eps_SR", "sigma2_eps_SP"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be non-negative")
        if self.sigma2_innov is not None and not self.sigma2_innov > 0:
            raise ValueError("sigma2_innov must be positive")
        for name in ("rho_SR", "rho_SP"):
            if not -1.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [-1, 1]")

    @property
    def innov(self) -> float:
        return self.delta2_SR if self.sigma2_innov is None else self.sigma2_innov

    @property
    def tau1(self) -> int:
        return self.N_S * self.N_R

    @property
    def tau2(self) -> int:
        return self.N_S * self.N_P

    @property
    def delta_tilde_SR(self) -> float:
        return self.delta2_SR + self.sigma2_eps_SR

    def delta_tilde_SP(self, k: int) -> float:
        """Variance of the predicted cross-channel entries at codeword ``k``."""
        self.check_k(k)
        return predict_cross_gain(self.delta2_SP + self.sigma2_eps_SP, self.rho_SP, k)

    def pilot_distance(self, k: int) -> int:
        self.check_k(k)
        return abs(self.L - k)

    def check_k(self, k: int) -> None:
        if not 1 <= k <= self.N_b:
            raise IndexError(f"codeword index k={k} outside [1, {self.N_b}]")


def ar1_evolve(H_L: np.ndarray, k: int, cfg: RfLinkConfig, rng: np.random.Generator) -> np.ndarray:
    """Channel at codeword ``k`` given the channel ``H_L`` at the pilot position.

    Runs the AR1 recursion outward from ``L`` (backward for ``k < L``) with
    circular complex Gaussian innovations of variance ``cfg.innov``.
    """
    cfg.check_k(k)
    H_L = np.asarray(H_L, dtype=complex)
    rho = cfg.rho_SR
    i = abs(k - cfg.L)
    scale = math.sqrt(cfg.innov / 2.0)
    H = H_L.copy()
    w = math.sqrt(max(1.0 - rho * rho, 0.0))
    for _ in range(i):
        E = scale * (rng.standard_normal(H.shape) + 1j * rng.standard_normal(H.shape))
        H = rho * H + w * E
    return H


def sample_estimated_gain(dim: int, var: float, rng: np.random.Generator, size=None):
    """Squared Frobenius norm of a ``dim``-entry CN(0, var) matrix: Gamma(dim, var)."""
    if dim < 1 or not var > 0:
        raise ValueError("need dim >= 1 and var > 0")
    return rng.gamma(float(dim), float(var), size)


def predict_cross_gain(G1, rho: float, k):
    """Cross gain propagated from the first codeword: ``rho^(2(k-1)) G1``."""
    k = np.asarray(k)
    if np.any(k < 1):
        raise IndexError("k must be >= 1")
    out = np.asarray(G1, dtype=float) * np.power(float(rho) ** 2, k - 1.0)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# FSO link
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FsoParams:
    """Gamma-Gamma turbulence with pointing errors.

    ``H_l`` is carried as metadata: the SNR law below is parameterised by the
    average electrical SNR ``mu`` (linear), which already includes path loss.
    """

    alpha: float
    beta: float
    xi: float
    H_l: float = 1.0
    theta: int = 1
    mu: float = 100.0

    def __post_init__(self):
        for name in ("alpha", "beta", "xi", "mu"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise ValueError(f"FSO parameter {name} must be positive and finite, got {v!r}")
        if not 0 < self.H_l <= 1:
            raise ValueError("H_l must lie in (0, 1]")
        if self.theta not in (1, 2):
            raise ValueError("theta must be 1 (heterodyne) or 2 (IM/DD)")

    @property
    def shape(self) -> tuple[float, float, float, int]:
        """The parameters that fix the law of ``gamma / mu``."""
        return (self.alpha, self.beta, self.xi, self.theta)

    @property
    def theta1(self) -> float:
        t, a, b, x2 = self.theta, self.alpha, self.beta, self.xi**2
        return math.exp(
            (a + b - 2.0) * math.log(t) + math.log(x2) - (t - 1) * math.log(2.0 * math.pi)
            - gammaln(a) - gammaln(b)
        )

    @property
    def theta2(self) -> float:
        t = self.theta
        return (self.alpha * self.beta) ** t / t ** (2 * t)

    @property
    def theta3(self) -> tuple[float, ...]:
        t, x2 = self.theta, self.xi**2
        return tuple((x2 + j) / t for j in range(1, t + 1))

    @property
    def theta4(self) -> tuple[float, ...]:
        t = self.theta
        return tuple((v + j) / t for v in (self.xi**2, self.alpha, self.beta) for j in range(t))

    def cdf_spec(self, extra_a: tuple[float, ...] = ()) -> MeijerGSpec:
        """``G^{3t, 1+len(extra)}`` instance behind the CDF; ``extra_a`` are prepended n-parameters."""
        t = self.theta
        return MeijerGSpec(
            3 * t, 1 + len(extra_a), tuple(extra_a) + (1.0,) + self.theta3, self.theta4 + (0.0,)
        )

    def ccdf_spec(self) -> MeijerGSpec:
        """``G^{3t+1, 0}`` instance behind the complementary CDF."""
        t = self.theta
        return MeijerGSpec(3 * t + 1, 0, self.theta3 + (1.0,), (0.0,) + self.theta4)

    def pdf_spec(self) -> MeijerGSpec:
        x2 = self.xi**2
        return MeijerGSpec(3, 0, (x2 + 1.0,), (x2, self.alpha, self.beta))

    @property
    def mean(self) -> float:
        """E[gamma] for heterodyne detection."""
        if self.theta != 1:
            raise NotImplementedError("closed-form mean only for theta = 1")
        x2 = self.xi**2
        return self.mu * x2 / (x2 + 1.0)


def _positive_array(x):
    xa = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xa)) or np.any(xa < 0):
        raise SpecfunDomainError("SNR arguments must be finite and non-negative")
    return xa


def fso_snr_pdf(p: FsoParams, x):
    """Density of the FSO SNR."""
    xa = _positive_array(x)
    out = np.zeros(xa.shape)
    pos = xa > 0
    if np.any(pos):
        xp = xa[pos]
        z = p.alpha * p.beta * (xp / p.mu) ** (1.0 / p.theta)
        g = meijer_g(p.pdf_spec(), z)
        logpre = 2 * math.log(p.xi) - math.log(p.theta) - gammaln(p.alpha) - gammaln(p.beta)
        out[pos] = np.maximum(math.exp(logpre) * g / xp, 0.0)
    return float(out) if out.ndim == 0 else out


def fso_snr_cdf(p: FsoParams, x):
    """Distribution function of the FSO SNR."""
    xa = _positive_array(x)
    out = np.zeros(xa.shape)
    pos = xa > 0
    if np.any(pos):
        z = p.theta2 * xa[pos] / p.mu
        F = p.theta1 * meijer_g(p.cdf_spec(), z)
        upper = F > 0.5
        if np.any(upper):
            # the complement avoids rounding 1 - tiny in the upper tail
            F[upper] = 1.0 - p.theta1 * meijer_g(p.ccdf_spec(), z[upper])
        out[pos] = np.clip(F, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def _cdf_ratio(shape, y):
    # CDF of gamma/mu; mu cancels out of the law
    a, b, xi, t = shape
    return fso_snr_cdf(FsoParams(a, b, xi, theta=t, mu=1.0), y)


def fso_snr_quantile(p: FsoParams, u: float, xtol: float = 1e-11) -> float:
    """Solve ``fso_snr_cdf(x) = u`` by bracketed root finding in ``log x``."""
    if not 0.0 < u < 1.0:
        raise ValueError("quantile level must lie in (0, 1)")

    def f(s):
        return _cdf_ratio(p.shape, math.exp(s)) - u

    lo, hi = -2.0, 2.0
    for _ in range(200):
        if f(lo) < 0:
            break
        lo -= 4.0
    else:
        raise RuntimeError("could not bracket the FSO quantile from below")
    for _ in range(200):
        if f(hi) > 0:
            break
        hi += 2.0
    else:
        raise RuntimeError("could not bracket the FSO quantile from above")
    s = brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=400)
    return p.mu * math.exp(s)


class FsoSampler:
    """Fast inverse-CDF sampler for the FSO SNR law.

    The CDF of ``gamma/mu`` is tabulated on a logarithmic grid together with
    its exact derivative, interpolated by a cubic Hermite spline in ``log y``
    and inverted with Newton steps on the spline.  Levels outside the table
    (probability below ``tail`` on either side) are solved exactly.
    """

    def __init__(self, alpha: float, beta: float, xi: float, theta: int = 1,
                 nodes: int = 3001, tail: float = 1e-12):
        self.shape = (alpha, beta, xi, theta)
        base = FsoParams(alpha, beta, xi, theta=theta, mu=1.0)
        lo, hi = 0.0, 0.0
        while _cdf_ratio(self.shape, math.exp(lo)) > tail:
            lo -= 2.0
        while 1.0 - _cdf_ratio(self.shape, math.exp(hi)) > tail:
            hi += 1.0
        s = np.linspace(lo, hi, nodes)
        y = np.exp(s)
        F = _cdf_ratio(self.shape, y)
        dF = y * fso_snr_pdf(base, y)
        F = np.maximum.accumulate(F)
        self.s, self.F = s, F
        self.spline = CubicHermiteSpline(s, F, dF)

    def ratio_quantile(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        s_out = np.empty(u.shape)
        inside = (u > self.F[0]) & (u < self.F[-1])
        ui = u[inside]
        idx = np.clip(np.searchsorted(self.F, ui) - 1, 0, self.s.size - 2)
        s0, s1 = self.s[idx], self.s[idx + 1]
        F0, F1 = self.F[idx], self.F[idx + 1]
        w = np.where(F1 > F0, (ui - F0) / np.where(F1 > F0, F1 - F0, 1.0), 0.5)
        t = s0 + w * (s1 - s0)
        d1 = self.spline.derivative()
        for _ in range(4):
            g = self.spline(t) - ui
            der = d1(t)
            step = np.where(der > 0, g / np.where(der > 0, der, 1.0), 0.0)
            t = np.clip(t - step, s0, s1)
        s_out[inside] = t
        for j in np.flatnonzero(~inside):
            s_out.flat[j] = math.log(
                fso_snr_quantile(FsoParams(*self.shape[:3], theta=self.shape[3], mu=1.0),
                                 float(u.flat[j]))
            )
        return np.exp(s_out)

    def sample(self, mu: float, rng: np.random.Generator, size) -> np.ndarray:
        return mu * self.ratio_quantile(rng.random(size))


@lru_cache(maxsize=16)
def _cached_sampler(shape) -> FsoSampler:
    return FsoSampler(*shape)


def fso_sampler(p: FsoParams) -> FsoSampler:
    """Shared tabulated sampler for the turbulence shape of ``p`` (independent of ``mu``)."""
    return _cached_sampler(p.shape)


def fso_snr_sample(p: FsoParams, rng: np.random.Generator, size=None):
    """Draw FSO SNR samples by inverting the CDF.

    A scalar draw solves the CDF equation exactly; array draws use the
    tabulated sampler.
    """
    if size is None:
        return fso_snr_quantile(p, float(rng.random()))
    return fso_sampler(p).sample(p.mu, rng, size)


def gamma_gamma_sample(alpha: float, beta: float, rng: np.random.Generator, size=None):
    """Unit-mean Gamma-Gamma irradiance: product of Gamma(alpha, 1/alpha) and Gamma(beta, 1/beta)."""
    if not (alpha > 0 and beta > 0):
        raise ValueError("alpha and beta must be positive")
    return rng.gamma(alpha, 1.0 / alpha, size) * rng.gamma(beta, 1.0 / beta, size)
