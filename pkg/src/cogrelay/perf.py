"""End-to-end outage and bit-error performance of the two-hop link."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate

from .channels import FsoParams, RfLinkConfig, fso_snr_cdf, fso_snr_pdf
from .linkstats import (
    SrSnrModel,
    sr_snr_cdf,
    sr_snr_cdf_batch,
    sr_snr_cdf_oracle,
    sr_snr_cdf_pa_inf,
)
from .specfun import (
    BivariateGSpec,
    MeijerGConvergenceError,
    MeijerGSpec,
    meijer_g,
    meijer_g_bivariate,
    reg_lower_gamma,
    reg_upper_gamma,
)

__all__ = [
    "ModulationConstants",
    "BPSK",
    "BFSK",
    "DBPSK",
    "NCBFSK",
    "MODULATIONS",
    "ScenarioSet",
    "QuadratureError",
    "semi_infinite_quad",
    "e2e_outage_cdf",
    "outage_grid",
    "fso_cdf_quad",
    "outage_avg",
    "outage_floor",
    "cond_ber",
    "BerTerms",
    "l1_closed",
    "l2_closed",
    "l3_bivariate",
    "ber_symbol",
    "ber_avg",
    "ber_floor",
]


@dataclass(frozen=True)
class ModulationConstants:
    """Binary modulation with conditional error ``Gamma(a, b g) / (2 Gamma(a))``."""

    a: float
    b: float
    name: str = ""

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError("modulation constants must be positive")

    @property
    def prefactor(self) -> float:
        return self.b**self.a / (2.0 * math.gamma(self.a))


BPSK = ModulationConstants(0.5, 1.0, "BPSK")
BFSK = ModulationConstants(0.5, 0.5, "BFSK")
DBPSK = ModulationConstants(1.0, 1.0, "DBPSK")
NCBFSK = ModulationConstants(1.0, 0.5, "NCBFSK")
MODULATIONS = {m.name: m for m in (BPSK, BFSK, DBPSK, NCBFSK)}


@dataclass(frozen=True)
class ScenarioSet:
    """J secondary transmitters sharing one relay and one FSO hop.

    ``P_M`` holds one peak power per transmitter (linear W); ``P_A`` and
    ``gamma_th`` are linear.
    """

    links: tuple[RfLinkConfig, ...]
    fso: FsoParams
    P_A: float
    P_M: tuple[float, ...]
    gamma_th: float = 10 ** 0.3
    eta0: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        pm = self.P_M
        if np.ndim(pm) == 0:
            pm = (float(pm),) * len(self.links)
        object.__setattr__(self, "P_M", tuple(float(v) for v in pm))
        if not self.links:
            raise ValueError("need at least one SU-TX")
        if len(self.P_M) != len(self.links):
            raise ValueError("one peak power per SU-TX is required")
        if len({(c.N_b, c.B) for c in self.links}) != 1:
            raise ValueError("all SU-TXs must share the frame length N_b and block size B")
        for name in ("P_A", "gamma_th", "eta0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if any(not v > 0 for v in self.P_M):
            raise ValueError("P_M must be positive")

    @property
    def J(self) -> int:
        return len(self.links)

    @property
    def N_b(self) -> int:
        return self.links[0].N_b

    @property
    def B(self) -> int:
        return self.links[0].B

    def replace(self, **changes) -> "ScenarioSet":
        return replace(self, **changes)

    def model(self, j: int, k: int) -> SrSnrModel:
        """SR-link model of transmitter ``j`` (0-based) at codeword ``k`` (1-based)."""
        return SrSnrModel.from_config(self.links[j], self.P_A, self.P_M[j], self.eta0, k)

    def models(self) -> list[list[SrSnrModel]]:
        return [[self.model(j, k) for k in range(1, self.N_b + 1)] for j in range(self.J)]


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach its tolerance."""


MAX_EVALUATIONS = 1_000_000


def semi_infinite_quad(f, epsabs: float = 1e-12, epsrel: float = 1e-9, vector: bool = False):
    """Integrate ``f`` over ``(0, inf)`` after the substitution ``x = t / (1 - t)``.

    ``f`` takes a scalar ``x``; with ``vector=True`` it may return an array and
    the integrals of all components are computed together.  Returns
    ``(value, error_estimate, evaluations)``.
    """

    def g(t):
        if t >= 1.0:
            return 0.0 * f(1.0)
        x = t / (1.0 - t)
        return f(x) / (1.0 - t) ** 2

    if vector:
        limit = MAX_EVALUATIONS // 21
        val, err, info = integrate.quad_vec(
            g, 0.0, 1.0, epsabs=epsabs, epsrel=epsrel, norm="max", limit=limit, full_output=True
        )
        nev = int(info.neval)
        if not info.success:
            raise QuadratureError(
                f"vector quadrature failed ({info.message}; {nev} evaluations, error {err:.2e})"
            )
        return np.asarray(val), float(err), nev
    limit = MAX_EVALUATIONS // 42
    val, err, info = integrate.quad(
        g, 0.0, 1.0, epsabs=epsabs, epsrel=epsrel, limit=limit, full_output=True
    )[:3]
    nev = int(info["neval"])
    if err > max(epsabs, epsrel * abs(val)) * 10 or nev >= MAX_EVALUATIONS:
        raise QuadratureError(f"quadrature failed ({nev} evaluations, error {err:.2e})")
    return float(val), float(err), nev


# ---------------------------------------------------------------------------
# outage
# ---------------------------------------------------------------------------

def e2e_outage_cdf(gamma_th: float, m: SrSnrModel, p: FsoParams) -> float:
    """Probability that the weaker hop falls below ``gamma_th``."""
    if not gamma_th > 0:
        raise ValueError("gamma_th must be positive")
    f_sr = sr_snr_cdf(m, gamma_th)
    f_rd = fso_snr_cdf(p, gamma_th)
    return 1.0 - (1.0 - f_sr) * (1.0 - f_rd)


def _sr_grid(s: ScenarioSet, x: float, pa_inf: bool = False) -> np.ndarray:
    """SR-link CDF at ``x`` for every (j, k): shape ``(J, N_b)``."""
    out = np.empty((s.J, s.N_b))
    for j in range(s.J):
        models = [s.model(j, k) for k in range(1, s.N_b + 1)]
        if pa_inf:
            out[j] = [sr_snr_cdf_pa_inf(m, x) for m in models]
        else:
            out[j] = sr_snr_cdf_batch(models, [x])[:, 0]
    return out


def outage_grid(s: ScenarioSet) -> np.ndarray:
    """End-to-end outage for every (j, k, n): shape ``(J, N_b, B)``.

    The SNR does not depend on the symbol index ``n`` inside a codeword, so
    the last axis repeats the same values.
    """
    f_rd = fso_snr_cdf(s.fso, s.gamma_th)
    f_sr = _sr_grid(s, s.gamma_th)
    per_jk = 1.0 - (1.0 - f_sr) * (1.0 - f_rd)
    return np.repeat(per_jk[:, :, None], s.B, axis=2)


def fso_cdf_quad(p: FsoParams, x: float) -> float:
    """FSO SNR CDF by integrating the density over ``log`` of the SNR."""
    if x <= 0:
        return 0.0

    def f(s):
        y = math.exp(s)
        return y * float(fso_snr_pdf(p, y))

    hi = math.log(x)
    lo = min(hi, math.log(p.mu)) - 60.0
    val, err = integrate.quad(f, lo, hi, epsabs=1e-13, epsrel=1e-10, limit=400)
    if err > 1e-9:
        raise QuadratureError(f"FSO CDF quadrature error estimate {err:.2e}")
    return val


def outage_avg(s: ScenarioSet, method: str = "closed") -> float:
    """Outage probability averaged over transmitters and codewords.

    ``method="quadrature"`` replaces both hop CDFs by direct numerical
    integration of their defining integrals.
    """
    if method == "closed":
        f_rd = fso_snr_cdf(s.fso, s.gamma_th)
        f_sr = _sr_grid(s, s.gamma_th)
    elif method == "quadrature":
        f_rd = fso_cdf_quad(s.fso, s.gamma_th)
        models, index = _distinct(s)
        f_sr = np.array([sr_snr_cdf_oracle(m, s.gamma_th) for m in models])[index]
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(np.mean(1.0 - (1.0 - f_sr) * (1.0 - f_rd)))


def outage_floor(s: ScenarioSet, kind: str) -> float:
    """Outage floor as ``mu -> inf`` (``"mu_inf"``) or ``P_A -> inf`` (``"pa_inf"``)."""
    if kind == "mu_inf":
        return float(np.mean(_sr_grid(s, s.gamma_th)))
    if kind == "pa_inf":
        f_rd = fso_snr_cdf(s.fso, s.gamma_th)
        f_sr = _sr_grid(s, s.gamma_th, pa_inf=True)
        return float(np.mean(1.0 - (1.0 - f_sr) * (1.0 - f_rd)))
    raise ValueError(f"unknown floor kind {kind!r}; use 'mu_inf' or 'pa_inf'")


# ---------------------------------------------------------------------------
# bit error rate
# ---------------------------------------------------------------------------

def cond_ber(gamma, mc: ModulationConstants):
    """Conditional bit error probability at SNR ``gamma``."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError("SNR must be non-negative")
    out = 0.5 * np.asarray(reg_upper_gamma(mc.a, mc.b * g))
    return float(out) if out.ndim == 0 else out


@dataclass
class BerTerms:
    """Average symbol error probability and its three integrals."""

    value: float
    L1: float
    L2: float
    L3: float
    method: str
    l3_backend: str
    fallback: str | None = None
    evaluations: int = 0
    extra: dict = field(default_factory=dict)


def _moment_kernel(mc: ModulationConstants, x: float) -> float:
    return math.exp(-mc.b * x + (mc.a - 1.0) * math.log(x)) if x > 0 else 0.0


def l2_closed(p: FsoParams, mc: ModulationConstants) -> float:
    """``int e^(-bx) x^(a-1) F_RD(x) dx`` in closed form."""
    spec = p.cdf_spec(extra_a=(1.0 - mc.a,))
    return p.theta1 * mc.b ** (-mc.a) * meijer_g(spec, p.theta2 / (p.mu * mc.b))


def _l1_parts(models: list[SrSnrModel], mc: ModulationConstants) -> np.ndarray:
    """Closed-form L1 for models sharing ``(tau1, tau2)``."""
    a, b = mc.a, mc.b
    t1, t2 = models[0].tau1, models[0].tau2
    if any((m.tau1, m.tau2) != (t1, t2) for m in models):
        raise ValueError("models must share (tau1, tau2)")
    s1 = np.array([m.scale1 for m in models])
    s2 = np.array([m.alpha2 * m.delta_SR for m in models])
    a3 = np.array([m.alpha3 for m in models])
    d = np.array([m.delta_SP for m in models])
    r = np.array([m.ratio for m in models])
    with np.errstate(divide="ignore"):
        z = r / d
    p_peak = np.asarray(reg_lower_gamma(t2, z))
    q_peak = np.asarray(reg_upper_gamma(t2, z))

    # peak-power branch: Laplace-type transform of the regularized lower gamma
    spec_a = MeijerGSpec(1, 2, (1.0 - a, 1.0), (float(t1), 0.0))
    term_a = p_peak * b ** (-a) * meijer_g(spec_a, 1.0 / (s1 * b)) / math.gamma(t1)
    term_b = q_peak * math.gamma(a) * b ** (-a)

    # interference-limited branch
    live = d > 0
    term_c = np.zeros(len(models))
    if np.any(live):
        dl, rl, s2l, a3l = d[live], r[live], s2[live], a3[live]
        beta = b + (a3l + rl) / s2l
        arg = dl / (s2l * beta)
        gcache: dict = {}
        total = []
        with np.errstate(divide="ignore"):
            la3 = np.log(a3l)
            lr = np.log(rl)
            ld = np.log(dl)
        for mm in range(t1):
            for c in range(mm + 1):
                lpow = (mm - c) * la3 if mm > c else np.zeros_like(dl)
                for l_ in range(t2 + c):
                    nu = t2 + c - l_
                    key = (mm, nu)
                    if key not in gcache:
                        gspec = MeijerGSpec(1, 2, (1.0 - a - mm, 1.0 - nu), (0.0,))
                        gcache[key] = meijer_g(gspec, arg)
                    logt = (
                        -mm * np.log(s2l) - math.lgamma(mm + 1)
                        + math.lgamma(mm + 1) - math.lgamma(c + 1) - math.lgamma(mm - c + 1)
                        + lpow + math.lgamma(t2 + c) - math.lgamma(t2)
                        - rl / dl + l_ * lr - math.lgamma(l_ + 1)
                        + (c - l_) * ld - math.lgamma(nu)
                        - (a + mm) * np.log(beta)
                    )
                    with np.errstate(under="ignore", over="ignore", invalid="ignore"):
                        total.append(np.nan_to_num(np.exp(logt) * gcache[key]))
        arr = np.array(total)
        order = np.argsort(np.abs(arr), axis=0)
        term_c[live] = np.sum(np.take_along_axis(arr, order, axis=0), axis=0)
    return term_a + term_b - term_c


def l1_closed(m: SrSnrModel, mc: ModulationConstants) -> float:
    """``int e^(-bx) x^(a-1) F_SR(x) dx`` in closed form."""
    return float(_l1_parts([m], mc)[0])


def _l1_quad(m: SrSnrModel, mc: ModulationConstants) -> tuple[float, int]:
    val, _, nev = semi_infinite_quad(lambda x: _moment_kernel(mc, x) * sr_snr_cdf(m, x))
    return val, nev


def _l2_quad(p: FsoParams, mc: ModulationConstants) -> tuple[float, int]:
    val, _, nev = semi_infinite_quad(lambda x: _moment_kernel(mc, x) * fso_snr_cdf(p, x))
    return val, nev


def _l3_quad_batch(models: list[SrSnrModel], p: FsoParams, mc: ModulationConstants):
    """L3 for several models at once (common tau1, tau2)."""

    def f(x):
        if x <= 0:
            return np.zeros(len(models))
        return _moment_kernel(mc, x) * fso_snr_cdf(p, x) * sr_snr_cdf_batch(models, [x])[:, 0]

    val, _, nev = semi_infinite_quad(f, vector=True)
    return np.asarray(val), nev


def l3_bivariate(m: SrSnrModel, p: FsoParams, mc: ModulationConstants) -> float:
    """L3 through bivariate Meijer G functions.

    Raises :class:`MeijerGConvergenceError` when a double contour does not
    converge; callers then fall back to quadrature.
    """
    a, b = mc.a, mc.b
    t1, t2 = m.tau1, m.tau2
    d, r, a3 = m.delta_SP, m.ratio, m.alpha3
    s1, s2 = m.scale1, m.alpha2 * m.delta_SR
    second = p.cdf_spec()
    c_rd = p.theta1

    # peak-power branch: Gamma CDF x FSO CDF
    first = MeijerGSpec(1, 1, (1.0,), (float(t1), 0.0))
    spec1 = BivariateGSpec(1, (1.0 - a,), (), first, second)
    term1 = (m.p_peak * c_rd * b ** (-a) / math.gamma(t1)
             * meijer_g_bivariate(spec1, 1.0 / (b * s1), p.theta2 / (p.mu * b)))
    if d == 0:
        return float(term1)
    term2 = reg_upper_gamma(t2, r / d) * l2_closed(p, mc)

    beta = b + (a3 + r) / s2
    kappa = d / s2
    term3 = 0.0
    gcache: dict = {}
    for mm in range(t1):
        for c in range(mm + 1):
            for l_ in range(t2 + c):
                nu = t2 + c - l_
                key = (mm, nu)
                if a3 == 0 and mm > c:
                    continue
                if key not in gcache:
                    # (1 + kappa x)^-nu as a G^{1,1}_{1,1} kernel, times Gamma(nu)
                    inner = MeijerGSpec(1, 1, (1.0 - nu,), (0.0,))
                    spec3 = BivariateGSpec(1, (1.0 - a - mm,), (), inner, second)
                    gcache[key] = meijer_g_bivariate(spec3, kappa / beta, p.theta2 / (p.mu * beta))
                logt = (
                    -mm * math.log(s2) - math.lgamma(c + 1) - math.lgamma(mm - c + 1)
                    + ((mm - c) * math.log(a3) if mm > c else 0.0)
                    + math.lgamma(t2 + c) - math.lgamma(t2)
                    - r / d + l_ * math.log(r) - math.lgamma(l_ + 1)
                    + (c - l_) * math.log(d) - math.lgamma(nu)
                    - (a + mm) * math.log(beta)
                )
                term3 += math.exp(logt) * gcache[key]
    return float(term1 + term2 - c_rd * term3)


def ber_symbol(m: SrSnrModel, p: FsoParams, mc: ModulationConstants,
               method: str = "closed", l3_backend: str = "quadrature") -> BerTerms:
    """Average error probability of one symbol.

    ``method="closed"`` uses closed forms for L1 and L2; ``"quadrature"``
    integrates every term numerically.  L3 uses ``l3_backend``
    (``"quadrature"`` or ``"bivariate"``, the latter falling back to
    quadrature on non-convergence).
    """
    if method not in ("closed", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    nev = 0
    if method == "closed":
        L1, L2 = l1_closed(m, mc), l2_closed(p, mc)
    else:
        (L1, n1), (L2, n2) = _l1_quad(m, mc), _l2_quad(p, mc)
        nev += n1 + n2
    fallback = None
    backend = l3_backend
    if l3_backend == "bivariate":
        try:
            L3 = l3_bivariate(m, p, mc)
        except MeijerGConvergenceError as exc:
            fallback = f"bivariate L3 did not converge ({exc}); used quadrature"
            backend = "quadrature"
            L3 = None
    elif l3_backend != "quadrature":
        raise ValueError(f"unknown L3 backend {l3_backend!r}")
    if backend == "quadrature":
        vals, n3 = _l3_quad_batch([m], p, mc)
        L3 = float(vals[0])
        nev += n3
    value = mc.prefactor * (L1 + L2 - L3)
    return BerTerms(float(value), float(L1), float(L2), float(L3), method, backend, fallback, nev)


def _model_key(m: SrSnrModel):
    # codeword bookkeeping does not change the distribution
    return replace(m, k=1, i=0)


def _distinct(s: ScenarioSet):
    """Distinct SR models of a scenario and the (J, N_b) index into them."""
    uniq: dict[SrSnrModel, int] = {}
    index = np.empty((s.J, s.N_b), dtype=int)
    for j in range(s.J):
        for k in range(1, s.N_b + 1):
            key = _model_key(s.model(j, k))
            index[j, k - 1] = uniq.setdefault(key, len(uniq))
    return list(uniq), index


def _grouped(models: list[SrSnrModel], fn) -> np.ndarray:
    """Apply a batched function to groups of models sharing ``(tau1, tau2)``."""
    out = np.empty(len(models))
    groups: dict = {}
    for i, m in enumerate(models):
        groups.setdefault((m.tau1, m.tau2), []).append(i)
    for idx in groups.values():
        out[idx] = fn([models[i] for i in idx])
    return out


def ber_avg(s: ScenarioSet, mc: ModulationConstants, method: str = "closed",
            l3_backend: str = "quadrature", events: list | None = None) -> float:
    """Average bit error probability over transmitters, codewords and symbols.

    Fallbacks from the bivariate L3 backend are appended to ``events``.
    """
    models, index = _distinct(s)
    if method == "closed":
        L1 = _grouped(models, lambda ms: _l1_parts(ms, mc))
        L2 = l2_closed(s.fso, mc)
    elif method == "quadrature":
        L1 = np.array([_l1_quad(m, mc)[0] for m in models])
        L2 = _l2_quad(s.fso, mc)[0]
    else:
        raise ValueError(f"unknown method {method!r}")
    if l3_backend == "quadrature":
        L3 = _grouped(models, lambda ms: _l3_quad_batch(ms, s.fso, mc)[0])
    elif l3_backend == "bivariate":
        L3 = np.empty(len(models))
        for i, m in enumerate(models):
            res = ber_symbol(m, s.fso, mc, method="closed", l3_backend="bivariate")
            L3[i] = res.L3
            if res.fallback and events is not None:
                events.append(f"model {i}: {res.fallback}")
    else:
        raise ValueError(f"unknown L3 backend {l3_backend!r}")
    per_model = mc.prefactor * (L1 + L2 - L3)
    return float(np.mean(per_model[index]))


def ber_floor(s: ScenarioSet, mc: ModulationConstants, kind: str) -> float:
    """Error floor as ``mu -> inf`` (``"mu_inf"``) or ``P_A -> inf`` (``"pa_inf"``)."""
    if kind == "mu_inf":
        models, index = _distinct(s)
        L1 = _grouped(models, lambda ms: _l1_parts(ms, mc))
        return float(np.mean(mc.prefactor * L1[index]))
    if kind != "pa_inf":
        raise ValueError(f"unknown floor kind {kind!r}; use 'mu_inf' or 'pa_inf'")
    a, b, p = mc.a, mc.b, s.fso
    vals = np.empty((s.J, s.N_b))
    gcache: dict = {}
    for j in range(s.J):
        for k in range(1, s.N_b + 1):
            m = s.model(j, k)
            kappa = b + 1.0 / m.scale1
            acc = math.gamma(a) * b ** (-a)
            for l_ in range(m.tau1):
                key = (l_, kappa)
                if key not in gcache:
                    spec = p.cdf_spec(extra_a=(1.0 - a - l_,))
                    gcache[key] = p.theta1 * meijer_g(spec, p.theta2 / (p.mu * kappa))
                acc -= (math.exp(-l_ * math.log(m.scale1) - math.lgamma(l_ + 1)
                                 - (a + l_) * math.log(kappa))
                        * (math.gamma(a + l_) - gcache[key]))
            vals[j, k - 1] = mc.prefactor * acc
    return float(np.mean(vals))
