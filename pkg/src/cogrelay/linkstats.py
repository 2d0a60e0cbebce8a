"""SU-TX to relay link: power control, effective SNR and its distribution."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .channels import RfLinkConfig
from .specfun import reg_lower_gamma, reg_upper_gamma

__all__ = [
    "SrSnrModel",
    "transmit_power",
    "alpha_coeffs",
    "effective_snr",
    "sr_snr_cdf",
    "sr_snr_cdf_batch",
    "sr_snr_pdf",
    "sr_snr_cdf_pa_inf",
    "sr_snr_cdf_oracle",
]


def transmit_power(G_hat, P_A: float, P_M: float):
    """SU transmit power ``min(P_M, P_A / G_hat)``; a tie takes ``P_M``."""
    if not (P_A > 0 and P_M > 0):
        raise ValueError("P_A and P_M must be positive")
    g = np.asarray(G_hat, dtype=float)
    if np.any(g <= 0):
        raise ValueError("estimated cross gain must be positive")
    out = np.where(g <= P_A / P_M, P_M, P_A / g)
    return float(out) if out.ndim == 0 else out


def _impairments(cfg: RfLinkConfig, k: int) -> tuple[float, float, int]:
    i = cfg.pilot_distance(k)
    r2i = cfg.rho_SR ** (2 * i)
    impair = r2i * cfg.N_a * cfg.sigma2_eps_SR + (1.0 - r2i) * cfg.N_a * cfg.innov
    return r2i, impair, i


def alpha_coeffs(cfg: RfLinkConfig, P_A: float, P_M: float, eta0: float, k: int):
    """Return ``(alpha1, alpha2, alpha3, i)`` for codeword ``k``.

    On the peak-power branch the SNR is ``alpha1 * G_SR``; on the
    interference-limited branch it is ``alpha2 * G_SR / (G_SP + alpha3)``.
    """
    if not (P_A > 0 and P_M > 0 and eta0 > 0):
        raise ValueError("P_A, P_M and eta0 must be positive")
    r2i, impair, i = _impairments(cfg, k)
    noise = float(cfg.R_c) * cfg.N_S * eta0
    alpha1 = P_M * r2i / (noise + P_M * impair)
    alpha2 = P_A * r2i / noise
    alpha3 = P_A * impair / noise
    return alpha1, alpha2, alpha3, i


def effective_snr(P_S, G_SR, cfg: RfLinkConfig, eta0: float, k: int):
    """Post-combining SNR for transmit power ``P_S`` and estimated SR gain ``G_SR``.

    The estimation error and the channel drift since the pilot act as extra
    noise proportional to the transmit power.
    """
    r2i, impair, _ = _impairments(cfg, k)
    noise = float(cfg.R_c) * cfg.N_S
    P_S = np.asarray(P_S, dtype=float)
    return P_S * r2i * np.asarray(G_SR) / (noise * eta0 + P_S * impair)


@dataclass(frozen=True)
class SrSnrModel:
    """Distribution parameters of the SR-link SNR at one codeword."""

    alpha1: float
    alpha2: float
    alpha3: float
    tau1: int
    tau2: int
    delta_SR: float
    delta_SP: float
    P_A: float
    P_M: float
    k: int = 1
    i: int = 0

    def __post_init__(self):
        if not (self.alpha1 > 0 and self.alpha2 > 0 and self.alpha3 >= 0):
            raise ValueError("need alpha1, alpha2 > 0 and alpha3 >= 0")
        if self.tau1 < 1 or self.tau2 < 1:
            raise ValueError("tau1 and tau2 must be >= 1")
        if not (self.delta_SR > 0 and self.delta_SP >= 0):
            raise ValueError("need delta_SR > 0 and delta_SP >= 0")
        if not (self.P_A > 0 and self.P_M > 0):
            raise ValueError("P_A and P_M must be positive")

    @classmethod
    def from_config(cls, cfg: RfLinkConfig, P_A: float, P_M: float, eta0: float, k: int):
        a1, a2, a3, i = alpha_coeffs(cfg, P_A, P_M, eta0, k)
        return cls(a1, a2, a3, cfg.tau1, cfg.tau2, cfg.delta_tilde_SR, cfg.delta_tilde_SP(k),
                   P_A, P_M, k, i)

    @property
    def ratio(self) -> float:
        return self.P_A / self.P_M

    @property
    def scale1(self) -> float:
        """Scale of the SNR on the peak-power branch, ``alpha1 * delta_SR``."""
        return self.alpha1 * self.delta_SR

    @property
    def p_peak(self) -> float:
        """Probability that the SU transmits at peak power."""
        if self.delta_SP == 0:
            return 1.0
        return reg_lower_gamma(self.tau2, self.ratio / self.delta_SP)


def _as_x(x):
    xa = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xa) & (xa != np.inf)) or np.any(xa < 0):
        raise ValueError("SNR argument must be non-negative")
    return xa


def _finish(out: np.ndarray, x):
    return float(out.reshape(-1)[0]) if np.ndim(x) == 0 else out.reshape(np.shape(x))


def _sorted_sum(terms: np.ndarray) -> np.ndarray:
    """Sum along axis 0 in ascending magnitude order."""
    order = np.argsort(np.abs(terms), axis=0)
    return np.sum(np.take_along_axis(terms, order, axis=0), axis=0)


def _params(models) -> dict:
    """Model parameters as column vectors, for broadcasting against an x row."""
    t1 = {m.tau1 for m in models}
    t2 = {m.tau2 for m in models}
    if len(t1) != 1 or len(t2) != 1:
        raise ValueError("batched evaluation needs a common (tau1, tau2)")
    col = lambda name: np.array([getattr(m, name) for m in models], dtype=float)[:, None]
    return {
        "tau1": t1.pop(), "tau2": t2.pop(),
        "a3": col("alpha3"), "d": col("delta_SP"), "r": col("ratio"),
        "s1": col("scale1"), "s2": col("alpha2") * col("delta_SR"),
    }


def _mixture_terms(pr: dict, u: np.ndarray, orders) -> np.ndarray:
    """Terms of the interference-limited branch, one row per (m, c).

    Each term is ``e^(-a3 u) (1 + d u)^-t2 w_m(u) C(m,c) a3^(m-c)
    Gamma(t2+c)/Gamma(t2) Q(t2+c, B r) B^-c`` with ``B = 1/d + u``;
    ``orders`` yields pairs ``(m, log w_m(u))``.
    """
    d, r, a3, t2 = pr["d"], pr["r"], pr["a3"], pr["tau2"]
    with np.errstate(divide="ignore"):
        B = 1.0 / d + u
        base = -a3 * u - t2 * np.log1p(d * u)
        la3 = np.log(a3)
    rows = []
    qcache = {}
    for mm, logw in orders:
        for c in range(mm + 1):
            if c not in qcache:
                q = reg_upper_gamma(t2 + c, np.broadcast_to(B * r, u.shape))
                with np.errstate(divide="ignore", invalid="ignore"):
                    lq = np.log(q) + math.lgamma(t2 + c) - math.lgamma(t2)
                    if c:
                        lq = lq - c * np.log(B)
                qcache[c] = lq
            logc = math.lgamma(mm + 1) - math.lgamma(c + 1) - math.lgamma(mm - c + 1)
            if mm > c:
                # a3 = 0 leaves only the c = m term
                lpow = np.where(a3 > 0, (mm - c) * la3, -np.inf)
            else:
                lpow = 0.0
            with np.errstate(over="ignore", under="ignore", invalid="ignore"):
                t = np.exp(base + logw + logc + lpow + qcache[c])
            rows.append(np.nan_to_num(t, nan=0.0))
    return np.array(rows)


def _cdf_core(pr: dict, x: np.ndarray) -> np.ndarray:
    """CDF for column-vector parameters ``pr`` and a row of ``x > 0``."""
    d, r, t1, t2 = pr["d"], pr["r"], pr["tau1"], pr["tau2"]
    with np.errstate(divide="ignore"):
        z = r / d
    p_peak = reg_lower_gamma(t2, np.broadcast_to(z, d.shape))
    q_peak = reg_upper_gamma(t2, np.broadcast_to(z, d.shape))
    xs = np.broadcast_to(x, np.broadcast_shapes(x.shape, d.shape))
    first = reg_lower_gamma(t1, xs / pr["s1"]) * p_peak
    u = xs / pr["s2"]
    with np.errstate(divide="ignore"):
        lu = np.log(u)
    orders = ((mm, mm * lu - math.lgamma(mm + 1)) for mm in range(t1))
    rows = _mixture_terms(pr, u, orders)
    terms = np.concatenate(
        [first[None], np.broadcast_to(q_peak, xs.shape)[None], -rows], axis=0
    )
    out = _sorted_sum(terms)
    # Near the origin the difference above cancels; there the branch is the
    # all-positive tail sum over orders m >= tau1 instead.
    small = out < 1e-6 * np.broadcast_to(q_peak, xs.shape)
    for row in np.flatnonzero(small.any(axis=1)):
        cols = np.flatnonzero(small[row])
        sub = {key: (val[row:row + 1] if isinstance(val, np.ndarray) else val)
               for key, val in pr.items()}
        tail = _tail_sum(sub, u[row:row + 1, cols])
        if tail is not None:
            out[row, cols] = first[row, cols] + tail
    return np.clip(out, 0.0, 1.0)


_TAIL_ORDERS = 400


def _tail_sum(pr: dict, u: np.ndarray):
    """Interference-limited branch as ``sum_{m >= tau1}`` of mixture terms (all positive).

    Same terms as :func:`_mixture_terms`, vectorised over ``c`` with the
    incomplete-gamma factors cached across orders.  Returns ``None`` when the
    series has not converged after ``_TAIL_ORDERS`` orders.
    """
    d, r, a3, t2 = pr["d"], pr["r"], float(pr["a3"].ravel()[0]), pr["tau2"]
    B = 1.0 / d + u
    base = -a3 * u - t2 * np.log1p(d * u)
    lB = np.log(B)
    lu = np.log(u)
    la3 = math.log(a3) if a3 > 0 else -math.inf
    lq: list[np.ndarray] = []
    total = np.zeros(u.shape)
    for mm in range(pr["tau1"], pr["tau1"] + _TAIL_ORDERS):
        while len(lq) <= mm:
            c = len(lq)
            q = reg_upper_gamma(t2 + c, B * r)
            with np.errstate(divide="ignore"):
                lq.append(np.log(q) + math.lgamma(t2 + c) - math.lgamma(t2) - c * lB)
        cs = np.arange(mm + 1) if a3 > 0 else np.array([mm])
        coef = np.array([-math.lgamma(c + 1) - math.lgamma(mm - c + 1) for c in cs])
        if a3 > 0:
            coef = coef + (mm - cs) * la3
        with np.errstate(under="ignore"):
            part = np.exp(base + mm * lu + coef[:, None, None]
                          + np.stack([lq[c] for c in cs])).sum(axis=0)
        total += part
        if mm > pr["tau1"] and np.all(part <= 1e-17 * total):
            return total[0]
    return None


def sr_snr_cdf_batch(models, x) -> np.ndarray:
    """CDF of several models with a common ``(tau1, tau2)``; shape ``(len(models), len(x))``."""
    xa = np.atleast_1d(_as_x(x)).ravel()
    out = np.zeros((len(models), xa.size))
    pos = xa > 0
    if np.any(pos):
        out[:, pos] = _cdf_core(_params(models), xa[pos][None, :])
    return out


def sr_snr_cdf(m: SrSnrModel, x):
    """CDF of the SR-link SNR."""
    out = sr_snr_cdf_batch([m], x)[0]
    return _finish(out, x)


def sr_snr_pdf(m: SrSnrModel, x):
    """Density of the SR-link SNR."""
    xa = np.atleast_1d(_as_x(x)).ravel()
    out = np.zeros_like(xa)
    pos = (xa > 0) & np.isfinite(xa)
    xp = xa[pos]
    if xp.size:
        t1 = m.tau1
        peak = special.gammaln(t1)
        with np.errstate(divide="ignore"):
            lx = np.log(xp)
        g1 = np.exp((t1 - 1) * lx - xp / m.scale1 - peak - t1 * math.log(m.scale1))
        if m.delta_SP == 0:
            out[pos] = g1
            return _finish(out, x)
        first = m.p_peak * g1
        pr = _params([m])
        scale2 = m.alpha2 * m.delta_SR
        u = xp[None, :] / scale2
        logw = (t1 - 1) * lx[None, :] - math.lgamma(t1) - t1 * math.log(scale2)
        rows = _mixture_terms(pr, u, [(t1, logw)])[:, 0, :]
        out[pos] = np.maximum(_sorted_sum(np.vstack([first[None, :], rows])), 0.0)
    return _finish(out, x)


def sr_snr_cdf_pa_inf(m: SrSnrModel, x):
    """Limit of the SR-link CDF as ``P_A`` grows without bound (peak power always)."""
    xa = _as_x(x)
    out = np.atleast_1d(reg_lower_gamma(m.tau1, np.atleast_1d(xa).ravel() / m.scale1))
    return _finish(out, x)


def sr_snr_cdf_oracle(m: SrSnrModel, x: float, epsabs: float = 1e-12) -> float:
    """Direct two-dimensional evaluation of the SR-link CDF.

    Averages the conditional Gamma CDF of the SR gain over the density of the
    cross gain, split at the power-control switch point.  Uses only scipy
    special functions, so it is independent of :func:`sr_snr_cdf`.
    """
    x = float(x)
    if x < 0:
        raise ValueError("x must be non-negative")
    if x == 0:
        return 0.0
    d, r = m.delta_SP, m.ratio
    peak = special.gammainc(m.tau1, x / m.scale1)
    if d == 0:
        return float(peak)
    p_peak = special.gammainc(m.tau2, r / d)
    s2 = m.alpha2 * m.delta_SR

    def f(g):
        dens = math.exp((m.tau2 - 1) * math.log(g) - g / d - special.gammaln(m.tau2)
                        - m.tau2 * math.log(d)) if g > 0 else 0.0
        return dens * special.gammainc(m.tau1, x * (g + m.alpha3) / s2)

    # split where the integrand changes character: the mode of the cross gain
    mode = max((m.tau2 - 1) * d, r)
    pts = [r, mode, mode + 10 * d * math.sqrt(m.tau2), math.inf]
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi <= lo:
            continue
        val, err = integrate.quad(f, lo, hi, epsabs=epsabs, epsrel=1e-12, limit=400)
        if err > 100 * max(epsabs, 1e-12 * abs(val)):
            raise RuntimeError(f"oracle quadrature did not converge (error {err:.2e})")
        total += val
    return float(p_peak * peak + total)
