"""Frame-level Monte Carlo simulation of the relay network.

Each frame draws, for every secondary transmitter, the estimated cross gain at
the first codeword, the estimated SU-relay gain at the pilot and one FSO SNR.
The cross gain is propagated to every codeword, the transmit power follows
the composite interference constraint and the per-codeword SR SNR follows the
effective-SNR law.  Frames are processed in blocks of ``BLOCK`` with one
independent random stream per (block, transmitter), so results do not depend
on how blocks are distributed over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .channels import RfLinkConfig, fso_sampler
from .linkstats import effective_snr
from .perf import ModulationConstants, ScenarioSet

__all__ = [
    "BLOCK",
    "McResult",
    "PrimaryConfig",
    "mc_outage",
    "mc_ber",
    "mc_sr_snr_samples",
    "mc_primary_outage",
    "block_rng",
]

BLOCK = 4096


@dataclass(frozen=True)
class McResult:
    estimate: float
    std_error: float
    frames: int
    seed: int
    per_k: tuple[float, ...] = ()
    peak_fraction: tuple[float, ...] = ()
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.frames <= 0:
            raise ValueError("frames must be positive")
        if not self.std_error >= 0:
            raise ValueError("std_error must be non-negative")


@dataclass(frozen=True)
class PrimaryConfig:
    """Primary link seen by the secondary network.

    The primary transmitter uses ``N_tx`` antennas with an orthogonal code at
    fixed power ``P_U`` towards ``N_rx`` antennas.  Its rate target is set so
    that the outage without secondary interference equals ``target``.
    ``interference="per_user"`` charges each secondary transmitter's
    interference separately (transmitters use orthogonal slots);
    ``"aggregate"`` sums it over all transmitters.
    """

    P_U: float = 100.0
    eta: float = 1.0
    N_tx: int = 2
    N_rx: int = 2
    target: float = 1e-3
    constraint: str = "composite"
    interference: str = "per_user"

    def __post_init__(self):
        if not (self.P_U > 0 and self.eta > 0 and 0 < self.target < 1):
            raise ValueError("P_U, eta must be positive and target in (0, 1)")
        if self.N_tx < 1 or self.N_rx < 1:
            raise ValueError("antenna counts must be positive")
        if self.constraint not in ("composite", "fixed"):
            raise ValueError("constraint must be 'composite' or 'fixed'")
        if self.interference not in ("per_user", "aggregate"):
            raise ValueError("interference must be 'per_user' or 'aggregate'")

    @property
    def order(self) -> int:
        return self.N_tx * self.N_rx

    @property
    def gain_threshold(self) -> float:
        """Channel gain below which the interference-free link is in outage."""
        return float(special.gammaincinv(self.order, self.target))

    @property
    def rate_target(self) -> float:
        return math.log2(1.0 + self.P_U * self.gain_threshold / (self.N_tx * self.eta))


def block_rng(seed: int, block: int, j: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block, j)))


def _check(frames) -> int:
    f = int(frames)
    if f != frames or f <= 0:
        raise ValueError("frames must be a positive integer")
    return f


def _blocks(frames: int):
    return [(b, min(BLOCK, frames - b * BLOCK)) for b in range(-(-frames // BLOCK))]


def _run(task, frames: int, workers: int | None):
    blocks = _blocks(frames)
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            return list(ex.map(task, blocks))
    return [task(b) for b in blocks]


def _power(G_hat: np.ndarray, P_A: float, P_M: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(G_hat <= P_A / P_M, P_M, P_A / G_hat)


def _cross_decay(cfg: RfLinkConfig) -> np.ndarray:
    k = np.arange(cfg.N_b)
    return cfg.rho_SP ** (2.0 * k)


def _sr_frame(cfg: RfLinkConfig, P_A: float, P_M: float, eta0: float,
              rng: np.random.Generator, n: int):
    """SR SNR and peak-branch flags, both of shape ``(n, N_b)``."""
    G_sp1 = rng.gamma(cfg.tau2, cfg.delta_tilde_SP(1), n)
    G_sr = rng.gamma(cfg.tau1, cfg.delta_tilde_SR, n)
    G_sp = G_sp1[:, None] * _cross_decay(cfg)[None, :]
    P_S = _power(G_sp, P_A, P_M)
    snr = np.empty_like(G_sp)
    for k in range(1, cfg.N_b + 1):
        snr[:, k - 1] = effective_snr(P_S[:, k - 1], G_sr, cfg, eta0, k)
    return snr, P_S == P_M


def _link_snr(s: ScenarioSet, seed: int, block: int, n: int):
    """Yield ``(j, min SNR (n, N_b), peak flags)`` for every transmitter."""
    sampler = fso_sampler(s.fso)
    for j, cfg in enumerate(s.links):
        rng = block_rng(seed, block, j)
        snr, peak = _sr_frame(cfg, s.P_A, s.P_M[j], s.eta0, rng, n)
        rd = sampler.sample(s.fso.mu, rng, n)
        yield j, np.minimum(snr, rd[:, None]), peak


def _reduce(parts, frames: int, seed: int, N_b: int, extra=None) -> McResult:
    tot = sum(p[0] for p in parts)
    sq = sum(p[1] for p in parts)
    per_k = sum(p[2] for p in parts) / frames
    peak = sum(p[3] for p in parts) / frames
    mean = tot / frames
    if frames > 1:
        var = max(sq - frames * mean * mean, 0.0) / (frames - 1)
        se = math.sqrt(var / frames)
    else:
        se = 0.0
    return McResult(float(mean), float(se), frames, int(seed),
                    tuple(float(v) for v in per_k), tuple(float(v) for v in peak),
                    extra or {})


def _metric(s: ScenarioSet, frames: int, seed: int, score, workers: int | None) -> McResult:
    J, N_b = s.J, s.N_b

    def task(blk):
        b, n = blk
        acc = np.zeros(n)
        per_k = np.zeros(N_b)
        peak = np.zeros(N_b)
        for _, gmin, pk in _link_snr(s, seed, b, n):
            v = score(gmin)
            acc += v.mean(axis=1)
            per_k += v.sum(axis=0)
            peak += pk.sum(axis=0)
        acc /= J
        return acc.sum(), float(np.dot(acc, acc)), per_k / J, peak / J

    return _reduce(_run(task, frames, workers), frames, seed, N_b)


def mc_outage(s: ScenarioSet, frames: int, seed: int = 0, workers: int | None = None) -> McResult:
    """Fraction of codewords whose end-to-end SNR falls below the threshold.

    ``std_error`` is the empirical standard error of the per-frame outage
    fraction, which accounts for the correlation between codewords of one
    frame.  ``per_k`` holds the outage per codeword index and
    ``peak_fraction`` the share of draws on the peak-power branch.
    """
    frames = _check(frames)
    th = s.gamma_th
    return _metric(s, frames, seed, lambda g: (g < th).astype(float), workers)


def mc_ber(s: ScenarioSet, mc: ModulationConstants, frames: int, seed: int = 0,
           workers: int | None = None) -> McResult:
    """Semi-analytic BER: conditional error probability averaged over sampled SNRs."""
    frames = _check(frames)
    return _metric(s, frames, seed, lambda g: 0.5 * _upper_reg(mc.a, mc.b * g), workers)


def _upper_reg(a: float, x: np.ndarray) -> np.ndarray:
    # closed forms for the binary schemes are far cheaper than the general routine
    if a == 0.5:
        return special.erfc(np.sqrt(x))
    if a == 1.0:
        return np.exp(-x)
    return special.gammaincc(a, x)


def mc_sr_snr_samples(cfg: RfLinkConfig, P_A: float, P_M: float, eta0: float, k: int,
                      count: int, seed: int = 0) -> np.ndarray:
    """Independent draws of the SR-link SNR at codeword ``k``."""
    count = _check(count)
    cfg.check_k(k)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))
    G_sp = rng.gamma(cfg.tau2, cfg.delta_tilde_SP(k), count)
    G_sr = rng.gamma(cfg.tau1, cfg.delta_tilde_SR, count)
    return effective_snr(_power(G_sp, P_A, P_M), G_sr, cfg, eta0, k)


def _complex_normal(rng, var: float, shape) -> np.ndarray:
    z = rng.standard_normal(shape + (2,))
    return math.sqrt(var / 2.0) * (z[..., 0] + 1j * z[..., 1])


def _true_cross_gains(cfg: RfLinkConfig, rng, n: int):
    """Estimated first-codeword cross gain and true cross gains at every codeword.

    The estimate is the true channel plus independent error, so given the
    estimate the true channel is Gaussian around a shrunk copy of it.  The
    true channel then follows its own AR1 recursion across codewords.
    """
    d2, e2, rho = cfg.delta2_SP, cfg.sigma2_eps_SP, cfg.rho_SP
    dims = (n, cfg.N_P * cfg.N_S)
    H_hat = _complex_normal(rng, d2 + e2, dims)
    shrink = d2 / (d2 + e2)
    H = shrink * H_hat
    if e2 > 0:
        H = H + _complex_normal(rng, d2 * e2 / (d2 + e2), dims)
    G_true = np.empty((n, cfg.N_b))
    G_true[:, 0] = np.sum(np.abs(H) ** 2, axis=1)
    w = math.sqrt(max(1.0 - rho * rho, 0.0))
    for k in range(1, cfg.N_b):
        if w > 0:
            H = rho * H + w * _complex_normal(rng, d2, dims)
        else:
            H = rho * H
        G_true[:, k] = np.sum(np.abs(H) ** 2, axis=1)
    return np.sum(np.abs(H_hat) ** 2, axis=1), G_true


def mc_primary_outage(pc: PrimaryConfig, s: ScenarioSet, frames: int, seed: int = 0,
                      workers: int | None = None) -> McResult:
    """Outage of the primary link under secondary interference.

    The primary channel gain is integrated out exactly: given the
    interference ``I`` the outage probability is the regularised lower
    incomplete gamma function at ``g0 * (1 + I / eta)``.  Using the same
    random streams for both constraint types makes their comparison pathwise.
    """
    frames = _check(frames)
    J, N_b = s.J, s.N_b
    g0, order = pc.gain_threshold, pc.order

    def task(blk):
        b, n = blk
        I = np.zeros((J, n, N_b))
        peak = np.zeros(N_b)
        for j, cfg in enumerate(s.links):
            rng = block_rng(seed, b, j)
            G1, G_true = _true_cross_gains(cfg, rng, n)
            G_hat = G1[:, None] * _cross_decay(cfg)[None, :]
            if pc.constraint == "composite":
                P_S = _power(G_hat, s.P_A, s.P_M[j])
                peak += (P_S == s.P_M[j]).sum(axis=0)
            else:
                with np.errstate(divide="ignore"):
                    P_S = s.P_A / G_hat
            I[j] = np.where(G_true > 0, P_S * G_true, 0.0)
        if pc.interference == "aggregate":
            out = special.gammainc(order, g0 * (1.0 + I.sum(axis=0) / pc.eta))
            v = out.mean(axis=1)
            per_k = out.sum(axis=0)
        else:
            out = special.gammainc(order, g0 * (1.0 + I / pc.eta))
            v = out.mean(axis=(0, 2))
            per_k = out.sum(axis=(0, 1)) / J
        return v.sum(), float(np.dot(v, v)), per_k, peak / J

    return _reduce(_run(task, frames, workers), frames, seed, N_b,
                   {"rate_target": pc.rate_target, "gain_threshold": g0})

