"""Acceptance criteria 1-9.

Each test records one ``C<n> PASS|FAIL`` line (shown in the terminal summary)
and then asserts the criterion at its stated tolerance.
"""

import math
from dataclasses import replace

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate, optimize, special

from cogrelay import cli
from cogrelay.channels import MPH, fso_snr_cdf, fso_snr_pdf
from cogrelay.linkstats import (
    sr_snr_cdf,
    sr_snr_cdf_oracle,
    sr_snr_cdf_pa_inf,
    sr_snr_pdf,
)
from cogrelay.mcsim import mc_ber, mc_outage, mc_primary_outage, mc_sr_snr_samples
from cogrelay.perf import (
    BPSK,
    DBPSK,
    ber_avg,
    ber_floor,
    ber_symbol,
    cond_ber,
    outage_avg,
    outage_floor,
)
from cogrelay.scenarios import SystemConfig, preset
from cogrelay.specfun import MeijerGConvergenceError, meijer_g

from conftest import subgrid_ks_bound, turbulence
from test_specfun import MODEL_G, XS, mp_meijer

FRAMES = 1_000_000


def _report(log, n, checks):
    """``checks``: list of (ok, description).  Logs one line, returns overall status."""
    ok = all(c for c, _ in checks)
    bad = [d for c, d in checks if not c]
    detail = "; ".join(bad) if bad else f"{len(checks)} checks"
    line = f"C{n} {'PASS' if ok else 'FAIL'}: {detail}"
    log.append(line)
    print(line)
    return ok, line


def _point(pid, label, x):
    fp = preset(pid)
    (v,) = [v for v in fp.variants if v.label == label]
    return fp.config(v, x)


# --- 1 ------------------------------------------------------------------------------

@pytest.mark.slow
def test_c1_sr_snr_law(acceptance_log):
    checks = []
    for speed in (0.0, 17 * MPH):
        for L in (1, 25):
            cfg = SystemConfig(L=L, speed_SR=speed, speed_SP=speed, sigma2_eps_SR=0.1,
                               sigma2_eps_SP=0.1, P_A_dB=10.0)
            s = cfg.scenario()
            link = s.links[0]
            for k in (1, 25, 50):
                m = s.model(0, k)
                x = np.sort(mc_sr_snr_samples(link, s.P_A, s.P_M[0], s.eta0, k, FRAMES,
                                              seed=100 * L + k))
                ks = subgrid_ks_bound(x, lambda v: sr_snr_cdf(m, v), 20001)
                grid = np.logspace(-2, math.log10(200 * m.scale1), 30)
                ref = np.array([sr_snr_cdf_oracle(m, v) for v in grid])
                dev = float(np.max(np.abs(sr_snr_cdf(m, grid) - ref)))
                tag = f"v={speed:.2f} L={L} k={k}"
                checks.append((ks < 0.002, f"{tag} KS bound {ks:.5f}"))
                checks.append((dev < 1e-8, f"{tag} oracle dev {dev:.2e}"))
    ok, line = _report(acceptance_log, 1, checks)
    assert ok, line


# --- 2 ------------------------------------------------------------------------------

def _integrated_pdf(p, x):
    f = lambda t: math.exp(t) * float(fso_snr_pdf(p, math.exp(t)))
    hi = math.log(x)
    val, _ = integrate.quad(f, min(hi, math.log(p.mu)) - 70.0, hi, epsabs=1e-13,
                            epsrel=1e-11, limit=500)
    return val


def test_c2_fso_cdf_is_integrated_pdf(acceptance_log):
    checks = []
    for name in ("moderate", "strong"):
        for theta in (1, 2):
            p = turbulence(name, theta)
            x = p.mu * np.logspace(-4, 2, 50)
            F = fso_snr_cdf(p, x)
            dev = max(abs(F[i] - _integrated_pdf(p, v)) for i, v in enumerate(x))
            checks.append((dev < 1e-6, f"{name} theta={theta} max dev {dev:.2e}"))
    ok, line = _report(acceptance_log, 2, checks)
    assert ok, line


# --- 3 ------------------------------------------------------------------------------

C3_POINTS = (
    [("fig2a", v, 10.0) for v in ("static", "su_25mph", "su_45mph", "pu_45mph")]
    + [("fig3", v, 10.0) for v in ("preamble_moderate", "midamble_moderate")]
    + [("fig4", v, 2.0) for v in ("d_SP_1", "d_SP_5")]
    + [("fig5", "default", n) for n in (2, 4)]
)


@pytest.mark.slow
def test_c3_outage_closed_vs_monte_carlo(acceptance_log):
    checks = []
    for i, (pid, label, x) in enumerate(C3_POINTS):
        s = _point(pid, label, x).scenario()
        ref = outage_avg(s)
        r = mc_outage(s, FRAMES, seed=31 + i)
        binom = math.sqrt(ref * (1 - ref) / FRAMES)
        z = abs(r.estimate - ref) / r.std_error
        checks.append((z < 3.0, f"{pid}/{label}@{x}: closed {ref:.4e} mc {r.estimate:.4e} "
                                f"se {r.std_error:.1e} (binomial {binom:.1e}) z={z:.2f}"))
    ok, line = _report(acceptance_log, 3, checks)
    assert ok, line


# --- 4 ------------------------------------------------------------------------------

@pytest.mark.slow
def test_c4_ber_closed_vs_monte_carlo(acceptance_log):
    checks = []
    fp = preset("fig6")
    for i, v in enumerate(fp.variants):
        s = fp.config(v, 10.0).scenario()
        for mc, name in ((BPSK, "BPSK"), (DBPSK, "DBPSK")):
            ref = ber_avg(s, mc)
            if ref < 1e-5:
                continue
            r = mc_ber(s, mc, FRAMES, seed=41 + i)
            z = abs(r.estimate - ref) / r.std_error
            checks.append((z < 3.0, f"{v.label} {name}: closed {ref:.4e} mc {r.estimate:.4e} "
                                    f"z={z:.2f}"))
        converged = 0
        for k in (1, 25, 50):
            m = s.model(0, k)
            for mc in (BPSK, DBPSK):
                biv = ber_symbol(m, s.fso, mc, l3_backend="bivariate")
                if biv.l3_backend != "bivariate":
                    continue
                converged += 1
                q = ber_symbol(m, s.fso, mc).L3
                rel = abs(biv.L3 - q) / abs(q)
                checks.append((rel < 1e-4, f"{v.label} k={k} bivariate L3 rel {rel:.1e}"))
        checks.append((True, f"{v.label}: bivariate converged {converged}/6"))
    ok, line = _report(acceptance_log, 4, checks)
    assert ok, line


# --- 5 ------------------------------------------------------------------------------

def test_c5_floor_limits(acceptance_log):
    checks = []
    for pid, label in (("fig2a", "static"), ("fig2a", "su_25mph"), ("fig6", "pu_45mph")):
        s = _point(pid, label, 10.0).scenario()
        bright = s.replace(fso=replace(s.fso, mu=1e12))
        loose = s.replace(P_A=1e12)
        pairs = [("outage mu", outage_avg(bright), outage_floor(s, "mu_inf")),
                 ("outage P_A", outage_avg(loose), outage_floor(s, "pa_inf"))]
        for mc, name in ((BPSK, "BPSK"), (DBPSK, "DBPSK")):
            pairs += [(f"{name} mu", ber_avg(bright, mc), ber_floor(s, mc, "mu_inf")),
                      (f"{name} P_A", ber_avg(loose, mc), ber_floor(s, mc, "pa_inf"))]
        for what, val, floor in pairs:
            rel = abs(val - floor) / floor
            checks.append((rel < 0.01, f"{pid}/{label} {what}: rel {rel:.1e}"))
    ok, line = _report(acceptance_log, 5, checks)
    assert ok, line


# --- 6 ------------------------------------------------------------------------------

def test_c6_relay_antenna_gain(acceptance_log):
    lo = outage_avg(_point("fig5", "default", 2).scenario())
    hi = outage_avg(_point("fig5", "default", 4).scenario())
    checks = [(0.05 <= lo <= 0.2, f"N_R=2 outage {lo:.4g} vs 0.1"),
              (5e-4 <= hi <= 2e-3, f"N_R=4 outage {hi:.4g} vs 0.001")]
    ok, line = _report(acceptance_log, 6, checks)
    acceptance_log[-1] += f" (N_R=2 {lo:.4g}, N_R=4 {hi:.4g})"
    assert ok, line


# --- 7 ------------------------------------------------------------------------------

def test_c7_distance_claims(acceptance_log):
    near = outage_avg(_point("fig4", "d_SP_1", 2.0).scenario())

    def gap(d_sr):
        return math.log(outage_avg(_point("fig4", "d_SP_5", d_sr).scenario()) / near)

    d_eq = optimize.brentq(gap, 2.0, 20.0, xtol=1e-3)
    checks = [(1.6e-3 / 1.5 <= near <= 1.6e-3 * 1.5,
               f"outage at d_SP=1, d_SR=2 is {near:.4g}, claim 1.6e-3 (x1.5)"),
              (abs(d_eq - 10.5) <= 1.5, f"equal-outage d_SR at d_SP=5 is {d_eq:.2f}, claim 10.5")]
    ok, line = _report(acceptance_log, 7, checks)
    acceptance_log[-1] += f" (outage {near:.4g}, d_SR {d_eq:.2f})"
    assert ok, line


# --- 8 ------------------------------------------------------------------------------

@pytest.mark.slow
def test_c8_orderings(acceptance_log):
    checks = []
    f3 = preset("fig3")
    for turb in ("moderate", "strong"):
        for x in f3.sweep_values:
            pre = outage_avg(_point("fig3", f"preamble_{turb}", x).scenario())
            mid = outage_avg(_point("fig3", f"midamble_{turb}", x).scenario())
            checks.append((mid < pre, f"fig3 {turb} P_A={x}: midamble {mid:.3e} "
                                      f"preamble {pre:.3e}"))
    for x in (0.0, 5.0, 10.0, 15.0):
        o = {v: outage_avg(_point("fig2a", v, x).scenario())
             for v in ("static", "su_25mph", "su_45mph", "pu_45mph")}
        checks.append((o["pu_45mph"] < o["static"] < min(o["su_25mph"], o["su_45mph"]),
                       f"fig2a P_A={x}: {o}"))
    f8 = preset("fig8")
    for x in f8.sweep_values:
        est = {}
        for v in f8.variants:
            cfg = f8.config(v, x)
            est[v.label] = mc_primary_outage(cli._primary(cfg), cfg.scenario(), 30_000,
                                             seed=8).estimate
        checks.append((est["composite"] <= est["fixed_only"], f"fig8 P_A={x}: {est}"))
    ok, line = _report(acceptance_log, 8, checks)
    assert ok, line


# --- 9 ------------------------------------------------------------------------------

def _monotone_cdf(F, top):
    F = np.asarray(F)
    return bool(np.all(np.diff(F) >= 0) and F[0] >= 0 and abs(top - 1.0) < 1e-9)


def test_c9_property_suites(acceptance_log):
    checks = []
    x = np.logspace(-4, 4, 200)
    for name in ("moderate", "strong"):
        for theta in (1, 2):
            p = turbulence(name, theta)
            ok = _monotone_cdf(fso_snr_cdf(p, x * p.mu), fso_snr_cdf(p, 1e8 * p.mu))
            checks.append((ok and fso_snr_cdf(p, 0.0) == 0.0, f"FSO CDF {name} theta={theta}"))

    s = _point("fig2a", "su_45mph", 10.0).scenario()
    for k in (1, 25, 50):
        m = s.model(0, k)
        g = x * m.scale1
        checks.append((_monotone_cdf(sr_snr_cdf(m, g), sr_snr_cdf(m, 1e8 * m.scale1)),
                       f"SR CDF k={k}"))
        total, _ = integrate.quad(lambda t: math.exp(t) * float(sr_snr_pdf(m, math.exp(t))),
                                  math.log(m.scale1) - 40, math.log(m.scale1) + 12, limit=400)
        checks.append((abs(total - 1) < 1e-7, f"SR PDF k={k} mass {total:.10f}"))
        checks.append((_monotone_cdf(sr_snr_cdf_pa_inf(m, g),
                                     sr_snr_cdf_pa_inf(m, 1e8 * m.scale1)),
                       f"SR CDF without interference cap k={k}"))
        e2e = 1 - (1 - sr_snr_cdf(m, g)) * (1 - fso_snr_cdf(s.fso, g))
        checks.append((bool(np.all(np.diff(e2e) >= 0)) and e2e[-1] <= 1, f"e2e CDF k={k}"))

    gam = np.logspace(-3, 2, 400)
    for mc in (BPSK, DBPSK):
        checks.append((bool(np.all(np.diff(cond_ber(gam, mc)) < 0)), f"cond_ber {mc}"))

    small = _point("fig5", "default", 2).scenario()
    a = mc_outage(small, 20_000, seed=3)
    checks.append((a == mc_outage(small, 20_000, seed=3, workers=3), "MC determinism"))

    frames = 200_000
    r = mc_outage(small, frames, seed=9)
    link = small.links[0]
    for k in (1, 25, 50):
        p = special.gammainc(link.tau2, (small.P_A / small.P_M[0]) / link.delta_tilde_SP(k))
        se = math.sqrt(p * (1 - p) / frames)
        checks.append((abs(r.peak_fraction[k - 1] - p) < 3 * se + 1e-12,
                       f"branch weight k={k}: {r.peak_fraction[k - 1]:.5f} vs {p:.5f}"))

    for label, spec, scale in MODEL_G:
        for v in XS:
            arg = v * scale / 100.0 if "pdf" not in label and "l1" not in label else v
            con = meijer_g(spec, arg, "contour")
            try:
                res = meijer_g(spec, arg, "residue")
                agree = abs(con - res) <= 1e-8 * abs(res) + 1e-300
            except MeijerGConvergenceError:
                with mp.workdps(40):
                    ref = mp_meijer(spec, arg)
                agree = abs(con - ref) <= 1e-8 * abs(ref) + 1e-250
            checks.append((agree, f"G {label} at {arg:.3g}"))
    ok, line = _report(acceptance_log, 9, checks)
    assert ok, line
