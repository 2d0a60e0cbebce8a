"""Special functions used by the outage and error-rate closed forms.

Incomplete gamma functions, the Bessel function J0, the truncated-gamma
helper ``j_func`` and Meijer G evaluation.  Meijer G has two independent
backends: a residue series over the poles of the left gamma group, and a
numerical Mellin-Barnes integral along a vertical line.  The bivariate
(Shah-type) G function is evaluated by a double Mellin-Barnes integral.

All functions are pure; the array-valued ones broadcast over ``x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln, gammasgn, loggamma

__all__ = [
    "SpecfunDomainError",
    "MeijerGConvergenceError",
    "reg_lower_gamma",
    "reg_upper_gamma",
    "upper_gamma",
    "lower_gamma",
    "j_func",
    "bessel_j0",
    "MeijerGSpec",
    "BivariateGSpec",
    "meijer_g",
    "meijer_g_bivariate",
]

_EPS = np.finfo(float).eps
_TINY = 1e-300
# Parameters closer than this to an integer difference count as coincident poles.
_POLE_TOL = 1e-9
# Symmetric perturbation used to split coincident poles.
_POLE_EPS = 1e-6


class SpecfunDomainError(ValueError):
    """Argument outside the domain of a special function."""


class MeijerGConvergenceError(RuntimeError):
    """A Meijer G backend failed to converge.

    ``diagnostics`` carries backend-specific details (step size, truncation,
    error estimate, ...).
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


# ---------------------------------------------------------------------------
# Incomplete gamma
# ---------------------------------------------------------------------------

def _is_integer(s: float) -> bool:
    return float(s).is_integer()


def _p_series(s: float, x: np.ndarray) -> np.ndarray:
    # P(s, x) = x^s e^-x / Gamma(s+1) * sum_k x^k / ((s+1)...(s+k)); good for x < s + 1
    term = np.ones_like(x)
    total = np.ones_like(x)
    ap = float(s)
    for _ in range(10000):
        ap += 1.0
        term = term * x / ap
        total = total + term
        if np.all(term <= total * _EPS * 0.5):
            break
    with np.errstate(divide="ignore"):
        logpref = s * np.log(x) - x - math.lgamma(s + 1.0)
    return np.where(x > 0, total * np.exp(logpref), 0.0)


def _q_contfrac(s: float, x: np.ndarray) -> np.ndarray:
    # modified Lentz evaluation of the continued fraction for Gamma(s, x); x >= s + 1
    fpmin = 1e-300
    b = x + 1.0 - s
    c = np.full_like(x, 1.0 / fpmin)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, 10000):
        an = -i * (i - s)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < fpmin, fpmin, d)
        c = b + an / c
        c = np.where(np.abs(c) < fpmin, fpmin, c)
        d = 1.0 / d
        delta = d * c
        h = h * delta
        if np.all(np.abs(delta - 1.0) < _EPS):
            break
    return np.exp(-x + s * np.log(x) - math.lgamma(s)) * h


def _q_finite_sum(s: int, x: np.ndarray) -> np.ndarray:
    # Gamma(s, x)/Gamma(s) = e^-x sum_{m<s} x^m/m! for integer s
    term = np.ones_like(x)
    total = np.ones_like(x)
    for m in range(1, s):
        term = term * x / m
        total = total + term
    return np.exp(-x) * total


def _gamma_pq(s: float, x) -> tuple[np.ndarray, np.ndarray]:
    """Return the regularized pair (P, Q) with full relative accuracy on each side."""
    s = float(s)
    if not (s > 0) or not math.isfinite(s):
        raise SpecfunDomainError(f"incomplete gamma needs s > 0, got {s}")
    xa = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(xa) & ~(xa == np.inf)) or np.any(xa < 0):
        raise SpecfunDomainError("incomplete gamma needs x >= 0")
    xa = np.atleast_1d(xa)
    p = np.empty_like(xa)
    q = np.empty_like(xa)
    inf = np.isinf(xa)
    low = (xa < s + 1.0) & ~inf
    high = ~low & ~inf
    if np.any(low):
        p[low] = _p_series(s, xa[low])
        q[low] = 1.0 - p[low]
    if np.any(high):
        if _is_integer(s) and s <= 200:
            q[high] = _q_finite_sum(int(s), xa[high])
        else:
            q[high] = _q_contfrac(s, xa[high])
        p[high] = 1.0 - q[high]
    p[inf] = 1.0
    q[inf] = 0.0
    return p, q


def _shape_like(value: np.ndarray, x):
    if np.ndim(x) == 0:
        return float(value[0])
    return value.reshape(np.shape(x))


def reg_lower_gamma(s: float, x):
    """Regularized lower incomplete gamma ``gamma(s, x) / Gamma(s)``."""
    p, _ = _gamma_pq(s, x)
    return _shape_like(p, x)


def reg_upper_gamma(s: float, x):
    """Regularized upper incomplete gamma ``Gamma(s, x) / Gamma(s)``."""
    _, q = _gamma_pq(s, x)
    return _shape_like(q, x)


def upper_gamma(s: float, x):
    """Upper incomplete gamma ``Gamma(s, x)`` (not regularized)."""
    _, q = _gamma_pq(s, x)
    return _shape_like(q * math.gamma(float(s)), x)


def lower_gamma(s: float, x):
    """Lower incomplete gamma ``gamma(s, x)`` (not regularized)."""
    p, _ = _gamma_pq(s, x)
    return _shape_like(p * math.gamma(float(s)), x)


def j_func(a: int, b, ratio: float):
    """Truncated gamma integral ``int_ratio^inf z^(a-1) e^(-b z) dz = Gamma(a, b*ratio) / b^a``.

    ``b`` may be an array.  ``a`` must be a positive integer.
    """
    if int(a) != a or a < 1:
        raise SpecfunDomainError(f"j_func needs a positive integer a, got {a}")
    ba = np.asarray(b, dtype=float)
    if np.any(ba <= 0):
        raise SpecfunDomainError("j_func needs b > 0")
    if ratio < 0:
        raise SpecfunDomainError("j_func needs ratio >= 0")
    _, q = _gamma_pq(a, np.atleast_1d(ba) * ratio)
    out = q * np.exp(math.lgamma(a) - a * np.log(np.atleast_1d(ba)))
    return _shape_like(out, b)


# ---------------------------------------------------------------------------
# Bessel J0
# ---------------------------------------------------------------------------

def _j0_series(x: np.ndarray) -> np.ndarray:
    q = -(x * x) / 4.0
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, 200):
        term = term * q / (k * k)
        total = total + term
        if np.all(np.abs(term) <= _EPS * 1e-2 * np.maximum(np.abs(total), 1e-30)):
            break
    return total


def _j0_asymptotic(x: np.ndarray) -> np.ndarray:
    # Hankel expansion; only used for |x| > 20 where the smallest term is ~e^-40
    pp = np.zeros_like(x)
    qq = np.zeros_like(x)
    coeff = 1.0
    inv8x = 1.0 / (8.0 * x)
    powk = np.ones_like(x)
    for k in range(0, 30):
        # a_k = prod_{i=1..k} (-(2i-1)^2) / (k! 8^k), applied with 1/x^k
        if k > 0:
            coeff *= -((2 * k - 1) ** 2) / k
            powk = powk * inv8x
        term = coeff * powk
        if k % 2 == 0:
            pp = pp + term * (-1) ** (k // 2)
        else:
            qq = qq + term * (-1) ** (k // 2)
    chi = x - math.pi / 4.0
    return np.sqrt(2.0 / (math.pi * x)) * (pp * np.cos(chi) + qq * np.sin(chi))


def bessel_j0(x):
    """Bessel function of the first kind, order zero."""
    xa = np.abs(np.atleast_1d(np.asarray(x, dtype=float)))
    if not np.all(np.isfinite(xa)):
        raise SpecfunDomainError("bessel_j0 needs finite input")
    out = np.empty_like(xa)
    small = xa <= 20.0
    if np.any(small):
        out[small] = _j0_series(xa[small])
    if np.any(~small):
        out[~small] = _j0_asymptotic(xa[~small])
    return _shape_like(out, x)


# ---------------------------------------------------------------------------
# Meijer G
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeijerGSpec:
    """Parameters of ``G^{m,n}_{p,q}(x | a; b)``.

    ``a`` has ``p`` entries (the first ``n`` enter as Gamma(1 - a_j - s)),
    ``b`` has ``q`` entries (the first ``m`` enter as Gamma(b_j + s)).
    """

    m: int
    n: int
    a: tuple[float, ...]
    b: tuple[float, ...]
    p: int = field(init=False)
    q: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(v) for v in self.a))
        object.__setattr__(self, "b", tuple(float(v) for v in self.b))
        object.__setattr__(self, "p", len(self.a))
        object.__setattr__(self, "q", len(self.b))
        if not (0 <= self.m <= self.q and 0 <= self.n <= self.p):
            raise SpecfunDomainError(
                f"invalid Meijer G indices m={self.m}, n={self.n}, p={self.p}, q={self.q}"
            )
        # the left (b) and right (a) pole families must be separable
        for bj in self.b[: self.m]:
            for aj in self.a[: self.n]:
                d = aj - bj - 1.0
                if d > -_POLE_TOL and abs(d - round(d)) < _POLE_TOL:
                    raise SpecfunDomainError(
                        f"poles of Gamma(b+s) and Gamma(1-a-s) overlap (a={aj}, b={bj})"
                    )

    @property
    def evaluable_by_residues(self) -> bool:
        """True when the left poles are pairwise distinct (simple poles)."""
        return not _coincident_groups(self.b[: self.m])

    @property
    def decay(self) -> float:
        """Exponential decay rate of the Mellin-Barnes integrand, ``m + n - (p+q)/2``."""
        return self.m + self.n - 0.5 * (self.p + self.q)

    def inverted(self) -> "MeijerGSpec":
        """Parameters of the same function in the argument ``1/x``."""
        return MeijerGSpec(
            self.n, self.m, tuple(1.0 - v for v in self.b), tuple(1.0 - v for v in self.a)
        )


def _coincident_groups(params: Sequence[float]) -> list[list[int]]:
    """Index groups whose members differ by integers (coincident pole ladders)."""
    groups: list[list[int]] = []
    used = set()
    for i, bi in enumerate(params):
        if i in used:
            continue
        grp = [i]
        for j in range(i + 1, len(params)):
            d = params[j] - bi
            if abs(d - round(d)) < _POLE_TOL:
                grp.append(j)
                used.add(j)
        if len(grp) > 1:
            groups.append(grp)
    return groups


def _log_kernel(spec: MeijerGSpec, s: np.ndarray) -> np.ndarray:
    """log of the Mellin-Barnes kernel (complex), with -inf at zeros."""
    out = np.zeros_like(s, dtype=complex)
    for j in range(spec.m):
        out += loggamma(spec.b[j] + s)
    for j in range(spec.n):
        out += loggamma(1.0 - spec.a[j] - s)
    for j in range(spec.m, spec.q):
        out -= loggamma(1.0 - spec.b[j] - s)
    for j in range(spec.n, spec.p):
        out -= loggamma(spec.a[j] + s)
    return np.nan_to_num(out, nan=-np.inf, posinf=np.inf, neginf=-np.inf)


# -- residue backend --------------------------------------------------------

def _left_coefficients(spec: MeijerGSpec, h: int, kmax: int) -> tuple[np.ndarray, np.ndarray]:
    """log-magnitude and sign of the x-independent residue coefficients at s = -b_h - k."""
    bh = spec.b[h]
    k = np.arange(kmax, dtype=float)
    logc = -gammaln(k + 1.0)
    sgn = np.where(k % 2 == 0, 1.0, -1.0)
    for j in range(spec.m):
        if j != h:
            # Gamma(d - k) by downward recurrence from Gamma(d): forming d - k
            # directly loses the digits that matter next to a pole
            d = spec.b[j] - bh
            steps = d - k[1:]
            logc = logc + gammaln(d) - np.concatenate(([0.0], np.cumsum(np.log(np.abs(steps)))))
            sgn = sgn * gammasgn(d) * np.concatenate(([1.0], np.cumprod(np.sign(steps))))
    for j in range(spec.n):
        arg = 1.0 - spec.a[j] + bh + k
        logc = logc + gammaln(arg)
        sgn = sgn * gammasgn(arg)
    # reciprocal gammas vanish at non-positive integers
    for arg in [1.0 - spec.b[j] + bh + k for j in range(spec.m, spec.q)] + [
        spec.a[j] - bh - k for j in range(spec.n, spec.p)
    ]:
        pole = (arg <= 0) & (np.abs(arg - np.round(arg)) < 1e-12)
        logc = logc - np.where(pole, 0.0, gammaln(np.where(pole, 1.0, arg)))
        sgn = sgn * np.where(pole, 0.0, gammasgn(np.where(pole, 1.0, arg)))
    return logc, sgn


def _residue_left_series(spec: MeijerGSpec, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sum of residues at the left poles s = -b_h - k.  Returns (values, error estimates)."""
    lx = np.log(x)
    lxmax = float(np.max(lx))
    values = np.zeros_like(x)
    maxabs = np.zeros_like(x)
    nterms = 0
    for h in range(spec.m):
        bh = spec.b[h]
        kmax = 64
        while True:
            logc, sgn = _left_coefficients(spec, h, kmax)
            k = np.arange(kmax, dtype=float)
            # convergence is judged at the largest argument of the batch
            edge = logc + (bh + k) * lxmax
            live = sgn != 0
            if not np.any(live):
                break
            top = float(np.max(edge[live]))
            tail = edge[-8:][live[-8:]]
            if tail.size == 0 or float(np.max(tail)) < top + math.log(1e-18):
                break
            if kmax >= 16384:
                raise MeijerGConvergenceError(
                    "residue series did not converge",
                    {"backend": "residue", "x_max": float(np.exp(lxmax)), "terms": kmax},
                )
            kmax *= 2
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            logt = logc[None, :] + (bh + k)[None, :] * lx[:, None]
            t = sgn[None, :] * np.exp(logt)
        if not np.all(np.isfinite(t)):
            raise MeijerGConvergenceError(
                "residue terms overflow", {"backend": "residue", "h": h}
            )
        values = values + np.sum(t, axis=1)
        maxabs = np.maximum(maxabs, np.max(np.abs(t), axis=1))
        nterms = max(nterms, kmax)
    # each term carries ~|log| * eps relative error from exp(log)
    err = maxabs * _EPS * (64.0 + np.abs(lx) + math.log2(max(nterms, 2)))
    return values, err


def _residue_simple(spec: MeijerGSpec, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vals = np.full_like(x, np.nan)
    errs = np.full_like(x, np.inf)
    if spec.p < spec.q:
        left = np.ones(x.shape, dtype=bool)
    elif spec.p > spec.q:
        left = np.zeros(x.shape, dtype=bool)
    else:
        left = x < 1.0
        if np.any(x == 1.0):
            raise MeijerGConvergenceError(
                "residue series does not converge at x = 1 for p = q", {"backend": "residue"}
            )
    for mask, sp, arg in ((left, spec, x), (~left, spec.inverted(), 1.0 / x)):
        if not np.any(mask):
            continue
        if sp.m == 0:
            vals[mask], errs[mask] = 0.0, 0.0
            continue
        vals[mask], errs[mask] = _residue_left_series(sp, arg[mask])
    return vals, errs


def _perturbed(spec: MeijerGSpec, sign: float) -> MeijerGSpec:
    a = list(spec.a)
    b = list(spec.b)
    for grp in _coincident_groups(b[: spec.m]):
        for rank, j in enumerate(grp[1:], start=1):
            b[j] += sign * rank * _POLE_EPS
    for grp in _coincident_groups(a[: spec.n]):
        for rank, j in enumerate(grp[1:], start=1):
            a[j] += sign * rank * _POLE_EPS
    return MeijerGSpec(spec.m, spec.n, tuple(a), tuple(b))


def _residue(spec: MeijerGSpec, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if _coincident_groups(spec.b[: spec.m]) or _coincident_groups(spec.a[: spec.n]):
        # split coincident poles symmetrically and average; the bias is O(eps^2)
        v1, e1 = _residue_simple(_perturbed(spec, +1.0), x)
        v2, e2 = _residue_simple(_perturbed(spec, -1.0), x)
        value = 0.5 * (v1 + v2)
        err = np.maximum(e1, e2) + _POLE_EPS * np.abs(v1 - v2)
        return value, err
    return _residue_simple(spec, x)


# -- contour backend --------------------------------------------------------

def _strip(spec: MeijerGSpec) -> tuple[float, float]:
    left = max((-bj for bj in spec.b[: spec.m]), default=-math.inf)
    right = min((1.0 - aj for aj in spec.a[: spec.n]), default=math.inf)
    return left, right


def _offsets(spec: MeijerGSpec, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-point contour offset near the real saddle of |kernel * x^-s|, and pole clearance."""
    lo, hi = _strip(spec)
    if not lo < hi:
        raise MeijerGConvergenceError("no vertical contour separates the pole families")
    width = hi - lo
    margin = 0.25 * min(width, 1.0) if math.isfinite(width) else 0.25
    # an open side of the strip may need a far offset when |log x| is large
    xm = float(np.max(np.maximum(x, 1.0 / x)))
    span = min(60.0 + 2.0 * xm, 5000.0)
    a = lo + margin if math.isfinite(lo) else (hi - span if math.isfinite(hi) else -span)
    b = hi - margin if math.isfinite(hi) else (lo + span if math.isfinite(lo) else span)
    if a >= b:
        cgrid = np.array([0.5 * (lo + hi)])
    else:
        # dense near the finite ends, where saddles usually sit
        u = np.linspace(0.0, 1.0, 401)
        cgrid = a + (b - a) * u**2 if not math.isfinite(hi) else a + (b - a) * u
        if not math.isfinite(lo) and math.isfinite(hi):
            cgrid = b - (b - a) * u**2
    logk = np.real(_log_kernel(spec, cgrid + 0j))
    phi = logk[None, :] - cgrid[None, :] * np.log(x)[:, None]
    c = cgrid[np.argmin(phi, axis=1)]
    dists = [c + bj for bj in spec.b[: spec.m]] + [1.0 - aj - c for aj in spec.a[: spec.n]]
    clearance = np.min(np.vstack(dists), axis=0) if dists else np.ones_like(c)
    return c, clearance


def _contour(spec: MeijerGSpec, x: np.ndarray, rtol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    delta = spec.decay
    if delta <= 0:
        raise MeijerGConvergenceError(
            "Mellin-Barnes integrand does not decay (m + n <= (p+q)/2)",
            {"backend": "contour", "decay": delta},
        )
    c, clearance = _offsets(spec, x)
    lx = np.log(x)

    def integrand(cc, ll, t):
        s = cc[:, None] + 1j * t[None, :]
        lk = _log_kernel(spec, s) - s * ll[:, None]
        with np.errstate(over="ignore", under="ignore"):
            return np.real(np.exp(lk)), np.exp(np.real(lk))

    def log_env(t):
        s = c[:, None] + 1j * t[None, :]
        return np.real(_log_kernel(spec, s) - s * lx[:, None])

    # truncation: extend until the envelope beyond T is negligible for every point
    # (compared in logs so that values near underflow are handled)
    peak = log_env(np.zeros(1))[:, 0]
    t_max = 8.0
    while True:
        env = log_env(np.linspace(0.0, t_max, 33))
        peak = np.maximum(peak, env.max(axis=1))
        if np.all(env[:, -1] - math.log(math.pi * delta) < math.log(1e-13) + peak):
            break
        t_max *= 1.6
        if t_max > 5e4:
            raise MeijerGConvergenceError(
                "contour truncation did not reach the tail tolerance",
                {"backend": "contour", "T": t_max},
            )
    h = float(np.min(np.minimum(np.minimum(0.25, 0.5 * clearance), 2.0 / (1.0 + np.abs(lx)))))
    n = max(int(math.ceil(t_max / h)), 16)
    h = t_max / n
    vals, envs = integrand(c, lx, np.arange(n + 1) * h)
    total = 0.5 * vals[:, 0] + vals[:, 1:].sum(axis=1)
    abs_total = 0.5 * envs[:, 0] + envs[:, 1:].sum(axis=1)
    est = h * total / math.pi
    result = np.full_like(x, np.nan)
    error = np.full_like(x, np.inf)
    todo = np.arange(x.size)
    for _ in range(14):
        mids = (np.arange(n) + 0.5) * h
        mv, me = integrand(c[todo], lx[todo], mids)
        total = total + mv.sum(axis=1)
        abs_total = abs_total + me.sum(axis=1)
        n *= 2
        h *= 0.5
        new = h * total / math.pi
        floor = 64 * _EPS * h * abs_total / math.pi
        err = np.abs(new - est)
        ok = err <= np.maximum(rtol * np.abs(new), floor)
        result[todo[ok]] = new[ok]
        error[todo[ok]] = np.maximum(err[ok], floor[ok])
        keep = ~ok
        todo, total, abs_total, est = todo[keep], total[keep], abs_total[keep], new[keep]
        if todo.size == 0:
            return result, error
    raise MeijerGConvergenceError(
        "contour trapezoid refinement did not converge",
        {"backend": "contour", "x": x[todo].tolist(), "h": h, "T": t_max},
    )


# beyond this effective argument the residue series is not attempted in auto mode
_RESIDUE_MAX_ARG = 40.0


def _underflows(spec: MeijerGSpec, x: np.ndarray) -> np.ndarray:
    """Points where an exponentially decaying G is below the double range.

    For ``n = 0``, ``m = q > p`` the function behaves like
    ``C x^t exp(-nu x^(1/nu))`` with ``nu = q - p``; the leading term is used
    only where the exponent is far beyond underflow.
    """
    if not (spec.n == 0 and spec.m == spec.q and spec.p < spec.q):
        return np.zeros(x.shape, dtype=bool)
    nu = spec.q - spec.p
    expo = nu * x ** (1.0 / nu)
    theta = ((1.0 - nu) / 2.0 + sum(spec.b) - sum(spec.a)) / nu
    logc = 0.5 * (nu - 1) * math.log(2 * math.pi) - 0.5 * math.log(nu)
    return (expo > 100.0) & (logc + theta * np.log(x) - expo < -760.0)


def meijer_g(spec: MeijerGSpec, x, method: str = "auto", rtol: float = 1e-10):
    """Evaluate ``G^{m,n}_{p,q}(x | a; b)`` for real ``x > 0`` (scalar or array).

    ``method`` is ``"residue"``, ``"contour"`` or ``"auto"``.  In auto mode the
    residue series is used where its cancellation estimate is within ``rtol``
    and the contour integral everywhere else.
    """
    xa = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    if not np.all((xa > 0) & np.isfinite(xa)):
        raise SpecfunDomainError("meijer_g needs finite x > 0")
    tiny = _underflows(spec, xa)
    if np.any(tiny) and method != "residue":
        out = np.zeros_like(xa)
        live = ~tiny
        if np.any(live):
            out[live] = meijer_g(spec, xa[live], method, rtol)
        return float(out[0]) if np.ndim(x) == 0 else out.reshape(np.shape(x))
    if method == "residue":
        out, err = _residue(spec, xa)
        bad = ~(err <= rtol * np.abs(out)) & ~(err < 1e-300)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise MeijerGConvergenceError(
                "residue series lost accuracy to cancellation",
                {"backend": "residue", "x": float(xa[i]), "error_estimate": float(err[i]),
                 "value": float(out[i]), "rtol": rtol},
            )
    elif method == "contour":
        out = _contour(spec, xa)[0]
    elif method == "auto":
        out = np.full_like(xa, np.nan)
        eff = xa if spec.p <= spec.q else 1.0 / xa
        if spec.p == spec.q:
            eff = np.minimum(xa, 1.0 / xa)
        cand = (eff <= _RESIDUE_MAX_ARG) & (xa != 1.0)
        diag = {}
        if np.any(cand):
            try:
                v, e = _residue(spec, xa[cand])
                good = (e <= rtol * np.abs(v)) | (e < 1e-300)
                idx = np.flatnonzero(cand)
                out[idx[good]] = v[good]
            except MeijerGConvergenceError as exc:
                diag = exc.diagnostics
        rest = np.isnan(out)
        if np.any(rest):
            try:
                out[rest] = _contour(spec, xa[rest])[0]
            except MeijerGConvergenceError as exc:
                exc.diagnostics["residue"] = diag
                raise
    else:
        raise ValueError(f"unknown method {method!r}")
    if np.ndim(x) == 0:
        return float(out[0])
    return out.reshape(np.shape(x))


# ---------------------------------------------------------------------------
# Bivariate G (double Mellin-Barnes)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BivariateGSpec:
    """Generalized Meijer G of two variables.

    ``G(x, y) = (2 pi i)^-2 int int Psi(s + t) K1(s) K2(t) x^-s y^-t ds dt``

    where ``K1`` and ``K2`` are the univariate Meijer kernels of ``first`` and
    ``second`` and the outer factor is
    ``Psi(u) = prod_{j<n0} Gamma(1 - a0_j - u) / (prod_{j>=n0} Gamma(a0_j + u)
    * prod_j Gamma(1 - b0_j - u))``.
    """

    n0: int
    a0: tuple[float, ...]
    b0: tuple[float, ...]
    first: MeijerGSpec
    second: MeijerGSpec

    def __post_init__(self):
        object.__setattr__(self, "a0", tuple(float(v) for v in self.a0))
        object.__setattr__(self, "b0", tuple(float(v) for v in self.b0))
        if not 0 <= self.n0 <= len(self.a0):
            raise SpecfunDomainError("invalid outer index n0")

    def log_outer(self, u: np.ndarray) -> np.ndarray:
        out = np.zeros_like(u, dtype=complex)
        for j in range(self.n0):
            out += loggamma(1.0 - self.a0[j] - u)
        for j in range(self.n0, len(self.a0)):
            out -= loggamma(self.a0[j] + u)
        for bj in self.b0:
            out -= loggamma(1.0 - bj - u)
        return np.nan_to_num(out, nan=-np.inf, posinf=np.inf, neginf=-np.inf)


def _bivariate_offsets(spec: BivariateGSpec, x: float, y: float) -> tuple[float, float, float]:
    lo1, hi1 = _strip(spec.first)
    lo2, hi2 = _strip(spec.second)
    # the outer factor needs Re(s + t) < 1 - a0_j for its Gamma(1 - a0 - u) poles
    hi12 = min((1.0 - a for a in spec.a0[: spec.n0]), default=math.inf)

    def clamp(lo, hi):
        lo_ = lo if math.isfinite(lo) else (hi - 30.0 if math.isfinite(hi) else -15.0)
        hi_ = hi if math.isfinite(hi) else lo_ + 30.0
        w = hi_ - lo_
        m = 0.25 * min(w, 1.0)
        return lo_ + m, hi_ - m

    a1, b1 = clamp(lo1, hi1)
    a2, b2 = clamp(lo2, hi2)
    lx, ly = math.log(x), math.log(y)

    def phi(v):
        cs, ct = v
        u = np.array([cs + ct + 0j])
        val = (
            spec.log_outer(u)[0]
            + _log_kernel(spec.first, np.array([cs + 0j]))[0]
            + _log_kernel(spec.second, np.array([ct + 0j]))[0]
        )
        return float(np.real(val)) - cs * lx - ct * ly

    best = None
    grid1 = np.linspace(a1, b1, 25)
    grid2 = np.linspace(a2, b2, 25)
    for cs in grid1:
        for ct in grid2:
            if math.isfinite(hi12) and cs + ct > hi12 - 0.25 * min(1.0, hi12 - (a1 + a2)):
                continue
            v = phi((cs, ct))
            if best is None or v < best[0]:
                best = (v, cs, ct)
    if best is None:
        raise MeijerGConvergenceError("no admissible double contour", {"backend": "bivariate"})
    _, cs, ct = best
    clear = min(
        [cs + b for b in spec.first.b[: spec.first.m]]
        + [1.0 - a - cs for a in spec.first.a[: spec.first.n]]
        + [ct + b for b in spec.second.b[: spec.second.m]]
        + [1.0 - a - ct for a in spec.second.a[: spec.second.n]]
        + [1.0 - a - cs - ct for a in spec.a0[: spec.n0]]
        + [1.0]
    )
    return cs, ct, clear


def meijer_g_bivariate(spec: BivariateGSpec, x: float, y: float, rtol: float = 1e-8) -> float:
    """Evaluate the bivariate G function by double trapezoid quadrature.

    Both contours are vertical lines with a common step, so the outer factor
    only depends on the sum index and the double sum collapses to a discrete
    convolution.  Raises :class:`MeijerGConvergenceError` on non-convergence;
    callers are expected to fall back to direct quadrature.
    """
    x, y = float(x), float(y)
    if not (x > 0 and y > 0):
        raise SpecfunDomainError("meijer_g_bivariate needs x, y > 0")
    d1, d2 = spec.first.decay, spec.second.decay
    cs, ct, clear = _bivariate_offsets(spec, x, y)
    lx, ly = math.log(x), math.log(y)

    def parts(t):
        k1 = _log_kernel(spec.first, cs + 1j * t) - (cs + 1j * t) * lx
        k2 = _log_kernel(spec.second, ct + 1j * t) - (ct + 1j * t) * ly
        return k1, k2

    t_max = 8.0
    ref = None
    while True:
        tt = np.linspace(-t_max, t_max, 65)
        k1, k2 = parts(tt)
        e1 = np.exp(np.real(k1))
        e2 = np.exp(np.real(k2))
        if ref is None:
            ref = (float(e1.max()), float(e2.max()))
        edge = max(e1[0] / ref[0], e1[-1] / ref[0], e2[0] / ref[1], e2[-1] / ref[1])
        if edge < 1e-14 or (d1 <= 0 and d2 <= 0 and t_max > 400):
            break
        t_max *= 1.5
        if t_max > 2000:
            raise MeijerGConvergenceError(
                "bivariate contour truncation failed", {"backend": "bivariate", "T": t_max}
            )

    h = min(0.25, 0.5 * clear)
    est = None
    for _ in range(8):
        n = int(math.ceil(t_max / h))
        t = np.arange(-n, n + 1) * h
        k1, k2 = parts(t)
        f1 = np.exp(k1)
        f2 = np.exp(k2)
        # s + t on the sum grid: offsets cs + ct, imaginary parts (i + j) h
        tsum = np.arange(-2 * n, 2 * n + 1) * h
        outer = np.exp(spec.log_outer(cs + ct + 1j * tsum))
        conv = np.convolve(f1, f2)
        val = float(np.real(np.sum(outer * conv))) * h * h / (4.0 * math.pi**2)
        if est is not None:
            err = abs(val - est)
            scale = float(np.sum(np.abs(outer) * np.convolve(np.abs(f1), np.abs(f2)))) * h * h
            floor = 256 * _EPS * scale / (4.0 * math.pi**2)
            if err <= max(rtol * abs(val), floor):
                return val
        est = val
        h *= 0.5
    raise MeijerGConvergenceError(
        "bivariate trapezoid refinement did not converge",
        {"backend": "bivariate", "h": h, "T": t_max, "value": est},
    )
