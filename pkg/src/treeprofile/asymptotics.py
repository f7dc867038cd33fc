"""Asymptotic profile formulas checked against the exact tables.

The amplitude E(z) in G_n(z) ~ E(z) n^{lambda_1(z)-1} has no closed form in
general, so it is estimated from the exact series by tail extrapolation.
Everything else here is either an explicit formula in the spectral
quantities or an exact transform of the DP output.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import DomainError, PreconditionError, RegimeError
from .exact import expected_profile_table, expected_W_many, second_moment_W
from .model import ModelParams
from .rng import DEFAULT_SEED, run_replicates
from .spectral import (
    all_roots,
    beta_of_alpha,
    critical_constants,
    lambda1,
    lambda1_derivs,
    lambda1_real,
)

DELTA_MAX = 1.5


@dataclass(frozen=True)
class AmplitudeEstimate:
    z: complex
    E_hat: complex
    delta_hat: float
    c_hat: complex
    residual: float
    degraded: bool
    last: complex

    @property
    def E_real(self) -> float:
        return float(np.real(self.E_hat))


def fit_amplitude(ns, e, delta_max: float = DELTA_MAX):
    """Fit ``e_n = E + c n^{-delta}`` by variable projection over delta.

    For fixed delta the model is linear in (E, c); the residual norm is then
    minimised over delta in (0, delta_max]. Returns
    ``(E, c, delta, residual, ok)``.
    """
    ns = np.asarray(ns, dtype=float)
    e = np.asarray(e)
    scale = max(float(np.max(np.abs(e))), 1e-300)

    def solve(delta):
        A = np.column_stack([np.ones_like(ns), ns ** (-delta)]).astype(e.dtype)
        coef, *_ = np.linalg.lstsq(A, e / scale, rcond=None)
        res = np.linalg.norm(A @ coef - e / scale)
        return coef * scale, res

    grid = np.linspace(0.02, delta_max, 75)
    res = np.array([solve(d)[1] for d in grid])
    i = int(np.argmin(res))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    if hi > lo:
        opt = minimize_scalar(lambda d: solve(d)[1], bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-10})
        delta = float(opt.x) if opt.fun <= res[i] else float(grid[i])
        ok = bool(opt.success)
    else:
        delta, ok = float(grid[i]), True
    coef, r = solve(delta)
    ok = ok and bool(np.all(np.isfinite(coef)))
    return coef[0], coef[1], delta, float(r), ok


def _check_D(params, z, s):
    z = complex(z)
    if z.imag == 0 and z.real > 0:
        lam = complex(lambda1_real(params, z.real))
        dominant = True
    else:
        root = all_roots(params, z)
        lam, dominant = root.lambda1, root.simple
    if not (lam.real > s and dominant):
        raise DomainError(f"z = {z} is not in D_{s:g} (lambda_1 = {lam})")
    return lam


def estimate_amplitude(params: ModelParams, z, N: int = 4000, window=None,
                       external: bool = False) -> AmplitudeEstimate:
    """Estimate E(z) (or the external amplitude) from the exact G_n(z).

    ``window`` is the pair (n_lo, n_hi) of the tail used in the fit; the
    default is the upper three quarters of 0..N.
    """
    if N < 100:
        raise PreconditionError("estimate_amplitude needs N >= 100")
    lam = _check_D(params, z, -params.t if external else 1.0)
    g = expected_W_many(params, [z], N, external=external)[:, 0]
    lo, hi = window if window is not None else (N // 4, N)
    ns = np.arange(max(lo, 1), hi + 1)
    e = g[ns] / np.exp((lam - 1) * np.log(ns))
    if complex(z).imag == 0:
        e = e.real
    last = complex(e[-1])
    if np.allclose(e, e[-1], rtol=1e-13, atol=0):
        return AmplitudeEstimate(complex(z), last, 0.0, 0j, 0.0, False, last)
    E, c, delta, res, ok = fit_amplitude(ns, e)
    if not ok:
        return AmplitudeEstimate(complex(z), last, float("nan"), 0j, float("nan"), True, last)
    return AmplitudeEstimate(complex(z), complex(E), delta, complex(c), res, False, last)


@dataclass(frozen=True)
class SaddleEstimate:
    n: int
    k: int
    alpha: float
    beta: float
    prediction: float
    lambda1: float
    lambda1_pp: float
    E_hat: float
    exponent: float


def mean_profile_asymptotic(params: ModelParams, n: int, k: int, E_hat=None,
                            external: bool = False, amp_N: int = 4000) -> SaddleEstimate:
    """Saddle-point approximation of E X_{n,k} (or E Y_{n,k}).

    With alpha = k / log n and beta = beta(alpha),

        E(beta) n^{lambda_1(beta) - alpha log beta - 1}
        / sqrt(2 pi (alpha + beta^2 lambda_1''(beta)) log n).

    ``E_hat`` defaults to :func:`estimate_amplitude` at beta.
    """
    if n < 3:
        raise PreconditionError("n must be >= 3")
    alpha = k / math.log(n)
    cc = critical_constants(params)
    lo = 0.0 if external else cc.alpha0
    if not lo < alpha < cc.alpha_plus:
        raise RegimeError(f"alpha = {alpha:.6g} outside ({lo:.6g}, {cc.alpha_plus:.6g})")
    beta, lam = beta_of_alpha(params, alpha)
    _, lpp = lambda1_derivs(params, beta)
    if E_hat is None:
        E_hat = estimate_amplitude(params, beta, amp_N, external=external).E_real
    expo = lam - alpha * math.log(beta) - 1
    var = (alpha + beta * beta * lpp) * math.log(n)
    pred = E_hat * n**expo / math.sqrt(2 * math.pi * var)
    return SaddleEstimate(n, k, alpha, beta, float(pred), float(lam), float(lpp), float(E_hat), float(expo))


def mode_gaussian(params: ModelParams, n: int, k) -> np.ndarray:
    """Gaussian approximation of E X_{n,k} around the mode alpha_max log n."""
    cc = critical_constants(params)
    _, lpp = lambda1_derivs(params, 1.0)
    L = math.log(n)
    var = (cc.alpha_max + lpp) * L
    k = np.asarray(k, dtype=float)
    dev = k - cc.alpha_max * L
    if np.any(np.abs(dev) > 4 * math.sqrt(L)):
        warnings.warn("k is far from the mode; the Gaussian form is only valid within O(sqrt(log n))",
                      RuntimeWarning, stacklevel=2)
    val = n / math.sqrt(2 * math.pi * var) * np.exp(-dev * dev / (2 * var))
    return val[()] if val.ndim == 0 else val


def cauchy_inversion(params: ModelParams, beta: float, n: int, K: int | None = None,
                     M: int | None = None) -> np.ndarray:
    """E X_{n,k} for k <= K by discrete Cauchy inversion of G_n on |z| = beta.

    G_n has degree below n, so with M >= n + 1 nodes the transform is exact
    up to rounding.
    """
    M = n + 1 if M is None else M
    if M < n + 1:
        raise PreconditionError(f"M = {M} < n + 1 = {n + 1} would alias coefficients")
    if not beta > 0:
        raise PreconditionError("beta must be > 0")
    K = n if K is None else K
    if K >= M:
        raise PreconditionError("K must be < M")
    zs = beta * np.exp(2j * np.pi * np.arange(M) / M)
    g = expected_W_many(params, zs, n)[n]
    coef = np.fft.fft(g) / M
    k = np.arange(K + 1)
    return (coef[: K + 1] * beta ** (-k.astype(float))).real


@dataclass(frozen=True)
class SlopeCheck:
    z: complex
    slope: float
    bound: float
    slack: float
    ns: np.ndarray
    second_moment: np.ndarray


def second_moment_bound(params: ModelParams, z) -> float:
    """max{lambda_1(|z|^2) - 1, 2 Re lambda_1(z) - 2, 0}."""
    z = complex(z)
    a = lambda1_real(params, abs(z) ** 2) - 1
    b = 2 * lambda1(params, z).real - 2
    return max(a, b, 0.0)


def second_moment_exponent_check(params: ModelParams, z, N: int = 2000, tail: float = 0.1) -> SlopeCheck:
    """Log-log slope of E|W_n(z)|^2 over n in [tail N, N] against the growth bound."""
    sm = second_moment_W(params, z, N)
    ns = np.unique(np.geomspace(max(int(tail * N), 10), N, 40).astype(int))
    y = np.log(sm.g2[ns])
    slope = float(np.polyfit(np.log(ns), y, 1)[0])
    bound = second_moment_bound(params, z)
    return SlopeCheck(complex(z), slope, bound, slope - bound, ns, sm.g2[ns])


def subcritical_remainder(params: ModelParams, n: int, k: int, table=None) -> float:
    """r_{n,k} = (m-1) m^k - E X_{n,k}, the deficit of level k."""
    if k < 0:
        raise PreconditionError("k must be >= 0")
    if table is None or table.N < n or table.K < k:
        table = expected_profile_table(params, n, k)
    return float(table.remainder(n, k))


def remainder_trend(params: ModelParams, alpha: float, ns):
    """``(k, r)`` arrays for k = floor(alpha log n) over ``ns``.

    Below alpha_- the deficit should vanish; above it, it grows.
    """
    ns = np.asarray(ns, dtype=int)
    ks = np.floor(alpha * np.log(ns)).astype(int)
    table = expected_profile_table(params, int(ns.max()), int(ks.max()))
    return ks, np.array([table.remainder(n, k) for n, k in zip(ns, ks)])


@dataclass(frozen=True)
class HeightReport:
    n: int
    reps: int
    mean_height: float
    ratio: float
    alpha_plus: float


def height_report(params: ModelParams, n: int, reps: int = 200, seed: int = DEFAULT_SEED,
                  workers: int = 1) -> HeightReport:
    """Simulated E H_n / log n next to alpha_+ (a report, not a check)."""
    from .model import sample_profile

    def one(rng):
        prof = sample_profile(params, n, rng)
        nz = np.flatnonzero(prof)
        return int(nz[-1]) if nz.size else 0

    h = np.array(run_replicates(one, reps, seed, workers), dtype=float)
    cc = critical_constants(params)
    return HeightReport(n, reps, float(h.mean()), float(h.mean() / math.log(n)), cc.alpha_plus)
