"""The characteristic polynomial F, its dominant root and the critical constants.

    F(theta) = t! / (m (mt+m-1)!) * (theta+t)(theta+t+1)...(theta+mt+m-2)

has degree d = (m-1)(t+1). The roots of F(theta) = z, ordered by decreasing
real part, are lambda_1(z), lambda_2(z), ...; on the positive axis
lambda_1 is the unique real root above -t, and every level-k constant below
comes out of scalar monotone root searches on F and its log-derivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import ConvergenceError, DomainError
from .model import ModelParams

DOMINANCE_TOL = 1e-9


def _shifts(params):
    return np.arange(params.t, params.r, dtype=float)


def _scale(params):
    return math.factorial(params.t) / (params.m * math.factorial(params.r))


def F_eval(params: ModelParams, theta):
    """F(theta) for real or complex (array) theta."""
    theta = np.asarray(theta)
    val = _scale(params) * np.prod(theta[..., None] + _shifts(params), axis=-1)
    return val[()] if val.ndim == 0 else val


def _check_pole(params, theta):
    theta = np.asarray(theta)
    if np.any(np.isclose(theta[..., None], -_shifts(params), rtol=0, atol=1e-300)):
        raise DomainError("log-derivative of F has a pole at theta = -i")


def F_logderiv(params: ModelParams, theta):
    """F'/F = sum_{i=t}^{mt+m-2} 1/(theta+i)."""
    _check_pole(params, theta)
    val = np.sum(1.0 / (np.asarray(theta)[..., None] + _shifts(params)), axis=-1)
    return val[()] if val.ndim == 0 else val


def F_second_logterm(params: ModelParams, theta):
    """sum 1/(theta+i)^2, so that F''/F = (F'/F)^2 - F_second_logterm."""
    _check_pole(params, theta)
    val = np.sum(1.0 / (np.asarray(theta)[..., None] + _shifts(params)) ** 2, axis=-1)
    return val[()] if val.ndim == 0 else val


def F_deriv(params: ModelParams, theta):
    """F'(theta) without dividing by F (safe at the roots of F)."""
    theta = np.asarray(theta, dtype=complex)
    sh = _shifts(params)
    tot = 0
    for j in range(sh.size):
        tot = tot + np.prod(np.delete(theta[..., None] + sh, j, axis=-1), axis=-1)
    val = _scale(params) * tot
    return val[()] if np.ndim(val) == 0 else val


def log_F(params: ModelParams, lam: float) -> float:
    """log F(lam) for real lam > -t."""
    return math.log(_scale(params)) + float(np.sum(np.log(lam + _shifts(params))))


# -- dominant root -----------------------------------------------------------


def _bracket_toward(fun, start, floor):
    """Step from ``start`` toward ``floor`` (halving the gap) until fun > 0."""
    x = start
    gap = start - floor
    while not fun(x) > 0:
        gap /= 2
        x = floor + gap
        if gap < 1e-250 * max(1.0, abs(floor)):
            raise ConvergenceError("could not bracket root from below")
    return x


def _root_above(fun, lo, hi_start):
    hi = hi_start
    while fun(hi) <= 0:
        hi = 2 * hi + 1
        if hi > 1e12:
            raise ConvergenceError("could not bracket root")
    return brentq(fun, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def lambda1_real(params: ModelParams, beta: float, tol: float = 1e-12) -> float:
    """The unique root of F(lambda) = beta on (-t, inf), for beta > 0."""
    if not beta > 0:
        raise DomainError(f"lambda1_real needs beta > 0, got {beta}")
    lb = math.log(beta)

    def g(x):
        return log_F(params, x) - lb

    # log F - log beta -> -inf as lambda -> -t and is increasing
    lo = _bracket_toward(lambda x: -g(x), 1.0, -params.t)
    lam = _root_above(g, lo, 1.0)
    # one Newton polish on log F, whose derivative is the harmonic sum
    step = g(lam) / F_logderiv(params, lam)
    if abs(step) < 1e-8:
        lam -= step
    if abs(F_eval(params, lam) - beta) > max(tol, 1e-14) * (1 + beta) * 10:
        raise ConvergenceError("lambda1_real residual too large")
    return float(lam)


@dataclass(frozen=True)
class DominantRoot:
    z: complex
    lambda1: complex
    all_roots: np.ndarray
    gap: float
    residuals: np.ndarray

    @property
    def simple(self) -> bool:
        return self.gap > DOMINANCE_TOL

    def in_D(self, s: float):
        """Membership of z in {Re lambda_1 > s, Re lambda_1 > Re lambda_2}.

        Returns True, False, or None when the dominance gap is within the
        numerical boundary band and the point cannot be classified.
        """
        if self.lambda1.real <= s:
            return False
        if self.gap > DOMINANCE_TOL:
            return True
        return None


def _aberth(params, z, tol, maxiter):
    d = params.d
    sh = _shifts(params)
    coeffs = _scale(params) * np.poly(-sh).astype(complex)
    coeffs[-1] -= z
    a = coeffs / coeffs[0]
    center = -a[1] / d
    # Fujiwara bound on the roots of the shifted polynomial
    shifted = np.poly1d(a)(np.poly1d([1, center]))
    c = np.asarray(shifted.coeffs, dtype=complex)
    rad = 2 * max(abs(c[j]) ** (1.0 / j) for j in range(1, d + 1)) if d > 0 else 1.0
    rad = max(rad, 1e-3)
    k = np.arange(d)
    roots = center + rad * np.exp(1j * (2 * np.pi * k / d + 0.4))

    def newton_ratio(x):
        return (F_eval(params, x) - z) / F_deriv(params, x)

    for _ in range(maxiter):
        w = newton_ratio(roots)
        diff = roots[:, None] - roots[None, :]
        np.fill_diagonal(diff, 1.0)
        inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        corr = w / (1.0 - w * inv.sum(axis=1))
        roots = roots - corr
        if np.all(np.abs(corr) <= tol * (1 + np.abs(roots))):
            break
    else:
        res = np.abs(F_eval(params, roots) - z)
        raise ConvergenceError("Aberth iteration did not converge", residuals=res)
    return roots - newton_ratio(roots)


def all_roots(params: ModelParams, z, tol: float = 1e-12, maxiter: int = 500) -> DominantRoot:
    """Every root of F(theta) = z by simultaneous (Aberth) iteration."""
    z = complex(z)
    if params.d == 1:
        roots = np.array([1.0 / (_scale(params)) * z - params.t], dtype=complex)
    else:
        roots = _aberth(params, z, tol, maxiter)
    if z.imag == 0:
        near = np.abs(roots.imag) < 1e-10 * (1 + np.abs(roots))
        roots = np.where(near, roots.real + 0j, roots)
    roots = roots[np.lexsort((-roots.imag, -roots.real))]
    res = np.abs(F_eval(params, roots) - z)
    if np.any(res > 1e3 * tol * (1 + abs(z))):
        raise ConvergenceError("root residuals above tolerance", residuals=res)
    gap = math.inf if params.d == 1 else float(roots[0].real - roots[1].real)
    return DominantRoot(z, complex(roots[0]), roots, gap, res)


def lambda1(params: ModelParams, z) -> complex:
    """lambda_1(z) for any z; real positive z takes the scalar route."""
    z = complex(z)
    if z.imag == 0 and z.real > 0:
        return complex(lambda1_real(params, z.real))
    return all_roots(params, z).lambda1


def lambda1_derivs(params: ModelParams, beta: float):
    """(lambda_1'(beta), lambda_1''(beta)) by implicit differentiation."""
    lam = lambda1_real(params, beta)
    L1 = F_logderiv(params, lam)
    L2 = F_second_logterm(params, lam)
    f1 = beta * L1
    f2 = beta * (L1 * L1 - L2)
    return 1.0 / f1, -f2 / f1**3


def alpha_of_beta(params: ModelParams, beta: float) -> float:
    """beta lambda_1'(beta) = 1 / (F'/F)(lambda_1(beta))."""
    return float(1.0 / F_logderiv(params, lambda1_real(params, beta)))


def lambda_of_alpha(params: ModelParams, alpha: float) -> float:
    """The lambda > -t with sum_i 1/(lambda+i) = 1/alpha."""
    if not alpha > 0:
        raise DomainError(f"alpha must be > 0, got {alpha}")

    def h(x):
        return 1.0 / alpha - F_logderiv(params, x)

    lo = _bracket_toward(lambda x: -h(x), 1.0, -params.t)
    return _root_above(h, lo, 1.0)


def beta_of_alpha(params: ModelParams, alpha: float, tol: float = 1e-12):
    """Saddle point: the beta > 0 with beta lambda_1'(beta) = alpha. Returns (beta, lambda)."""
    lam = lambda_of_alpha(params, alpha)
    return float(F_eval(params, lam)), lam


# -- critical constants --------------------------------------------------------


@dataclass(frozen=True)
class CriticalConstants:
    params: ModelParams
    alpha0: float
    alpha_max: float
    alpha_minus: float
    alpha_plus: float
    lambda_minus: float
    lambda_plus: float
    lambda_star: tuple
    beta_star: tuple
    I: tuple
    I_prime: tuple
    J: tuple
    J_prime: tuple
    height_residual: float

    def as_dict(self):
        return {
            "m": self.params.m,
            "t": self.params.t,
            "alpha0": self.alpha0,
            "alpha_max": self.alpha_max,
            "alpha_minus": self.alpha_minus,
            "alpha_plus": self.alpha_plus,
            "lambda_minus": self.lambda_minus,
            "lambda_plus": self.lambda_plus,
            "lambda_star": list(self.lambda_star),
            "beta_star": list(self.beta_star),
            "I": list(self.I),
            "I_prime": list(self.I_prime),
            "J": list(self.J),
            "J_prime": list(self.J_prime),
            "height_residual": self.height_residual,
        }


def _harmonic_inv(lo, hi):
    return 1.0 / sum(1.0 / j for j in range(lo, hi + 1))


def speed_function(params: ModelParams, lam: float) -> float:
    """log F(lam) - (lam - 1) (F'/F)(lam); its two zeros are lambda_-, lambda_+."""
    return log_F(params, lam) - (lam - 1) * F_logderiv(params, lam)


def critical_constants(params: ModelParams, tol: float = 1e-12) -> CriticalConstants:
    m, t = params.m, params.t
    alpha0 = _harmonic_inv(t + 1, (t + 1) * m - 1)
    alpha_max = _harmonic_inv(t + 2, (t + 1) * m)

    def g(x):
        return speed_function(params, x)

    # g decreases on (-t, 1) and increases on (1, inf), with g(1) = -log m
    lo = _bracket_toward(g, 1.0, -t)
    lam_minus = brentq(g, lo, 1.0, xtol=1e-15)
    hi = 2.0
    while g(hi) <= 0:
        hi *= 2
    lam_plus = brentq(g, 2.0, hi, xtol=1e-15)
    alpha_minus = float(1.0 / F_logderiv(params, lam_minus))
    alpha_plus = float(1.0 / F_logderiv(params, lam_plus))

    def logq(x):
        return log_F(params, 2 * x - 1) - 2 * log_F(params, x)

    # log q rises from -inf at (1-t)/2 to log m at 1, then decreases to -inf
    floor = (1 - t) / 2
    lo = floor + 0.5 * (1 - floor)
    while logq(lo) >= 0:
        lo = floor + (lo - floor) / 2
    ls1 = brentq(logq, lo, 1.0, xtol=1e-15)
    hi = 2.0
    while logq(hi) >= 0:
        hi *= 2
    ls2 = brentq(logq, 1.0, hi, xtol=1e-15)
    bs1, bs2 = float(F_eval(params, ls1)), float(F_eval(params, ls2))
    J = (bs1, bs2)
    I = (max(bs1, m ** -0.5), bs2)
    I_prime = (alpha_of_beta(params, I[0]), alpha_of_beta(params, I[1]))
    J_prime = (alpha_of_beta(params, J[0]), alpha_of_beta(params, J[1]))

    beta_plus, lam_p = beta_of_alpha(params, alpha_plus)
    height_residual = float(lam_p - alpha_plus * math.log(beta_plus) - 1)
    return CriticalConstants(
        params, alpha0, alpha_max, alpha_minus, alpha_plus, lam_minus, lam_plus,
        (ls1, ls2), (bs1, bs2), I, I_prime, J, J_prime, height_residual,
    )


def profile_exponent(params: ModelParams, alpha: float) -> float:
    """lambda_1(beta) - alpha log beta - 1 at beta = beta(alpha)."""
    beta, lam = beta_of_alpha(params, alpha)
    return lam - alpha * math.log(beta) - 1


def in_I(params: ModelParams, beta: float) -> bool:
    """Direct test of 1 < lambda_1(beta^2) < 2 lambda_1(beta) - 1."""
    l2 = lambda1_real(params, beta * beta)
    return 1 < l2 < 2 * lambda1_real(params, beta) - 1


# -- contraction margin and arc probe ---------------------------------------------


@dataclass(frozen=True)
class ContractionMargin:
    x: float
    s: float
    g: float
    h_prime: float
    s_best: float
    g_best: float

    @property
    def contracts(self) -> bool:
        return self.g_best < 1


def contraction_g(params: ModelParams, x: float, s: float) -> float:
    """g_x(s) = x^s / F(s lambda_1(x) - s + 1)."""
    lam = lambda1_real(params, x)
    arg = s * lam - s + 1
    if arg <= -params.t:
        raise DomainError(f"s lambda_1(x) - s + 1 = {arg} is not > -t")
    return float(x**s / F_eval(params, arg))


def contraction_margin(params: ModelParams, x: float, s: float = 2.0) -> ContractionMargin:
    """g_x(s) and h'_x(1) = (lambda_1(x) - 1)(F'/F)(lambda_1(x)) - log x.

    Also minimises g_x over (1, s] with a bounded Brent search to report
    whether some exponent gives g_x < 1.
    """
    if not 1 < s <= 2:
        raise DomainError("s must lie in (1, 2]")
    lam = lambda1_real(params, x)
    val = contraction_g(params, x, s)
    hp = (lam - 1) * F_logderiv(params, lam) - math.log(x)
    opt = minimize_scalar(lambda u: contraction_g(params, x, u), bounds=(1.0, s), method="bounded",
                          options={"xatol": 1e-10})
    s_best, g_best = float(opt.x), float(opt.fun)
    if val < g_best:
        s_best, g_best = s, val
    return ContractionMargin(x, s, val, float(hp), s_best, g_best)


def arc_monotonicity_probe(params: ModelParams, beta: float, phis):
    """Re lambda_1(beta e^{i phi}) over ``phis`` and the dominance flag per point.

    Returns ``(values, dominant, decreasing)`` where ``decreasing`` is True
    when consecutive values over the dominant points strictly decrease.
    """
    phis = np.asarray(phis, dtype=float)
    vals = np.empty(phis.size)
    dom = np.zeros(phis.size, dtype=bool)
    for i, phi in enumerate(phis):
        if phi == 0:
            vals[i] = lambda1_real(params, beta)
            dom[i] = True
            continue
        root = all_roots(params, beta * np.exp(1j * phi))
        vals[i] = root.lambda1.real
        dom[i] = root.simple
    v = vals[dom]
    decreasing = bool(np.all(np.diff(v) < 0))
    return vals, dom, decreasing
