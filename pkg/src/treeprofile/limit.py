"""The fixed-point process Y(z), Dirichlet moments and distribution distances.

Y(z) solves Y = sum_r z V_r^{lambda_1(z)-1} Y^{(r)} with V Dirichlet(t+1, ...)
and E Y = 1. It is sampled by unrolling the equation K levels deep over a
tree of independent Dirichlet vectors with constant leaves 1; since
m z E V^{lambda_1(z)-1} = z / F(lambda_1(z)) = 1, the mean is exactly 1 at
every depth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaln

from . import _kernels
from .errors import DomainError, PreconditionError
from .exact import expected_external_table, expected_profile_table
from .model import ModelParams, sample_external_profile, sample_profile
from .rng import DEFAULT_SEED, as_generator, run_replicates
from .spectral import F_eval, critical_constants, lambda1, lambda1_real


def sample_dirichlet(params: ModelParams, rng=None, size: int | None = None) -> np.ndarray:
    """Dirichlet(t+1, ..., t+1) vector(s) via normalised Gamma(t+1) draws."""
    count = 1 if size is None else int(size)
    out = _kernels.dirichlet_draws(as_generator(rng), params.m, params.t, count)
    return out[0] if size is None else out


def dirichlet_moment(params: ModelParams, a: float) -> float:
    """E V_1^a = 1 / (m F(a + 1))."""
    if not a > -(params.t + 1):
        raise DomainError(f"E V^a is infinite for a = {a} <= -(t+1)")
    return float(1.0 / (params.m * F_eval(params, a + 1.0)))


def dirichlet_pair_moment(params: ModelParams, a: float) -> float:
    """E[V_1^a V_2^a] from the Dirichlet aggregation property."""
    if not a > -(params.t + 1):
        raise DomainError(f"E V1^a V2^a is infinite for a = {a} <= -(t+1)")
    b = params.t + 1.0
    mb = params.m * b
    return float(np.exp(gammaln(mb) + 2 * gammaln(b + a) - 2 * gammaln(b) - gammaln(mb + 2 * a)))


@dataclass(frozen=True)
class LimitSample:
    z: complex
    depth: int
    values: np.ndarray
    seed: int

    @property
    def value(self):
        return self.values[0]


def _exponent(params, z):
    z = complex(z)
    if z.imag == 0 and z.real > 0:
        return z.real, lambda1_real(params, z.real) - 1.0
    return z, lambda1(params, z) - 1.0


def _draw(params, z, expo, depth, count, rng):
    if params.m == 2 and params.t == 0 and not isinstance(z, complex):
        return _kernels.limit_draws_bst_real(rng, z, expo, depth, count)
    if isinstance(z, complex):
        return _kernels.limit_draws(rng, z, complex(expo), params.m, params.t, depth, count)
    return _kernels.limit_draws(rng, z, expo, params.m, params.t, depth, count)


def sample_Y(params: ModelParams, z, K: int, rng=None, size: int | None = None):
    """Draw(s) of the depth-K iterate of the fixed-point equation from one stream."""
    if K < 0:
        raise PreconditionError("depth K must be >= 0")
    zz, expo = _exponent(params, z)
    vals = _draw(params, zz, expo, int(K), 1 if size is None else int(size), as_generator(rng))
    return vals[0] if size is None else vals


def sample_Y_many(params: ModelParams, z, K: int, reps: int, seed: int = DEFAULT_SEED,
                  workers: int = 1) -> LimitSample:
    """``reps`` draws, draw i from stream (seed, i); independent of ``workers``."""
    if K < 0:
        raise PreconditionError("depth K must be >= 0")
    zz, expo = _exponent(params, z)
    vals = run_replicates(lambda g: _draw(params, zz, expo, int(K), 1, g)[0], reps, seed, workers)
    return LimitSample(complex(z), int(K), np.asarray(vals), seed)


def variance_denominator(params: ModelParams, beta: float) -> float:
    """1 - beta^2 / F(2 lambda_1(beta) - 1); positive exactly on J."""
    lam = lambda1_real(params, beta)
    arg = 2 * lam - 1
    if arg <= -params.t:
        return -math.inf
    return float(1.0 - beta * beta / F_eval(params, arg))


def second_moment_Y(params: ModelParams, beta: float) -> float:
    """E Y(beta)^2 for beta in J."""
    cc = critical_constants(params)
    lo, hi = cc.J
    if not lo < beta < hi:
        raise DomainError(f"beta = {beta} is outside J = ({lo:.6g}, {hi:.6g}); E Y^2 is infinite")
    lam = lambda1_real(params, beta)
    m = params.m
    mu11 = dirichlet_pair_moment(params, lam - 1)
    return float(m * (m - 1) * beta * beta * mu11 / variance_denominator(params, beta))


def variance_Y(params: ModelParams, beta: float) -> float:
    """Var Y(beta) = E Y^2 - 1, finite exactly for beta in J."""
    return second_moment_Y(params, beta) - 1.0


def variance_Y_depth(params: ModelParams, beta: float, K: int) -> float:
    """Exact variance of the depth-K iterate sampled by :func:`sample_Y`.

    E Y_K^2 = a + rho E Y_{K-1}^2 with Y_0 = 1, a = m(m-1) beta^2 mu_11 and
    rho = beta^2 / F(2 lambda_1(beta) - 1). On J it increases to variance_Y.
    """
    lam = lambda1_real(params, beta)
    if not 2 * lam - 1 > -params.t:
        raise DomainError("E V^(2 lambda_1 - 2) is infinite at this beta")
    m = params.m
    a = m * (m - 1) * beta * beta * dirichlet_pair_moment(params, lam - 1)
    rho = beta * beta / float(F_eval(params, 2 * lam - 1))
    s2 = 1.0
    for _ in range(int(K)):
        s2 = a + rho * s2
    return s2 - 1.0


@dataclass(frozen=True)
class DistanceReport:
    ell_s: float
    ks: float
    s: float
    n_a: int
    n_b: int


def _quantile_coupling(a, b, s):
    # integral over u in (0,1) of |Qa(u) - Qb(u)|^s for the step quantiles
    na, nb = a.size, b.size
    cuts = np.union1d(np.arange(1, na) / na, np.arange(1, nb) / nb)
    edges = np.concatenate([[0.0], cuts, [1.0]])
    mid = 0.5 * (edges[:-1] + edges[1:])
    qa = a[np.minimum((mid * na).astype(int), na - 1)]
    qb = b[np.minimum((mid * nb).astype(int), nb - 1)]
    return float(np.sum(np.diff(edges) * np.abs(qa - qb) ** s))


def empirical_distance(samples_a, samples_b, s: float = 2.0) -> DistanceReport:
    """Empirical minimal L^s distance (sorted coupling) and the KS statistic."""
    a = np.sort(np.asarray(samples_a, dtype=float).ravel())
    b = np.sort(np.asarray(samples_b, dtype=float).ravel())
    if not 0 < s <= 2:
        raise PreconditionError("s must lie in (0, 2]")
    if a.size < 100 or b.size < 100:
        raise PreconditionError("empirical_distance needs at least 100 samples per set")
    if a.size == b.size:
        integral = float(np.mean(np.abs(a - b) ** s))
    else:
        integral = _quantile_coupling(a, b, s)
    ell = integral ** min(1.0 / s, 1.0)
    ks = float(stats.ks_2samp(a, b).statistic)
    return DistanceReport(ell, ks, s, a.size, b.size)


@dataclass(frozen=True)
class ProfileRatioSample:
    n: int
    k: int
    alpha: float
    mean: float
    ratios: np.ndarray
    external: bool


def mc_profile_ratio(params: ModelParams, n: int, alpha: float, reps: int,
                     seed: int = DEFAULT_SEED, workers: int = 1,
                     external: bool = False) -> ProfileRatioSample:
    """Samples of X_{n,k} / E X_{n,k} (or the external analog), k = floor(alpha log n).

    The denominator is the exact DP mean, computed only up to level k.
    """
    if n < 2 or reps < 1:
        raise PreconditionError("need n >= 2 and reps >= 1")
    k = int(math.floor(alpha * math.log(n)))
    if external:
        mean = expected_external_table(params, n, k).mean[n, k]
        draw = sample_external_profile
    else:
        mean = expected_profile_table(params, n, k).mean[n, k]
        draw = sample_profile
    if not mean > 0:
        raise DomainError(f"E X_(n,k) = 0 at n = {n}, k = {k}; the ratio is undefined")
    vals = run_replicates(lambda g: draw(params, n, g, kmax=k)[k], reps, seed, workers)
    return ProfileRatioSample(n, k, alpha, float(mean), np.asarray(vals, dtype=float) / mean, external)


def adaptive_depth(params: ModelParams, beta: float, reps: int = 20000, gap: float = 0.01,
                   start: int = 4, max_depth: int = 20, seed: int = DEFAULT_SEED):
    """Smallest depth K (stepping by 2) with ell_2(Y_K, Y_{K+2}) < ``gap``.

    Returns ``(K, gaps)`` where ``gaps`` lists the successive distances.
    """
    gaps = []
    prev = sample_Y_many(params, beta, start, reps, seed).values.real
    K = start
    while K + 2 <= max_depth:
        cur = sample_Y_many(params, beta, K + 2, reps, seed + K + 2).values.real
        d = empirical_distance(prev, cur, 2.0).ell_s
        gaps.append(d)
        if d < gap:
            return K, gaps
        prev, K = cur, K + 2
    return K, gaps

