"""Exact first and second moments of profiles by dynamic programming.

Every table here is driven by one operation, the average of a sequence over
the subtree-size law at n,

    A_n(a) = sum_l P{V_{n,1} = l} a_l,

which is computed for n >= mt+m-1 from binomially weighted running sums (see
``_kernels.split_recurrence``) and from explicit law rows below that. The
rational-arithmetic enumerator at the bottom of the module is the oracle the
DP tables are tested against.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import product
from math import comb

import numpy as np
from scipy.special import binom

from . import _kernels
from .errors import PreconditionError
from .model import ModelParams, _pmf, pair_law_matrix, split_law

ORACLE_CAP = 12
PAIR_CAP = 400


@dataclass(frozen=True)
class MomentTable:
    """``mean[n, k]`` = E X_{n,k} (or E Y_{n,k}) for n <= N, k <= K."""

    params: ModelParams
    mean: np.ndarray
    external: bool = False

    @property
    def N(self):
        return self.mean.shape[0] - 1

    @property
    def K(self):
        return self.mean.shape[1] - 1

    def remainder(self, n, k):
        """Deficit (m-1) m^k - E X_{n,k} of level k against a full level."""
        m = self.params.m
        return (m - 1) * float(m) ** k - self.mean[n, k]


@dataclass(frozen=True)
class ComplexMomentSeries:
    """G_n(z) = E W_n(z) for n <= N, optionally with E|W_n(z)|^2."""

    params: ModelParams
    z: complex
    g: np.ndarray
    g2: np.ndarray | None = None

    def normalized(self, w, n):
        """M_n(z) = W_n(z) / G_n(z) for a realised value ``w`` of W_n(z)."""
        return w / self.g[n]


def _small_law(params):
    r, m = params.r, params.m
    small = np.zeros((max(r, 1), max(r, 1)))
    for n in range(m - 1, r):
        small[n, :n] = _pmf(n, m, 0)
    return small


def _weights(params, N):
    ell = np.arange(N + 1)
    return binom(ell, params.t), binom(ell, params.r)


def split_average(params: ModelParams, col: np.ndarray) -> np.ndarray:
    """``A_n(col)`` for every n >= m - 1 (rows below are zero).

    ``col`` may be 1-D or 2-D (columns averaged independently).
    """
    col = np.asarray(col)
    flat = col.ndim == 1
    a = col[:, None] if flat else col
    N = a.shape[0] - 1
    m, t, r, s = params.m, params.t, params.r, params.s
    out = np.zeros(a.shape, dtype=np.result_type(a.dtype, float))
    if N >= r:
        bt, br = _weights(params, N)
        acc = bt[:, None] * a
        for _ in range(s + 1):
            acc = np.cumsum(acc, axis=0)
        n = np.arange(r, N + 1)
        out[r:] = acc[n - 1 - s] / br[r:, None]
    for n in range(m - 1, min(r, N + 1)):
        out[n] = _pmf(n, m, 0) @ a[:n]
    return out[:, 0] if flat else out


def _solve(params, base, coef, src, n0):
    N = src.shape[0] - 1
    bt, br = _weights(params, N)
    return _kernels.split_recurrence(
        np.ascontiguousarray(base, dtype=np.complex128),
        np.ascontiguousarray(coef, dtype=np.complex128),
        np.ascontiguousarray(src, dtype=np.complex128),
        n0, params.t, params.s, bt, br, _small_law(params),
    )


def _check_sizes(N, K=0):
    if N < 0 or K < 0:
        raise PreconditionError("N and K must be >= 0")


def expected_profile_table(params: ModelParams, N: int, K: int | None = None) -> MomentTable:
    """E X_{n,k} for 0 <= n <= N and 0 <= k <= K (default K = N)."""
    K = N if K is None else K
    _check_sizes(N, K)
    m = params.m
    n = np.arange(N + 1)
    mean = np.zeros((N + 1, K + 1))
    mean[:, 0] = np.minimum(n, m - 1)
    for k in range(1, min(K, N) + 1):
        col = m * split_average(params, mean[:, k - 1])
        col[:m] = 0.0
        mean[:, k] = col
    return MomentTable(params, mean)


def expected_external_table(params: ModelParams, N: int, K: int | None = None) -> MomentTable:
    """E Y_{n,k}, the expected number of free positions at level k."""
    K = N + 1 if K is None else K
    _check_sizes(N, K)
    m = params.m
    n = np.arange(N + 1)
    mean = np.zeros((N + 1, K + 1))
    mean[:, 0] = np.maximum(m - 1 - n, 0)
    for k in range(1, min(K, N + 1) + 1):
        col = m * split_average(params, mean[:, k - 1])
        col[: m - 1] = 0.0
        mean[:, k] = col
    return MomentTable(params, mean, external=True)


def expected_W_many(params: ModelParams, zs, N: int, external: bool = False) -> np.ndarray:
    """Matrix ``G[n, j]`` = E W_n(zs[j]) (or E U_n with ``external``)."""
    _check_sizes(N)
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    m = params.m
    n0 = m - 1 if external else m
    base = np.zeros((max(n0, 1), zs.size), complex)
    for n in range(n0):
        base[n] = (m - 1 - n) if external else n
    src = np.zeros((N + 1, zs.size), complex)
    if not external:
        src[:] = m - 1
    return _solve(params, base, m * zs, src, n0)


def expected_W(params: ModelParams, z, N: int) -> ComplexMomentSeries:
    """G_n(z) = E W_n(z) for n <= N."""
    return ComplexMomentSeries(params, complex(z), expected_W_many(params, [z], N)[:, 0])


def expected_U(params: ModelParams, z, N: int) -> ComplexMomentSeries:
    """E U_n(z), the expected external profile polynomial."""
    g = expected_W_many(params, [z], N, external=True)[:, 0]
    return ComplexMomentSeries(params, complex(z), g)


def expected_W_derivative(params: ModelParams, z: float, N: int) -> np.ndarray:
    """E W'_n(z) for real z >= 0 and n <= N."""
    if np.iscomplexobj(z) or z < 0:
        raise PreconditionError("expected_W_derivative needs real z >= 0")
    m = params.m
    g = expected_W(params, z, N).g.real
    src = (m * split_average(params, g))[:, None]
    src[:m] = 0.0
    base = np.zeros((m, 1))
    return _solve(params, base, [m * z], src, m)[:, 0].real


def _cross_term(params, g, n):
    """sum over ordered child pairs i != j of E W_{V_i}(z) conj(E W_{V_j}(z))."""
    m = params.m
    if m == 2:
        p = split_law(params, n)
        return 2.0 * np.sum(p * g[:n] * np.conj(g[n - 1::-1])).real
    P = pair_law_matrix(params, n)
    return m * (m - 1) * (g[:n] @ P @ np.conj(g[:n])).real


def second_moment_W(params: ModelParams, z, N: int, warn_above: int = 2000,
                    pair_cap: int = PAIR_CAP) -> ComplexMomentSeries:
    """G_n(z) together with E|W_n(z)|^2 for n <= N.

    Squaring the profile-polynomial recursion gives, for n >= m,

        E|W_n|^2 = m|z|^2 A_n(E|W|^2) + |z|^2 (cross term)
                   + 2(m-1) Re(m z A_n(G)) + (m-1)^2.

    The cross term is O(n) per row for m = 2 and O(n^2) for m >= 3, where N
    is capped at ``pair_cap``.
    """
    _check_sizes(N)
    m = params.m
    if m >= 3 and N > pair_cap:
        raise PreconditionError(f"second moments for m >= 3 are O(N^3); N = {N} exceeds cap {pair_cap}")
    if N > warn_above:
        warnings.warn(f"second_moment_W with N = {N} is slow", RuntimeWarning, stacklevel=2)
    z = complex(z)
    g = expected_W(params, z, N).g
    lin = split_average(params, g)
    src = np.zeros((N + 1, 1))
    az2 = abs(z) ** 2
    for n in range(m, N + 1):
        cross = _cross_term(params, g, n)
        src[n, 0] = az2 * cross + 2 * (m - 1) * (m * z * lin[n]).real + (m - 1) ** 2
    base = (np.arange(m) ** 2.0)[:, None]
    g2 = _solve(params, base, [m * az2], src, m)[:, 0].real
    return ComplexMomentSeries(params, z, g, g2)


# -- rational oracle -------------------------------------------------------


@dataclass(frozen=True)
class ExactDistribution:
    """Exact law of the profile of a tree with n keys."""

    params: ModelParams
    n: int
    support: tuple  # ((profile tuple, Fraction), ...)

    def total(self):
        return sum(p for _, p in self.support)

    def mean(self):
        width = max((len(x) for x, _ in self.support), default=0)
        out = [Fraction(0)] * width
        for x, p in self.support:
            for k, v in enumerate(x):
                out[k] += p * v
        return out

    def expect(self, fn):
        return sum(float(p) * fn(np.asarray(x, dtype=float)) for x, p in self.support)

    def moment_W(self, z):
        return self.expect(lambda x: np.polyval(x[::-1], z) if x.size else 0.0)

    def second_moment_W(self, z):
        return self.expect(lambda x: abs(np.polyval(x[::-1], z)) ** 2 if x.size else 0.0)


def _strip(x):
    x = list(x)
    while x and x[-1] == 0:
        x.pop()
    return tuple(x)


def _add(a, b):
    w = max(len(a), len(b))
    return _strip(tuple((a[i] if i < len(a) else 0) + (b[i] if i < len(b) else 0) for i in range(w)))


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@lru_cache(maxsize=None)
def _oracle(m, t, n, external):
    if external and n <= m - 2:
        return {_strip((m - 1 - n,)): Fraction(1)}
    if not external and n <= m - 1:
        return {_strip((n,)): Fraction(1)}
    tt = t if n >= m * t + m - 1 else 0
    denom = comb(n, m * tt + m - 1)
    top = () if external else (m - 1,)
    dist = {}
    for v in _compositions(n - m + 1, m):
        w = 1
        for nj in v:
            w *= comb(nj, tt)
        if w == 0:
            continue
        pv = Fraction(w, denom)
        acc = {(): Fraction(1)}
        for nj in v:
            child = _oracle(m, t, nj, external)
            nxt = {}
            for x, px in acc.items():
                for y, py in child.items():
                    key = _add(x, y)
                    nxt[key] = nxt.get(key, 0) + px * py
            acc = nxt
        for x, px in acc.items():
            key = _add(top, (0,) + x)
            dist[key] = dist.get(key, 0) + pv * px
    return dist


def enumerate_profile_distribution(params: ModelParams, n: int, cap: int = ORACLE_CAP,
                                   external: bool = False) -> ExactDistribution:
    """Exact profile law by enumerating every split outcome, in rationals."""
    if n < 0 or n > cap:
        raise PreconditionError(f"oracle enumeration limited to 0 <= n <= {cap}")
    dist = _oracle(params.m, params.t, n, external)
    return ExactDistribution(params, n, tuple(sorted(dist.items())))
