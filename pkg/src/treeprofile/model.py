"""Random m-ary search trees: parameters, split laws and profile sampling.

A node holding ``n >= m`` keys keeps ``m - 1`` pivots and sends the other
keys into ``m`` subtrees. With ``r = mt + m - 1`` sampled keys the pivots are
every ``(t+1)``-th order statistic of the sample, so that

    P{V_n = (n_1, ..., n_m)} = prod_j C(n_j, t) / C(n, r).

When ``m <= n < r`` the pivots are a uniform ``(m-1)``-subset of the keys
(the ``t = 0`` law), and a node with ``n = m - 1`` keys has all children
empty.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import comb

import numpy as np
from scipy.special import binom

from . import _kernels
from .errors import DegeneratePairError, PreconditionError
from .rng import as_generator


@dataclass(frozen=True)
class ModelParams:
    m: int
    t: int = 0
    r: int = field(init=False)
    d: int = field(init=False)

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise PreconditionError(f"m must be an integer >= 2, got {self.m!r}")
        if int(self.t) != self.t or self.t < 0:
            raise PreconditionError(f"t must be an integer >= 0, got {self.t!r}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "t", int(self.t))
        object.__setattr__(self, "r", self.m * self.t + self.m - 1)
        object.__setattr__(self, "d", (self.m - 1) * (self.t + 1))

    @property
    def s(self) -> int:
        """Number of sampled keys above the first pivot, (m-1)t + m - 2."""
        return self.r - self.t - 1

    def law_t(self, n: int) -> int:
        """Pivot-balance parameter of the split law used at size ``n``."""
        return self.t if n >= self.r else 0


BST = ModelParams(2, 0)


def _pmf(n, m, t):
    # ratio recursion from l = t; never forms a factorial
    r = m * t + m - 1
    s = r - t - 1
    p = np.zeros(n)
    start = 1.0
    for j in range(t + 1):
        start *= (s + 1 + j) / (n - j)
    p[t] = start
    for ell in range(t, n - 1 - s):
        p[ell + 1] = p[ell] * (ell + 1) / (ell + 1 - t) * (n - ell - 1 - s) / (n - ell - 1)
    return p


def split_pmf(params: ModelParams, n: int) -> np.ndarray:
    """Marginal law of one subtree size, P{V_{n,j} = l} for l = 0..n-1."""
    if n < params.r:
        raise PreconditionError(f"split_pmf needs n >= mt+m-1 = {params.r}, got n = {n}")
    return _pmf(n, params.m, params.t)


def split_law(params: ModelParams, n: int) -> np.ndarray:
    """Marginal subtree-size law actually in force at size ``n >= m - 1``.

    Equals :func:`split_pmf` for ``n >= r``; below that it is the law of the
    supplementary rule, and a point mass at 0 for ``n = m - 1``.
    """
    if n < params.m - 1:
        raise PreconditionError(f"no split for n = {n} < m - 1")
    return _pmf(n, params.m, params.law_t(n))


def split_pair_pmf(params: ModelParams, n: int, l1: int, l2: int) -> float:
    """Joint probability P{V_{n,1} = l1, V_{n,2} = l2}."""
    m, t = params.m, params.t
    if m == 2:
        raise DegeneratePairError("for m = 2 the pair is degenerate: V2 = n - 1 - V1")
    if n < params.r:
        raise PreconditionError(f"split_pair_pmf needs n >= {params.r}, got n = {n}")
    rest = n - l1 - l2 - 2
    if l1 < 0 or l2 < 0 or rest < 0:
        return 0.0
    return comb(l1, t) * comb(l2, t) * comb(rest, (m - 2) * (t + 1) - 1) / comb(n, params.r)


def pair_law_matrix(params: ModelParams, n: int) -> np.ndarray:
    """``P[l1, l2]`` for the law in force at size ``n`` (m >= 3, n >= m)."""
    m = params.m
    if m == 2:
        raise DegeneratePairError("for m = 2 the pair is degenerate: V2 = n - 1 - V1")
    t = params.law_t(n)
    r = m * t + m - 1
    ell = np.arange(n)
    c = binom(ell, t)
    rest = n - 2 - ell[:, None] - ell[None, :]
    tail = np.where(rest >= 0, binom(np.maximum(rest, 0), (m - 2) * (t + 1) - 1), 0.0)
    return c[:, None] * c[None, :] * tail / binom(n, r)


def sample_split(params: ModelParams, n: int, rng=None) -> np.ndarray:
    """One split vector (V_{n,1}, ..., V_{n,m}) for a node with n keys."""
    if n < params.m - 1:
        raise PreconditionError(f"sample_split needs n >= m - 1, got n = {n}")
    return _kernels.draw_splits(as_generator(rng), n, params.m, params.t, 1)[0]


def sample_splits(params: ModelParams, n: int, size: int, rng=None) -> np.ndarray:
    """``size`` independent split vectors as a (size, m) array."""
    if n < params.m - 1:
        raise PreconditionError(f"sample_split needs n >= m - 1, got n = {n}")
    return _kernels.draw_splits(as_generator(rng), n, params.m, params.t, size)


def _kmax(kmax, default):
    if kmax is None:
        return default
    if kmax < 0:
        raise PreconditionError("kmax must be >= 0")
    return int(kmax)


def sample_profile(params: ModelParams, n: int, rng=None, kmax=None) -> np.ndarray:
    """Keys per level of one random tree with ``n`` keys.

    Returns counts for levels ``0..kmax`` (default ``max(n - 1, 0)``, which
    covers every nonempty level). With a smaller ``kmax`` the subtrees below
    that level are not simulated.
    """
    if n < 0:
        raise PreconditionError("n must be >= 0")
    k = _kmax(kmax, max(n - 1, 0))
    return _kernels.internal_profile(as_generator(rng), n, params.m, params.t, k)


def sample_external_profile(params: ModelParams, n: int, rng=None, kmax=None) -> np.ndarray:
    """Free insertion positions per level, levels ``0..kmax`` (default n)."""
    if n < 0:
        raise PreconditionError("n must be >= 0")
    k = _kmax(kmax, n)
    return _kernels.external_profile(as_generator(rng), n, params.m, params.t, k)


def sample_type_profile(params: ModelParams, n: int, rng=None, kmax=None):
    """``(types, counts)`` from one tree: ``types[j, k]`` nodes of type j at level k.

    ``counts`` is the key profile of the same tree, so that
    ``(np.arange(m) @ types) == counts`` holds exactly.
    """
    if n < 0:
        raise PreconditionError("n must be >= 0")
    k = _kmax(kmax, n)
    return _kernels.type_profile(as_generator(rng), n, params.m, params.t, k)
