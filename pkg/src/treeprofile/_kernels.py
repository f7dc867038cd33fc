"""Compiled inner loops: split sampling, tree profiles, limit-process draws.

Trees are never materialised. A depth-first stack of (subtree size, level)
pairs is expanded by drawing split vectors, which is all the profile
recursion needs.
"""

import numba
import numpy as np

_JIT = dict(nogil=True, cache=True)


@numba.njit(**_JIT)
def draw_split(rng, n, m, t, out, buf):
    """Fill ``out[:m]`` with subtree sizes for a node holding ``n`` keys.

    For n >= mt+m-1 a uniform (mt+m-1)-subset of ranks is drawn with Floyd's
    algorithm and the pivots are its (t+1)-th, 2(t+1)-th, ... order
    statistics. For m <= n < mt+m-1 the pivots are a uniform (m-1)-subset.
    For n = m-1 every child is empty.
    """
    if n == m - 1:
        for j in range(m):
            out[j] = 0
        return
    r = m * t + m - 1
    if n >= r:
        size = r
        step = t + 1
    else:
        size = m - 1
        step = 1
    cnt = 0
    for j in range(n - size + 1, n + 1):
        v = rng.integers(1, j + 1)
        for q in range(cnt):
            if buf[q] == v:
                v = j
                break
        buf[cnt] = v
        cnt += 1
    for a in range(1, size):
        x = buf[a]
        b = a - 1
        while b >= 0 and buf[b] > x:
            buf[b + 1] = buf[b]
            b -= 1
        buf[b + 1] = x
    prev = 0
    for i in range(1, m):
        y = buf[i * step - 1]
        out[i - 1] = y - prev - 1
        prev = y
    out[m - 1] = n - prev


@numba.njit(**_JIT)
def draw_splits(rng, n, m, t, count):
    res = np.empty((count, m), np.int64)
    out = np.empty(m, np.int64)
    buf = np.empty(m * t + m, np.int64)
    for i in range(count):
        draw_split(rng, n, m, t, out, buf)
        for j in range(m):
            res[i, j] = out[j]
    return res


@numba.njit(**_JIT)
def internal_profile(rng, n, m, t, kmax):
    """Key counts per level 0..kmax; subtrees below kmax are not expanded."""
    counts = np.zeros(kmax + 1, np.int64)
    cap = m * (kmax + 2) + 1
    st_n = np.empty(cap, np.int64)
    st_k = np.empty(cap, np.int64)
    out = np.empty(m, np.int64)
    buf = np.empty(m * t + m, np.int64)
    sp = 0
    if n > 0:
        st_n[0] = n
        st_k[0] = 0
        sp = 1
    while sp > 0:
        sp -= 1
        size = st_n[sp]
        k = st_k[sp]
        if size <= m - 1:
            counts[k] += size
            continue
        counts[k] += m - 1
        if k == kmax:
            continue
        draw_split(rng, size, m, t, out, buf)
        for j in range(m):
            if out[j] > 0:
                st_n[sp] = out[j]
                st_k[sp] = k + 1
                sp += 1
    return counts


@numba.njit(**_JIT)
def external_profile(rng, n, m, t, kmax):
    """Free positions per level 0..kmax."""
    counts = np.zeros(kmax + 1, np.int64)
    cap = m * (kmax + 2) + 1
    st_n = np.empty(cap, np.int64)
    st_k = np.empty(cap, np.int64)
    out = np.empty(m, np.int64)
    buf = np.empty(m * t + m, np.int64)
    st_n[0] = n
    st_k[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        size = st_n[sp]
        k = st_k[sp]
        if size <= m - 2:
            counts[k] += m - 1 - size
            continue
        if k == kmax:
            continue
        draw_split(rng, size, m, t, out, buf)
        for j in range(m):
            if out[j] == 0:
                counts[k + 1] += m - 1
            else:
                st_n[sp] = out[j]
                st_k[sp] = k + 1
                sp += 1
    return counts


@numba.njit(**_JIT)
def type_profile(rng, n, m, t, kmax):
    """Per-type node counts (rows 0..m-1) and key counts from one tree.

    Type j >= 1 is a node holding j keys; type 0 is an empty subtree, i.e.
    an empty child slot of a full node (or the empty tree itself).
    """
    types = np.zeros((m, kmax + 1), np.int64)
    counts = np.zeros(kmax + 1, np.int64)
    cap = m * (kmax + 2) + 1
    st_n = np.empty(cap, np.int64)
    st_k = np.empty(cap, np.int64)
    out = np.empty(m, np.int64)
    buf = np.empty(m * t + m, np.int64)
    st_n[0] = n
    st_k[0] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        size = st_n[sp]
        k = st_k[sp]
        if size <= m - 1:
            types[size, k] += 1
            counts[k] += size
            continue
        types[m - 1, k] += 1
        counts[k] += m - 1
        if k == kmax:
            continue
        draw_split(rng, size, m, t, out, buf)
        for j in range(m):
            st_n[sp] = out[j]
            st_k[sp] = k + 1
            sp += 1
    return types, counts


@numba.njit(**_JIT)
def dirichlet_draws(rng, m, t, count):
    res = np.empty((count, m))
    for i in range(count):
        s = 0.0
        for j in range(m):
            g = rng.standard_gamma(t + 1.0)
            res[i, j] = g
            s += g
        for j in range(m):
            res[i, j] /= s
    return res


@numba.njit(**_JIT)
def _weights_pow(rng, m, t, expo, w, out):
    if m == 2 and t == 0:
        u = rng.random()
        while u == 0.0:
            u = rng.random()
        out[0] = u ** expo
        out[1] = (1.0 - u) ** expo
        return
    s = 0.0
    for r in range(m):
        w[r] = rng.standard_gamma(t + 1.0)
        s += w[r]
    for r in range(m):
        out[r] = (w[r] / s) ** expo


@numba.njit(**_JIT)
def limit_draws(rng, z, expo, m, t, depth, count):
    """``count`` draws of the depth-truncated fixed-point iterate.

    Leaves start at 1 and each internal node combines its m children as
    z * sum_r V_r**expo * child_r with a fresh Dirichlet vector V.
    ``z`` and ``expo`` may both be real or both complex.
    """
    one = z * expo * 0.0 + 1.0
    res = np.full(count, one)
    if depth == 0:
        return res
    width = m ** (depth - 1)
    buf = np.full(width, one)
    pw = np.full(m, one)
    w = np.empty(m)
    for i in range(count):
        # bottom level: children are the constant leaves
        for g in range(width):
            _weights_pow(rng, m, t, expo, w, pw)
            acc = pw[0]
            for r in range(1, m):
                acc += pw[r]
            buf[g] = z * acc
        cur = width
        while cur > 1:
            cur //= m
            for g in range(cur):
                _weights_pow(rng, m, t, expo, w, pw)
                acc = buf[g * m] * pw[0]
                for r in range(1, m):
                    acc += buf[g * m + r] * pw[r]
                buf[g] = z * acc
        res[i] = buf[0]
    return res


@numba.njit(cache=True)
def split_recurrence(base, coef, src, n0, t, s, bt, br, small):
    """Solve a_n = coef * E[a_{V_n}] + src_n for n >= n0, vectorised over columns.

    ``E[a_{V_n}]`` averages over the marginal subtree-size law at n. For
    n >= r it equals sum_l C(l,t) C(n-1-l,s) a_l / C(n,r), and that sum is the
    (s+1)-fold running sum of C(l,t) a_l read at index n-1-s, so each step
    costs O(s). Rows n < r use the dense law rows in ``small``.
    """
    N = src.shape[0] - 1
    nz = src.shape[1]
    r = small.shape[0]
    a = np.zeros((N + 1, nz), np.complex128)
    run = np.zeros((s + 1, nz), np.complex128)
    top = np.zeros((N + 1, nz), np.complex128)
    for n in range(N + 1):
        for j in range(nz):
            if n < n0:
                a[n, j] = base[n, j]
            elif n < r:
                acc = 0j
                for ell in range(n):
                    acc += small[n, ell] * a[ell, j]
                a[n, j] = coef[j] * acc + src[n, j]
            else:
                a[n, j] = coef[j] * top[n - 1 - s, j] / br[n] + src[n, j]
            c = bt[n] * a[n, j]
            run[0, j] += c
            for q in range(1, s + 1):
                run[q, j] += run[q - 1, j]
            top[n, j] = run[s, j]
    return a


@numba.njit(**_JIT)
def limit_draws_bst_real(rng, z, expo, depth, count):
    """Real-z fast path of :func:`limit_draws` for m = 2, t = 0 (V uniform)."""
    res = np.ones(count)
    if depth == 0:
        return res
    width0 = 2 ** (depth - 1)
    buf = np.empty(width0)
    for i in range(count):
        for g in range(width0):
            u = rng.random()
            while u == 0.0:
                u = rng.random()
            buf[g] = z * (u ** expo + (1.0 - u) ** expo)
        width = width0
        while width > 1:
            width //= 2
            for g in range(width):
                u = rng.random()
                while u == 0.0:
                    u = rng.random()
                buf[g] = z * (buf[2 * g] * u ** expo + buf[2 * g + 1] * (1.0 - u) ** expo)
        res[i] = buf[0]
    return res
