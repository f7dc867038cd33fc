import itertools
from fractions import Fraction
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from treeprofile.errors import DegeneratePairError, PreconditionError
from treeprofile.model import (
    BST,
    ModelParams,
    pair_law_matrix,
    sample_external_profile,
    sample_profile,
    sample_split,
    sample_splits,
    sample_type_profile,
    split_law,
    split_pair_pmf,
    split_pmf,
)
from treeprofile.rng import RngStream, run_replicates

models = st.tuples(st.integers(2, 6), st.integers(0, 3)).map(lambda mt: ModelParams(*mt))


@given(models)
def test_params_derived_fields(p):
    assert p.r == p.m * p.t + p.m - 1
    assert p.d == (p.m - 1) * (p.t + 1)
    assert p.s == (p.m - 1) * p.t + p.m - 2


@pytest.mark.parametrize("m,t", [(1, 0), (2, -1), (2.5, 0)])
def test_params_rejects(m, t):
    with pytest.raises(PreconditionError):
        ModelParams(m, t)


def test_split_pmf_bst_uniform():
    np.testing.assert_allclose(split_pmf(BST, 5), np.full(5, 0.2), rtol=1e-14)


def test_split_pmf_median_of_three():
    np.testing.assert_allclose(split_pmf(ModelParams(2, 1), 3), [0, 1, 0], atol=1e-15)


@settings(max_examples=60)
@given(models, st.integers(0, 80))
def test_split_pmf_normalised_and_exact(p, extra):
    n = p.r + extra
    pmf = split_pmf(p, n)
    assert abs(pmf.sum() - 1) < 1e-12
    ell = min(n - 1, p.t + extra // 2)
    direct = comb(ell, p.t) * comb(n - ell - 1, p.s) / comb(n, p.r)
    assert abs(pmf[ell] - direct) < 1e-13


def test_split_pmf_below_threshold():
    with pytest.raises(PreconditionError):
        split_pmf(ModelParams(3, 1), 4)


def test_split_law_supplementary_rule():
    p = ModelParams(3, 1)
    # below r = 5 the pivots are a uniform pair, so V_1 has the t = 0 law
    np.testing.assert_allclose(split_law(p, 4), split_pmf(ModelParams(3, 0), 4))
    np.testing.assert_allclose(split_law(p, 2), [1.0, 0.0])


def _compositions(total, parts):
    for cut in itertools.combinations(range(total + parts - 1), parts - 1):
        bounds = (-1,) + cut + (total + parts - 1,)
        yield tuple(bounds[i + 1] - bounds[i] - 1 for i in range(parts))


def test_pair_table_matches_enumeration():
    p, n = ModelParams(3, 0), 4
    table = np.zeros((n, n))
    for v in _compositions(n - 2, 3):
        w = Fraction(np.prod([comb(x, 0) for x in v]), comb(n, p.r))
        table[v[0], v[1]] += float(w)
    for l1 in range(n):
        for l2 in range(n):
            assert abs(split_pair_pmf(p, n, l1, l2) - table[l1, l2]) < 1e-15
    np.testing.assert_allclose(pair_law_matrix(p, n), table, atol=1e-15)


@settings(max_examples=25)
@given(st.integers(3, 5), st.integers(0, 2), st.integers(0, 30))
def test_pair_marginal(m, t, extra):
    p = ModelParams(m, t)
    n = p.r + extra
    P = pair_law_matrix(p, n)
    assert np.all(P >= 0)
    assert abs(P.sum() - 1) < 1e-12
    np.testing.assert_allclose(P.sum(axis=1), split_pmf(p, n), atol=1e-13)


def test_pair_degenerate_for_binary():
    with pytest.raises(DegeneratePairError):
        split_pair_pmf(BST, 5, 1, 3)


@given(models)
def test_split_at_r_is_deterministic(p):
    v = sample_split(p, p.r, RngStream(3))
    np.testing.assert_array_equal(v, np.full(p.m, p.t))


@settings(max_examples=30)
@given(models, st.integers(0, 50), st.integers(0, 2**32))
def test_split_sums(p, extra, seed):
    n = p.m - 1 + extra
    v = sample_splits(p, n, 50, seed)
    assert np.all(v >= 0)
    np.testing.assert_array_equal(v.sum(axis=1), n - p.m + 1)


def test_bst_split_uniform_chi_square():
    v = sample_splits(BST, 10, 10**6, RngStream(11))[:, 0]
    counts = np.bincount(v, minlength=10)
    assert stats.chisquare(counts).pvalue > 1e-3


@pytest.mark.parametrize("m,t,n", [(3, 1, 20), (2, 2, 15), (4, 0, 12)])
def test_split_marginal_and_exchangeability(m, t, n):
    p = ModelParams(m, t)
    v = sample_splits(p, n, 10**6, RngStream(5))
    pmf = split_pmf(p, n)
    keep = pmf > 0
    for j in (0, m - 1):
        counts = np.bincount(v[:, j], minlength=n)
        assert counts[~keep].sum() == 0
        assert stats.chisquare(counts[keep], 10**6 * pmf[keep]).pvalue > 1e-3
    table = np.vstack([np.bincount(v[:, 0], minlength=n), np.bincount(v[:, -1], minlength=n)])
    table = table[:, table.sum(axis=0) > 0]
    assert stats.chi2_contingency(table).pvalue > 1e-3


def test_split_precondition():
    with pytest.raises(PreconditionError):
        sample_split(ModelParams(3, 0), 1)


@given(models, st.integers(0, 4))
def test_small_trees(p, n):
    if n <= p.m - 1:
        np.testing.assert_array_equal(sample_profile(p, n, 1)[:1], [n])
        assert sample_profile(p, n, 1)[1:].sum() == 0


@given(models)
def test_profile_at_m(p):
    prof = sample_profile(p, p.m, 2)
    np.testing.assert_array_equal(prof[:2], [p.m - 1, 1])


@settings(max_examples=40)
@given(models, st.integers(0, 300), st.integers(0, 2**32))
def test_profile_sums_and_support(p, n, seed):
    prof = sample_profile(p, n, seed)
    assert prof.sum() == n
    assert np.all(prof[n:] == 0)
    assert np.all(prof >= 0)


@given(models)
def test_external_empty_tree(p):
    np.testing.assert_array_equal(sample_external_profile(p, 0, 1), [p.m - 1])


def test_external_bst_single_key():
    np.testing.assert_array_equal(sample_external_profile(BST, 1, 1), [0, 2])


@settings(max_examples=40)
@given(models, st.integers(0, 200), st.integers(0, 2**32))
def test_external_nonnegative(p, n, seed):
    y = sample_external_profile(p, n, seed)
    assert np.all(y >= 0)
    if n >= p.m - 1:
        assert y[0] == 0
    # free positions: every key adds one slot net in a binary tree
    if p.m == 2:
        assert y.sum() == n + 1


@settings(max_examples=40)
@given(models, st.integers(0, 200), st.integers(0, 2**32))
def test_type_identity(p, n, seed):
    types, counts = sample_type_profile(p, n, seed)
    np.testing.assert_array_equal(np.arange(p.m) @ types, counts)
    np.testing.assert_array_equal(counts, sample_profile(p, n, seed, kmax=n))


@given(models, st.integers(1, 5))
def test_type_small_root(p, n):
    if n <= p.m - 1:
        types, _ = sample_type_profile(p, n, 0)
        assert types[n, 0] == 1


def test_type_bst_single_keys():
    types, counts = sample_type_profile(BST, 500, 4)
    np.testing.assert_array_equal(types[1], counts)


def test_streams_reproducible():
    a = sample_profile(ModelParams(3, 1), 400, RngStream(9, 4))
    b = sample_profile(ModelParams(3, 1), 400, RngStream(9, 4))
    c = sample_profile(ModelParams(3, 1), 400, RngStream(9, 5))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_replicates_independent_of_workers():
    def f(g):
        return sample_profile(BST, 300, g, kmax=20)

    one = run_replicates(f, 700, seed=3, workers=1, chunk=64)
    many = run_replicates(f, 700, seed=3, workers=4, chunk=64)
    np.testing.assert_array_equal(np.array(one), np.array(many))
