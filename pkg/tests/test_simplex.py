import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from alphacoda import simplex as sx
from alphacoda.errors import (
    DeltaTooLarge,
    DimensionMismatch,
    NegativeDetectionLimit,
    NonPositiveEntry,
    TooShort,
)


def random_compositions(n, D, seed=0, floor=0.0):
    rng = np.random.default_rng(seed)
    x = rng.dirichlet(np.ones(D), size=n) + floor
    return x / x.sum(axis=1, keepdims=True)


positive_vectors = st.integers(2, 12).flatmap(
    lambda D: arrays(float, D, elements=st.floats(1e-3, 1e3))
)


# closure / Aitchison operations

@pytest.mark.parametrize(
    "v, expected",
    [
        ([1, 1, 2], [0.25, 0.25, 0.5]),
        ([5, 5, 5, 5], [0.25] * 4),
        ([0.1, 0.3], [0.25, 0.75]),
    ],
)
def test_closure_examples(v, expected):
    np.testing.assert_allclose(sx.closure(v), expected, rtol=1e-15)


def test_closure_errors():
    with pytest.raises(NonPositiveEntry):
        sx.closure([1.0, 0.0, 2.0])
    with pytest.raises(TooShort):
        sx.closure([1.0])


def test_perturb_and_power_examples():
    x = random_compositions(1, 6, seed=1)[0]
    np.testing.assert_allclose(sx.perturb(x, sx.uniform(6)), x, atol=1e-15)
    np.testing.assert_allclose(sx.perturb([0.5, 0.5], [0.8, 0.2]), [0.8, 0.2], atol=1e-15)
    np.testing.assert_allclose(sx.perturb(x, sx.power(x, -1)), sx.uniform(6), atol=1e-15)
    np.testing.assert_allclose(sx.power(x, 1), x, atol=1e-15)
    np.testing.assert_allclose(sx.power(x, 0), sx.uniform(6), atol=1e-15)
    np.testing.assert_allclose(sx.power([0.25, 0.75], 2), [0.1, 0.9], atol=1e-15)


def test_perturb_sub_examples():
    x, y = random_compositions(2, 5, seed=2)
    np.testing.assert_allclose(sx.perturb_sub(x, x), sx.uniform(5), atol=1e-15)
    np.testing.assert_allclose(sx.perturb_sub(sx.perturb(x, y), y), x, atol=1e-12)
    np.testing.assert_allclose(sx.perturb_sub([0.8, 0.2], [0.5, 0.5]), [0.8, 0.2], atol=1e-15)
    with pytest.raises(DimensionMismatch):
        sx.perturb_sub([0.5, 0.5], [0.2, 0.3, 0.5])


def test_vector_space_axioms():
    x, y, w = random_compositions(3, 7, seed=3)
    a, b = 0.7, -1.3
    tol = dict(atol=1e-12)
    np.testing.assert_allclose(sx.perturb(sx.perturb(x, y), w), sx.perturb(x, sx.perturb(y, w)), **tol)
    np.testing.assert_allclose(sx.perturb(x, y), sx.perturb(y, x), **tol)
    np.testing.assert_allclose(sx.power(sx.perturb(x, y), a), sx.perturb(sx.power(x, a), sx.power(y, a)), **tol)
    np.testing.assert_allclose(sx.power(x, a + b), sx.perturb(sx.power(x, a), sx.power(x, b)), **tol)
    np.testing.assert_allclose(sx.power(sx.power(x, a), b), sx.power(x, a * b), **tol)


def test_inner_product_examples():
    y = random_compositions(1, 5, seed=4)[0]
    assert sx.aitchison_inner(sx.uniform(5), y) == pytest.approx(0.0, abs=1e-15)
    assert sx.aitchison_inner(y, y) > 0
    assert sx.aitchison_inner(sx.uniform(5), sx.uniform(5)) == 0.0


def test_inner_product_matches_clr_dot():
    # oracle: dot product of clr coordinates
    X = random_compositions(200, 9, seed=5)
    Y = random_compositions(200, 9, seed=6)
    got = sx.aitchison_inner(X, Y)
    want = np.einsum("ij,ij->i", sx.clr(X), sx.clr(Y))
    np.testing.assert_allclose(got, want, atol=1e-10)


def test_distance_is_clr_euclidean():
    X = random_compositions(200, 11, seed=7)
    Y = random_compositions(200, 11, seed=8)
    d = sx.aitchison_distance(X, Y)
    np.testing.assert_allclose(d, np.linalg.norm(sx.clr(X) - sx.clr(Y), axis=1), atol=1e-10)
    np.testing.assert_allclose(d, np.linalg.norm(sx.ilr(X) - sx.ilr(Y), axis=1), atol=1e-10)
    np.testing.assert_allclose(d, sx.aitchison_distance(Y, X), atol=1e-14)
    assert sx.aitchison_distance(X[0], X[0]) == pytest.approx(0.0, abs=1e-12)


# clr / ilr / helmert

def test_clr_examples():
    np.testing.assert_allclose(sx.clr(sx.uniform(4)), 0.0, atol=1e-15)
    np.testing.assert_allclose(sx.clr_inv(np.zeros(4)), sx.uniform(4), atol=1e-15)
    # hand computation: g = sqrt(0.25 * 0.75)
    g = np.sqrt(0.25 * 0.75)
    expected = [np.log(0.25 / g), np.log(0.75 / g)]
    np.testing.assert_allclose(sx.clr([0.25, 0.75]), expected, atol=1e-15)
    np.testing.assert_allclose(expected, [-0.5493061443, 0.5493061443], atol=1e-10)


def test_clr_rejects_denormal_parts():
    with pytest.raises(NonPositiveEntry):
        sx.clr([1e-310, 1.0])


def test_helmert_small_cases():
    r2, r6 = np.sqrt(2), np.sqrt(6)
    np.testing.assert_allclose(sx.helmert_sub(2), [[1 / r2, -1 / r2]], atol=1e-16)
    np.testing.assert_allclose(
        sx.helmert_sub(3), [[1 / r2, -1 / r2, 0], [1 / r6, 1 / r6, -2 / r6]], atol=1e-16
    )
    with pytest.raises(TooShort):
        sx.helmert_sub(1)


@pytest.mark.parametrize("D", range(2, 112))
def test_helmert_orthonormal_zero_sum(D):
    H = sx.helmert_sub(D)
    assert H.shape == (D - 1, D)
    np.testing.assert_allclose(H @ H.T, np.eye(D - 1), atol=1e-12)
    np.testing.assert_allclose(H.sum(axis=1), 0.0, atol=1e-12)


def test_ilr_examples():
    np.testing.assert_allclose(sx.ilr(sx.uniform(5)), np.zeros(4), atol=1e-15)
    np.testing.assert_allclose(sx.ilr([0.25, 0.75]), [-0.5493061443 * np.sqrt(2)], atol=1e-9)
    assert sx.ilr([0.25, 0.75])[0] == pytest.approx(-0.7768, abs=1e-4)
    X = random_compositions(100, 13, seed=9)
    np.testing.assert_allclose(np.linalg.norm(sx.ilr(X), axis=1), sx.aitchison_norm(X), atol=1e-10)


# alpha-transformation

def test_alpha_transform_examples():
    for a in (0.1, 0.5, 1.0):
        np.testing.assert_allclose(sx.alpha_transform(sx.uniform(6), a), 0.0, atol=1e-14)
    np.testing.assert_allclose(sx.alpha_transform([0.5, 0.5], 1.0), [0.0], atol=1e-15)
    x = random_compositions(50, 8, seed=10)
    assert np.array_equal(sx.alpha_transform(x, 0.0), sx.ilr(x))


def test_alpha_transform_matches_formula():
    # direct evaluation of (1/a) H (D u - 1)
    x = random_compositions(1, 5, seed=11)[0]
    a = 0.3
    u = x**a / np.sum(x**a)
    want = sx.helmert_sub(5) @ (5 * u - 1) / a
    np.testing.assert_allclose(sx.alpha_transform(x, a), want, atol=1e-13)


def test_alpha_limit_is_ilr():
    # parts bounded below by 0.01
    X = 0.01 + 0.8 * random_compositions(300, 20, seed=12)
    X = X / X.sum(axis=1, keepdims=True)
    errs = [np.abs(sx.alpha_transform(X, a) - sx.ilr(X)).max() for a in (1e-1, 1e-2, 1e-3, 1e-4)]
    assert all(e1 > e2 for e1, e2 in zip(errs, errs[1:]))
    assert np.linalg.norm(sx.alpha_transform(X, 1e-4) - sx.ilr(X), axis=1).max() < 1e-3


@pytest.mark.parametrize("a", [0.0, 0.1, 0.5, 1.0])
@pytest.mark.parametrize("D", [2, 11, 111])
def test_alpha_round_trip(a, D):
    X = random_compositions(300, D, seed=D)
    back = sx.alpha_inverse(sx.alpha_transform(X, a), a, D)
    np.testing.assert_allclose(back, X, atol=1e-10, rtol=0)


def test_alpha_inverse_examples():
    for a in (0.0, 0.2, 1.0):
        np.testing.assert_allclose(sx.alpha_inverse(np.zeros(3), a, 4), sx.uniform(4), atol=1e-15)
    # D=2, alpha=1, z=-2: 1 + H'z = [1 - sqrt2, 1 + sqrt2]
    with pytest.raises(NegativeDetectionLimit):
        sx.alpha_inverse([-2.0], 1.0, 2)
    comp, n = sx.alpha_inverse([-2.0], 1.0, 2, clamp=True)
    assert n == 1
    assert comp.sum() == pytest.approx(1.0)
    assert np.all(comp > 0)


def test_alpha_inverse_dimension_check():
    with pytest.raises(DimensionMismatch):
        sx.alpha_inverse(np.zeros(3), 0.5, 5)


@settings(max_examples=200, deadline=None)
@given(positive_vectors, st.sampled_from([0.0, 0.05, 0.3, 0.9, 1.0]))
def test_alpha_round_trip_property(v, a):
    x = sx.closure(v)
    np.testing.assert_allclose(sx.alpha_inverse(sx.alpha_transform(x, a), a, x.size), x, atol=1e-10)


@settings(max_examples=200, deadline=None)
@given(positive_vectors)
def test_clr_sums_to_zero_and_inverts(v):
    x = sx.closure(v)
    w = sx.clr(x)
    assert abs(w.sum()) < 1e-10
    np.testing.assert_allclose(sx.clr_inv(w), x, atol=1e-12)


# zero replacement

def test_multiplicative_replace_examples():
    np.testing.assert_allclose(sx.multiplicative_replace([0.5, 0.5, 0], 0.1), [0.45, 0.45, 0.1])
    x = np.array([0.2, 0.3, 0.5])
    np.testing.assert_array_equal(sx.multiplicative_replace(x, 0.1), x)
    np.testing.assert_allclose(sx.multiplicative_replace([2, 0, 0, 2], 0.5), [1.5, 0.5, 0.5, 1.5])
    with pytest.raises(DeltaTooLarge):
        sx.multiplicative_replace([1.0, 0.0, 0.0], 0.5)


@settings(max_examples=200, deadline=None)
@given(
    arrays(float, st.integers(3, 30), elements=st.one_of(st.just(0.0), st.floats(0.1, 100.0))),
    st.floats(1e-6, 1e-3),
)
def test_multiplicative_replace_conserves(x, delta):
    if not np.any(x > 0):
        return
    r = sx.multiplicative_replace(x, delta)
    assert np.all(r > 0)
    assert r.sum() == pytest.approx(x.sum(), rel=1e-12)
    pos = np.flatnonzero(x > 0)
    np.testing.assert_allclose(r[pos] / r[pos[0]], x[pos] / x[pos[0]], rtol=1e-12)
