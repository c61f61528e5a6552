import itertools
import math

import numpy as np
import pytest

from popcone.errors import TensorError
from popcone.models.polynomial import Polynomial, evaluate
from popcone.models.symtensor import (
    SliceIndex,
    SymmetricTensor,
    e_tensor,
    enumerate_slices,
    exponents_of_degree,
    inner_product,
    is_psd,
    m_d,
    multiplicity,
    t_d,
    tensor_slice,
    unfolding,
)


def random_polynomial(rng, n, degree):
    terms = {}
    for d in range(degree + 1):
        for exp in exponents_of_degree(n, d):
            terms[exp] = float(rng.integers(-5, 6))
    return Polynomial(n, terms)


@pytest.mark.parametrize('n,d', [(1, 3), (2, 4), (3, 4), (4, 2)])
def test_exponent_count(n, d):
    exps = exponents_of_degree(n, d)
    assert len(exps) == math.comb(n + d - 1, d)
    assert len(set(exps)) == len(exps)
    assert exps[0] == (d,) + (0,) * (n - 1)


def test_multiplicities_cover_all_index_tuples():
    n, d = 3, 4
    assert sum(multiplicity(a) for a in exponents_of_degree(n, d)) == n ** d
    assert multiplicity((2, 1, 1)) == 12


@pytest.mark.parametrize('n,d', [(1, 2), (2, 3), (2, 4), (3, 4)])
def test_coefficient_tensor_reproduces_polynomial(rng, n, d):
    p = random_polynomial(rng, n, d)
    tensor = t_d(p, d)
    for point in rng.normal(size=(5, n)):
        lifted = m_d(np.concatenate([[1.0], point]), d)
        assert inner_product(tensor, lifted) == pytest.approx(evaluate(p, point), rel=1e-9, abs=1e-9)


def test_coefficient_tensor_of_lower_degree_polynomial(rng):
    p = random_polynomial(rng, 2, 2)
    point = rng.normal(size=2)
    lifted = m_d(np.concatenate([[1.0], point]), 4)
    assert inner_product(t_d(p, 4), lifted) == pytest.approx(evaluate(p, point))


def test_coefficient_tensor_order_below_degree_raises():
    with pytest.raises(TensorError):
        t_d(Polynomial.variable(2, 0) ** 3, 2)


@pytest.mark.parametrize('n,d', [(2, 2), (2, 3), (3, 3)])
def test_inner_product_matches_dense_sum(rng, n, d):
    a = SymmetricTensor(n, d, {e: rng.normal() for e in exponents_of_degree(n, d)})
    b = SymmetricTensor(n, d, {e: rng.normal() for e in exponents_of_degree(n, d)})
    assert inner_product(a, b) == pytest.approx(float(np.sum(a.to_dense() * b.to_dense())))


def test_lift_inner_product_is_power_of_dot_product(rng):
    u, v = rng.normal(size=3), rng.normal(size=3)
    assert inner_product(m_d(u, 4), m_d(v, 4)) == pytest.approx(float(u @ v) ** 4)


def test_all_ones_tensor_against_lift_is_power_of_sum(rng):
    v = rng.random(3)
    assert inner_product(e_tensor(3, 4), m_d(v, 4)) == pytest.approx(float(np.sum(v)) ** 4)


def test_shape_mismatch_raises():
    with pytest.raises(TensorError):
        inner_product(e_tensor(2, 2), e_tensor(3, 2))
    with pytest.raises(TensorError):
        SymmetricTensor(2, 2, {(1, 0): 1.0})


def test_at_uses_index_tuples():
    t = m_d([1.0, 2.0, 3.0], 3)
    for idx in itertools.product(range(3), repeat=3):
        assert t.at(idx) == pytest.approx(np.prod([[1.0, 2.0, 3.0][i] for i in idx]))


def test_slice_counts():
    assert len(enumerate_slices(4, 4)) == 10
    principal = enumerate_slices(4, 4, principal_only=True)
    assert len(principal) == 4
    assert all(g.is_principal for g in principal)


def test_slice_of_lift(rng):
    v = rng.normal(size=3)
    g = SliceIndex((1, 1, 0))
    expected = v[0] * v[1] * np.outer(v, v)
    assert np.allclose(tensor_slice(m_d(v, 4), g), expected)


def test_bad_slice_index_raises():
    with pytest.raises(TensorError):
        tensor_slice(m_d([1.0, 1.0], 4), SliceIndex((1, 0)))


def test_slices_of_nonnegative_lifts_are_psd(rng):
    for _ in range(100):
        v = rng.random(4)
        lifted = m_d(v, 4)
        for g in enumerate_slices(4, 4):
            assert is_psd(tensor_slice(lifted, g))


def test_principal_slices_of_any_lift_are_psd(rng):
    for _ in range(100):
        v = rng.normal(size=4)
        lifted = m_d(v, 4)
        for g in enumerate_slices(4, 4, principal_only=True):
            assert is_psd(tensor_slice(lifted, g))
        assert is_psd(unfolding(lifted))


def test_non_principal_slice_can_be_indefinite():
    lifted = m_d([1.0, -1.0, 1.0], 4)
    assert not is_psd(tensor_slice(lifted, SliceIndex((1, 1, 0))))


def test_unfolding_of_lift_is_rank_one(rng):
    v = rng.normal(size=3)
    mat = unfolding(m_d(v, 4))
    half = np.array([np.prod(v ** np.array(e)) for e in exponents_of_degree(3, 2)])
    assert np.allclose(mat, np.outer(half, half))


def test_unfolding_needs_even_order():
    with pytest.raises(TensorError):
        unfolding(m_d([1.0, 2.0], 3))
