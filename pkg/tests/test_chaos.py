from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdme.chaos import (
    ChaosVector,
    HermitePolynomial,
    SymmetricKernel,
    contract,
    dgamma_diagonal,
    eval_hermite,
    from_hermite,
    hu_meyer_product,
    malliavin_d,
    malliavin_d_star,
    multi_indices,
    pairing,
    stochastic_exponential,
    stroock_taylor_kernel,
    symmetrize,
    to_hermite,
)
from cdme.selfcheck import random_chaos


def e(k, dim):
    v = np.zeros(dim)
    v[k] = 1.0
    return v


def I1(k, dim):
    return ChaosVector.first_order(e(k, dim))


def I(order, dim, coeffs):
    ks = [SymmetricKernel.zeros(n, dim) for n in range(order)] + [SymmetricKernel.from_dict(order, dim, coeffs)]
    return ChaosVector(dim, tuple(ks))


def brute_symmetrize(T):
    n = T.ndim
    return sum(np.transpose(T, p) for p in itertools.permutations(range(n))) / math.factorial(n)


def dense_contract(h, g, r):
    H, G = h.to_dense(), g.to_dense()
    T = np.tensordot(H, G, axes=(list(range(h.order - r, h.order)), list(range(r))))
    return brute_symmetrize(T) if T.ndim else T


seeds = st.integers(0, 2**32 - 1)


# --- symmetrize -------------------------------------------------------------


def test_symmetrize_two_factor_product():
    k = symmetrize(np.outer(e(0, 2), e(1, 2)))
    assert k.to_dense()[0, 1] == 0.5 and k.to_dense()[1, 0] == 0.5
    assert k[(1, 0)] == 0.5


def test_symmetrize_is_idempotent():
    rng = np.random.default_rng(0)
    k = symmetrize(rng.normal(size=(3, 3, 3)))
    np.testing.assert_array_equal(symmetrize(k.to_dense()).values, k.values)


def test_symmetrize_matches_brute_force_order3():
    T = np.random.default_rng(1).normal(size=(2, 2, 2))
    np.testing.assert_allclose(symmetrize(T).to_dense(), brute_symmetrize(T), atol=1e-15)


# --- contraction ------------------------------------------------------------


def test_contract_examples():
    h = SymmetricKernel.from_dict(2, 2, {(0, 0): 1.0})
    g = SymmetricKernel(1, 2, e(0, 2))
    np.testing.assert_allclose(contract(h, g, 1).values, [1.0, 0.0])
    h12 = SymmetricKernel.from_dict(2, 2, {(0, 1): 0.5})
    np.testing.assert_allclose(contract(h12, SymmetricKernel(1, 2, e(1, 2)), 1).values, [0.5, 0.0])


def test_contract_rejects_out_of_range():
    h = SymmetricKernel.zeros(2, 2)
    with pytest.raises(ValueError):
        contract(h, SymmetricKernel.zeros(1, 2), 2)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(0, 3), st.integers(0, 3))
def test_contract_matches_dense_oracle(seed, dim, n, m):
    rng = np.random.default_rng(seed)
    h = SymmetricKernel(n, dim, rng.normal(size=len(multi_indices(dim, n))))
    g = SymmetricKernel(m, dim, rng.normal(size=len(multi_indices(dim, m))))
    for r in range(min(n, m) + 1):
        got = contract(h, g, r)
        ref = dense_contract(h, g, r) if (n and m) else (h.values[0] * g.to_dense() if n == 0 else g.values[0] * h.to_dense())
        np.testing.assert_allclose(got.to_dense(), ref, atol=1e-12)


# --- Hu-Meyer ---------------------------------------------------------------


def test_square_of_first_order_integral():
    p = hu_meyer_product(I1(0, 1), I1(0, 1))
    np.testing.assert_allclose(p.kernel(0).values, [1.0])
    np.testing.assert_allclose(p.kernel(1).values, [0.0])
    np.testing.assert_allclose(p.kernel(2).values, [1.0])


def test_product_with_scalar():
    a = random_chaos(np.random.default_rng(3), 2, 3)
    p = hu_meyer_product(a, ChaosVector.constant(2.5, 2))
    assert p.max_abs_diff(2.5 * a) < 1e-15


def test_second_times_first_matches_hermite_identity():
    p = hu_meyer_product(I(2, 1, {(0, 0): 1.0}), I1(0, 1))
    np.testing.assert_allclose([p.kernel(n).values[0] for n in range(4)], [0, 2, 0, 1], atol=1e-15)
    # He_2 He_1 = He_3 + 2 He_1
    z = np.linspace(-2, 2, 7)
    np.testing.assert_allclose((z**2 - 1) * z, (z**3 - 3 * z) + 2 * z)
    np.testing.assert_allclose(to_hermite(p).coeffs, [0, 2, 0, 1], atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(0, 3), st.integers(0, 3))
def test_hermite_homomorphism(seed, dim, n, m):
    rng = np.random.default_rng(seed)
    a, b = random_chaos(rng, dim, n), random_chaos(rng, dim, m)
    z = rng.normal(size=(20, dim))
    lhs = eval_hermite(to_hermite(hu_meyer_product(a, b)), z)
    rhs = eval_hermite(to_hermite(a), z) * eval_hermite(to_hermite(b), z)
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10, atol=1e-10)


def test_product_respects_order_cap():
    a = ChaosVector(1, I(2, 1, {(0, 0): 1.0}).kernels, max_order=2)
    p = hu_meyer_product(a, a)
    assert p.order == 2 and p.truncated


# --- Malliavin derivative and adjoint -----------------------------------------


def test_derivative_examples():
    assert malliavin_d(I1(0, 2), e(0, 2)).expectation == 1.0
    assert malliavin_d(I1(0, 2), e(1, 2)).max_abs_diff(ChaosVector.zeros(2)) == 0.0
    d = malliavin_d(I(2, 2, {(0, 1): 0.5}), e(0, 2))
    np.testing.assert_allclose(d.kernel(1).values, [0.0, 1.0])


def test_adjoint_examples():
    a = malliavin_d_star(ChaosVector.constant(1.0, 1), [1.0])
    assert a.max_abs_diff(I1(0, 1)) == 0.0
    s = malliavin_d_star(I1(0, 1), [1.0]) + malliavin_d(I1(0, 1), [1.0])
    np.testing.assert_allclose([s.kernel(n).values[0] for n in range(3)], [1.0, 0.0, 1.0])


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 4), st.integers(0, 4), st.integers(0, 4))
def test_duality_and_commutation(seed, dim, n, m):
    rng = np.random.default_rng(seed)
    a, b = random_chaos(rng, dim, n), random_chaos(rng, dim, m)
    l = rng.uniform(-1, 1, dim)
    lhs, rhs = pairing(malliavin_d(a, l), b), pairing(a, malliavin_d_star(b, l))
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))
    comm = malliavin_d_star(a, l) + malliavin_d(a, l)
    assert comm.max_abs_diff(hu_meyer_product(a, ChaosVector.first_order(l))) <= 1e-12
    assert malliavin_d_star(a, l).expectation == 0.0


# --- second quantisation -------------------------------------------------------


def test_dgamma_examples():
    alphas = np.array([1.0, 2.5, 4.0])
    np.testing.assert_allclose(dgamma_diagonal(I1(1, 3), alphas).kernel(1).values, [0, 2.5, 0])
    a = random_chaos(np.random.default_rng(5), 3, 3)
    num = dgamma_diagonal(a, np.ones(3))
    for n in range(4):
        np.testing.assert_allclose(num.kernel(n).values, n * a.kernel(n).values)
    k = dgamma_diagonal(I(2, 3, {(0, 1): 1.0}), alphas).kernel(2)
    assert k[(0, 1)] == pytest.approx(3.5)


def test_dgamma_slotwise_dense_oracle():
    rng = np.random.default_rng(9)
    alphas = rng.uniform(0, 5, 3)
    h = symmetrize(rng.normal(size=(3, 3, 3)))
    a = ChaosVector(3, (SymmetricKernel.zeros(0, 3), SymmetricKernel.zeros(1, 3), SymmetricKernel.zeros(2, 3), h))
    T = h.to_dense()
    ref = sum(np.moveaxis(np.tensordot(np.diag(alphas), T, axes=([1], [ax])), 0, ax) for ax in range(3))
    np.testing.assert_allclose(dgamma_diagonal(a, alphas).kernel(3).to_dense(), ref, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 4))
def test_dgamma_self_adjoint(seed, dim):
    rng = np.random.default_rng(seed)
    a, b = random_chaos(rng, dim, 3), random_chaos(rng, dim, 3)
    alphas = rng.uniform(0, 10, dim)
    assert pairing(dgamma_diagonal(a, alphas), b) == pytest.approx(pairing(a, dgamma_diagonal(b, alphas)), rel=1e-12, abs=1e-12)


# --- pairing -----------------------------------------------------------------


def test_pairing_examples():
    x2 = I(2, 1, {(0, 0): 1.0})
    assert pairing(I1(0, 1), x2) == 0.0
    assert pairing(x2, x2) == 2.0
    a = random_chaos(np.random.default_rng(2), 3, 3)
    assert pairing(a, ChaosVector.constant(1.0, 3)) == a.expectation


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(0, 3))
def test_isometry_is_nonnegative(seed, dim, n):
    a = random_chaos(np.random.default_rng(seed), dim, n)
    v = pairing(a, a)
    assert v >= 0
    assert pairing(ChaosVector.zeros(dim, n), ChaosVector.zeros(dim, n)) == 0.0


def test_stochastic_exponential_pairing():
    rng = np.random.default_rng(4)
    f = rng.uniform(-1, 1, 3)
    a = random_chaos(rng, 3, 3)
    expo = stochastic_exponential(f, 3)
    ref = 0.0
    for n in range(4):
        dense_f = np.ones(()) if n == 0 else np.einsum(",".join("abcd"[:n]) + "->" + "abcd"[:n], *([f] * n))
        ref += float(np.sum(a.kernel(n).to_dense() * dense_f))
    assert pairing(a, expo) == pytest.approx(ref, abs=1e-12)


# --- Hermite isomorphism ---------------------------------------------------------


def test_to_hermite_examples():
    assert to_hermite(I(2, 1, {(0, 0): 1.0})).coeffs.tolist() == [0.0, 0.0, 1.0]
    assert to_hermite(ChaosVector.constant(3.0, 2)).coeffs.tolist() == [[3.0]]
    z = np.array([[1.7]])
    assert eval_hermite(to_hermite(I(2, 1, {(0, 0): 1.0})), z)[0] == pytest.approx(1.7**2 - 1)


def test_hermite_round_trip():
    a = random_chaos(np.random.default_rng(8), 3, 4)
    assert from_hermite(to_hermite(a)).max_abs_diff(a) < 1e-14


def test_hermite_monte_carlo_expectation():
    rng = np.random.default_rng(12)
    a = random_chaos(rng, 2, 3)
    z = rng.normal(size=(100_000, 2))
    vals = eval_hermite(to_hermite(a), z)
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - a.expectation) < 3 * se


def test_hermite_polynomial_product_monomial_view():
    p = HermitePolynomial(np.array([0.0, 1.0]))  # He_1 = z
    q = p * p
    np.testing.assert_allclose(q.monomial(), [0.0, 0.0, 1.0])
    np.testing.assert_allclose(q.coeffs, [1.0, 0.0, 1.0])


# --- Stroock-Taylor -------------------------------------------------------------


def test_stroock_taylor_examples():
    zeta = np.array([0.3, -0.2])
    np.testing.assert_array_equal(stroock_taylor_kernel(ChaosVector.first_order(zeta), 1).values, zeta)
    x2 = I(2, 1, {(0, 0): 1.0})
    dd = malliavin_d(malliavin_d(x2, [1.0]), [1.0])
    assert dd.expectation / 2 == 1.0
    with pytest.raises(ValueError):
        stroock_taylor_kernel(x2, 3)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_stroock_taylor_iterated_derivatives(dim):
    a = random_chaos(np.random.default_rng(dim), dim, 3)
    eye = np.eye(dim)
    for n in range(4):
        k = stroock_taylor_kernel(a, n)
        for key, v in zip(k.keys.tolist(), k.values):
            b = a
            for j in key:
                b = malliavin_d(b, eye[j])
            assert b.expectation / math.factorial(n) == pytest.approx(v, abs=1e-13)


# --- serialisation ---------------------------------------------------------------


def test_json_round_trip_uses_one_based_indices():
    a = I(2, 2, {(0, 1): 0.25})
    doc = a.to_json()
    assert doc["kernels"][2]["entries"][1] == [[1, 2], 0.25]
    assert ChaosVector.from_json(a.dumps()).max_abs_diff(a) == 0.0
