from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad

from cdme.errors import NumericalAbort
from cdme.oup import (
    OUParams,
    closed_form_expectation,
    closed_form_u,
    fd_expectation,
    fd_solve,
    fk_derivative_expectation,
    fk_derivative_expectations,
    fk_u,
    hermite_weighted_expectation,
    ou_moments,
    ou_terminal_and_integral,
)

E1 = math.exp(-1.0)


def pure_death(**kw):
    base = dict(alphas=[1.0], d=[1.0], c=[0.0], gamma=0.0, zeta_hat=[1.0])
    base.update(kw)
    return OUParams(**base)


def flagship():
    return OUParams([1.0, math.pi**2 + 1], [1.0, 0.0], [1.0, 0.5 / math.sqrt(2)], 1.0, [1.0, 0.0])


# --- OU moments -------------------------------------------------------------------


def _quad_moments(alpha, t):
    """Covariances of the noise parts of (Z(t), int Z) by direct quadrature."""
    s2 = 2 * alpha
    if alpha == 0:
        return 0.0, 0.0, 0.0
    g = lambda u: (1 - math.exp(-alpha * u)) / alpha  # noqa: E731
    var_t = quad(lambda s: s2 * math.exp(-2 * alpha * (t - s)), 0, t)[0]
    cov = quad(lambda s: s2 * math.exp(-alpha * (t - s)) * g(t - s), 0, t)[0]
    var_i = quad(lambda s: s2 * g(t - s) ** 2, 0, t)[0]
    return var_t, cov, var_i


@pytest.mark.parametrize("alpha", [1e-7, 1e-3, 0.05, 0.3, 1.0, 10.0, 40.0])
@pytest.mark.parametrize("t", [0.1, 1.0])
def test_moments_match_quadrature(alpha, t):
    p = OUParams([alpha], [0.7], [0.2], 0.0, [1.0])
    m = ou_moments(p, t)
    vt, cv, vi = _quad_moments(alpha, t)
    np.testing.assert_allclose([m.var_terminal[0], m.cov[0], m.var_integral[0]], [vt, cv, vi], rtol=1e-8, atol=1e-15)
    # deterministic parts from the ODE for the mean
    mean_t = 0.5 * (1 - math.exp(-alpha * t)) / alpha
    mean_i = 0.5 * quad(lambda s: (1 - math.exp(-alpha * s)) / alpha, 0, t)[0]
    assert m.mean_terminal[0] == pytest.approx(mean_t, rel=1e-8)
    assert m.mean_integral[0] == pytest.approx(mean_i, rel=1e-8)


def test_joint_sampling_against_euler_maruyama():
    alpha, drift, z0, t, dt, n = 1.0, 0.3, 0.5, 1.0, 1e-3, 40_000
    rng = np.random.default_rng(123)
    z = np.full(n, z0)
    integ = np.zeros(n)
    for _ in range(int(round(t / dt))):
        z_new = z + (drift - alpha * z) * dt + math.sqrt(2 * alpha * dt) * rng.standard_normal(n)
        integ += 0.5 * (z + z_new) * dt
        z = z_new
    p = OUParams([alpha], [drift], [0.0], 0.0, [1.0])
    zt, it = ou_terminal_and_integral(p, 0, z0, t, np.random.default_rng(5), size=n)
    for a, b in ((zt, z), (it, integ)):
        se = math.sqrt(a.var() / n + b.var() / n)
        assert abs(a.mean() - b.mean()) < 4 * se
    em_cov, ex_cov = np.cov(z, integ), np.cov(zt, it)
    np.testing.assert_allclose(ex_cov, em_cov, rtol=0.05)
    # exact mean of Z(t) with d = c
    p2 = OUParams([1.0], [0.4], [0.4], 0.0, [1.0])
    zt2, _ = ou_terminal_and_integral(p2, 0, z0, t, np.random.default_rng(6), size=100_000)
    assert abs(zt2.mean() - z0 * E1) < 4 * zt2.std() / math.sqrt(zt2.size)


def test_sampling_edge_cases():
    p = pure_death()
    rng = np.random.default_rng(0)
    assert ou_terminal_and_integral(p, 0, 1.3, 0.0, rng) == (1.3, 0.0)
    affine = OUParams([0.0], [1.0], [0.0], 0.0, [1.0])
    zt, it = ou_terminal_and_integral(affine, 0, 0.0, 2.0, rng, size=5)
    np.testing.assert_array_equal(zt, 2.0)
    np.testing.assert_array_equal(it, 2.0)
    with pytest.raises(ValueError):
        ou_terminal_and_integral(p, 0, 0.0, -1.0, rng)


def test_params_validation():
    with pytest.raises(ValueError):
        OUParams([-1.0], [0.0], [0.0], 0.0, [1.0])
    with pytest.raises(ValueError):
        OUParams([1.0, 2.0], [0.0], [0.0], 0.0, [1.0])


# --- Feynman-Kac ------------------------------------------------------------------


def test_fk_u_pure_death():
    est = fk_u(pure_death(), [0.0], 1.0, 50_000, seed=1)
    assert abs(est.value - (1 - E1)) < 3 * est.std_err
    assert closed_form_u(pure_death(), [0.0], 1.0) == pytest.approx(1 - E1)


def test_fk_u_initial_time_and_zero_density():
    est = fk_u(flagship(), [0.4, -1.1], 0.0, 1000, seed=2)
    assert est.value == pytest.approx(0.4, abs=1e-15) and est.std_err < 1e-15
    zero = OUParams([1.0], [1.0], [0.5], 0.5, [0.0])
    est = fk_u(zero, [0.3], 1.0, 1000, seed=3)
    assert est.value == 0.0 and est.std_err == 0.0


def test_fk_u_against_closed_form_with_creation():
    z = [0.2, -0.5]
    est = fk_u(flagship(), z, 0.5, 100_000, seed=4)
    assert abs(est.value - closed_form_u(flagship(), z, 0.5)) < 4 * est.std_err


def test_derivative_examples_pure_death():
    p = pure_death()
    e0 = fk_derivative_expectation(p, (), 1.0, 100_000, seed=5)
    assert abs(e0.value - (1 - E1)) < 3 * e0.std_err
    e1 = fk_derivative_expectation(p, (0,), 1.0, 10_000, seed=5)
    assert abs(e1.value - E1) <= max(3 * e1.std_err, 1e-15)
    e2 = fk_derivative_expectation(p, (0, 0), 1.0, 10_000, seed=5)
    assert e2.value == 0.0 and e2.std_err == 0.0


def test_derivatives_vanish_without_creation():
    p = OUParams([1.0, 4.0], [1.0, 0.2], [0.0, 0.0], 0.0, [0.7, 0.3])
    for j in [(0, 0), (0, 1), (1, 1), (0, 1, 1)]:
        est = fk_derivative_expectation(p, j, 0.8, 5000, seed=6)
        assert est.value == 0.0 and est.std_err == 0.0


def test_initial_time_derivatives_are_zeta():
    p = flagship()
    zeta = np.array([0.6, 0.4])
    p = OUParams(p.alphas, p.d, p.c, p.gamma, zeta)
    for k in range(2):
        est = fk_derivative_expectation(p, (k,), 0.0, 2000, seed=7)
        assert est.value == pytest.approx(zeta[k], abs=1e-15) and est.std_err < 1e-15


def test_pathwise_against_closed_form_flagship():
    p = flagship()
    targets = [(), (0,), (1,), (0, 0), (0, 1), (1, 1)]
    est = fk_derivative_expectations(p, targets, 0.5, 100_000, seed=8)
    for j, e in zip(targets, est):
        assert abs(e.value - closed_form_expectation(p, j, 0.5)) < 4 * e.std_err + 1e-14


def test_index_validation():
    with pytest.raises(IndexError):
        fk_derivative_expectation(pure_death(), (1,), 1.0, 10, seed=0)
    with pytest.raises(ValueError):
        fk_u(pure_death(), [0.0], 1.0, 0, seed=0)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_growth_guard_aborts_on_overflow():
    wild = OUParams([0.0], [901.0], [900.0], 0.0, [1.0])
    with pytest.raises(NumericalAbort):
        fk_derivative_expectation(wild, (), 2.0, 1000, seed=0)


def test_determinism_across_threads():
    p = flagship()
    a = fk_derivative_expectations(p, [(), (0, 1)], 0.5, 40_000, seed=9, threads=1)
    b = fk_derivative_expectations(p, [(), (0, 1)], 0.5, 40_000, seed=9, threads=4)
    assert [(e.value, e.std_err) for e in a] == [(e.value, e.std_err) for e in b]


# --- Hermite-weighted estimator ------------------------------------------------------


def test_hermite_weighted_agrees_with_pathwise():
    p = flagship()
    for j in [(0,), (1,), (0, 1)]:
        h = hermite_weighted_expectation(p, j, 0.5, 100_000, seed=10)
        f = fk_derivative_expectation(p, j, 0.5, 100_000, seed=10)
        assert abs(h.value - f.value) < 4 * math.hypot(h.std_err, f.std_err)


def test_hermite_weighted_empty_index_is_plain_expectation():
    p = flagship()
    h = hermite_weighted_expectation(p, (), 0.5, 100_000, seed=11)
    assert abs(h.value - closed_form_expectation(p, (), 0.5)) < 4 * h.std_err


def test_hermite_weighted_zero_solution():
    p = OUParams([1.0], [1.0], [0.5], 0.0, [0.0])
    h = hermite_weighted_expectation(p, (0,), 0.7, 1000, seed=12)
    assert h.value == 0.0 and h.std_err == 0.0


# --- finite differences -----------------------------------------------------------


def test_fd_affine_solution_without_creation():
    p = OUParams([2.0], [1.5], [0.0], 0.0, [1.0])
    sol = fd_solve(p, 0.7)
    z = sol.axis
    exact = z * math.exp(-1.4) + 0.75 * (1 - math.exp(-1.4))
    interior = np.abs(z) <= 4
    assert np.max(np.abs(sol.values - exact)[interior]) < 1e-4


def test_fd_initial_plane():
    p = flagship()
    sol = fd_solve(p, 0.0, M_grid=41)
    Z0, Z1 = np.meshgrid(sol.axis, sol.axis, indexing="ij")
    np.testing.assert_array_equal(sol.values, 1.0 * Z0 + 0.0 * Z1)


def test_fd_expectation_of_affine_is_slope():
    p = OUParams([1.0, 3.0], [0.0, 0.0], [0.0, 0.0], 0.0, [0.3, 0.7])
    sol = fd_solve(p, 0.0, M_grid=61)
    assert fd_expectation(sol, (0,)) == pytest.approx(0.3, abs=1e-12)
    assert fd_expectation(sol, (1,)) == pytest.approx(0.7, abs=1e-12)
    assert fd_expectation(sol, ()) == pytest.approx(0.0, abs=1e-12)


def test_fd_pure_death_mean():
    sol = fd_solve(pure_death(), 1.0)
    assert fd_expectation(sol, ()) == pytest.approx(1 - E1, abs=1e-4)
    assert fd_expectation(sol, (0,)) == pytest.approx(E1, abs=1e-4)


def test_fd_with_creation_matches_monte_carlo_n1():
    p = OUParams([1.0], [1.0], [1.0], 1.0, [1.0])
    sol = fd_solve(p, 0.5)
    est = fk_derivative_expectation(p, (), 0.5, 100_000, seed=13)
    assert abs(fd_expectation(sol, ()) - est.value) < 4 * est.std_err + 1e-4


def test_fd_two_dimensional_against_closed_form():
    p = flagship()
    sol = fd_solve(p, 0.5)
    for j in [(), (0,), (1,), (0, 0), (0, 1), (1, 1)]:
        assert fd_expectation(sol, j) == pytest.approx(closed_form_expectation(p, j, 0.5), abs=5e-4)


def test_fd_guards():
    three = OUParams([1.0] * 3, [0.0] * 3, [0.0] * 3, 0.0, [1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        fd_solve(three, 1.0)
    with pytest.raises(ValueError):
        fd_solve(pure_death(), 1.0, L=-1.0)
    sol = fd_solve(pure_death(), 0.1, M_grid=101)
    with pytest.raises(ValueError):
        fd_expectation(sol, (0, 0, 0))
