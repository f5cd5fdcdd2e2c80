import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlkg_lab.errors import ConfigurationError, PreconditionError
from nlkg_lab.hamiltonian_jets import (FormalHamiltonian, Nonlinearity, change_of_variables, expand_H_P,
                                       fd_field_coefficient, fd_scalar_coefficient, hp_direct,
                                       inverse_change_of_variables, linear_energy, poisson_bracket,
                                       quadratic_energy)

from jet_factory import random_jet, random_real_jet, synthetic_space


# --- nonlinearity -------------------------------------------------------------
def test_nonlinearity_requires_order_four_zero():
    with pytest.raises(ConfigurationError):
        Nonlinearity({3: 1.0})
    with pytest.raises(ConfigurationError):
        Nonlinearity.power(3)
    nl = Nonlinearity({3: 2.0}, allow_cubic=True)
    assert nl(3) == 2.0


def test_power_taylor_data():
    nl = Nonlinearity.power(4, 0.5)
    assert nl(4) == 12.0 and nl(5) == 0.0 and nl.normalized(4) == 0.5
    u = np.linspace(-0.1, 0.1, 7)
    assert np.allclose(nl.beta(u), 0.5 * u ** 4)
    assert np.allclose(nl.dbeta(u), 2.0 * u ** 3)
    assert nl.check_evaluator() < 1e-12


def test_closed_form_evaluator_is_checked():
    good = Nonlinearity({4: 24.0}, func=lambda u: u ** 4, dfunc=lambda u: 4 * u ** 3)
    assert good.check_evaluator() < 1e-6
    bad = Nonlinearity({4: 24.0}, func=lambda u: u ** 4, dfunc=lambda u: 5 * u ** 3)
    with pytest.raises(ConfigurationError):
        bad.check_evaluator()
    with pytest.raises(ConfigurationError):
        good(9)


def test_with_derivative_copy():
    nl = Nonlinearity.power(4)
    nl2 = nl.with_derivative(5, 3.0)
    assert nl2(5) == 3.0 and nl(5) == 0.0


# --- change of variables ------------------------------------------------------
def test_change_of_variables_examples(pt_small, rng):
    S = pt_small
    z = np.zeros(S.grid.points)
    mc = change_of_variables(z, z, S)
    assert np.all(mc.xi == 0) and np.all(mc.f == 0)
    mc = change_of_variables(S.phi[0], z, S)
    assert mc.xi[0] == pytest.approx(np.sqrt(S.omega[0] / 2), abs=1e-12)
    assert np.max(np.abs(mc.f)) < 1e-10


def test_round_trip_and_linear_energy(pt_small, rng):
    S = pt_small
    u = rng.normal(size=S.grid.points) * np.exp(-S.x ** 2 / 20)
    v = rng.normal(size=S.grid.points) * np.exp(-S.x ** 2 / 20)
    u[[0, -1]] = v[[0, -1]] = 0
    mc = change_of_variables(u, v, S)
    u2, v2 = inverse_change_of_variables(mc.xi, mc.f, S)
    assert np.max(np.abs(u2 - u)) < 1e-9 and np.max(np.abs(v2 - v)) < 1e-9
    assert linear_energy(mc.xi, mc.f, S) == pytest.approx(quadratic_energy(u, v, S), rel=1e-6)


# --- expansion of H_P -----------------------------------------------------------
def test_scalar_quartic_coefficient(pt_small):
    S = pt_small
    H = expand_H_P(S, Nonlinearity.power(4), 6)
    expect = (2 * S.omega[0]) ** -2 * S.h * np.sum(S.phi[0] ** 4)
    assert H.scalar[((4,), (0,))] == pytest.approx(expect, rel=1e-12)


def test_field_coefficient_matches_finite_differences(pt_small):
    S = pt_small
    nl = Nonlinearity.power(4)
    H = expand_H_P(S, nl, 6)
    g = S.project_continuum(np.exp(-(S.x - 0.5) ** 2) * (1 + 0.3 * S.x))
    jet = np.dot(H.flin[((3,), (0,))], S.cont_coeffs(g))
    fd = fd_field_coefficient(S, nl, (3,), (0,), g)
    assert abs(jet - fd) < 1e-6 * abs(jet)


@pytest.mark.parametrize("mu,nu", [((4,), (0,)), ((3,), (1,)), ((2,), (2,))])
def test_scalar_coefficients_match_oracle(pt_small, mu, nu):
    S = pt_small
    nl = Nonlinearity.from_taylor({4: 1.0, 5: 0.3})
    H = expand_H_P(S, nl, 5)
    fd = fd_scalar_coefficient(S, nl, mu, nu)
    assert abs(H.scalar[(mu, nu)] - fd) < 1e-6 * abs(fd)


def test_degree_five_matches_oracle(pt_small):
    S = pt_small
    nl = Nonlinearity.from_taylor({4: 1.0, 5: 0.3})
    H = expand_H_P(S, nl, 5)
    fd = fd_scalar_coefficient(S, nl, (3,), (2,))
    assert abs(H.scalar[((3,), (2,))] - fd) < 1e-6 * abs(fd)


def test_zero_beta_gives_empty_jet(pt_small):
    H = expand_H_P(pt_small, Nonlinearity.zero(), 6)
    assert H.is_zero() and not H.scalar and not H.flin


def test_low_degree_terms_absent_and_real(pt_small):
    H = expand_H_P(pt_small, Nonlinearity.from_taylor({4: 1.0, 6: -0.5}), 8)
    assert min(sum(a) + sum(b) for a, b in H.scalar) >= 4
    assert min(sum(a) + sum(b) + 1 for a, b in H.flin) >= 4
    assert H.is_real(1e-10)
    for a in H.flin.values():
        assert np.all(np.isfinite(a))
    with pytest.raises(ConfigurationError):
        expand_H_P(pt_small, Nonlinearity({4: 24.0}, j_max=4, func=lambda u: u ** 4), 6)


def test_jet_agrees_with_direct_quadrature(pt_small):
    S = pt_small
    nl = Nonlinearity.power(4)
    H = expand_H_P(S, nl, 4)
    xi = np.array([0.01 + 0.02j])
    zero = np.zeros(S.grid.points)
    assert H.evaluate(xi, S.cont_coeffs(zero)) == pytest.approx(hp_direct(S, nl, xi, zero), rel=1e-10)


def test_dump_is_json(pt_small):
    H = expand_H_P(pt_small, Nonlinearity.power(4), 5)
    data = json.loads(H.dumps())
    assert data["n"] == 1 and data["scalar"]


# --- Poisson bracket ------------------------------------------------------------
def _lin(omega, space, D=8, mfo=1):
    return FormalHamiltonian.linear_part(omega, space, D, mfo)


def test_bracket_examples():
    sp = synthetic_space()
    HL = _lin([1.0, 2.0], sp)
    K = FormalHamiltonian(2, sp, 8)
    K.add_scalar((2, 0), (0, 1), 1.0)
    assert poisson_bracket(HL, K).max_coefficient() < 1e-15
    A = FormalHamiltonian(1, sp, 8)
    A.add_scalar((1,), (1,), 1.0)
    assert poisson_bracket(A, A).is_zero()


def test_coordinate_bracket():
    sp = synthetic_space()
    x = FormalHamiltonian.coordinate(0, False, 1, sp, 4)
    xb = FormalHamiltonian.coordinate(0, True, 1, sp, 4)
    B = poisson_bracket(x, xb)
    assert B.scalar[((0,), (0,))] == pytest.approx(1j)


def test_bracket_of_reals_is_real(rng):
    sp = synthetic_space(dim=12)
    A = random_real_jet(rng, 2, 4, sp, D=8)
    B = random_real_jet(rng, 2, 3, sp, D=8)
    assert poisson_bracket(A, B).is_real(1e-12)


def _canon_diff(X, Y):
    cx, cy = X.canonical(), Y.canonical()
    err = 0.0
    for k in set(cx) | set(cy):
        err = max(err, float(np.max(np.abs(np.asarray(cx.get(k, 0.0)) - np.asarray(cy.get(k, 0.0))))))
    return err


def test_antisymmetry_bilinearity(rng):
    sp = synthetic_space(dim=6)
    A = random_jet(rng, 2, [3, 4], sp, D=10)
    B = random_jet(rng, 2, [3], sp, D=10)
    C = random_jet(rng, 2, [4], sp, D=10)
    ab = poisson_bracket(A, B)
    ba = poisson_bracket(B, A)
    assert _canon_diff(ab, ba.scaled(-1.0)) < 1e-12
    lhs = poisson_bracket(A, B + C.scaled(2.0))
    rhs = ab + poisson_bracket(A, C).scaled(2.0)
    assert _canon_diff(lhs, rhs) < 1e-12


def test_leibniz_on_scalar_monomials():
    sp = synthetic_space(dim=4)
    n = 2

    def mono(mu, nu):
        H = FormalHamiltonian(n, sp, 12, None)
        H.add_scalar(mu, nu, 1.0)
        return H

    A = mono((1, 1), (0, 1))
    B = mono((2, 0), (0, 0))
    C = mono((0, 1), (1, 0))
    BC = mono((2, 1), (1, 0))  # product B*C
    lhs = poisson_bracket(A, BC)
    ab = poisson_bracket(A, B)
    ac = poisson_bracket(A, C)
    rhs = FormalHamiltonian(n, sp, 12, None)
    for (m1, n1), c1 in ab.scalar.items():
        rhs.add_scalar(tuple(x + y for x, y in zip(m1, (0, 1))), tuple(x + y for x, y in zip(n1, (1, 0))), c1)
    for (m1, n1), c1 in ac.scalar.items():
        rhs.add_scalar(tuple(x + y for x, y in zip(m1, (2, 0))), n1, c1)
    assert _canon_diff(lhs, rhs) < 1e-14


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10 ** 6))
def test_jacobi_identity(seed):
    rng = np.random.default_rng(seed)
    sp = synthetic_space(dim=4)
    A, B, C = (random_jet(rng, 2, [2, 3], sp, D=12) for _ in range(3))
    pb = poisson_bracket
    total = pb(A, pb(B, C)) + pb(B, pb(C, A)) + pb(C, pb(A, B))
    assert _canon_diff(total, FormalHamiltonian(2, sp, 12, None)) < 1e-10


def test_bracket_requires_matching_modes():
    sp = synthetic_space()
    with pytest.raises(PreconditionError):
        poisson_bracket(FormalHamiltonian(1, sp, 4), FormalHamiltonian(2, sp, 4))
