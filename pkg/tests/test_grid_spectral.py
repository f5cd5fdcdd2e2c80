import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlkg_lab.errors import ConfigurationError, DomainError, PreconditionError
from nlkg_lab.grid_spectral import (Grid1D, Potential, apply_B_power, assemble_operator, cache_key, resolvent,
                                    spectral_decompose)

from conftest import make_spectrum


def test_grid_is_symmetric_and_validated():
    g = Grid1D(10.0, 101)
    assert np.allclose(g.x, -g.x[::-1], atol=0)
    assert g.h == pytest.approx(0.2)
    with pytest.raises(ConfigurationError):
        Grid1D(10.0, 8)
    with pytest.raises(ConfigurationError):
        Grid1D(-1.0, 64)


def test_potential_must_decay_at_boundary():
    g = Grid1D(3.0, 128)
    with pytest.raises(ConfigurationError, match="boundary"):
        Potential.preset(g, "poschl_teller", depth=2.0)
    with pytest.raises(ConfigurationError, match="unknown potential"):
        Potential.preset(g, "square")


def test_operator_errors():
    g = Grid1D(20.0, 64)
    pot = Potential.preset(g, "poschl_teller", depth=2.0)
    with pytest.raises(ConfigurationError):
        assemble_operator(g, pot, 0.0)
    deep = Potential.preset(g, "poschl_teller", depth=40.0)
    with pytest.raises(ConfigurationError, match="coarse"):
        assemble_operator(g, deep, 1.0)


def test_constant_and_sine_modes():
    g = Grid1D(10.0, 401)
    op = assemble_operator(g, Potential.preset(g, "zero"), 1.3)
    one = np.ones(g.points)
    one[[0, -1]] = 0
    out = op.apply(one)
    inner = slice(5, -5)
    assert np.max(np.abs(out[inner] - 1.3 ** 2)) < 1e-10
    u = np.sin(np.pi * (g.x + g.half_width) / (2 * g.half_width))
    u[[0, -1]] = 0
    ratio = op.apply(u)[1:-1] / u[1:-1]
    expect = (np.pi / (2 * g.half_width)) ** 2 + 1.3 ** 2
    assert np.max(np.abs(ratio - expect)) < 1e-7


def test_poschl_teller_ground_state():
    S = make_spectrum(30.0, 2048, 1.0 + 1e-3, depth=2.0)
    assert S.n == 1
    assert S.bound_energies[0] == pytest.approx(-1.0, abs=1e-4)


def test_spectral_examples(pt_single):
    assert pt_single.n == 1
    assert pt_single.omega[0] == pytest.approx(0.75, abs=1e-3)
    S0 = make_spectrum(20.0, 256, 1.0, preset="zero")
    assert S0.n == 0
    S2 = make_spectrum(30.0, 1024, 2.5, depth=6.0)
    assert np.allclose(S2.omega, [1.5, np.sqrt(5.25)], atol=1e-3)
    assert S2.h2_holds


def test_negative_operator_is_domain_error():
    g = Grid1D(20.0, 256)
    op = assemble_operator(g, Potential.preset(g, "poschl_teller", depth=2.0), 0.9)
    with pytest.raises(DomainError, match="m >"):
        spectral_decompose(op)


def test_orthonormality_and_projector(pt_small, rng):
    S = pt_small
    G = S.h * S.phi @ S.phi.T
    assert np.allclose(G, np.eye(S.n), atol=1e-10)
    g = rng.normal(size=S.grid.points)
    g[[0, -1]] = 0
    pc = S.project_continuum(g)
    assert np.max(np.abs(S.project_continuum(pc) - pc)) < 1e-10
    assert np.max(np.abs(S.discrete_coeffs(pc))) < 1e-10
    # completeness
    recon = S.discrete_coeffs(g) @ S.phi + pc
    assert np.max(np.abs(recon - g)) < 1e-9


def test_operator_symmetry(pt_small, rng):
    S = pt_small
    u, w = rng.normal(size=(2, S.grid.points))
    u[[0, -1]] = w[[0, -1]] = 0
    assert S.inner(S.apply_H0(u), w) == pytest.approx(S.inner(u, S.apply_H0(w)), rel=1e-12)


def test_B_powers(pt_small, rng):
    S = pt_small
    g = S.project_continuum(np.exp(-S.x ** 2) * (1 + S.x))
    assert np.allclose(apply_B_power(S, 0.0, g), g, atol=1e-12)
    half = S.B_power(0.5, g)
    assert np.allclose(S.B_power(0.5, half), S.B_power(1.0, g), atol=1e-9)
    two = S.B_power(2.0, g)
    assert np.allclose(two, S.project_continuum(S.apply_H0(g)), atol=1e-9)
    back = S.B_power(-0.7, S.B_power(0.7, g))
    assert np.allclose(back, g, atol=1e-9)
    with pytest.raises(PreconditionError):
        S.B_power(0.5, S.phi[0])


def test_spectral_mapping_cubic(pt_small, rng):
    S = pt_small
    g = S.project_continuum(rng.normal(size=S.grid.points) * np.exp(-S.x ** 2 / 8))
    coeffs = rng.normal(size=4)
    direct = S.B_function(lambda s: np.polyval(coeffs, s), g)
    composed = sum(c * S.B_power(3 - i, g) for i, c in enumerate(coeffs))
    assert np.max(np.abs(direct - composed)) < 1e-8 * max(1.0, np.max(np.abs(direct)))


def test_resolvent(free_small, pt_small):
    S = free_small
    g = np.exp(-S.x ** 2)
    g[[0, -1]] = 0
    out = resolvent(S, 0.0, g)
    assert np.max(np.abs(S.B_power(1.0, out) - g)) < 1e-8 * np.max(np.abs(g))
    below = S.resolvent(-1.2, g)
    assert S.norm(below) <= S.norm(g) / (S.m + 1.2) + 1e-8
    z = 1.5 + 0.1j
    o = S.resolvent(z, g)
    assert np.max(np.abs(S.B_power(1.0, o) - z * o - g)) < 1e-8
    with pytest.raises(PreconditionError, match="limiting-absorption"):
        S.resolvent(1.2, g)


def test_grid_refinement_is_fourth_order():
    e = [make_spectrum(15.0, N, 1.25, depth=2.0).bound_energies[0] for N in (129, 257, 513)]
    r = abs(e[0] - e[1]) / abs(e[1] - e[2])
    assert r > 10  # 16 for a clean 4th-order stencil


def test_cache_key_distinguishes_inputs():
    g = Grid1D(20.0, 128)
    p1 = Potential.preset(g, "poschl_teller", depth=2.0)
    p2 = Potential.preset(g, "poschl_teller", depth=2.5)
    assert cache_key(g, p1, 1.0) != cache_key(g, p2, 1.0)
    assert cache_key(g, p1, 1.0) != cache_key(g, p1, 1.1)
    assert cache_key(g, p1, 1.0) == cache_key(Grid1D(20.0, 128), p1, 1.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(-1.0, 1.0))
def test_B_power_involution_property(a, shift):
    S = _SMALL
    g = S.project_continuum(np.exp(-(S.x - shift) ** 2))
    assert np.allclose(S.B_power(-a, S.B_power(a, g)), g, atol=1e-9)


_SMALL = make_spectrum(15.0, 128, 1.25, depth=2.0)
