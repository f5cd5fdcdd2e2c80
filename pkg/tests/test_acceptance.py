"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run on its own with ``pytest tests/test_acceptance.py -v``; the lines are
also collected into a summary at the end of the session.  Mode amplitudes
follow the CLI convention ``xi(0) = eps``.
"""

import time

import numpy as np
import pytest

from nlkg_lab.dynamics import (PDEIntegrator, ReducedModel, Scenario, compare_pde_vs_reduced, dissipation_check,
                               extract_modes, initial_data, integrate_reduced, run_pde)
from nlkg_lab.errors import HypothesisViolation, PreconditionError
from nlkg_lab.hamiltonian_jets import FormalHamiltonian, Nonlinearity, fd_field_coefficient, poisson_bracket
from nlkg_lab.normalform import homological_op, leading_coupling_check, normalize_from_spectrum, solve_homological
from nlkg_lab.resonance import check_H4_H5, enumerate_M
from nlkg_lab.scattering_fgr import (distorted_density, fgr_matrix, free_density, genericity_scan,
                                     limiting_absorption, model_coefficients)

from conftest import make_spectrum
from jet_factory import generic_frequencies, random_jet, random_real_jet, synthetic_space

RESULTS = {}


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        line = f"criterion {n:>2}: {'PASS' if ok else 'FAIL'} | {detail}"
        RESULTS[n] = line
        with capsys.disabled():
            print("\n" + line)
        return ok
    return emit


def _canon_err(X):
    c = X.canonical()
    return max((float(np.max(np.abs(np.asarray(v)))) for v in c.values()), default=0.0)


# 1 -------------------------------------------------------------------------------
def test_criterion_01_homological_exactness(report):
    rng = np.random.default_rng(1)
    sp = synthetic_space(dim=48)
    t0 = time.perf_counter()
    worst, real_ok, count = 0.0, True, 0
    while count < 200:
        n = int(rng.integers(1, 4))
        deg = int(rng.integers(3, 7))
        omega = generic_frequencies(rng, n)
        K = random_real_jet(rng, n, deg, sp, D=6)
        try:
            sol = solve_homological(K, omega, 1.0)
        except HypothesisViolation:
            continue  # a field monomial on the threshold: not an admissible input
        worst = max(worst, sol.residual(K, omega))
        real_ok &= sol.chi.is_real(1e-12) and sol.Z.is_real(1e-12)
        count += 1
    dt = time.perf_counter() - t0
    ok = worst < 1e-10 and real_ok and dt < 10
    report(1, ok, f"max residual {worst:.2e} over 200 jets, reality kept: {real_ok}, {dt:.2f} s")
    assert ok


# 2 -------------------------------------------------------------------------------
def test_criterion_02_bracket_engine(report):
    rng = np.random.default_rng(2)
    sp = synthetic_space(dim=24)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 4))
        omega = generic_frequencies(rng, n)
        K = random_jet(rng, n, [int(rng.integers(3, 7))], sp, D=8, max_field_order=1)
        HL = FormalHamiltonian.linear_part(omega, sp, 8)
        worst = max(worst, (homological_op(K, omega) - poisson_bracket(HL, K)).max_coefficient())
    jac = 0.0
    sp4 = synthetic_space(dim=4)
    for _ in range(10):
        A, B, C = (random_jet(rng, 2, [2, 3], sp4, D=12) for _ in range(3))
        pb = poisson_bracket
        jac = max(jac, _canon_err(pb(A, pb(B, C)) + pb(B, pb(C, A)) + pb(C, pb(A, B))))
    ok = worst < 1e-10 and jac < 1e-10
    report(2, ok, f"homological_op vs bracket {worst:.2e} (50 inputs), Jacobi residual {jac:.2e} (10 triples)")
    assert ok


# 3 -------------------------------------------------------------------------------
def test_criterion_03_leading_coupling(report, pt_slow):
    S = pt_slow
    sets = enumerate_M(S.omega, S.m)
    nl = Nonlinearity.power(4)
    nf = normalize_from_spectrum(S, nl, sets)
    chk = leading_coupling_check(S, nf, nl, sets=sets)
    mu = tuple(chk["mu"])
    vals = np.array([0.5, 1.0, 1.5, 2.0, 3.0])
    C = np.array([normalize_from_spectrum(S, Nonlinearity.power(4, v), sets).coupling(mu) for v in vals])
    coef, *_ = np.linalg.lstsq(np.vstack([vals, np.ones_like(vals)]).T, C, rcond=None)
    lin = float(np.linalg.norm(np.vstack([vals, np.ones_like(vals)]).T @ coef - C) / np.linalg.norm(C))
    # the finite-difference oracle works on H_P itself; the conj(f) coefficient is the conjugate of the f one
    shape = chk["shape"]
    g = nf.space.to_grid(shape)
    fd = fd_field_coefficient(S, nl, (0,), mu, g)
    fd_const = np.conj(fd) / float(np.dot(shape, shape))
    const = chk["constant"]
    d_fd = abs(const - fd_const) / abs(fd_const)
    ok = chk["pointwise_ratio_spread"] < 1e-6 and lin < 1e-8 and d_fd < 1e-6
    report(3, ok, f"mu={list(mu)} ratio spread {chk['pointwise_ratio_spread']:.2e}, beta-linearity {lin:.2e}, "
                  f"constant {const.real:.8f} vs FD {fd_const.real:.8f} (rel {d_fd:.1e}), "
                  f"formula {chk['predicted_constant']:.8f}")
    assert ok


# 4 -------------------------------------------------------------------------------
def test_criterion_04_free_density(report):
    t0 = time.perf_counter()
    S = make_spectrum(40.0, 2048, 1.0, preset="zero")
    lam = 1.2
    g = np.exp(-S.x ** 2 / 2)
    exact = free_density(lam, 1.0, lambda k: np.exp(-k * k / 2))
    la = limiting_absorption(S, lam, g)
    dw = distorted_density(S, lam, g).real
    dt = time.perf_counter() - t0
    errs = [abs(v - exact) / exact for v in (la.density.real, la.density_smoothed, dw)]
    ok = max(errs) < 5e-3 and dt < 30
    report(4, ok, f"exact {exact:.5f}; resolvent limit {la.density.real:.5f}, smoothed {np.real(la.density_smoothed):.5f}, "
                  f"distorted waves {dw:.5f}; max rel err {max(errs):.1e}; {dt:.1f} s")
    assert ok


# 5 -------------------------------------------------------------------------------
def _pt_s(depth):
    return 0.5 * (-1 + np.sqrt(1 + 4 * depth))


def test_criterion_05_plemelj_psd_sweep(report):
    nl = Nonlinearity.power(4)
    depths = np.linspace(1.2, 1.9, 10)
    ratios = np.linspace(0.40, 0.46, 5)  # omega / m: 2 omega < m < 3 omega
    herm, psd, dis, plem, used, skipped = 0.0, True, 0.0, 0.0, 0, 0
    for d in depths:
        for r in ratios:
            m = _pt_s(d) / np.sqrt(1 - r * r)
            S = make_spectrum(40.0, 1024, m, depth=d)
            try:
                check_H4_H5(S.omega, S.m).raise_if_violated()
                sets = enumerate_M(S.omega, S.m)
                fd = fgr_matrix(S, normalize_from_spectrum(S, nl, sets), sets)
            except (HypothesisViolation, PreconditionError):
                skipped += 1
                continue
            used += 1
            for lam, A in fd.gamma_A.items():
                herm = max(herm, fd.hermiticity[lam])
                psd &= fd.min_eigs[lam] >= -1e-8 * np.trace(A).real
                dis = max(dis, fd.disagreement[lam])
                plem = max(plem, fd.plemelj_agreement[lam])
    ok = used == 50 and herm < 1e-9 and psd and dis < 0.02
    report(5, ok, f"{used} configurations ({skipped} skipped), hermiticity {herm:.1e}, PSD {psd}, "
                  f"method disagreement max {100 * dis:.2f}%, Plemelj spread max {100 * plem:.2f}%")
    assert ok


# 6 -------------------------------------------------------------------------------
def test_criterion_06_genericity_scan(report, pt_slow, pt_single):
    vals = np.linspace(-3.0, 3.0, 9)
    S = pt_slow
    base = Nonlinearity.from_taylor({4: 1.0, 5: 0.7, 6: -0.4})
    a = genericity_scan(S, enumerate_M(S.omega, S.m), base, vals)
    cub = Nonlinearity({3: 0.0, 4: 24.0, 5: 12.0}, allow_cubic=True)
    b = genericity_scan(pt_single, enumerate_M(pt_single.omega, pt_single.m), cub, vals, mu=(2,))
    ok = all(s.relative_residual < 1e-4 and len(s.roots) <= 2 and s.fit[0] >= 0 for s in (a, b))
    report(6, ok, f"mu={list(a.mu)}: residual {a.relative_residual:.1e}, roots {np.round(a.roots, 6).tolist()}; "
                  f"mu={list(b.mu)} (cubic scan): residual {b.relative_residual:.1e}, "
                  f"roots {np.round(b.roots, 6).tolist()}")
    assert ok


# 7 -------------------------------------------------------------------------------
def test_criterion_07_dissipation_identity(report, pt_slow):
    S = pt_slow
    sets = enumerate_M(S.omega, S.m)
    nf = normalize_from_spectrum(S, Nonlinearity.power(4), sets)
    model = ReducedModel.from_normal_form(nf, model_coefficients(S, nf, sets, with_Y=False))
    r1 = dissipation_check(model, [0.6 + 0.2j], 5.0)["max_relative_residual"]
    # a two-mode model with a degenerate resonant energy (off-diagonal Gamma)
    omega = np.array([0.6, 0.9])
    idx = [(3, 0), (0, 2)]
    G = np.array([[0.4, 0.1 + 0.2j], [0.1 - 0.2j, 0.3]])
    R = np.array([[0.2, -0.05j], [0.05j, -0.1]])
    c = {(nu, mu): R[i, j] + 1j * G[i, j] for i, nu in enumerate(idx) for j, mu in enumerate(idx)}
    r2 = dissipation_check(ReducedModel(omega, {((1, 1), (1, 1)): 0.3}, c), [0.5 + 0j, 0.4j], 10.0)[
        "max_relative_residual"]
    sol = integrate_reduced(ReducedModel.single_mode(0.4, 3, 1.0), [1.0 + 0j], 1.0, t_eval=[1.0])
    y = abs(sol.y[0, -1]) ** 2
    e = abs(y - 13 ** -0.5) / 13 ** -0.5
    ok = r1 < 1e-6 and r2 < 1e-6 and e < 1e-6
    report(7, ok, f"residual {r1:.1e} (normal-form model, omega=0.4), {r2:.1e} (two-mode model); "
                  f"y(1) = {y:.10f} vs 13^-1/2 (rel {e:.1e})")
    assert ok


# 8 -------------------------------------------------------------------------------
def test_criterion_08_pde_integrity(report):
    S = make_spectrum(40.0, 1024, 1.25, depth=2.0)
    u0, v0 = initial_data(S, [0.05 + 0j])
    lin = PDEIntegrator(S, Nonlinearity.zero(), 0.01)
    st = lin.state(0.0, u0, v0)
    per_step = 0.0
    for k in range(1, 6):
        st = lin.materialize(lin.run(st, 1))
        xi = extract_modes(st.u, st.v, S)[0][0]
        per_step = max(per_step, abs(xi - 0.05 * np.exp(-1j * S.omega[0] * 0.01 * k)))
    drifts = []
    for dt in (0.01, 0.005):
        integ = PDEIntegrator(S, Nonlinearity.power(4), dt)
        st = integ.state(0.0, u0, v0)
        E0 = integ.energy(st)
        es = []
        integ.run(st, int(round(100 / dt)), int(round(0.5 / dt)), lambda c: es.append(integ.energy(c)))
        drifts.append(max(abs(e - E0) for e in es) / E0)
    ratio = drifts[0] / drifts[1]
    ok = per_step < 1e-12 and drifts[0] < 1e-6 and 3.0 < ratio < 5.0
    report(8, ok, f"beta=0 phase error {per_step:.1e} per step; u^4, eps=0.05, T=100: drift {drifts[0]:.2e} "
                  f"(dt=0.01), {drifts[1]:.2e} (dt=0.005), ratio {ratio:.2f}")
    assert ok


# 9 -------------------------------------------------------------------------------
@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="beta = u^4 has no odd Taylor terms, so the mu=2 coupling vanishes "
                                       "and the predicted 1/t law cannot appear (see README)")
def test_criterion_09_energy_leak(report, pt_single):
    S = pt_single
    sets = enumerate_M(S.omega, S.m)
    nl = Nonlinearity.power(4)
    nf = normalize_from_spectrum(S, nl, sets)
    model = ReducedModel.from_normal_form(nf, model_coefficients(S, nf, sets, with_Y=False))
    oks, parts = [], []
    for eps in (0.02, 0.05):
        t0 = time.perf_counter()
        sc = Scenario(S, nl, model, list(sets.M_hat), np.array([eps + 0j]), T=300.0, dt=0.01, sample_dt=0.1,
                      sponge=1.0)
        rep = compare_pde_vs_reduced(sc)
        dt = time.perf_counter() - t0
        ex = rep["pde_exponent"]
        ratio = rep["transfer_ratio"]
        ok = (rep["pde_envelope_monotone_after_T0"] and ex is not None and abs(ex + 1.0) <= 0.2
              and ratio is not None and 0.7 <= ratio <= 1.3 and dt <= 600)
        oks.append(ok)
        parts.append(f"eps={eps}: monotone {rep['pde_envelope_monotone_after_T0']}, exponent "
                     f"{'n/a' if ex is None else f'{ex:.3f}'} (target -1), transfer ratio "
                     f"{'n/a' if ratio is None else f'{ratio:.2f}'}, reduced leak via p={rep['reduced_degree_p']}, "
                     f"transferred {rep['transferred_pde']:.2e}, {dt:.0f} s")
    ok = all(oks)
    report(9, ok, "; ".join(parts))
    assert ok


# 10 ------------------------------------------------------------------------------
@pytest.mark.slow
def test_criterion_10_eps_scaling(report):
    S = make_spectrum(40.0, 1024, 1.25, depth=2.0)
    sets = enumerate_M(S.omega, S.m)
    nl = Nonlinearity.power(4)
    eps = np.array([0.02, 0.04, 0.08])
    out = []
    for mu in sets.M_hat:
        norms = [run_pde(S, nl, [e + 0j], 100.0, 0.01, 0.1, sponge=1.0, M_hat=[mu])[0].l2_norm(mu) for e in eps]
        slope = float(np.polyfit(np.log(eps), np.log(norms), 1)[0])
        out.append((mu, slope))
    ok = all(abs(s - sum(mu)) <= 0.3 for mu, s in out)
    report(10, ok, ", ".join(f"mu={list(mu)}: slope {s:.3f} (target {sum(mu)})" for mu, s in out)
           + ", T=100")
    assert ok
