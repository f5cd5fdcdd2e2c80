"""Homological equation and recursive Birkhoff normalisation of Hamiltonian jets.

Sign conventions follow :mod:`nlkg_lab.hamiltonian_jets`: flows are
``dx/dt = {H, x}`` and a generator ``chi`` acts through
``H o phi_chi = sum_k ad_chi^k H / k!`` with ``ad_chi H = {chi, H}``.  The
homological equation is ``{H_L, chi} + Z = K``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import HypothesisViolation, PreconditionError
from .hamiltonian_jets import FieldSpace, FormalHamiltonian, _Term, poisson_bracket
from .resonance import TOL_RES, MultiIndexSet, dot, minimal_resonant

KERNEL = "kernel/Z0"
RESONANT_FIELD = "resonant-field/Z1"
SOLVED = "solved-into-chi"


def homological_op(K: FormalHamiltonian, omega: Sequence[float]) -> FormalHamiltonian:
    """Apply ``K -> {H_L, K}`` monomial by monomial.

    Scalar coefficients are multiplied by ``-i omega.(mu - nu)``; an f-coefficient
    ``Phi`` becomes ``-i (B - omega.(nu - mu)) Phi`` and a conj(f)-coefficient
    ``Psi`` becomes ``+i (B - omega.(mu - nu)) Psi``.
    """
    w = np.asarray(omega, dtype=float)
    s = K.space.s
    out = K.empty_like()
    for (mu, nu), c in K.scalar.items():
        out.add_scalar(mu, nu, -1j * dot(np.subtract(mu, nu), w) * c)
    for (mu, nu), a in K.flin.items():
        e = dot(np.subtract(nu, mu), w)
        out.add_field(mu, nu, -1j * (s - e) * a)
    for (mu, nu), a in K.fbar.items():
        e = dot(np.subtract(mu, nu), w)
        out.add_field(mu, nu, 1j * (s - e) * a, conj=True)
    for t in K.higher:
        base = -1j * dot(np.subtract(t.mu, t.nu), w) * t.c
        out._add_term(_Term(t.mu, t.nu, base, t.F, t.G))
        for i in range(len(t.F)):
            F = t.F[:i] + (s * t.F[i],) + t.F[i + 1:]
            out._add_term(_Term(t.mu, t.nu, -1j * t.c, F, t.G))
        for i in range(len(t.G)):
            G = t.G[:i] + (s * t.G[i],) + t.G[i + 1:]
            out._add_term(_Term(t.mu, t.nu, 1j * t.c, t.F, G))
    return out


@dataclass
class HomologicalSolution:
    chi: FormalHamiltonian
    Z: FormalHamiltonian
    classification: Dict[tuple, str]
    kernel_margins: List[float] = field(default_factory=list)

    def residual(self, K: FormalHamiltonian, omega) -> float:
        """Largest coefficient of {H_L, chi} + Z - K."""
        R = homological_op(self.chi, omega)
        R.iadd(self.Z)
        R.iadd(K, -1.0)
        return R.max_coefficient()


def solve_homological(K: FormalHamiltonian, omega: Sequence[float], m: float,
                      tol: float = TOL_RES) -> HomologicalSolution:
    """Split ``K`` into a normal-form part ``Z`` and a generator ``chi`` with {H_L, chi} + Z = K.

    Raises
    ------
    HypothesisViolation
        A field monomial sits on the threshold ``|omega.(mu - nu)| = m``.
    PreconditionError
        ``K`` contains terms of order two or more in the field.
    """
    if K.higher:
        raise PreconditionError("the homological solver handles terms at most linear in the field")
    w = np.asarray(omega, dtype=float)
    s = K.space.s
    chi = K.empty_like()
    Z = K.empty_like()
    cls: Dict[tuple, str] = {}
    margins = []
    for (mu, nu), c in K.scalar.items():
        d = dot(np.subtract(mu, nu), w)
        deg = sum(mu) + sum(nu)
        if abs(d) < tol * (1 + deg):
            Z.add_scalar(mu, nu, c)
            cls[("scalar", mu, nu)] = KERNEL
            margins.append(tol * (1 + deg) - abs(d))
        else:
            chi.add_scalar(mu, nu, 1j * c / d)
            cls[("scalar", mu, nu)] = SOLVED

    def threshold_check(e, mu, nu):
        deg = sum(mu) + sum(nu) + 1
        if abs(e - m) < tol * (1 + deg):
            raise HypothesisViolation(
                f"field monomial {mu},{nu} has frequency {e:.12g} equal to m = {m}",
                hypothesis="H4", witness=tuple(np.subtract(nu, mu)),
            )

    for (mu, nu), a in K.flin.items():
        e = dot(np.subtract(nu, mu), w)
        threshold_check(e, mu, nu)
        if e > m:
            Z.add_field(mu, nu, a)
            cls[("f", mu, nu)] = RESONANT_FIELD
        else:
            chi.add_field(mu, nu, 1j * a / (s - e))
            cls[("f", mu, nu)] = SOLVED
    for (mu, nu), a in K.fbar.items():
        e = dot(np.subtract(mu, nu), w)
        threshold_check(e, mu, nu)
        if e > m:
            Z.add_field(mu, nu, a, conj=True)
            cls[("fbar", mu, nu)] = RESONANT_FIELD
        else:
            chi.add_field(mu, nu, -1j * a / (s - e), conj=True)
            cls[("fbar", mu, nu)] = SOLVED
    return HomologicalSolution(chi, Z, cls, margins)


def lie_transform_step(H: FormalHamiltonian, chi: FormalHamiltonian, D_jet: Optional[int] = None,
                       max_terms: int = 64) -> FormalHamiltonian:
    """``sum_k ad_chi^k H / k!`` truncated at degree ``D_jet``.

    ``chi`` must have no terms of degree below 3, so each bracket raises the
    lowest degree and the series stops on its own.
    """
    D = H.D if D_jet is None else int(D_jet)
    md = chi.min_degree()
    if md is None:
        return H.truncated(D)
    if md < 3 or chi.quad:
        raise PreconditionError("the generator must have degree >= 3")
    out = H.truncated(D)
    term = out
    for k in range(1, max_terms):
        term = poisson_bracket(chi, term, D=D)
        if term.is_zero() and not term.higher:
            break
        out.iadd(term, 1.0 / factorial(k))
        out.dropped.merge(term.dropped)
    return out


def is_normal(H: FormalHamiltonian, omega, m, degree_max: int, tol: float = TOL_RES) -> List[tuple]:
    """List the monomials of degree <= degree_max (and >= 3) that are not in normal form."""
    w = np.asarray(omega, dtype=float)
    bad = []
    for (mu, nu), c in H.scalar.items():
        deg = sum(mu) + sum(nu)
        if 3 <= deg <= degree_max and abs(c) > 0 and abs(dot(np.subtract(mu, nu), w)) >= tol * (1 + deg):
            bad.append(("scalar", mu, nu, abs(c)))
    for (mu, nu), a in H.flin.items():
        if sum(mu) + sum(nu) + 1 <= degree_max and dot(np.subtract(nu, mu), w) <= m:
            bad.append(("f", mu, nu, float(np.max(np.abs(a)))))
    for (mu, nu), a in H.fbar.items():
        if sum(mu) + sum(nu) + 1 <= degree_max and dot(np.subtract(mu, nu), w) <= m:
            bad.append(("fbar", mu, nu, float(np.max(np.abs(a)))))
    return bad


@dataclass
class NormalFormResult:
    """Outcome of :func:`birkhoff_normalize`.

    ``H`` is the full transformed jet (degree <= D_jet); ``Z`` holds its
    normal-form part through degree ``r + 3``.  ``coupling(mu)`` returns the
    coefficient of ``xi^mu <., conj f>`` and ``coupling_f(mu)`` the one of
    ``conj(xi)^mu <., f>``; for real jets they are complex conjugates.
    """

    r: int
    omega: np.ndarray
    m: float
    space: FieldSpace
    H: FormalHamiltonian
    Z: FormalHamiltonian
    generators: List[FormalHamiltonian]
    residuals: List[float]
    remainder: List[dict]

    def coupling(self, mu) -> np.ndarray:
        mu = tuple(int(a) for a in mu)
        z = (0,) * len(mu)
        return self.H.fbar.get((mu, z), np.zeros(self.space.dim, dtype=complex))

    def coupling_f(self, mu) -> np.ndarray:
        mu = tuple(int(a) for a in mu)
        z = (0,) * len(mu)
        return self.H.flin.get((z, mu), np.zeros(self.space.dim, dtype=complex))

    def Z0(self) -> Dict[tuple, complex]:
        """Scalar normal-form coefficients (all of them resonant)."""
        return dict(self.Z.scalar)

    def summary(self) -> dict:
        return {
            "order_r": self.r,
            "Z0": [{"alpha": list(a), "beta": list(b), "coef": [float(c.real), float(c.imag)]}
                   for (a, b), c in sorted(self.Z.scalar.items())],
            "Z1_terms": len(self.Z.flin) + len(self.Z.fbar),
            "homological_residuals": [float(x) for x in self.residuals],
            "remainder": self.remainder,
        }


def birkhoff_normalize(H_jet: FormalHamiltonian, omega: Sequence[float], m: float, r: int,
                       sets: Optional[MultiIndexSet] = None, tol: float = TOL_RES) -> NormalFormResult:
    """Normalise degrees 3 .. r + 3 of ``H_jet`` (which must contain H_L).

    Degree 3 is empty for admissible beta (zero of order four); it is only
    populated by the exploratory cubic nonlinearities used in scans.

    Each step extracts the degree-d part K of H - H_L, solves the homological
    equation and applies the Lie transform of the generator to the whole jet.
    """
    w = np.asarray(omega, dtype=float)
    if sets is not None and r > 2 * sets.N:
        raise PreconditionError(f"order r = {r} exceeds 2N = {2 * sets.N}")
    if abs(H_jet.quad - 1.0) > 0:
        raise PreconditionError("H_jet must contain the linear part H_L (with <conj f, B f>)")
    H = H_jet.copy()
    H_L = FormalHamiltonian.linear_part(w, H.space, H.D, H.max_field_order)
    gens, res, rem = [], [], []
    for d in range(3, r + 4):
        K = (H - H_L).degree_part(d)
        K.prune(0.0)
        sol = solve_homological(K, w, m, tol)
        res.append(sol.residual(K, w))
        gens.append(sol.chi)
        if not sol.chi.is_zero():
            H = lie_transform_step(H, sol.chi, H.D)
        # the degree-d part is now K + {chi, H_L} = Z up to round-off; store Z exactly
        cancel = ((H - H_L).degree_part(d) - sol.Z).max_coefficient()
        H = _replace_degree(H, d, sol.Z)
        rem.append({"degree": d, "dropped": H.dropped.as_dict(),
                    "cancellation_roundoff": cancel,
                    "max_above": _max_above(H, d)})
    Z = H.empty_like()
    for t in H._terms():
        if 3 <= t.degree <= r + 3:
            Z._add_term(t)
    Z.prune(0.0)
    return NormalFormResult(r, w, float(m), H.space, H, Z, gens, res, rem)


def _replace_degree(H: FormalHamiltonian, d: int, part: FormalHamiltonian) -> FormalHamiltonian:
    out = H.empty_like()
    for t in H._terms():
        if t.degree != d:
            out._add_term(t)
    out.quad = H.quad
    out.dropped = H.dropped
    out.remainder_note = dict(H.remainder_note)
    out.iadd(part)
    return out


def _max_above(H: FormalHamiltonian, d: int) -> float:
    vals = [0.0]
    for t in H._terms():
        if t.degree > d:
            vals.append(t.size())
    return float(max(vals))


def normalize_from_spectrum(S, nl, sets: MultiIndexSet, r: Optional[int] = None,
                            D_jet: Optional[int] = None) -> NormalFormResult:
    """Convenience pipeline: expand H_P on S, add H_L and normalise to order r (default 2N)."""
    from .hamiltonian_jets import expand_H_P

    r = 2 * sets.N if r is None else int(r)
    D = 2 * sets.N + 4 if D_jet is None else int(D_jet)
    D = max(D, r + 3)
    space = FieldSpace.from_spectral(S)
    HP = expand_H_P(S, nl, D, space)
    H = FormalHamiltonian.linear_part(S.omega, space, D) + HP
    H.remainder_note = dict(HP.remainder_note)
    return birkhoff_normalize(H, S.omega, S.m, r, sets)


def leading_coupling_check(S, nf: NormalFormResult, nl, mu=None, sets: Optional[MultiIndexSet] = None) -> dict:
    """Compare the coupling of ``mu`` with the shape ``B^(-1/2) P_c phi^mu``.

    Returns the fitted proportionality constant, the relative spread of the
    pointwise ratio, the constant predicted by the jet formula
    ``2^(-(|mu|+1)/2) / mu! * beta^(|mu|+1)(0) * omega^(-mu/2)`` and the
    alternative constant without the ``2^(-1/2)`` factor.
    """
    if mu is None:
        if sets is None:
            raise PreconditionError("need mu or the resonance sets")
        mu = minimal_resonant(sets)
    mu = tuple(mu)
    space = nf.space
    ph = np.ones(S.grid.points)
    for j, a in enumerate(mu):
        ph = ph * S.phi[j] ** a
    shape = space.apply(lambda s: s ** -0.5, space.coords(ph))
    coup = nf.coupling(mu)
    den = float(np.dot(shape, shape))
    const = complex(np.dot(shape, coup) / den) if den else 0.0
    resid = coup - const * shape
    spread = float(np.linalg.norm(resid) / max(np.linalg.norm(coup), 1e-300))
    # pointwise ratio on the grid where the shape is not tiny
    g_shape = space.to_grid(shape)
    g_coup = space.to_grid(coup)
    sel = np.abs(g_shape) > 1e-3 * np.max(np.abs(g_shape))
    ratio = g_coup[sel] / g_shape[sel] if sel.any() else np.zeros(1)
    ratio_spread = float(np.std(ratio) / max(abs(np.mean(ratio)), 1e-300))
    k = sum(mu)
    fac = 1
    for a in mu:
        fac *= factorial(a)
    wpow = float(np.prod(np.asarray(S.omega) ** (-0.5 * np.asarray(mu))))
    predicted = 2.0 ** (-(k + 1) / 2) / fac * nl(k + 1) * wpow
    alt = 2.0 ** (-k / 2) / fac * nl(k + 1) * wpow
    return {
        "mu": list(mu),
        "constant": const,
        "l2_relative_residual": spread,
        "pointwise_ratio_spread": ratio_spread,
        "predicted_constant": predicted,
        "alternative_constant": alt,
        "shape": shape,
    }
