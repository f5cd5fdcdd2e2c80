"""Continuous-spectrum quantities: limiting absorption, distorted waves, FGR matrices.

Two independent routes to the spectral density ``<conj g, delta(B - lam) g>``
are provided.

*Limiting absorption.*  ``<conj a, (B - zeta)^-1 b>`` is evaluated along the
path ``zeta(eps) = sqrt(m^2 + (k0 + i eps)^2)`` with ``k0 = sqrt(lam^2 - m^2)``
and extrapolated to ``eps -> 0`` by polynomial (Richardson) extrapolation.
In the momentum variable ``k`` the box-quantised sum approximates a function
that is analytic across the real axis, so the extrapolation does not feel
the threshold branch point at ``zeta = m``.  A Gaussian-smoothed spectral
measure in ``k`` (Richardson in ``sigma^2``) gives an internal second estimate.

*Distorted plane waves.*  ``u(x, k)`` solves the 1-D Lippmann-Schwinger
equation with kernel ``exp(i|k||x-y|) / (2 i |k|)``; the density is
``(lam / k0) (|g^(k0)|^2 + |g^(-k0)|^2)`` with
``g^(k) = (2 pi)^(-1/2) int conj(u(x, k)) g(x) dx``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import factorial
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson

from .errors import PreconditionError, ResolutionError
from .resonance import MultiIndexSet, minimal_resonant

EPS_FACTORS = (1.0, 2 ** 0.5, 2.0, 2 ** 1.5)
SIGMA_LEVELS = 3.0


# ---------------------------------------------------------------------------
# limiting absorption
# ---------------------------------------------------------------------------
def _k_of(s, m):
    return np.sqrt(np.maximum(s * s - m * m, 0.0))


def k_spacing(s, m, k0) -> float:
    """Local spacing of the box-quantised momenta near k0."""
    k = _k_of(s, m)
    i = int(np.clip(np.searchsorted(k, k0), 3, len(k) - 4))
    return float(np.median(np.diff(k[i - 3:i + 4])))


def _extrapolate(eps, vals):
    """Value at eps = 0 of the interpolating polynomial (complex data allowed)."""
    V = np.vander(np.asarray(eps, dtype=float), len(eps))
    coef = np.linalg.solve(V, np.asarray(vals, dtype=complex))
    return complex(coef[-1])


@dataclass
class LimitingAbsorption:
    """Result of :func:`limiting_absorption` for the form ``<conj a, . b>`` at energy ``lam``.

    ``resolvent`` is the boundary value ``<conj a, (B - lam - i0)^-1 b>``;
    ``density`` is ``<conj a, delta(B - lam) b>`` from the resolvent route and
    ``density_smoothed`` the Gaussian estimate.
    """

    lam: float
    k0: float
    resolvent: complex
    density: complex
    density_smoothed: complex
    eps: np.ndarray
    samples_plus: np.ndarray
    agreement: float
    spacing_k: float

    @property
    def gamma(self) -> complex:
        """pi times the density (the FGR normalisation)."""
        return np.pi * self.density


def _gauss_density(k, w, k0, sig):
    ker = np.exp(-0.5 * ((k - k0) / sig) ** 2) + np.exp(-0.5 * ((k + k0) / sig) ** 2)
    return np.sum(w * ker) / (np.sqrt(2 * np.pi) * sig)


def limiting_absorption_coeffs(s, m, lam, a, b=None, eps_factors=EPS_FACTORS, sigma_levels=SIGMA_LEVELS,
                               rtol_agree=0.05, check=True, ref: Optional[float] = None) -> LimitingAbsorption:
    """Limiting absorption on continuum coordinates ``a``, ``b`` (``b`` defaults to ``a``).

    Parameters
    ----------
    s : ndarray
        Continuum B eigenvalues.
    eps_factors : sequence of float
        Schedule ``eps_j = factor_j * sigma`` with ``sigma = sigma_levels * dk``.
    rtol_agree : float
        Relative tolerance between the two density estimates; ``None`` disables the check.
    ref : float, optional
        Size of the inputs (for instance ``|g| |h|`` on the grid).  Densities
        below ``1e-13 * ref`` count as zero and are not compared.
    """
    s = np.asarray(s, dtype=float)
    a = np.asarray(a, dtype=complex)
    b = a if b is None else np.asarray(b, dtype=complex)
    if lam <= m:
        raise PreconditionError(f"lam = {lam} is not above the threshold m = {m}: no continuous spectrum there")
    k0 = float(np.sqrt(lam * lam - m * m))
    dk = k_spacing(s, m, k0)
    dlam = dk * k0 / lam
    if check and lam - m <= 5 * dlam:
        raise PreconditionError(
            f"lam - m = {lam - m:.3g} is within 5 level spacings ({dlam:.3g}) of the threshold; enlarge L"
        )
    w = np.conj(a) * b
    sig = sigma_levels * dk
    eps = sig * np.asarray(eps_factors, dtype=float)
    plus, minus = [], []
    for e in eps:
        z = np.sqrt(m * m + (k0 + 1j * e) ** 2)
        plus.append(np.sum(w / (s - z)))
        minus.append(np.sum(w / (s - np.conj(z))))
    Rp = _extrapolate(eps, plus)
    Rm = _extrapolate(eps, minus)
    dens = (Rp - Rm) / (2j * np.pi)
    # Gaussian estimate, Richardson in sigma^2 over three widths
    k = _k_of(s, m)
    sigs = sig * np.array([1.0, 2 ** 0.5, 2.0])
    gvals = [_gauss_density(k, w, k0, sg) for sg in sigs]
    dens_k = _extrapolate(sigs ** 2, gvals)
    dens_s = dens_k * lam / k0
    scale = max(abs(dens), abs(dens_s))
    size = float(np.sum(np.abs(w))) if ref is None else max(float(ref), float(np.sum(np.abs(w))))
    agree = abs(dens - dens_s) / scale if scale > 1e-13 * max(size, 1e-300) else 0.0
    if rtol_agree is not None and agree > rtol_agree:
        raise ResolutionError(
            f"spectral density estimates disagree by {100 * agree:.2f}% at lam = {lam:.6g} "
            f"(resolvent {dens.real:.6g}, smoothed {dens_s.real:.6g}); increase L or N_grid"
        )
    return LimitingAbsorption(lam, k0, Rp, dens, dens_s, eps, np.array(plus), float(agree), dk)


def limiting_absorption(S, lam: float, g, h=None, **kw) -> LimitingAbsorption:
    """Limiting absorption for grid functions ``g`` (and ``h``): the form ``<conj g, . h>``."""
    if lam < S.m - 1e-12:
        raise PreconditionError(f"lam = {lam} lies below the continuous spectrum [m, inf) with m = {S.m}")
    a = S.cont_coeffs(np.asarray(g, dtype=complex))
    b = None if h is None else S.cont_coeffs(np.asarray(h, dtype=complex))
    kw.setdefault("ref", S.norm(np.abs(g)) * S.norm(np.abs(g if h is None else h)))
    return limiting_absorption_coeffs(S.s, S.m, lam, a, b, **kw)


def outgoing_resolvent_vector(s, m, lam, b, eps_factors=EPS_FACTORS, sigma_levels=SIGMA_LEVELS) -> np.ndarray:
    """Coordinates of ``(B - lam - i0)^-1 b`` by the same extrapolation, applied componentwise.

    On a finite box this is only meaningful near the support of ``b``; it is
    used for the diagnostic field ``g``.
    """
    k0 = float(np.sqrt(lam * lam - m * m))
    dk = k_spacing(s, m, k0)
    eps = sigma_levels * dk * np.asarray(eps_factors)
    V = np.vander(eps, len(eps))
    wts = np.linalg.solve(V.T, np.eye(len(eps))[-1])  # extrapolation weights for value at 0
    out = np.zeros_like(np.asarray(b, dtype=complex))
    for wt, e in zip(wts, eps):
        z = np.sqrt(m * m + (k0 + 1j * e) ** 2)
        out += wt * b / (s - z)
    return out


# ---------------------------------------------------------------------------
# distorted waves
# ---------------------------------------------------------------------------
class DistortedWaves:
    """Distorted plane waves ``u(x, k)`` sampled on the spectral grid.

    Parameters
    ----------
    S : SpectralData
    ks : array_like
        Nonzero momenta (both signs allowed; ``k < 0`` is incidence from the right).
    v_cut : float
        The integral equation is solved on the nodes where
        ``|V| > v_cut * max|V|``; outside, ``u`` is continued by its exact
        asymptotic form.
    """

    def __init__(self, S, ks, v_cut: float = 1e-15, k_min: float = 1e-6):
        self.S = S
        self.ks = np.atleast_1d(np.asarray(ks, dtype=float))
        if np.any(np.abs(self.ks) < k_min):
            raise PreconditionError("the k-grid must avoid k = 0")
        x = S.x
        V = S.potential.values
        self.x = x
        n = len(x)
        self.u = np.empty((len(self.ks), n), dtype=complex)
        self.T = np.ones(len(self.ks), dtype=complex)
        self.R = np.zeros(len(self.ks), dtype=complex)
        self.residual = np.zeros(len(self.ks))
        vmax = float(np.max(np.abs(V)))
        if vmax == 0.0:
            self.u[:] = np.exp(1j * np.outer(self.ks, x))
            self.region = (0, 0)
            return
        idx = np.flatnonzero(np.abs(V) > v_cut * vmax)
        i0, i1 = max(int(idx[0]) - 2, 1), min(int(idx[-1]) + 3, n - 1)
        self.region = (i0, i1)
        xr = x[i0:i1]
        Vr = V[i0:i1]
        h = S.h
        M = len(xr)
        Wf = cumulative_simpson(np.eye(M), dx=h, axis=0, initial=0.0)
        Wb = Wf[-1][None, :] - Wf
        eye = np.eye(M)
        for j, k in enumerate(self.ks):
            kap = abs(k)
            ep = np.exp(1j * kap * xr)
            em = np.exp(-1j * kap * xr)
            op = (ep[:, None] * Wf * (em * Vr)[None, :] + em[:, None] * Wb * (ep * Vr)[None, :]) / (2j * kap)
            rhs = np.exp(1j * k * xr)
            ur = np.linalg.solve(eye - op, rhs)
            self.residual[j] = float(np.max(np.abs(ur - op @ ur - rhs)))
            A_tot = np.dot(Wf[-1], em * Vr * ur)
            C_tot = np.dot(Wf[-1], ep * Vr * ur)
            out = np.empty(n, dtype=complex)
            out[i0:i1] = ur
            left, right = x[:i0], x[i1:]
            if k > 0:
                # incident from the left: transmitted to the right, reflected to the left
                self.T[j] = 1 + A_tot / (2j * kap)
                self.R[j] = C_tot / (2j * kap)
                out[i1:] = self.T[j] * np.exp(1j * k * right)
                out[:i0] = np.exp(1j * k * left) + self.R[j] * np.exp(-1j * k * left)
            else:
                self.T[j] = 1 + C_tot / (2j * kap)
                self.R[j] = A_tot / (2j * kap)
                out[:i0] = self.T[j] * np.exp(1j * k * left)
                out[i1:] = np.exp(1j * k * right) + self.R[j] * np.exp(-1j * k * right)
            self.u[j] = out

    def transform(self, g) -> np.ndarray:
        """``g^(k) = (2 pi)^(-1/2) int conj(u(x, k)) g(x) dx`` for every stored k."""
        g = np.asarray(g, dtype=complex)
        return self.S.h * (np.conj(self.u) @ g) / np.sqrt(2 * np.pi)

    def max_residual(self) -> float:
        return float(np.max(self.residual)) if len(self.residual) else 0.0


def build_distorted_waves(S, ks, **kw) -> DistortedWaves:
    return DistortedWaves(S, ks, **kw)


def distorted_density(S, lam: float, g, h=None, dw: Optional[DistortedWaves] = None) -> complex:
    """``<conj g, delta(B - lam) h>`` from the distorted Fourier transform at ``+-k0``."""
    k0 = float(np.sqrt(lam * lam - S.m ** 2))
    dw = DistortedWaves(S, [k0, -k0]) if dw is None else dw
    sel = np.isclose(np.abs(dw.ks), k0, rtol=1e-12, atol=0.0)
    gh = dw.transform(g)[sel]
    hh = gh if h is None else dw.transform(h)[sel]
    return complex(lam / k0 * np.sum(np.conj(gh) * hh))


def free_density(lam: float, m: float, ghat: callable) -> float:
    """Free-field density ``(lam/k0)(|g^(k0)|^2 + |g^(-k0)|^2)`` for a given Fourier transform."""
    k0 = np.sqrt(lam * lam - m * m)
    return float(lam / k0 * (abs(ghat(k0)) ** 2 + abs(ghat(-k0)) ** 2))


# ---------------------------------------------------------------------------
# FGR matrices
# ---------------------------------------------------------------------------
def polarized_form(q, a, b) -> complex:
    """``<conj a, T b>`` from the quadratic form ``q(x) = <conj x, T x>``."""
    return 0.25 * (q(a + b) - q(a - b) - 1j * q(a + 1j * b) + 1j * q(a - 1j * b))


@dataclass
class FgrData:
    """Gamma matrices per resonant energy and the H7-family verdicts.

    ``gamma_A`` / ``gamma_B`` map each energy (a float from Lambda_hat) to the
    matrix ``pi <conj Phi_mu, delta(B - lam) Phi_mu'>`` over ``M_hat_lambda``
    computed by limiting absorption (A) and distorted waves (B).
    """

    lambdas: List[float]
    members: Dict[float, List[tuple]]
    gamma_A: Dict[float, np.ndarray]
    gamma_B: Dict[float, np.ndarray]
    gamma: Dict[tuple, float]
    gamma_method_B: Dict[tuple, float]
    disagreement: Dict[float, float]
    flagged: List[float]
    H7: bool
    H7_prime: bool
    H7_double_prime: Optional[bool]
    threshold: float
    min_eigs: Dict[float, float] = field(default_factory=dict)
    hermiticity: Dict[float, float] = field(default_factory=dict)
    plemelj_agreement: Dict[float, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        def mat(M):
            return [[[float(z.real), float(z.imag)] for z in row] for row in M]

        return {
            "Lambda_hat": self.lambdas,
            "members": {repr(l): [list(mu) for mu in v] for l, v in self.members.items()},
            "Gamma_limiting_absorption": {repr(l): mat(M) for l, M in self.gamma_A.items()},
            "Gamma_distorted_waves": {repr(l): mat(M) for l, M in self.gamma_B.items()},
            "gamma_mu": {str(list(k)): v for k, v in self.gamma.items()},
            "gamma_mu_distorted": {str(list(k)): v for k, v in self.gamma_method_B.items()},
            "method_disagreement": {repr(l): v for l, v in self.disagreement.items()},
            "flagged_energies": self.flagged,
            "min_eigenvalue": {repr(l): v for l, v in self.min_eigs.items()},
            "hermiticity_defect": {repr(l): v for l, v in self.hermiticity.items()},
            "plemelj_agreement": {repr(l): v for l, v in self.plemelj_agreement.items()},
            "H7": self.H7,
            "H7_prime": self.H7_prime,
            "H7_double_prime": self.H7_double_prime,
            "threshold": self.threshold,
            "methods": {"A": "limiting absorption (polarisation for off-diagonal)", "B": "distorted waves"},
        }


def fgr_matrix(S, nf, sets: MultiIndexSet, rtol_methods: float = 0.02, rel_threshold: float = 1e-8,
               rtol_agree: float = 0.05) -> FgrData:
    """Gamma_lambda for every lambda in Lambda_hat by both methods, with verdicts.

    A coupling that vanishes identically gives Gamma = 0 and a failed H7.
    Method disagreement above ``rtol_methods`` flags the energy but does not fail the run.
    """
    space = nf.space
    gA, gB, dis, flagged, mins, herm, pl = {}, {}, {}, [], {}, {}, {}
    gam, gamB = {}, {}
    size_total = 0.0
    for lam in sets.Lambda_hat:
        mus = sets.M_hat_by_lambda[lam]
        coords = [nf.coupling(mu) for mu in mus]
        size = sum(float(np.sum(np.abs(c) ** 2)) for c in coords)
        size_total += size
        grids = [space.to_grid(c) for c in coords]
        k0 = float(np.sqrt(lam * lam - S.m ** 2))
        dw = DistortedWaves(S, [k0, -k0])
        nmu = len(mus)
        agree = []

        def q(c):
            if not np.any(c):
                return 0.0
            la = limiting_absorption_coeffs(S.s, S.m, lam, c, rtol_agree=rtol_agree)
            agree.append(la.agreement)
            return np.pi * la.density.real

        A = np.zeros((nmu, nmu), dtype=complex)
        Bm = np.zeros((nmu, nmu), dtype=complex)
        hats = [dw.transform(g) for g in grids]
        for i in range(nmu):
            for j in range(nmu):
                if i == j:
                    A[i, i] = q(coords[i])
                elif j > i:
                    A[i, j] = polarized_form(q, coords[i], coords[j])
                    A[j, i] = np.conj(A[i, j])
                Bm[i, j] = np.pi * lam / k0 * np.sum(np.conj(hats[i]) * hats[j])
        gA[lam], gB[lam] = A, Bm
        herm[lam] = float(np.max(np.abs(A - A.conj().T)))
        ev = np.linalg.eigvalsh(0.5 * (A + A.conj().T))
        mins[lam] = float(ev[0])
        pl[lam] = float(max(agree, default=0.0))
        scale = max(np.max(np.abs(A)), np.max(np.abs(Bm)))
        if scale <= rel_threshold * max(size, 1e-300) or scale == 0.0:
            d = 0.0
        else:
            d = float(np.max(np.abs(A - Bm)) / scale)
        dis[lam] = d
        if d > rtol_methods:
            flagged.append(lam)
        for i, mu in enumerate(mus):
            gam[mu] = float(A[i, i].real)
            gamB[mu] = float(Bm[i, i].real)
    thr = rel_threshold * max(size_total, 1e-300)
    h7p = all(np.min(np.linalg.eigvalsh(0.5 * (M + M.conj().T))) > thr for M in gA.values()) if gA else False
    singletons = all(len(v) == 1 for v in sets.M_hat_by_lambda.values())
    h7pp = all(g > thr for g in gam.values()) if singletons else None
    return FgrData(list(sets.Lambda_hat), dict(sets.M_hat_by_lambda), gA, gB, gam, gamB, dis, flagged,
                   h7p, h7p, h7pp, thr, mins, herm, pl)


# ---------------------------------------------------------------------------
# model coefficients
# ---------------------------------------------------------------------------
@dataclass
class ModelCoefficients:
    """Resonant coefficients ``c[(nu, mu)] = <Phi_{0 nu}, (B - omega.mu - i0)^-1 conj Phi_{0 mu}>``.

    Only pairs with ``omega.mu = omega.nu`` (the ones the reduced equations
    use) are computed.  ``Y[mu]`` holds the coordinates of
    ``(B - omega.mu - i0)^-1 Phi_{mu 0}``.
    """

    c: Dict[tuple, complex]
    Y: Dict[tuple, np.ndarray]
    lam_of: Dict[tuple, float]
    plemelj: Dict[tuple, float]
    cap_note: str = "Y computed for the (mu, 0) entries with mu in M only"

    def as_dict(self) -> dict:
        return {
            "c": [{"nu": list(k[0]), "mu": list(k[1]), "value": [v.real, v.imag]} for k, v in sorted(self.c.items())],
            "cap_note": self.cap_note,
        }


def model_coefficients(S, nf, sets: MultiIndexSet, with_Y: bool = True, rtol_agree: Optional[float] = 0.05,
                       tol: float = 1e-9) -> ModelCoefficients:
    c, Y, lam_of, ple = {}, {}, {}, {}
    coords = {mu: nf.coupling(mu) for mu in sets.M}
    for lam, mus in sets.M_by_lambda.items():
        for nu in mus:
            for mu in mus:
                a, b = coords[nu], coords[mu]
                if not np.any(a) or not np.any(b):
                    c[(nu, mu)] = 0j
                    continue
                la = limiting_absorption_coeffs(S.s, S.m, lam, a, b, rtol_agree=None)
                c[(nu, mu)] = la.resolvent
                ple[(nu, mu)] = la.agreement
        for mu in mus:
            lam_of[mu] = lam
            if with_Y:
                Y[mu] = outgoing_resolvent_vector(S.s, S.m, lam, coords[mu])
    return ModelCoefficients(c, Y, lam_of, ple)


# ---------------------------------------------------------------------------
# genericity scan
# ---------------------------------------------------------------------------
@dataclass
class ScanResult:
    mu: tuple
    order: int
    values: np.ndarray
    gamma: np.ndarray
    fit: np.ndarray
    residual: float
    relative_residual: float
    roots: List[float]
    leading_predicted: float
    contaminated: bool
    diagnostics: dict = field(default_factory=dict)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"beta{self.order}", "gamma_mu", "fit_residual"])
            pred = np.polyval(self.fit, self.values)
            for b, g, p in zip(self.values, self.gamma, pred):
                w.writerow([f"{b:.12g}", f"{g:.12g}", f"{g - p:.6g}"])

    def as_dict(self) -> dict:
        return {
            "mu": list(self.mu),
            "derivative_order": self.order,
            "quadratic_fit": [float(x) for x in self.fit],
            "relative_residual": self.relative_residual,
            "roots": self.roots,
            "leading_coefficient_predicted": self.leading_predicted,
            "contaminated": self.contaminated,
        }


def _real_roots(fit, scale, rel=1e-10) -> List[float]:
    """Real roots of a quadratic fit.

    When the extremal value is within ``rel * scale`` of zero the two roots
    are reported as one double root at the vertex (round-off otherwise makes
    them complex or splits them arbitrarily).
    """
    a, b, c = (float(x) for x in fit)
    if a == 0.0:
        return [] if b == 0.0 else [-c / b]
    vertex = -b / (2 * a)
    if abs(np.polyval(fit, vertex)) <= rel * scale:
        return [vertex, vertex]
    disc = b * b - 4 * a * c
    if disc < 0:
        return []
    r = np.sqrt(disc)
    return sorted([(-b - r) / (2 * a), (-b + r) / (2 * a)])


def genericity_scan(S, sets: MultiIndexSet, nl, values: Sequence[float], mu=None, r: Optional[int] = None,
                    rtol_fit: float = 1e-4) -> ScanResult:
    """gamma_mu as a function of ``beta^(|mu|+1)(0)`` with the other Taylor data fixed.

    The quadratic's leading coefficient is compared with
    ``c^2 <conj Psi, pi delta(B - omega.mu) Psi>``, ``Psi = B^(-1/2) P_c phi^mu``
    and ``c = 2^(-(|mu|+1)/2) omega^(-mu/2) / mu!``.
    """
    from .normalform import normalize_from_spectrum

    mu = minimal_resonant(sets) if mu is None else tuple(mu)
    order = sum(mu) + 1
    lam = float(np.dot(mu, S.omega))
    gam = []
    for v in values:
        nlv = nl.with_derivative(order, float(v))
        nf = normalize_from_spectrum(S, nlv, sets, r=r)
        cpl = nf.coupling(mu)
        if not np.any(cpl):
            gam.append(0.0)
            continue
        la = limiting_absorption_coeffs(S.s, S.m, lam, cpl, rtol_agree=None)
        gam.append(np.pi * la.density.real)
    values = np.asarray(values, dtype=float)
    gam = np.asarray(gam)
    fit = np.polyfit(values, gam, 2)
    res = float(np.max(np.abs(np.polyval(fit, values) - gam)))
    rel = res / max(float(np.max(np.abs(gam))), 1e-300)
    roots = _real_roots(fit, float(np.max(np.abs(gam))))
    # predicted leading coefficient
    ph = np.ones(S.grid.points)
    for j, a in enumerate(mu):
        ph = ph * S.phi[j] ** a
    psi = S.cont_coeffs(ph) / np.sqrt(S.s)
    fac = 1
    for a in mu:
        fac *= factorial(a)
    cst = 2.0 ** (-order / 2) / fac * float(np.prod(S.omega ** (-0.5 * np.asarray(mu))))
    dens = limiting_absorption_coeffs(S.s, S.m, lam, psi, rtol_agree=None).density.real
    lead = cst ** 2 * np.pi * dens
    return ScanResult(mu, order, values, gam, fit, res, rel, roots, float(lead), rel > rtol_fit,
                      {"lambda": lam, "fit_leading": float(fit[0])})
