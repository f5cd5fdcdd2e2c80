"""Time integration: the full field equation and the reduced discrete-mode model.

The PDE ``u_tt = -(-Lap + V + m^2) u - beta'(u)`` is advanced by Strang
splitting.  The linear flow is exact: in the eigenbasis of the interior
matrix each coordinate is a harmonic oscillator, propagated with cos/sin.
Only the nonlinear kick ``v <- v - dt beta'(u)`` touches the grid.

The reduced model is

    eta_k' = -i omega_k eta_k - i dZ0/d(conj eta_k)
             + i sum_{mu, nu} nu_k eta^mu conj(eta)^nu / conj(eta_k) c[nu, mu]

with the sum over resonant pairs ``omega.mu = omega.nu``, where
``c[nu, mu] = <conj Phi_nu, (B - omega.mu - i0)^-1 Phi_mu>``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import InstabilityError, PreconditionError
from .hamiltonian_jets import change_of_variables, inverse_change_of_variables

log = logging.getLogger(__name__)


def _mono(z, mu):
    out = 1.0 + 0j
    for zj, a in zip(z, mu):
        if a:
            out = out * zj ** a
    return out


# ---------------------------------------------------------------------------
# PDE
# ---------------------------------------------------------------------------
@dataclass
class FieldState:
    """Real field data ``(u, v)`` on the full grid at time ``t``.

    ``a`` and ``b`` cache the eigen-coordinates of the interior values; they
    are what the integrator actually updates.
    """

    t: float
    u: np.ndarray
    v: np.ndarray
    a: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None


class LinearFlow:
    """Exact flow of ``u_tt = -A u`` with ``A = -Lap + V + m^2`` (Dirichlet)."""

    def __init__(self, S):
        self.S = S
        self.Q = S.vectors
        self.Om = np.sqrt(S.energies + S.m ** 2)
        self._dt = None

    def to_eigen(self, u, v):
        return self.Q.T @ u[1:-1], self.Q.T @ v[1:-1]

    def to_grid(self, a):
        out = np.zeros(self.S.grid.points)
        out[1:-1] = self.Q @ a
        return out

    def _coeffs(self, dt):
        if self._dt != dt:
            th = self.Om * dt
            self._c, self._s = np.cos(th), np.sin(th)
            self._dt = dt
        return self._c, self._s

    def advance(self, a, b, dt):
        c, s = self._coeffs(dt)
        Om = self.Om
        return c * a + s / Om * b, -Om * s * a + c * b

    def quadratic_energy(self, a, b) -> float:
        return float(0.5 * self.S.h * np.sum(b * b + (self.Om * a) ** 2))


def sponge_profile(grid, strength: float = 1.0, fraction: float = 0.1) -> np.ndarray:
    """Quintic smoothstep ramp from 0 to ``strength`` across the outer ``fraction`` of the box."""
    L = grid.half_width
    r = np.clip((np.abs(grid.x) - (1 - fraction) * L) / (fraction * L), 0.0, 1.0)
    return strength * (10 * r ** 3 - 15 * r ** 4 + 6 * r ** 5)


class PDEIntegrator:
    """Strang-split integrator for the nonlinear field equation.

    Parameters
    ----------
    S : SpectralData
    nl : Nonlinearity
    dt : float
        Time step; must satisfy ``dt <= 0.5 h``.
    sponge : float or None
        Peak damping rate of the absorbing layer on ``v`` (None disables it).
    guard : float
        Blow-up guard relative to the initial ``H^1 x L^2`` norm.
    """

    def __init__(self, S, nl, dt: float = 0.01, sponge: Optional[float] = None, guard: float = 10.0):
        if dt > 0.5 * S.h:
            raise PreconditionError(f"dt = {dt} exceeds 0.5 h = {0.5 * S.h:.4g}")
        self.S, self.nl, self.dt = S, nl, float(dt)
        self.flow = LinearFlow(S)
        self.guard = guard
        self.damp = None
        if sponge:
            self.damp = np.exp(-self.dt * sponge_profile(S.grid, sponge)[1:-1])
        self._norm0 = None

    # -- state helpers ---------------------------------------------------
    def state(self, t, u, v) -> FieldState:
        a, b = self.flow.to_eigen(np.asarray(u, float), np.asarray(v, float))
        return FieldState(t, np.asarray(u, float), np.asarray(v, float), a, b)

    def materialize(self, st: FieldState) -> FieldState:
        st.u = self.flow.to_grid(st.a)
        st.v = self.flow.to_grid(st.b)
        return st

    def energy(self, st: FieldState) -> float:
        u = self.flow.to_grid(st.a)
        return self.flow.quadratic_energy(st.a, st.b) + float(self.S.h * np.sum(self.nl.beta(u)))

    def norm(self, st: FieldState) -> float:
        return float(np.sqrt(2.0 * self.flow.quadratic_energy(st.a, st.b)))

    # -- stepping ----------------------------------------------------------
    def _kick(self, a, b, dt):
        if self.nl.is_zero() and self.damp is None:
            return b
        Q = self.flow.Q
        u = Q @ a
        if not self.nl.is_zero():
            b = b - dt * (Q.T @ self.nl.dbeta(u))
        if self.damp is not None:
            b = Q.T @ (self.damp * (Q @ b))
        return b

    def run(self, st: FieldState, n_steps: int, sample_every: int = 1,
            callback: Optional[Callable[[FieldState], None]] = None) -> FieldState:
        """Advance ``n_steps`` Strang steps, fusing adjacent linear half-steps.

        ``callback`` receives the state (eigen-coordinates only) every
        ``sample_every`` steps.
        """
        dt = self.dt
        a, b = st.a.copy(), st.b.copy()
        if self._norm0 is None:
            self._norm0 = max(self.norm(st), 1e-300)
        t0 = st.t
        k = 0
        while k < n_steps:
            chunk = min(sample_every, n_steps - k)
            a, b = self.flow.advance(a, b, 0.5 * dt)
            for i in range(chunk):
                b = self._kick(a, b, dt)
                a, b = self.flow.advance(a, b, dt if i < chunk - 1 else 0.5 * dt)
            k += chunk
            cur = FieldState(t0 + k * dt, None, None, a, b)
            nrm = self.norm(cur)
            if not np.isfinite(nrm) or nrm > self.guard * self._norm0:
                raise InstabilityError(
                    f"field norm {nrm:.3g} exceeded {self.guard:g} x initial at t = {cur.t:.4g}; reduce dt or eps"
                )
            if callback is not None:
                callback(cur)
        return FieldState(t0 + n_steps * dt, None, None, a, b)


def step_pde(state: FieldState, dt: float, S, nl, sponge: Optional[float] = None) -> FieldState:
    """One Strang step of the field equation; returns a new state with grid data filled in."""
    integ = PDEIntegrator(S, nl, dt, sponge)
    if state.a is None:
        state = integ.state(state.t, state.u, state.v)
    return integ.materialize(integ.run(state, 1))


# ---------------------------------------------------------------------------
# reduced model
# ---------------------------------------------------------------------------
@dataclass
class ReducedModel:
    """Right-hand side data of the reduced system.

    ``z0`` maps ``(alpha, beta)`` to the coefficient of ``eta^alpha conj(eta)^beta``;
    ``c`` maps ``(nu, mu)`` to the resonant coefficient.  Entries of ``c``
    whose energies differ are rejected at construction.
    """

    omega: np.ndarray
    z0: Dict[tuple, complex]
    c: Dict[tuple, complex]
    tol_res: float = 1e-9

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        n = len(self.omega)
        for (nu, mu) in self.c:
            if abs(np.dot(np.subtract(mu, nu), self.omega)) > self.tol_res * (1 + sum(mu) + sum(nu)):
                raise PreconditionError(f"non-resonant pair nu={nu}, mu={mu} in the reduced tensor")
        # Z0 gradient terms: (alpha, beta - e_k, k, beta_k c)
        self._zg = []
        for (al, be), cf in self.z0.items():
            for k in range(n):
                if be[k]:
                    b2 = list(be)
                    b2[k] -= 1
                    self._zg.append((al, tuple(b2), k, be[k] * cf))
        self._ng = []
        for (nu, mu), cf in self.c.items():
            if cf == 0:
                continue
            for k in range(n):
                if nu[k]:
                    n2 = list(nu)
                    n2[k] -= 1
                    self._ng.append((mu, tuple(n2), k, nu[k] * cf))

    @classmethod
    def from_normal_form(cls, nf, coeffs, tol_res: float = 1e-9) -> "ReducedModel":
        return cls(nf.omega, nf.Z0(), dict(coeffs.c), tol_res)

    @classmethod
    def single_mode(cls, omega: float, p: int, gamma: float, re_c: float = 0.0, z0=None) -> "ReducedModel":
        """One mode with ``c[(p), (p)] = re_c + i gamma``."""
        return cls(np.array([omega]), dict(z0 or {}), {((p,), (p,)): complex(re_c, gamma)})

    def rhs(self, t, eta):
        eta = np.asarray(eta, dtype=complex)
        ec = np.conj(eta)
        out = -1j * self.omega * eta
        for al, be, k, cf in self._zg:
            out[k] += -1j * cf * _mono(eta, al) * _mono(ec, be)
        for mu, nu, k, cf in self._ng:
            out[k] += 1j * cf * _mono(eta, mu) * _mono(ec, nu)
        return out

    def H0L(self, eta) -> float:
        return float(np.sum(self.omega * np.abs(eta) ** 2))

    def gamma_matrices(self) -> Dict[float, tuple]:
        """Anti-Hermitian parts ``(c - c^H) / 2i`` grouped by energy: ``{lam: (indices, matrix)}``."""
        groups: Dict[float, list] = {}
        for (nu, mu) in self.c:
            lam = float(np.dot(mu, self.omega))
            key = next((l for l in groups if abs(l - lam) <= self.tol_res * (1 + abs(lam))), lam)
            g = groups.setdefault(key, [])
            for idx in (nu, mu):
                if idx not in g:
                    g.append(idx)
        out = {}
        for lam, idx in groups.items():
            C = np.zeros((len(idx), len(idx)), dtype=complex)
            for i, nu in enumerate(idx):
                for j, mu in enumerate(idx):
                    C[i, j] = self.c.get((nu, mu), 0.0)
            out[lam] = (idx, (C - C.conj().T) / 2j)
        return out


@dataclass
class ReducedState:
    t: float
    eta: np.ndarray
    model: ReducedModel


def _rotating_rhs(model: ReducedModel):
    """Right side for ``zeta = exp(i omega t) eta``.

    Every retained monomial is resonant, so in this frame the fast linear
    rotation disappears and only the slow nonlinear drift is left to resolve.
    """
    w = model.omega

    def f(t, zeta):
        ph = np.exp(-1j * w * t)
        eta = ph * zeta
        return np.conj(ph) * (model.rhs(t, eta) + 1j * w * eta)

    return f


@dataclass
class ReducedSolution:
    """Samples ``y[:, i] = eta(t[i])`` and the dense evaluator ``sol(t)``."""

    t: np.ndarray
    y: np.ndarray
    omega: np.ndarray
    _dense: Callable
    nfev: int = 0

    def sol(self, t):
        return np.exp(-1j * self.omega * t) * self._dense(t)


def step_reduced(state: ReducedState, dt: float, rtol: float = 1e-10, atol: float = 1e-13) -> ReducedState:
    """Advance the reduced system by ``dt`` with an adaptive embedded Runge-Kutta pair (DOP853)."""
    w = state.model.omega
    zeta0 = np.exp(1j * w * state.t) * np.asarray(state.eta, dtype=complex)
    sol = solve_ivp(_rotating_rhs(state.model), (state.t, state.t + dt), zeta0,
                    method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise InstabilityError(f"reduced integration failed at t = {state.t:.6g}: {sol.message}")
    t1 = state.t + dt
    return ReducedState(t1, np.exp(-1j * w * t1) * sol.y[:, -1], state.model)


def integrate_reduced(model: ReducedModel, eta0, T: float, t_eval=None, rtol: float = 1e-10,
                      atol: float = 1e-13) -> ReducedSolution:
    """Dense DOP853 solution on ``[0, T]`` (computed in the co-rotating frame); raises on step-size underflow."""
    sol = solve_ivp(_rotating_rhs(model), (0.0, T), np.asarray(eta0, dtype=complex), method="DOP853",
                    rtol=rtol, atol=atol, t_eval=t_eval, dense_output=True)
    if not sol.success:
        raise InstabilityError(f"reduced integration failed: {sol.message}")
    y = np.exp(-1j * np.outer(model.omega, sol.t)) * sol.y
    return ReducedSolution(sol.t, y, model.omega, sol.sol, int(sol.nfev))


def single_mode_decay(y0: float, gamma: float, p: int, t):
    """``y(t)`` solving ``y' = -2 p gamma y^p``."""
    t = np.asarray(t, dtype=float)
    if p == 1:
        return y0 * np.exp(-2 * gamma * t)
    return (y0 ** (1 - p) + 2 * p * (p - 1) * gamma * t) ** (-1.0 / (p - 1))


def predicted_dissipation(model: ReducedModel, eta, gammas=None) -> float:
    """``-2 sum_lam lam <F_lam, pi delta(B - lam) conj F_lam>`` from Gamma matrices and ``eta``."""
    eta = np.asarray(eta, dtype=complex)
    gammas = model.gamma_matrices() if gammas is None else gammas
    tot = 0.0
    for lam, (idx, G) in gammas.items():
        F = np.array([_mono(eta, mu) for mu in idx])
        tot += lam * float(np.real(np.conj(F) @ G @ F))
    return -2.0 * tot


def dissipation_check(model: ReducedModel, eta0, T: float, n_points: int = 20, fgr=None,
                      rtol: float = 1e-10, atol: float = 1e-14) -> dict:
    """Compare measured ``dH_0L/dt`` with the predicted dissipation along a trajectory.

    The derivative is a Richardson-extrapolated central difference of the
    dense output.  If ``fgr`` (an ``FgrData``) is given its Gamma matrices
    replace the model's on the energies it covers.

    Returns a dict with ``max_relative_residual`` (relative to the largest
    predicted magnitude along the path) and the sampled series.
    """
    gammas = model.gamma_matrices()
    if fgr is not None:
        for lam, G in fgr.gamma_A.items():
            key = next((l for l in gammas if abs(l - lam) <= 1e-7 * (1 + lam)), None)
            if key is not None:
                idx, G0 = gammas[key]
                mem = [tuple(mu) for mu in fgr.members[lam]]
                for i, a in enumerate(mem):
                    for j, b in enumerate(mem):
                        if a in idx and b in idx:
                            G0[idx.index(a), idx.index(b)] = G[i, j]
    sol = integrate_reduced(model, eta0, T, rtol=rtol, atol=atol)
    ts = np.linspace(0.1 * T, 0.9 * T, n_points)
    hd = 1e-2 * T / max(n_points, 1)
    H = lambda t: model.H0L(sol.sol(t))
    lhs, rhs = [], []
    for t in ts:
        d1 = (H(t + hd) - H(t - hd)) / (2 * hd)
        d2 = (H(t + 2 * hd) - H(t - 2 * hd)) / (4 * hd)
        lhs.append((4 * d1 - d2) / 3)
        rhs.append(predicted_dissipation(model, sol.sol(t), gammas))
    lhs, rhs = np.array(lhs), np.array(rhs)
    scale = float(np.max(np.abs(rhs)))
    if scale == 0.0:
        resid = float(np.max(np.abs(lhs)))
    else:
        resid = float(np.max(np.abs(lhs - rhs)) / scale)
    return {"times": ts, "lhs": lhs, "rhs": rhs, "max_relative_residual": resid, "scale": scale}


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------
@dataclass
class RunDiagnostics:
    """Sampled series of a PDE run.

    ``accum[mu]`` is the running ``int_0^t |xi^mu|^2 ds`` (trapezoidal);
    ``l2_norm(mu)`` returns its square root.
    """

    omega: np.ndarray
    M_hat: List[tuple]
    t: List[float] = field(default_factory=list)
    H: List[float] = field(default_factory=list)
    H0L: List[float] = field(default_factory=list)
    xi_abs2: List[np.ndarray] = field(default_factory=list)
    xi: List[np.ndarray] = field(default_factory=list)
    predicted: List[float] = field(default_factory=list)
    accum: Dict[tuple, List[float]] = field(default_factory=dict)

    def append(self, t, H, xi, predicted=np.nan):
        xi = np.asarray(xi, dtype=complex)
        if self.t and t <= self.t[-1]:
            raise PreconditionError("diagnostic samples must be increasing in time")
        for mu in self.M_hat:
            val = abs(_mono(xi, mu)) ** 2
            acc = self.accum.setdefault(mu, [])
            if acc:
                prev = abs(_mono(self.xi[-1], mu)) ** 2
                acc.append(acc[-1] + 0.5 * (t - self.t[-1]) * (val + prev))
            else:
                acc.append(0.0)
        self.t.append(float(t))
        self.H.append(float(H))
        self.H0L.append(float(np.sum(self.omega * np.abs(xi) ** 2)))
        self.xi_abs2.append(np.abs(xi) ** 2)
        self.xi.append(xi)
        self.predicted.append(float(predicted))

    def l2_norm(self, mu) -> float:
        acc = self.accum.get(tuple(mu))
        return float(np.sqrt(acc[-1])) if acc else 0.0

    def residual(self) -> np.ndarray:
        """Measured ``dH_0L/dt`` (centred differences) minus the prediction."""
        t, h = np.array(self.t), np.array(self.H0L)
        if len(t) < 3:
            return np.zeros(len(t))
        return np.gradient(h, t) - np.array(self.predicted)

    def to_csv(self, path):
        res = self.residual()
        mus = list(self.accum)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "H", "H0L"] + [f"abs_xi{j}_sq" for j in range(len(self.omega))]
                       + ["predicted_dissipation", "residual"] + ["acc_" + "_".join(map(str, mu)) for mu in mus])
            for i, t in enumerate(self.t):
                w.writerow([f"{t:.10g}", f"{self.H[i]:.15g}", f"{self.H0L[i]:.15g}"]
                           + [f"{x:.15g}" for x in self.xi_abs2[i]]
                           + [f"{self.predicted[i]:.10g}", f"{res[i]:.10g}"]
                           + [f"{self.accum[mu][i]:.15g}" for mu in mus])


def extract_modes(u, v, S, Y: Optional[Dict[tuple, np.ndarray]] = None):
    """``(xi, f, g)`` from real data; ``g = f + sum_mu xi^mu Y_mu`` when ``Y`` (continuum coordinates) is given."""
    mc = change_of_variables(u, v, S)
    g = None
    if Y:
        cf = S.cont_coeffs(mc.f)
        for mu, y in Y.items():
            cf = cf + _mono(mc.xi, mu) * y
        g = S.from_cont_coeffs(cf)
    return mc.xi, mc.f, g


def initial_data(S, xi0, f0=None):
    """Real ``(u, v)`` with discrete coordinates ``xi0`` and radiation ``f0`` (default zero)."""
    f0 = np.zeros(S.grid.points, dtype=complex) if f0 is None else f0
    return inverse_change_of_variables(np.asarray(xi0, dtype=complex), f0, S)


def run_pde(S, nl, xi0, T: float, dt: float = 0.01, sample_dt: float = 0.1, sponge: Optional[float] = None,
            M_hat: Sequence[tuple] = (), model: Optional[ReducedModel] = None, keep_fields: bool = False):
    """Evolve from ``xi(0) = xi0, f(0) = 0`` and sample diagnostics.

    Returns ``(diagnostics, final_state, integrator, fields)``; ``fields`` is a
    list of ``(t, u, v)`` when ``keep_fields``.
    """
    integ = PDEIntegrator(S, nl, dt, sponge)
    u0, v0 = initial_data(S, xi0)
    st = integ.state(0.0, u0, v0)
    diag = RunDiagnostics(np.asarray(S.omega), [tuple(m) for m in M_hat])
    fields = []
    gam = model.gamma_matrices() if model is not None else None

    def record(cur):
        u = integ.flow.to_grid(cur.a)
        v = integ.flow.to_grid(cur.b)
        xi = S.discrete_coeffs(u)
        p = S.discrete_coeffs(v)
        w = S.omega
        xi = (xi * np.sqrt(w) + 1j * p / np.sqrt(w)) / np.sqrt(2.0)
        e = integ.flow.quadratic_energy(cur.a, cur.b) + float(S.h * np.sum(nl.beta(u)))
        pred = predicted_dissipation(model, xi, gam) if model is not None else np.nan
        diag.append(cur.t, e, xi, pred)
        if keep_fields:
            fields.append((cur.t, u, v))

    record(st)
    every = max(1, int(round(sample_dt / dt)))
    n = int(round(T / dt))
    final = integ.run(st, n, every, record)
    return diag, final, integ, fields


def time_reversal_defect(S, nl, u0, v0, T: float, dt: float = 0.01) -> float:
    """Evolve forward, flip ``v``, evolve again, flip back; relative distance to ``(u0, v0)``."""
    integ = PDEIntegrator(S, nl, dt)
    n = int(round(T / dt))
    st = integ.materialize(integ.run(integ.state(0.0, u0, v0), n))
    back = integ.materialize(integ.run(integ.state(0.0, st.u, -st.v), n))
    num = np.sqrt(S.inner(back.u - u0, back.u - u0) + S.inner(-back.v - v0, -back.v - v0))
    den = np.sqrt(S.inner(u0, u0) + S.inner(v0, v0))
    return float(num / den)


def scattering_probe(S, samples, inner_fraction: float = 0.5) -> dict:
    """Distance of ``f(t)`` from the free evolution of a fitted ``f_inf`` on the inner part of the box.

    ``samples`` is a list of ``(t, f)``; ``f_inf`` is the last sample pulled
    back by ``exp(i B t)``.  Returns the distances and whether their tail is
    non-increasing.
    """
    t_last, f_last = samples[-1]
    c_last = S.cont_coeffs(f_last)
    mask = np.abs(S.x) <= inner_fraction * S.grid.half_width
    dist = []
    for t, f in samples:
        ref = S.from_cont_coeffs(np.exp(-1j * S.s * (t - t_last)) * c_last)
        d = (f - ref) * mask
        dist.append(float(np.sqrt(S.h * np.sum(np.abs(d) ** 2))))
    dist = np.array(dist)
    tail = dist[len(dist) // 2: -1]
    size = max(float(np.sqrt(S.h * np.sum(np.abs(f) ** 2))) for _, f in samples)
    slack = 1e-12 * max(size, 1e-300)
    return {"t": [s[0] for s in samples], "distance": dist,
            "eventually_decreasing": bool(len(tail) < 2 or np.all(np.diff(tail) <= slack))}


# ---------------------------------------------------------------------------
# comparison
# ---------------------------------------------------------------------------
def envelope(t, y, period: float):
    """Window means of ``y`` over consecutive windows of length ``period``."""
    t, y = np.asarray(t), np.asarray(y)
    edges = np.arange(t[0], t[-1] + 1e-12, period)
    tc, yc = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        sel = (t >= a) & (t < b)
        if sel.sum():
            tc.append(0.5 * (a + b))
            yc.append(float(np.mean(y[sel])))
    return np.array(tc), np.array(yc)


def fit_exponent(t, y, t_min: float):
    """Least-squares slope of ``log y`` against ``log t`` for ``t >= t_min`` (None if unusable)."""
    t, y = np.asarray(t), np.asarray(y)
    sel = (t >= t_min) & (y > 0)
    if sel.sum() < 3 or t[sel][-1] / t[sel][0] < 1.5:
        return None
    return float(np.polyfit(np.log(t[sel]), np.log(y[sel]), 1)[0])


@dataclass
class Scenario:
    """Everything a PDE-vs-reduced comparison needs."""

    S: object
    nl: object
    model: ReducedModel
    M_hat: List[tuple]
    xi0: np.ndarray
    T: float
    dt: float = 0.01
    sample_dt: float = 0.1
    sponge: Optional[float] = None
    T0: Optional[float] = None


def compare_pde_vs_reduced(sc: Scenario) -> dict:
    """Run both integrators from ``xi(0) = eta(0)``, ``f(0) = 0`` and compare discrete energies.

    Reports envelope monotonicity after ``T0``, fitted algebraic exponents
    (fit window: the last decade of time after ``T0``), the transferred
    energy ratio and the divergence time (first time the two transfers
    differ by more than 30%).
    """
    S = sc.S
    w1 = float(np.min(S.omega))
    T0 = 10.0 / w1 if sc.T0 is None else sc.T0
    diag, _, integ, _ = run_pde(S, sc.nl, sc.xi0, sc.T, sc.dt, sc.sample_dt, sc.sponge, sc.M_hat, sc.model)
    t = np.array(diag.t)
    red = integrate_reduced(sc.model, sc.xi0, sc.T, t_eval=t)
    H_red = np.array([sc.model.H0L(e) for e in red.y.T])
    period = 2 * np.pi / w1
    te, Ee = envelope(t, diag.H0L, period)
    _, Er = envelope(t, H_red, period)
    E0 = diag.H0L[0]
    after = te >= T0
    incr = np.diff(Ee[after]) if after.sum() > 1 else np.zeros(0)
    mono_tol = 1e-3 * E0
    monotone = bool(np.all(incr <= mono_tol))
    # decay laws
    gams = [g for (_, G) in sc.model.gamma_matrices().values() for g in np.linalg.eigvalsh(G)]
    leak = any(g > 0 for g in gams)
    p = min((sum(mu) for (nu, mu), c in sc.model.c.items() if c.imag > 0), default=None)
    expected = -1.0 / (p - 1) if (leak and p and p > 1) else None
    t_fit = max(T0, sc.T / 10)
    ex_pde = fit_exponent(te, Ee - 0.0, t_fit)
    ex_red = fit_exponent(te, Er, t_fit) if leak else None
    dE_pde = E0 - Ee
    dE_red = H_red[0] - Er
    tdiv = None
    mismatch = np.abs(dE_pde - dE_red)
    big = np.maximum(np.abs(dE_red), np.abs(dE_pde))
    bad = np.flatnonzero(after & (big > 1e-6 * E0) & (mismatch > 0.3 * big))
    if len(bad):
        tdiv = float(te[bad[0]])
    i_ref = (bad[0] - 1) if len(bad) and bad[0] > 0 else len(te) - 1
    ratio = float(dE_pde[i_ref] / dE_red[i_ref]) if abs(dE_red[i_ref]) > 1e-14 * E0 else None
    drift = float(np.max(np.abs(np.array(diag.H) - diag.H[0])) / abs(diag.H[0])) if diag.H[0] else 0.0
    return {
        "T": sc.T, "dt": sc.dt, "T0": T0, "sponge": sc.sponge,
        "pde_envelope_monotone_after_T0": monotone,
        "pde_envelope_max_increase": float(incr.max()) if len(incr) else 0.0,
        "reduced_leaks": leak, "reduced_degree_p": p,
        "expected_exponent": expected,
        "pde_exponent": ex_pde, "reduced_exponent": ex_red,
        "transferred_pde": float(dE_pde[-1]), "transferred_reduced": float(dE_red[-1]),
        "transfer_ratio": ratio, "divergence_time": tdiv,
        "pde_energy_drift": drift,
        "l2_xi_mu": {str(list(mu)): diag.l2_norm(mu) for mu in sc.M_hat},
        "_diag": diag, "_reduced_H0L": H_red,
    }
