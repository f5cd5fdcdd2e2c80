"""Discretisation of -d^2/dx^2 + V + m^2 on a uniform 1-D grid and its spectral calculus.

All grid functions are full-length arrays over the ``N_grid`` nodes of
:class:`Grid1D`, including the two boundary nodes ``x = -L`` and ``x = L``
where the Dirichlet condition forces the value to zero.  The inner product
is the bilinear quadrature ``<u, w> = h * sum(u * w)`` (no complex
conjugation); use ``inner(u.conj(), w)`` for the Hermitian product.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, DomainError, PreconditionError

__all__ = [
    "Grid1D",
    "Potential",
    "KGOperator",
    "SpectralData",
    "assemble_operator",
    "spectral_decompose",
    "apply_B_power",
    "resolvent",
]

# Coefficients of the 4th-order central second difference, offsets -2..2.
_D2_4TH = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


@dataclass(frozen=True)
class Grid1D:
    half_width: float
    points: int

    def __post_init__(self):
        if self.points < 16:
            raise ConfigurationError(f"N_grid must be >= 16, got {self.points}")
        if not self.half_width > 0:
            raise ConfigurationError(f"half width L must be positive, got {self.half_width}")

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / (self.points - 1)

    @property
    def x(self) -> np.ndarray:
        # Built from integer offsets so that x[i] == -x[N-1-i] exactly.
        i = np.arange(self.points) - (self.points - 1) / 2.0
        return i * self.h

    def inner(self, u, w):
        return self.h * np.sum(u * w)

    def norm(self, u) -> float:
        return float(np.sqrt(self.h * np.sum(np.abs(u) ** 2)))


def _poschl_teller(depth=2.0, width=1.0):
    return lambda x: -depth / np.cosh(x / width) ** 2


def _gaussian(depth=1.0, width=1.0):
    return lambda x: -depth * np.exp(-0.5 * (x / width) ** 2)


def _zero():
    return lambda x: np.zeros_like(np.asarray(x, dtype=float))


POTENTIAL_PRESETS = {
    "zero": _zero,
    "poschl_teller": _poschl_teller,
    "gaussian": _gaussian,
}


@dataclass(frozen=True)
class Potential:
    """Sampled short-range potential.

    ``tag`` and ``params`` identify an analytic preset so that runs are
    reproducible from the configuration alone; ``func`` (when present) is the
    closed-form evaluator used by the scattering code.
    """

    values: np.ndarray
    tag: str = "custom"
    params: dict = field(default_factory=dict)
    func: Optional[Callable] = field(default=None, compare=False, repr=False)

    @classmethod
    def preset(cls, grid: Grid1D, name: str, **params) -> "Potential":
        try:
            factory = POTENTIAL_PRESETS[name]
        except KeyError:
            raise ConfigurationError(
                f"unknown potential preset {name!r}; choose from {sorted(POTENTIAL_PRESETS)}"
            ) from None
        try:
            func = factory(**params)
        except TypeError as exc:
            raise ConfigurationError(f"bad parameters {params} for potential preset {name!r}: {exc}") from None
        pot = cls(np.asarray(func(grid.x), dtype=float), name, dict(params), func)
        pot.check_short_range()
        return pot

    def decay_rate(self, grid: Grid1D) -> float:
        """Exponential decay rate of |V| fitted on the outer half of the domain (inf for V == 0)."""
        v = np.abs(self.values)
        x = np.abs(grid.x)
        sel = (x > 0.5 * grid.half_width) & (x < 0.9 * grid.half_width) & (v > 1e-300)
        if sel.sum() < 4:
            return float("inf")
        slope = np.polyfit(x[sel], np.log(v[sel]), 1)[0]
        return float(-slope)

    def check_short_range(self):
        vmax = np.max(np.abs(self.values))
        if vmax == 0:
            return
        edge = max(abs(self.values[0]), abs(self.values[-1]))
        if edge >= 1e-8 * vmax:
            raise ConfigurationError(
                f"potential is not negligible at the boundary (|V(+-L)| = {edge:.3g}, "
                f"max|V| = {vmax:.3g}); increase L"
            )

    def digest(self) -> str:
        return hashlib.sha256(np.ascontiguousarray(self.values).tobytes()).hexdigest()[:16]


@dataclass(frozen=True)
class KGOperator:
    """H0 = -Laplacian + V + m^2 with Dirichlet nodes at both ends.

    ``interior`` is the symmetric matrix acting on the N_grid - 2 interior
    nodes; boundary values are identically zero.
    """

    grid: Grid1D
    potential: Potential
    m: float
    interior: np.ndarray

    def apply(self, u) -> np.ndarray:
        out = np.zeros_like(u, dtype=np.result_type(u, float))
        out[1:-1] = self.interior @ u[1:-1]
        return out

    def schrodinger_interior(self) -> np.ndarray:
        """Interior matrix of -Laplacian + V (without the mass term)."""
        return self.interior - self.m ** 2 * np.eye(self.interior.shape[0])


def _laplacian_interior(n_int: int, h: float) -> np.ndarray:
    """Matrix of -d^2/dx^2 on interior nodes, 4th order, odd reflection at the Dirichlet nodes."""
    c = -_D2_4TH / h ** 2
    A = np.zeros((n_int, n_int))
    for off, coef in zip(range(-2, 3), c):
        idx = np.arange(max(0, -off), min(n_int, n_int - off))
        A[idx, idx + off] = coef
    # ghost node beyond the wall: u_{-1} = -u_1 (and mirror at the right end)
    A[0, 0] -= c[0]
    A[-1, -1] -= c[4]
    return A


def assemble_operator(grid: Grid1D, pot: Potential, m: float) -> KGOperator:
    if not m > 0:
        raise ConfigurationError(f"mass m must be positive, got {m}")
    vmax = float(np.max(np.abs(pot.values)))
    if grid.h * np.sqrt(vmax) > 0.5:
        raise ConfigurationError(
            f"grid too coarse for the potential: h*sqrt(max|V|) = {grid.h * np.sqrt(vmax):.3f} > 0.5"
        )
    if len(pot.values) != grid.points:
        raise ConfigurationError("potential sampled on a different grid")
    A = _laplacian_interior(grid.points - 2, grid.h)
    A[np.diag_indices_from(A)] += pot.values[1:-1] + m ** 2
    return KGOperator(grid, pot, float(m), A)


class SpectralData:
    """Full eigendecomposition of the discrete -Laplacian + V, plus the functional calculus of B.

    Parameters
    ----------
    grid, potential, m
        Discretisation and mass.
    energies : ndarray
        All eigenvalues of the interior matrix of -Laplacian + V, ascending.
    vectors : ndarray
        Matching orthonormal (Euclidean) eigenvectors as columns.
    tol_edge : float, optional
        Eigenvalues below ``-tol_edge`` are bound states.  Defaults to ``10 h^2``.

    Notes
    -----
    Instances are treated as immutable; all methods are pure.
    """

    def __init__(self, grid, potential, m, energies, vectors, tol_edge=None):
        self.grid = grid
        self.potential = potential
        self.m = float(m)
        self.energies = np.asarray(energies, dtype=float)
        self.vectors = np.asarray(vectors, dtype=float)
        self.tol_edge = 10.0 * grid.h ** 2 if tol_edge is None else float(tol_edge)

        bound = self.energies < -self.tol_edge
        self.n = int(bound.sum())
        self._bound_idx = np.flatnonzero(bound)
        self._cont_idx = np.flatnonzero(~bound)
        # -lambda_j^2, sorted ascending (most negative first)
        self.bound_energies = self.energies[self._bound_idx]
        self.lambdas = np.sqrt(-self.bound_energies)
        if self.energies[0] + self.m ** 2 <= 0:
            raise DomainError(
                f"-Laplacian + V + m^2 is not positive definite (lowest eigenvalue "
                f"{self.energies[0] + self.m ** 2:.4g}); use m > {np.sqrt(-self.energies[0]):.6g}"
            )
        self.omega = np.sqrt(self.m ** 2 + self.bound_energies)
        # B restricted to the continuum eigenvectors
        self.cont_energies = self.energies[self._cont_idx]
        self.s = np.sqrt(self.cont_energies + self.m ** 2)
        self._Qc = np.ascontiguousarray(self.vectors[:, self._cont_idx])
        sqh = np.sqrt(grid.h)
        self.phi = np.zeros((self.n, grid.points))
        self.phi[:, 1:-1] = (self.vectors[:, self._bound_idx] / sqh).T
        # fix eigenfunction signs: positive at their largest-magnitude node
        for j in range(self.n):
            k = np.argmax(np.abs(self.phi[j]))
            if self.phi[j, k] < 0:
                self.phi[j] *= -1
        near_zero = np.abs(self.energies) <= self.tol_edge
        self.h2_holds = not np.any(near_zero & (self.energies <= 0))
        edge = np.abs(self.phi[:, [1, -2]]).max(axis=1) if self.n else np.zeros(0)
        self.bound_boundary_values = edge

    # --- basic algebra -------------------------------------------------
    @property
    def h(self) -> float:
        return self.grid.h

    @property
    def x(self) -> np.ndarray:
        return self.grid.x

    def inner(self, u, w):
        return self.grid.inner(u, w)

    def norm(self, u) -> float:
        return self.grid.norm(u)

    def digest(self) -> str:
        return cache_key(self.grid, self.potential, self.m)

    # --- projections ---------------------------------------------------
    def discrete_coeffs(self, g) -> np.ndarray:
        return self.h * (self.phi @ g) if self.n else np.zeros(0, dtype=np.result_type(g, float))

    def project_discrete(self, g) -> np.ndarray:
        c = self.discrete_coeffs(g)
        return c @ self.phi if self.n else np.zeros_like(g)

    def project_continuum(self, g) -> np.ndarray:
        out = np.array(g, dtype=np.result_type(g, float), copy=True)
        out[0] = out[-1] = 0.0
        return out - self.project_discrete(out)

    def cont_coeffs(self, g) -> np.ndarray:
        """Coefficients <psi_k, g> on the continuum eigenvectors psi_k."""
        return np.sqrt(self.h) * (self._Qc.T @ g[1:-1])

    def from_cont_coeffs(self, c) -> np.ndarray:
        out = np.zeros(self.grid.points, dtype=np.result_type(c, float))
        out[1:-1] = (self._Qc @ c) / np.sqrt(self.h)
        return out

    def cont_vectors(self) -> np.ndarray:
        """Continuum eigenfunctions psi_k as rows on the full grid (grid-normalised)."""
        out = np.zeros((len(self.s), self.grid.points))
        out[:, 1:-1] = self._Qc.T / np.sqrt(self.h)
        return out

    def check_continuum(self, g, tol=1e-8):
        gn = self.norm(g)
        dn = self.norm(self.project_discrete(g)) + abs(g[0]) + abs(g[-1])
        if dn > tol * max(gn, 1e-300) and dn > 1e-300:
            raise PreconditionError(
                f"function has a discrete-spectrum component of relative size {dn / max(gn, 1e-300):.3g}"
            )

    # --- functional calculus ------------------------------------------
    def B_power(self, a: float, g, check=True) -> np.ndarray:
        if check:
            self.check_continuum(g)
        return self.from_cont_coeffs(self.s ** a * self.cont_coeffs(g))

    def B_function(self, fn, g) -> np.ndarray:
        """Apply fn(B) on range(P_c); fn acts on the array of continuum B-eigenvalues."""
        return self.from_cont_coeffs(fn(self.s) * self.cont_coeffs(g))

    def resolvent(self, z, g, check=True) -> np.ndarray:
        z = complex(z)
        if z.imag == 0.0 and z.real >= self.m:
            raise PreconditionError(
                f"real z = {z.real:.6g} lies in the continuous spectrum [m, inf) of B; "
                "use the limiting-absorption path instead"
            )
        if check:
            self.check_continuum(g)
        den = self.s - z
        if z.imag == 0.0:
            den = den.real
        return self.from_cont_coeffs(self.cont_coeffs(g) / den)

    def apply_H0(self, g) -> np.ndarray:
        out = np.zeros_like(g, dtype=np.result_type(g, float))
        Q = self.vectors
        out[1:-1] = Q @ ((self.energies + self.m ** 2) * (Q.T @ g[1:-1]))
        return out

    def level_spacing(self, lam: float) -> float:
        """Local spacing of the box-quantised B spectrum near lam."""
        k = np.searchsorted(self.s, lam)
        k = int(np.clip(k, 2, len(self.s) - 3))
        return float(np.median(np.diff(self.s[k - 2:k + 3])))

    def summary(self) -> dict:
        return {
            "n_bound": self.n,
            "eigenvalues": [float(e) for e in self.bound_energies],
            "omega": [float(w) for w in self.omega],
            "m": self.m,
            "L": self.grid.half_width,
            "N_grid": self.grid.points,
            "tol_edge": self.tol_edge,
            "H2_no_eigenvalue_near_zero": bool(self.h2_holds),
            "bound_state_boundary_values": [float(v) for v in self.bound_boundary_values],
        }


def cache_key(grid: Grid1D, pot: Potential, m: float) -> str:
    hsh = hashlib.sha256()
    hsh.update(f"{grid.half_width!r}|{grid.points}|{float(m)!r}|".encode())
    hsh.update(np.ascontiguousarray(pot.values, dtype=float).tobytes())
    return hsh.hexdigest()[:24]


def spectral_decompose(op: KGOperator, m: Optional[float] = None, tol_edge=None) -> SpectralData:
    m = op.m if m is None else float(m)
    lap_v = op.schrodinger_interior()
    energies, vectors = np.linalg.eigh(lap_v)
    return SpectralData(op.grid, op.potential, m, energies, vectors, tol_edge)


def apply_B_power(S: SpectralData, a: float, g) -> np.ndarray:
    return S.B_power(a, g)


def resolvent(S: SpectralData, z, g) -> np.ndarray:
    return S.resolvent(z, g)
