"""Truncated Hamiltonian jets in the complex variables (xi, f).

A :class:`FormalHamiltonian` is a finite sum of terms

    c * xi^mu * conj(xi)^nu * prod_a <F_a, f> * prod_b <G_b, conj(f)>

plus an optional multiple of the linear radiation energy ``<conj(f), B f>``.
Field coefficients ``F_a`` and ``G_b`` live in range(P_c) and are stored by
their coordinates in the continuum eigenbasis of B (see :class:`FieldSpace`).
In that basis B is diagonal and the bilinear pairing ``<F, G>`` is a plain
dot product, so brackets are computed exactly.

Scalar terms and terms linear in ``f`` or ``conj(f)`` are merged by exponent
pair.  Terms of field order two or more are kept as an unmerged list; the
normal-form code discards them, the bracket engine keeps them when asked.

Poisson bracket (canonical pairs ``xi_j``/``conj(xi_j)`` and ``f``/``conj(f)``)::

    {H, K} = i sum_j (d_xi H d_xibar K - d_xibar H d_xi K)
             + i <grad_f H, grad_fbar K> - i <grad_fbar H, grad_f K>

With this choice the flow of ``H`` is ``dx/dt = {H, x}`` and
``{H_L, xi^mu xibar^nu} = -i omega.(mu - nu) xi^mu xibar^nu``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import factorial
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigurationError, PreconditionError
from .resonance import iter_unsigned

Key = Tuple[Tuple[int, ...], Tuple[int, ...]]


# ---------------------------------------------------------------------------
# field space
# ---------------------------------------------------------------------------
class FieldSpace:
    """Coordinates on range(P_c) in which B is diagonal.

    Parameters
    ----------
    s : array_like
        B eigenvalues of the continuum basis vectors.
    spectral : SpectralData, optional
        When given, grid functions can be converted to and from coordinates.
    """

    def __init__(self, s, spectral=None):
        self.s = np.asarray(s, dtype=float)
        self.spectral = spectral

    @classmethod
    def from_spectral(cls, S) -> "FieldSpace":
        return cls(S.s, S)

    @property
    def dim(self) -> int:
        return len(self.s)

    def coords(self, g) -> np.ndarray:
        """Coordinates of P_c g (grid function in, coefficient vector out)."""
        if self.spectral is None:
            raise PreconditionError("this field space has no grid attached")
        return self.spectral.cont_coeffs(np.asarray(g))

    def to_grid(self, c) -> np.ndarray:
        if self.spectral is None:
            raise PreconditionError("this field space has no grid attached")
        return self.spectral.from_cont_coeffs(c)

    @staticmethod
    def pair(a, b):
        return complex(np.dot(a, b))

    def apply(self, fn: Callable, c) -> np.ndarray:
        """fn(B) c."""
        return fn(self.s) * c


# ---------------------------------------------------------------------------
# nonlinearity
# ---------------------------------------------------------------------------
class Nonlinearity:
    """Taylor data of beta at 0, stored as raw derivatives beta^(j)(0).

    Parameters
    ----------
    derivatives : dict
        ``{j: beta^(j)(0)}``.  Entries with ``j < 4`` must vanish.
    j_max : int, optional
        Highest order for which Taylor data is declared available.  Defaults
        to 64 when no closed form is given (beta is then the Taylor polynomial,
        known to all orders) and to the highest key otherwise.
    func, dfunc : callable, optional
        Closed-form beta(u) and beta'(u).  When absent the Taylor polynomial
        is used, which is exact for polynomial beta.

    Notes
    -----
    Coefficients indexed as ``beta^(j)(0) / j!`` (the other common convention)
    are available from :meth:`normalized`.
    """

    def __init__(self, derivatives: Optional[Dict[int, float]] = None, j_max: Optional[int] = None,
                 func=None, dfunc=None, name: str = "custom", allow_cubic: bool = False):
        d = {int(k): float(v) for k, v in (derivatives or {}).items()}
        lowest = 3 if allow_cubic else 4
        bad = {k: v for k, v in d.items() if k < lowest and v != 0.0}
        if bad:
            raise ConfigurationError(f"beta must vanish to order {lowest} at 0; got nonzero derivatives {bad}")
        self.allow_cubic = allow_cubic
        self.derivs = {k: v for k, v in d.items() if k >= lowest and v != 0.0}
        top = max(d) if d else 4
        if j_max is None:
            # a polynomial is known to all orders; closed forms only to the declared data
            j_max = 64 if func is None else max(top, 4)
        self.j_max = int(j_max)
        self._func = func
        self._dfunc = dfunc
        self.name = name

    # presets -----------------------------------------------------------
    @classmethod
    def power(cls, p: int = 4, coefficient: float = 1.0, j_max: Optional[int] = None) -> "Nonlinearity":
        """beta(u) = coefficient * u^p."""
        if p < 4:
            raise ConfigurationError("beta(u) = c u^p needs p >= 4")
        return cls({p: coefficient * factorial(p)}, j_max=j_max, name=f"u^{p}")

    @classmethod
    def zero(cls, j_max: int = 12) -> "Nonlinearity":
        return cls({}, j_max=j_max, name="zero")

    @classmethod
    def from_taylor(cls, coeffs: Dict[int, float], j_max=None) -> "Nonlinearity":
        """From coefficients ``a_j`` of ``beta(u) = sum a_j u^j`` (the divided convention)."""
        return cls({j: a * factorial(j) for j, a in coeffs.items()}, j_max=j_max)

    # access ------------------------------------------------------------
    def __call__(self, j: int) -> float:
        if j > self.j_max:
            raise ConfigurationError(f"Taylor data of beta only available up to order {self.j_max}, need {j}")
        return self.derivs.get(j, 0.0)

    def normalized(self, j: int) -> float:
        return self(j) / factorial(j)

    def is_zero(self) -> bool:
        return not self.derivs

    @property
    def is_polynomial(self) -> bool:
        return self._func is None

    def with_derivative(self, j: int, value: float) -> "Nonlinearity":
        """Copy with beta^(j)(0) replaced.  ``j = 3`` gives an exploratory, non-admissible beta."""
        d = dict(self.derivs)
        d[j] = value
        return Nonlinearity(d, j_max=max(self.j_max, j), func=None, dfunc=None, name=self.name,
                            allow_cubic=self.allow_cubic or j == 3)

    def beta(self, u):
        if self._func is not None:
            return self._func(u)
        u = np.asarray(u)
        out = np.zeros_like(u, dtype=float)
        for j, b in self.derivs.items():
            out = out + b / factorial(j) * u ** j
        return out

    def dbeta(self, u):
        if self._dfunc is not None:
            return self._dfunc(u)
        u = np.asarray(u)
        out = np.zeros_like(u, dtype=float)
        for j, b in self.derivs.items():
            out = out + b / factorial(j - 1) * u ** (j - 1)
        return out

    def check_evaluator(self, scale: float = 0.05, rtol: float = 1e-6) -> float:
        """Compare the closed-form evaluator with the Taylor data; returns the worst relative error.

        Uses ``beta'(u) / u^(j-1)`` at small ``u`` fitted by a polynomial, so it
        only makes sense for the low-order data.
        """
        u = np.linspace(-scale, scale, 41)
        u = u[u != 0]
        ref = sum(b / factorial(j - 1) * u ** (j - 1) for j, b in self.derivs.items()) if self.derivs else 0 * u
        got = self.dbeta(u)
        den = np.max(np.abs(ref)) if np.any(ref) else 1.0
        err = float(np.max(np.abs(got - ref)) / den)
        if err > rtol and self._dfunc is not None:
            raise ConfigurationError(f"closed-form beta' disagrees with Taylor data (rel. err {err:.2e})")
        return err

    def as_dict(self) -> dict:
        return {"name": self.name, "derivatives": {str(k): v for k, v in sorted(self.derivs.items())},
                "j_max": self.j_max}


# ---------------------------------------------------------------------------
# monomials and the formal Hamiltonian
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class Monomial:
    """One scalar or field-linear term, as exposed to callers.

    ``kind`` is ``"scalar"``, ``"f"`` (coefficient paired with f) or
    ``"fbar"`` (paired with conj(f)); ``coef`` is a complex number or a
    coordinate vector accordingly.
    """

    mu: Tuple[int, ...]
    nu: Tuple[int, ...]
    kind: str
    coef: object

    @property
    def degree(self) -> int:
        return sum(self.mu) + sum(self.nu) + (0 if self.kind == "scalar" else 1)


@dataclass
class _Term:
    mu: Tuple[int, ...]
    nu: Tuple[int, ...]
    c: complex
    F: tuple = ()
    G: tuple = ()

    @property
    def order(self) -> int:
        return len(self.F) + len(self.G)

    @property
    def degree(self) -> int:
        return sum(self.mu) + sum(self.nu) + len(self.F) + len(self.G)

    def size(self) -> float:
        s = abs(self.c)
        for a in self.F + self.G:
            s *= float(np.linalg.norm(a))
        return s


def _add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def _unit_dec(a, j):
    return a[:j] + (a[j] - 1,) + a[j + 1:]


@dataclass
class DropLog:
    """What a truncation threw away: counts and crude magnitudes by cause."""

    over_degree: int = 0
    over_degree_size: float = 0.0
    field_order: int = 0
    field_order_size: float = 0.0

    def merge(self, other: "DropLog"):
        self.over_degree += other.over_degree
        self.over_degree_size += other.over_degree_size
        self.field_order += other.field_order
        self.field_order_size += other.field_order_size

    def as_dict(self):
        return dict(self.__dict__)


class FormalHamiltonian:
    """Graded polynomial in (xi, conj xi) with scalar and field-linear coefficients.

    Parameters
    ----------
    n : int
        Number of discrete modes.
    space : FieldSpace
        Coordinates of the field coefficients.
    D : int
        Truncation degree (fields count as degree one, ``<f, B f>`` as two).
    max_field_order : int or None
        Terms with more field factors are dropped on insertion.  ``None``
        keeps everything.
    """

    def __init__(self, n: int, space: FieldSpace, D: int, max_field_order: Optional[int] = 1):
        self.n = int(n)
        self.space = space
        self.D = int(D)
        self.max_field_order = max_field_order
        self.scalar: Dict[Key, complex] = {}
        self.flin: Dict[Key, np.ndarray] = {}
        self.fbar: Dict[Key, np.ndarray] = {}
        self.higher: List[_Term] = []
        self.quad = 0.0
        self.dropped = DropLog()
        self.remainder_note: Dict[str, float] = {}

    # construction -------------------------------------------------------
    def empty_like(self, D=None, max_field_order="same") -> "FormalHamiltonian":
        mfo = self.max_field_order if max_field_order == "same" else max_field_order
        return FormalHamiltonian(self.n, self.space, self.D if D is None else D, mfo)

    def copy(self) -> "FormalHamiltonian":
        H = self.empty_like()
        H.scalar = dict(self.scalar)
        H.flin = {k: v.copy() for k, v in self.flin.items()}
        H.fbar = {k: v.copy() for k, v in self.fbar.items()}
        H.higher = [_Term(t.mu, t.nu, t.c, t.F, t.G) for t in self.higher]
        H.quad = self.quad
        H.dropped = DropLog(**self.dropped.__dict__)
        H.remainder_note = dict(self.remainder_note)
        return H

    @classmethod
    def linear_part(cls, omega: Sequence[float], space: FieldSpace, D: int,
                    max_field_order: Optional[int] = 1) -> "FormalHamiltonian":
        """H_L = sum_j omega_j |xi_j|^2 + <conj f, B f>."""
        n = len(omega)
        H = cls(n, space, D, max_field_order)
        for j, w in enumerate(omega):
            e = tuple(int(i == j) for i in range(n))
            H.add_scalar(e, e, float(w))
        H.quad = 1.0
        return H

    @classmethod
    def coordinate(cls, j: int, conj: bool, n: int, space: FieldSpace, D: int,
                   max_field_order: Optional[int] = None) -> "FormalHamiltonian":
        """The jet of the coordinate function xi_j (or conj(xi_j))."""
        H = cls(n, space, D, max_field_order)
        e = tuple(int(i == j) for i in range(n))
        z = (0,) * n
        H.add_scalar(z, e, 1.0) if conj else H.add_scalar(e, z, 1.0)
        return H

    def add_scalar(self, mu, nu, c):
        mu, nu = tuple(int(a) for a in mu), tuple(int(a) for a in nu)
        if sum(mu) + sum(nu) > self.D:
            self.dropped.over_degree += 1
            self.dropped.over_degree_size += abs(c)
            return
        k = (mu, nu)
        self.scalar[k] = self.scalar.get(k, 0.0) + complex(c)

    def add_field(self, mu, nu, coef, conj=False):
        mu, nu = tuple(int(a) for a in mu), tuple(int(a) for a in nu)
        if sum(mu) + sum(nu) + 1 > self.D:
            self.dropped.over_degree += 1
            self.dropped.over_degree_size += float(np.linalg.norm(coef))
            return
        if self.max_field_order is not None and self.max_field_order < 1:
            self.dropped.field_order += 1
            self.dropped.field_order_size += float(np.linalg.norm(coef))
            return
        d = self.fbar if conj else self.flin
        k = (mu, nu)
        coef = np.asarray(coef, dtype=complex)
        if k in d:
            d[k] = d[k] + coef
        else:
            d[k] = coef.copy()

    def _add_term(self, t: _Term):
        if t.degree > self.D:
            self.dropped.over_degree += 1
            self.dropped.over_degree_size += t.size()
            return
        if self.max_field_order is not None and t.order > self.max_field_order:
            self.dropped.field_order += 1
            self.dropped.field_order_size += t.size()
            return
        if t.order == 0:
            self.add_scalar(t.mu, t.nu, t.c)
        elif t.order == 1:
            if t.F:
                self.add_field(t.mu, t.nu, t.c * t.F[0])
            else:
                self.add_field(t.mu, t.nu, t.c * t.G[0], conj=True)
        else:
            self.higher.append(t)

    def _terms(self) -> Iterable[_Term]:
        for (mu, nu), c in self.scalar.items():
            yield _Term(mu, nu, c)
        for (mu, nu), a in self.flin.items():
            yield _Term(mu, nu, 1.0, (a,), ())
        for (mu, nu), a in self.fbar.items():
            yield _Term(mu, nu, 1.0, (), (a,))
        yield from self.higher

    # algebra ------------------------------------------------------------
    def __add__(self, other: "FormalHamiltonian") -> "FormalHamiltonian":
        out = self.copy()
        out.iadd(other)
        return out

    def iadd(self, other: "FormalHamiltonian", scale: complex = 1.0) -> "FormalHamiltonian":
        for (mu, nu), c in other.scalar.items():
            self.add_scalar(mu, nu, scale * c)
        for (mu, nu), a in other.flin.items():
            self.add_field(mu, nu, scale * a)
        for (mu, nu), a in other.fbar.items():
            self.add_field(mu, nu, scale * a, conj=True)
        for t in other.higher:
            self._add_term(_Term(t.mu, t.nu, scale * t.c, t.F, t.G))
        self.quad += (scale * other.quad).real if np.isreal(scale) else scale * other.quad
        return self

    def __sub__(self, other):
        out = self.copy()
        return out.iadd(other, -1.0)

    def scaled(self, s: complex) -> "FormalHamiltonian":
        return self.empty_like().iadd(self, s)

    def degree_part(self, d: int, include_quad=False) -> "FormalHamiltonian":
        """Terms of total degree exactly d."""
        out = self.empty_like()
        for t in self._terms():
            if t.degree == d:
                out._add_term(t)
        if include_quad and d == 2:
            out.quad = self.quad
        return out

    def truncated(self, D: int) -> "FormalHamiltonian":
        out = self.empty_like(D=D)
        for t in self._terms():
            out._add_term(t)
        out.quad = self.quad
        return out

    def min_degree(self) -> Optional[int]:
        degs = [t.degree for t in self._terms()]
        if self.quad:
            degs.append(2)
        return min(degs) if degs else None

    def is_zero(self, tol: float = 0.0) -> bool:
        return self.max_coefficient() <= tol and abs(self.quad) <= tol

    def max_coefficient(self) -> float:
        vals = [abs(c) for c in self.scalar.values()]
        vals += [float(np.max(np.abs(a))) if a.size else 0.0 for a in self.flin.values()]
        vals += [float(np.max(np.abs(a))) if a.size else 0.0 for a in self.fbar.values()]
        vals += [t.size() for t in self.higher]
        return max(vals) if vals else 0.0

    def prune(self, tol: float = 0.0) -> "FormalHamiltonian":
        """Remove merged entries whose magnitude is <= tol."""
        self.scalar = {k: c for k, c in self.scalar.items() if abs(c) > tol}
        self.flin = {k: a for k, a in self.flin.items() if np.max(np.abs(a), initial=0.0) > tol}
        self.fbar = {k: a for k, a in self.fbar.items() if np.max(np.abs(a), initial=0.0) > tol}
        return self

    def monomials(self) -> List[Monomial]:
        out = [Monomial(mu, nu, "scalar", c) for (mu, nu), c in sorted(self.scalar.items())]
        out += [Monomial(mu, nu, "f", a) for (mu, nu), a in sorted(self.flin.items(), key=lambda kv: kv[0])]
        out += [Monomial(mu, nu, "fbar", a) for (mu, nu), a in sorted(self.fbar.items(), key=lambda kv: kv[0])]
        return out

    def conjugate(self) -> "FormalHamiltonian":
        """The complex-conjugate function (swaps xi with conj xi and f with conj f)."""
        out = self.empty_like()
        for (mu, nu), c in self.scalar.items():
            out.add_scalar(nu, mu, np.conj(c))
        for (mu, nu), a in self.flin.items():
            out.add_field(nu, mu, np.conj(a), conj=True)
        for (mu, nu), a in self.fbar.items():
            out.add_field(nu, mu, np.conj(a))
        for t in self.higher:
            out._add_term(_Term(t.nu, t.mu, np.conj(t.c), tuple(np.conj(g) for g in t.G),
                                tuple(np.conj(f) for f in t.F)))
        out.quad = np.conj(self.quad)
        return out

    def reality_defect(self) -> float:
        """Largest violation of K_{mu nu} = conj K_{nu mu} and Psi_{mu nu} = conj Phi_{nu mu}."""
        err = 0.0
        for (mu, nu), c in self.scalar.items():
            err = max(err, abs(c - np.conj(self.scalar.get((nu, mu), 0.0))))
        keys = set(self.flin) | {(nu, mu) for (mu, nu) in self.fbar}
        z = np.zeros(self.space.dim)
        for (mu, nu) in keys:
            a = self.flin.get((mu, nu), z)
            b = self.fbar.get((nu, mu), z)
            err = max(err, float(np.max(np.abs(b - np.conj(a)), initial=0.0)))
        err = max(err, abs(np.imag(self.quad)))
        return err

    def is_real(self, tol: float = 1e-10) -> bool:
        return self.reality_defect() <= tol * max(1.0, self.max_coefficient())

    # evaluation ---------------------------------------------------------
    def evaluate(self, xi, fc) -> complex:
        """Value at a point: ``xi`` complex mode amplitudes, ``fc`` field coordinates."""
        xi = np.asarray(xi, dtype=complex)
        fc = np.asarray(fc, dtype=complex)
        xb = np.conj(xi)
        fb = np.conj(fc)

        def mono(mu, nu):
            return np.prod(xi ** np.array(mu)) * np.prod(xb ** np.array(nu))

        val = 0.0 + 0.0j
        for (mu, nu), c in self.scalar.items():
            val += c * mono(mu, nu)
        for (mu, nu), a in self.flin.items():
            val += mono(mu, nu) * np.dot(a, fc)
        for (mu, nu), a in self.fbar.items():
            val += mono(mu, nu) * np.dot(a, fb)
        for t in self.higher:
            v = t.c * mono(t.mu, t.nu)
            for a in t.F:
                v *= np.dot(a, fc)
            for a in t.G:
                v *= np.dot(a, fb)
            val += v
        val += self.quad * np.dot(fb, self.space.s * fc)
        return complex(val)

    def canonical(self, max_dim: int = 64) -> Dict[tuple, object]:
        """Merged, basis-independent coefficients including higher field orders.

        Higher-order terms become symmetrised dense tensors, so this is only
        available when ``space.dim ** order`` stays small.
        """
        out: Dict[tuple, object] = {}
        for (mu, nu), c in self.scalar.items():
            out[(mu, nu, 0, 0)] = out.get((mu, nu, 0, 0), 0.0) + c
        for (mu, nu), a in self.flin.items():
            out[(mu, nu, 1, 0)] = out.get((mu, nu, 1, 0), 0.0) + a
        for (mu, nu), a in self.fbar.items():
            out[(mu, nu, 0, 1)] = out.get((mu, nu, 0, 1), 0.0) + a
        for t in self.higher:
            if self.space.dim > max_dim:
                raise PreconditionError("canonical form of higher field orders needs a small field space")
            ten = _sym_tensor(t.F) if t.F else np.ones(())
            ten2 = _sym_tensor(t.G) if t.G else np.ones(())
            T = t.c * np.multiply.outer(ten, ten2)
            k = (t.mu, t.nu, len(t.F), len(t.G))
            out[k] = out.get(k, 0.0) + T
        if self.quad:
            out["quad"] = self.quad
        return out

    # serialisation ------------------------------------------------------
    def as_json(self) -> dict:
        def enc(c):
            return [float(np.real(c)), float(np.imag(c))]

        return {
            "n": self.n,
            "D": self.D,
            "quad_B": float(np.real(self.quad)),
            "scalar": [{"mu": list(mu), "nu": list(nu), "coef": enc(c)}
                       for (mu, nu), c in sorted(self.scalar.items())],
            "f": [{"mu": list(mu), "nu": list(nu), "norm": float(np.linalg.norm(a))}
                  for (mu, nu), a in sorted(self.flin.items(), key=lambda kv: kv[0])],
            "fbar": [{"mu": list(mu), "nu": list(nu), "norm": float(np.linalg.norm(a))}
                     for (mu, nu), a in sorted(self.fbar.items(), key=lambda kv: kv[0])],
            "higher_terms": len(self.higher),
            "dropped": self.dropped.as_dict(),
            "remainder": dict(self.remainder_note),
        }

    def dumps(self) -> str:
        return json.dumps(self.as_json(), indent=1)

    def __repr__(self):
        return (f"FormalHamiltonian(n={self.n}, D={self.D}, scalar={len(self.scalar)}, "
                f"f={len(self.flin)}, fbar={len(self.fbar)}, higher={len(self.higher)}, quad={self.quad})")


def _sym_tensor(vecs):
    from itertools import permutations

    T = 0
    perms = list(permutations(range(len(vecs))))
    for p in perms:
        t = vecs[p[0]]
        for i in p[1:]:
            t = np.multiply.outer(t, vecs[i])
        T = T + t
    return T / len(perms)


# ---------------------------------------------------------------------------
# Poisson bracket
# ---------------------------------------------------------------------------
def _bracket_terms(ta: _Term, tb: _Term, n: int, out: FormalHamiltonian, D: int, mfo):
    """Accumulate {ta, tb} into ``out``."""
    deg = ta.degree + tb.degree - 2
    if deg > D:
        return
    order = ta.order + tb.order
    # discrete part
    if mfo is None or order <= mfo:
        mu = _add(ta.mu, tb.mu)
        nu = _add(ta.nu, tb.nu)
        for j in range(n):
            w = ta.mu[j] * tb.nu[j] - ta.nu[j] * tb.mu[j]
            if w:
                out._add_term(_Term(_unit_dec(mu, j), _unit_dec(nu, j), 1j * w * ta.c * tb.c,
                                    ta.F + tb.F, ta.G + tb.G))
    # field part
    if (ta.F and tb.G) or (ta.G and tb.F):
        if mfo is not None and order - 2 > mfo:
            return
        mu = _add(ta.mu, tb.mu)
        nu = _add(ta.nu, tb.nu)
        for a, Fa in enumerate(ta.F):
            for b, Gb in enumerate(tb.G):
                p = np.dot(Fa, Gb)
                if p != 0:
                    out._add_term(_Term(mu, nu, 1j * p * ta.c * tb.c,
                                        ta.F[:a] + ta.F[a + 1:] + tb.F, ta.G + tb.G[:b] + tb.G[b + 1:]))
        for b, Ga in enumerate(ta.G):
            for a, Fb in enumerate(tb.F):
                p = np.dot(Ga, Fb)
                if p != 0:
                    out._add_term(_Term(mu, nu, -1j * p * ta.c * tb.c,
                                        ta.F + tb.F[:a] + tb.F[a + 1:], ta.G[:b] + ta.G[b + 1:] + tb.G))


def _quad_action(q: complex, t: _Term, s: np.ndarray, out: FormalHamiltonian, sign: float):
    """Accumulate sign * {q <conj f, B f>, t} into out."""
    if q == 0 or t.degree > out.D:
        return
    for a in range(len(t.F)):
        F = t.F[:a] + (s * t.F[a],) + t.F[a + 1:]
        out._add_term(_Term(t.mu, t.nu, sign * (-1j) * q * t.c, F, t.G))
    for b in range(len(t.G)):
        G = t.G[:b] + (s * t.G[b],) + t.G[b + 1:]
        out._add_term(_Term(t.mu, t.nu, sign * 1j * q * t.c, t.F, G))


def poisson_bracket(A: FormalHamiltonian, B: FormalHamiltonian, D: Optional[int] = None,
                    max_field_order="inherit") -> FormalHamiltonian:
    """{A, B} truncated at degree ``D`` (default: the smaller of the two caps)."""
    if A.n != B.n:
        raise PreconditionError("bracket of jets with different mode counts")
    D = min(A.D, B.D) if D is None else int(D)
    if max_field_order == "inherit":
        mfo = _min_order(A.max_field_order, B.max_field_order)
    else:
        mfo = max_field_order
    out = FormalHamiltonian(A.n, A.space, D, mfo)
    n = A.n
    ta_list = list(A._terms())
    tb_list = list(B._terms())
    # bucket B's terms by degree so that each A-term only meets partners that survive truncation
    by_deg: Dict[int, List[_Term]] = {}
    for t in tb_list:
        by_deg.setdefault(t.degree, []).append(t)
    for ta in ta_list:
        lim = D + 2 - ta.degree
        for d, bucket in by_deg.items():
            if d > lim:
                continue
            for tb in bucket:
                _bracket_terms(ta, tb, n, out, D, mfo)
    s = A.space.s
    if A.quad:
        for tb in tb_list:
            _quad_action(A.quad, tb, s, out, 1.0)
    if B.quad:
        for ta in ta_list:
            _quad_action(B.quad, ta, s, out, -1.0)
    return out


def _min_order(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


# ---------------------------------------------------------------------------
# change of variables
# ---------------------------------------------------------------------------
@dataclass
class ModeCoordinates:
    """Point of phase space in complex coordinates: ``xi`` (n,) and ``f`` a complex grid function."""

    xi: np.ndarray
    f: np.ndarray


def change_of_variables(u, v, S) -> ModeCoordinates:
    """Map real data (u, v) to ``(xi, f)``.

    ``xi_j = (q_j sqrt(w_j) + i p_j / sqrt(w_j)) / sqrt(2)`` with ``q_j = <u, phi_j>``,
    ``p_j = <v, phi_j>`` and ``f = (B^(1/2) P_c u + i B^(-1/2) P_c v) / sqrt(2)``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    q = S.discrete_coeffs(u)
    p = S.discrete_coeffs(v)
    w = S.omega
    xi = (q * np.sqrt(w) + 1j * p / np.sqrt(w)) / np.sqrt(2.0) if S.n else np.zeros(0, complex)
    cu = S.cont_coeffs(u)
    cv = S.cont_coeffs(v)
    f = S.from_cont_coeffs((np.sqrt(S.s) * cu + 1j * cv / np.sqrt(S.s)) / np.sqrt(2.0))
    return ModeCoordinates(np.asarray(xi, dtype=complex), f)


def inverse_change_of_variables(xi, f, S):
    """Inverse of :func:`change_of_variables`; returns real ``(u, v)``."""
    xi = np.asarray(xi, dtype=complex)
    w = S.omega
    q = np.sqrt(2.0) * xi.real / np.sqrt(w) if S.n else np.zeros(0)
    p = np.sqrt(2.0) * xi.imag * np.sqrt(w) if S.n else np.zeros(0)
    c = S.cont_coeffs(np.asarray(f, dtype=complex))
    uc = np.sqrt(2.0) * c.real / np.sqrt(S.s)
    vc = np.sqrt(2.0) * c.imag * np.sqrt(S.s)
    u = S.from_cont_coeffs(uc) + (q @ S.phi if S.n else 0.0)
    v = S.from_cont_coeffs(vc) + (p @ S.phi if S.n else 0.0)
    return np.real(u), np.real(v)


def linear_energy(xi, f, S) -> float:
    """H_L = sum omega_j |xi_j|^2 + <conj f, B f>."""
    c = S.cont_coeffs(np.asarray(f, dtype=complex))
    return float(np.sum(S.omega * np.abs(xi) ** 2) + np.sum(S.s * np.abs(c) ** 2))


def quadratic_energy(u, v, S) -> float:
    """0.5 <v, v> + 0.5 <u, H0 u> by grid quadrature."""
    return float(0.5 * S.inner(v, v) + 0.5 * S.inner(u, S.apply_H0(u)))


# ---------------------------------------------------------------------------
# expansion of H_P
# ---------------------------------------------------------------------------
def _mfact(mu) -> int:
    out = 1
    for a in mu:
        out *= factorial(a)
    return out


def _phi_power(S, e) -> np.ndarray:
    out = np.ones(S.grid.points)
    for j, a in enumerate(e):
        if a:
            out = out * S.phi[j] ** a
    return out


def expand_H_P(S, nl: Nonlinearity, D_jet: int, space: Optional[FieldSpace] = None) -> FormalHamiltonian:
    """Jet of H_P = int beta(u) in the variables (xi, f), through total degree ``D_jet``.

    With ``c_j = (2 omega_j)^(-1/2)`` the scalar coefficient of ``xi^a conj(xi)^b``
    is ``beta^(l)(0) / (a! b!) c^(a+b) int phi^(a+b)`` (``l = |a|+|b|``) and both
    field coefficients of ``xi^a conj(xi)^b`` equal
    ``beta^(l+1)(0) / (a! b!) c^(a+b) B^(-1/2) P_c phi^(a+b) / sqrt(2)``.
    Terms of second and higher order in f are not expanded; the size of the
    quadratic one is recorded in ``remainder_note``.
    """
    if D_jet > nl.j_max:
        raise ConfigurationError(f"D_jet = {D_jet} exceeds the available Taylor data (order {nl.j_max})")
    space = FieldSpace.from_spectral(S) if space is None else space
    n = S.n
    H = FormalHamiltonian(n, space, D_jet, max_field_order=1)
    if nl.is_zero() or n == 0:
        return H
    cw = (2.0 * S.omega) ** -0.5
    h = S.h
    cache: Dict[tuple, np.ndarray] = {}
    quad_sizes = []
    for l in range(2, D_jet + 1):
        for e in iter_unsigned(n, l, l):
            # e = a + b with |e| = l
            b_scal = nl(l) if l >= 3 else 0.0
            b_lin = nl(l + 1) if l + 1 <= D_jet else 0.0
            b_quad = nl(l + 2) if l + 2 <= nl.j_max else 0.0
            if b_scal == 0.0 and b_lin == 0.0 and b_quad == 0.0:
                continue
            ph = _phi_power(S, e)
            ce = float(np.prod(cw ** np.array(e)))
            integ = h * float(np.sum(ph))
            if b_lin and l + 1 >= 3:
                if e not in cache:
                    cache[e] = space.apply(lambda s: s ** -0.5, space.coords(ph))
                field_shape = cache[e]
            if b_quad:
                quad_sizes.append(abs(b_quad) * ce * float(np.max(np.abs(ph))) / _mfact(e))
            for a in _splits(e):
                bb = tuple(x - y for x, y in zip(e, a))
                w = ce / (_mfact(a) * _mfact(bb))
                if b_scal:
                    H.add_scalar(a, bb, b_scal * w * integ)
                if b_lin and l + 1 >= 3:
                    coef = (b_lin * w / np.sqrt(2.0)) * field_shape
                    H.add_field(a, bb, coef)
                    H.add_field(a, bb, coef, conj=True)
    # the l = 2 field-quadratic term starts at discrete degree 2 (beta'''' u_d^2 U^2 / 4)
    H.remainder_note["field_quadratic_coefficient_bound"] = float(max(quad_sizes, default=0.0))
    H.remainder_note["field_quadratic_lowest_degree"] = 3 if nl.allow_cubic else 4
    return H


def _splits(e):
    """All a <= e componentwise."""
    from itertools import product as _p

    for a in _p(*[range(x + 1) for x in e]):
        yield tuple(a)


# ---------------------------------------------------------------------------
# finite-difference oracle
# ---------------------------------------------------------------------------
def hp_direct(S, nl: Nonlinearity, xi, f) -> float:
    """H_P(xi, f) = int beta(u) by quadrature, with u rebuilt from (xi, f)."""
    xi = np.asarray(xi, dtype=complex)
    q = np.sqrt(2.0) * xi.real / np.sqrt(S.omega)
    c = S.cont_coeffs(np.asarray(f, dtype=complex))
    U = S.from_cont_coeffs(np.sqrt(2.0) * c.real / np.sqrt(S.s))
    u = q @ S.phi + np.real(U)
    return float(S.h * np.sum(nl.beta(u)))


def fd_field_coefficient(S, nl: Nonlinearity, mu, nu, g, rho: float = 0.3, n_theta: int = 32,
                         eps: float = 1e-3) -> complex:
    """Finite-difference value of ``<Phi_{mu nu}, g>`` for a single-mode system.

    ``H_P(rho e^{i theta}, eps g)`` is differentiated in ``eps`` by a fourth-order
    central stencil, combined over ``g`` and ``i g`` to isolate the f-part, and
    Fourier-analysed in ``theta`` to isolate the frequency ``mu - nu``.  The
    homogeneous degree is separated by a polynomial fit over three radii, so
    the result is exact for polynomial beta of moderate degree.
    """
    if S.n != 1:
        raise PreconditionError("the finite-difference jet oracle is implemented for a single discrete mode")
    mu, nu = int(mu[0]), int(nu[0])
    k = mu - nu
    deg = mu + nu
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    g = np.asarray(g, dtype=complex)

    def deps(gg, xi):
        st = (-1, 8, -8, 1)
        pts = (2 * eps, eps, -eps, -2 * eps)
        return sum(c * hp_direct(S, nl, [xi], p * gg) for c, p in zip(st, pts)) / (12 * eps)

    radii = rho * np.array([0.6, 0.8, 1.0, 1.2, 1.4])
    vals = []
    for r in radii:
        samples = np.array([(deps(g, r * np.exp(1j * t)) - 1j * deps(1j * g, r * np.exp(1j * t))) / 2
                            for t in th])
        # coefficient of e^{i k theta}
        vals.append(np.mean(samples * np.exp(-1j * k * th)))
    vals = np.array(vals)
    # vals(r) = sum over degrees d = |k| + 2 j of a_d r^d ; fit and read off deg
    degs = [d for d in range(abs(k), abs(k) + 2 * len(radii), 2)][:len(radii)]
    V = np.array([[r ** d for d in degs] for r in radii])
    sol = np.linalg.solve(V, vals)
    if deg not in degs:
        raise PreconditionError(f"degree {deg} incompatible with frequency {k}")
    return complex(sol[degs.index(deg)])


def fd_scalar_coefficient(S, nl: Nonlinearity, mu, nu, rho: float = 0.3, n_theta: int = 32) -> complex:
    """Single-mode finite-sample value of the scalar coefficient of xi^mu conj(xi)^nu (f = 0)."""
    if S.n != 1:
        raise PreconditionError("the jet oracle is implemented for a single discrete mode")
    mu, nu = int(mu[0]), int(nu[0])
    k = mu - nu
    deg = mu + nu
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    zero = np.zeros(S.grid.points, dtype=complex)
    radii = rho * np.array([0.6, 0.8, 1.0, 1.2, 1.4])
    vals = []
    for r in radii:
        samples = np.array([hp_direct(S, nl, [r * np.exp(1j * t)], zero) for t in th])
        vals.append(np.mean(samples * np.exp(-1j * k * th)))
    degs = [d for d in range(abs(k), abs(k) + 2 * len(radii), 2)][:len(radii)]
    V = np.array([[r ** d for d in degs] for r in radii])
    sol = np.linalg.solve(V, np.array(vals))
    return complex(sol[degs.index(deg)])
