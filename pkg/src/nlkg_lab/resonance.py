"""Multi-index arithmetic over the frequency vector: N_j, hypotheses H3-H5, resonant catalogues.

Multi-indices are plain tuples of ints.  Frequencies may be floats or
:class:`fractions.Fraction`; with fractions every comparison is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import HypothesisViolation, PreconditionError

TOL_RES = 1e-9

MultiIndex = Tuple[int, ...]


def norm1(mu: Sequence[int]) -> int:
    return sum(abs(int(a)) for a in mu)


def dot(mu: Sequence[int], omega: Sequence) -> float:
    return sum(a * w for a, w in zip(mu, omega))


def _exact(omega) -> bool:
    return all(isinstance(w, Fraction) for w in omega)


def _close(value, target, scale, tol, exact) -> bool:
    if exact:
        return value == target
    return abs(value - target) < tol * scale


def compute_N(omega: Sequence, m, tol=TOL_RES) -> Tuple[List[int], int]:
    """Return ``(N_j, N)`` with ``N_j * omega_j < m < (N_j + 1) * omega_j``.

    Raises
    ------
    HypothesisViolation
        If some ``m / omega_j`` is an integer (within ``tol``), i.e. H3 fails.
    """
    Ns = []
    for j, w in enumerate(omega):
        if not 0 < w < m:
            raise PreconditionError(f"need 0 < omega_j < m, got omega_{j + 1} = {w}")
        ratio = m / w
        k = round(ratio)
        hit = ratio == k if _exact(omega) else abs(ratio - k) < tol * max(1.0, abs(ratio))
        if hit:
            witness = tuple(int(k) if i == j else 0 for i in range(len(omega)))
            raise HypothesisViolation(
                f"H3 fails: m = {m} is {k} times omega_{j + 1} = {w}",
                hypothesis="H3",
                witness=witness,
            )
        Ns.append(int(math.floor(ratio)))
    return Ns, max(Ns) if Ns else 0


def iter_signed(n: int, cap: int, min_norm: int = 0):
    """All mu in Z^n with min_norm <= |mu| <= cap, in lexicographic order."""

    def rec(i, budget):
        if i == n - 1:
            for a in range(-budget, budget + 1):
                yield (a,)
            return
        for a in range(-budget, budget + 1):
            for rest in rec(i + 1, budget - abs(a)):
                yield (a,) + rest

    if n == 0:
        return
    for mu in rec(0, cap):
        if norm1(mu) >= min_norm:
            yield mu


def iter_unsigned(n: int, cap: int, min_norm: int = 0):
    """All mu in N_0^n with min_norm <= |mu| <= cap, in lexicographic order."""

    def rec(i, budget):
        if i == n - 1:
            for a in range(0, budget + 1):
                yield (a,)
            return
        for a in range(0, budget + 1):
            for rest in rec(i + 1, budget - a):
                yield (a,) + rest

    if n == 0:
        return
    for mu in rec(0, cap):
        if sum(mu) >= min_norm:
            yield mu


def distinct_frequencies(omega, tol=TOL_RES) -> Tuple[list, List[int]]:
    """Cluster equal frequencies.  Returns (distinct values ascending, cluster label per mode)."""
    order = sorted(range(len(omega)), key=lambda j: omega[j])
    values, labels = [], [0] * len(omega)
    for j in order:
        w = omega[j]
        if values and _close(w, values[-1], max(1.0, abs(w)), tol, _exact(omega)):
            labels[j] = len(values) - 1
        else:
            values.append(w)
            labels[j] = len(values) - 1
    return values, labels


def _certified(mu, omega, target, digits=9) -> bool:
    """Does mu . omega == target hold exactly for omega rounded to ``digits`` decimals?"""
    q = [w if isinstance(w, Fraction) else Fraction(round(float(w), digits)).limit_denominator(10 ** digits)
         for w in omega]
    t = target if isinstance(target, Fraction) else Fraction(round(float(target), digits)).limit_denominator(10 ** digits)
    return sum(a * w for a, w in zip(mu, q)) == t


@dataclass
class ResonanceReport:
    omega: list
    m: float
    N_j: List[int]
    N: int
    degree_cap: int
    H3: bool
    H4: bool
    H5: bool
    H3_witness: Optional[MultiIndex] = None
    H4_witness: Optional[MultiIndex] = None
    H5_witness: Optional[MultiIndex] = None
    witness_certified: Dict[str, bool] = field(default_factory=dict)
    normal_form_cap: int = 0
    cap_used: str = "2N1+3"

    def as_dict(self) -> dict:
        return {
            "omega": [float(w) for w in self.omega],
            "m": float(self.m),
            "N_j": list(self.N_j),
            "N": self.N,
            "degree_cap": self.degree_cap,
            "cap_used": self.cap_used,
            "normal_form_cap_2N": self.normal_form_cap,
            "H3": self.H3,
            "H4": self.H4,
            "H5": self.H5,
            "witnesses": {
                k: list(v) for k, v in
                (("H3", self.H3_witness), ("H4", self.H4_witness), ("H5", self.H5_witness)) if v is not None
            },
            "witness_certified": dict(self.witness_certified),
        }

    def raise_if_violated(self):
        for name in ("H3", "H4", "H5"):
            if not getattr(self, name):
                w = getattr(self, f"{name}_witness")
                raise HypothesisViolation(f"{name} fails with witness {w}", hypothesis=name, witness=w)


def check_H4_H5(omega: Sequence, m, degree_cap: Optional[int] = None, tol=TOL_RES) -> ResonanceReport:
    """Exhaustively test H3, H4 and H5 for |mu| <= degree_cap (default 2 N_1 + 3)."""
    n = len(omega)
    if n > 6:
        raise PreconditionError(f"resonance enumeration is limited to n <= 6 modes, got {n}")
    exact = _exact(omega) and isinstance(m, (Fraction, int))
    # H3 (floor arithmetic, never raises here)
    h3, h3w = True, None
    Ns = []
    for j, w in enumerate(omega):
        ratio = m / w
        k = round(ratio)
        if (ratio == k) if exact else abs(ratio - k) < tol * max(1.0, abs(ratio)):
            h3 = False
            h3w = h3w or tuple(int(k) if i == j else 0 for i in range(n))
            Ns.append(int(k) - 1)
        else:
            Ns.append(int(math.floor(ratio)))
    N = max(Ns) if Ns else 0
    cap = 2 * N + 3 if degree_cap is None else int(degree_cap)
    if cap < 2:
        raise PreconditionError("degree cap must be >= 2")

    h4, h4w = True, None
    for mu in iter_signed(n, cap, 1):
        if _close(dot(mu, omega), m, 1 + norm1(mu), tol, exact):
            h4, h4w = False, mu
            break

    values, labels = distinct_frequencies(omega, tol)
    h5, h5w, h5_cluster = True, None, None
    for mu in iter_signed(len(values), cap, 1):
        if _close(dot(mu, values), 0, 1 + norm1(mu), tol, exact):
            h5, h5_cluster = False, mu
            # report in mode order: each cluster's coefficient sits on its first mode
            w = [0] * n
            for c, a in enumerate(mu):
                w[labels.index(c)] = a
            h5w = tuple(w)
            break

    cert = {}
    if h3w is not None:
        cert["H3"] = _certified(h3w, omega, m)
    if h4w is not None:
        cert["H4"] = _certified(h4w, omega, m)
    if h5w is not None:
        cert["H5"] = _certified(h5_cluster, values, 0)
    return ResonanceReport(
        list(omega), m, Ns, N, cap, h3, h4, h5, h3w, h4w, h5w, cert,
        normal_form_cap=2 * N, cap_used="2N1+3" if degree_cap is None else "override",
    )


@dataclass
class MultiIndexSet:
    """Resonant catalogues built from the frequencies.

    ``M`` holds the multi-indices with ``omega.mu > m`` and ``2 <= |mu| <= cap``;
    ``M_hat`` its componentwise-minimal elements.  ``Lambda`` / ``Lambda_hat`` are
    the sorted distinct resonant energies and ``M_by_lambda`` / ``M_hat_by_lambda``
    map each energy to its fibre.
    """

    omega: list
    m: float
    N: int
    cap: int
    M: List[MultiIndex]
    M_hat: List[MultiIndex]
    Lambda: List[float]
    Lambda_hat: List[float]
    M_by_lambda: Dict[float, List[MultiIndex]]
    M_hat_by_lambda: Dict[float, List[MultiIndex]]

    def energy(self, mu) -> float:
        return float(dot(mu, self.omega))

    def lambda_of(self, mu) -> float:
        """The clustered energy key of mu."""
        e = self.energy(mu)
        for lam in self.Lambda:
            if abs(lam - e) < TOL_RES * (1 + norm1(mu)):
                return lam
        raise KeyError(mu)

    def as_dict(self) -> dict:
        return {
            "N": self.N,
            "cap": self.cap,
            "M": [list(mu) for mu in self.M],
            "M_hat": [list(mu) for mu in self.M_hat],
            "Lambda": self.Lambda,
            "Lambda_hat": self.Lambda_hat,
            "M_hat_by_lambda": {repr(k): [list(mu) for mu in v] for k, v in self.M_hat_by_lambda.items()},
        }


def _cluster_energies(items, tol):
    """Group (energy, mu) pairs; returns ordered dict energy -> list of mu."""
    groups: Dict[float, List[MultiIndex]] = {}
    keys: List[float] = []
    for e, mu in sorted(items):
        if keys and abs(e - keys[-1]) < tol * (1 + abs(e)):
            groups[keys[-1]].append(mu)
        else:
            keys.append(float(e))
            groups[float(e)] = [mu]
    for k in keys:
        groups[k].sort()
    return keys, groups


def enumerate_M(omega: Sequence, m, N: Optional[int] = None, cap: Optional[int] = None,
                tol=TOL_RES) -> MultiIndexSet:
    """Build M, M_hat, Lambda, M_lambda and their hatted versions."""
    if N is None:
        _, N = compute_N(omega, m, tol)
    cap = 2 * N + 3 if cap is None else int(cap)
    n = len(omega)
    exact = _exact(omega)
    M = []
    for mu in iter_unsigned(n, cap, 2):
        e = dot(mu, omega)
        if (e > m) if exact else (e > m + tol * (1 + sum(mu))):
            M.append(mu)
    M.sort()
    Mset = set(M)

    def minimal(mu):
        for j in range(n):
            if mu[j] > 0:
                nu = list(mu)
                nu[j] -= 1
                # anything below nu is below mu too; M is closed upward in each entry up to the cap
                if tuple(nu) in Mset:
                    return False
        return True

    M_hat = [mu for mu in M if minimal(mu)]
    lam, by = _cluster_energies([(float(dot(mu, omega)), mu) for mu in M], tol)
    lam_h, by_h = _cluster_energies([(float(dot(mu, omega)), mu) for mu in M_hat], tol)
    return MultiIndexSet(list(omega), m, N, cap, M, M_hat, lam, lam_h, by, by_h)


def minimal_resonant(sets: MultiIndexSet) -> MultiIndex:
    """The element of M_hat with the smallest |mu| (ties broken lexicographically)."""
    return min(sets.M_hat, key=lambda mu: (sum(mu), mu))


def z0_admissible_pairs(omega, cap, tol=TOL_RES):
    """Pairs (alpha, beta) in N_0^n with omega.(alpha - beta) == 0 and |alpha + beta| <= cap."""
    n = len(omega)
    pool = list(iter_unsigned(n, cap, 0))
    out = []
    for a in pool:
        for b in pool:
            if sum(a) + sum(b) > cap or not (sum(a) + sum(b)):
                continue
            d = dot(tuple(x - y for x, y in zip(a, b)), omega)
            if abs(d) < tol * (1 + sum(a) + sum(b)):
                out.append((a, b))
    return out


def brute_force_relations(omega, target, cap, tol=TOL_RES):
    """Every mu in Z^n (|mu| <= cap, mu != 0) with mu.omega == target, via a plain product loop."""
    n = len(omega)
    hits = []
    for mu in product(range(-cap, cap + 1), repeat=n):
        if 0 < norm1(mu) <= cap and abs(dot(mu, omega) - target) < tol * (1 + norm1(mu)):
            hits.append(mu)
    return hits
