"""Dense complex polynomials and the two structural identities they satisfy.

At a critical configuration z_1..z_m, with P(z) = prod (z - z_j) and
Q(z) = prod (z - 1/conj z_j),

    2 z P' Q' + (alpha P' - z P'') Q - ((alpha + 2) Q' + z Q'') P = 0.

For the limit system, with a monic P of degree p and Q(z) = prod (z + conj w_j)
over the roots w_j of P,

    (P'' - P') Q + (Q'' + Q') P - 2 P' Q' = 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegreeMismatch, DomainError, NonMonic, RootFindingFailure
from .hamiltonian import as_config
from .core_params import _params

__all__ = [
    "ComplexPoly",
    "IdentityResidual",
    "build_PQ",
    "pq_identity_residual",
    "limit_identity_residual",
    "limit_family",
    "reflect",
    "root_structure_report",
    "unit_circle_clearance",
    "aberth",
    "find_roots",
]


class ComplexPoly:
    """Polynomial with complex coefficients in ascending degree."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=complex)).copy()
        nz = np.flatnonzero(c)
        c = c[: nz[-1] + 1] if nz.size else c[:0]
        self.coeffs = c

    @classmethod
    def from_roots(cls, roots) -> ComplexPoly:
        c = np.array([1.0 + 0j])
        for r in np.atleast_1d(roots):
            c = np.concatenate([[0.0], c]) - r * np.concatenate([c, [0.0]])
        return cls(c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1  # -1 for the zero polynomial

    @property
    def leading(self) -> complex:
        return self.coeffs[-1] if self.coeffs.size else 0j

    def is_monic(self, tol: float = 0.0) -> bool:
        return self.coeffs.size > 0 and abs(self.leading - 1.0) <= tol

    def derivative(self) -> ComplexPoly:
        if self.coeffs.size <= 1:
            return ComplexPoly([])
        return ComplexPoly(self.coeffs[1:] * np.arange(1, self.coeffs.size))

    def shift(self, k: int = 1) -> ComplexPoly:
        """Multiply by z**k."""
        return ComplexPoly(np.concatenate([np.zeros(k, dtype=complex), self.coeffs]))

    def scale(self, s) -> ComplexPoly:
        return ComplexPoly(s * self.coeffs)

    def __add__(self, other) -> ComplexPoly:
        other = _as_poly(other)
        n = max(self.coeffs.size, other.coeffs.size)
        c = np.zeros(n, dtype=complex)
        c[: self.coeffs.size] += self.coeffs
        c[: other.coeffs.size] += other.coeffs
        return ComplexPoly(c)

    def __neg__(self) -> ComplexPoly:
        return ComplexPoly(-self.coeffs)

    def __sub__(self, other) -> ComplexPoly:
        return self + (-_as_poly(other))

    def __mul__(self, other) -> ComplexPoly:
        if np.isscalar(other):
            return self.scale(other)
        other = _as_poly(other)
        if self.coeffs.size == 0 or other.coeffs.size == 0:
            return ComplexPoly([])
        return ComplexPoly(np.convolve(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for c in self.coeffs[::-1]:
            out = out * z + c
        return out

    evaluate = __call__

    def __eq__(self, other) -> bool:
        other = _as_poly(other)
        return self.coeffs.shape == other.coeffs.shape and bool(np.all(self.coeffs == other.coeffs))

    def __repr__(self) -> str:
        return f"ComplexPoly({self.coeffs.tolist()})"

    def roots(self) -> np.ndarray:
        return find_roots(self)


def _as_poly(x) -> ComplexPoly:
    if isinstance(x, ComplexPoly):
        return x
    return ComplexPoly([x])


@dataclass(frozen=True)
class IdentityResidual:
    coeffs: np.ndarray
    max_abs: float
    normalization: float

    @property
    def relative(self) -> float:
        return self.max_abs / self.normalization if self.normalization > 0 else self.max_abs


def _residual(terms) -> IdentityResidual:
    total = ComplexPoly([])
    norm = 0.0
    for t in terms:
        total = total + t
        if t.coeffs.size:
            norm = max(norm, float(np.abs(t.coeffs).max()))
    c = total.coeffs
    return IdentityResidual(c, float(np.abs(c).max()) if c.size else 0.0, norm)


def build_PQ(z) -> tuple[ComplexPoly, ComplexPoly]:
    """P with roots z_j and Q with the reflected roots 1/conj(z_j)."""
    z = as_config(z)
    return ComplexPoly.from_roots(z), ComplexPoly.from_roots(1.0 / np.conj(z))


def pq_identity_residual(P: ComplexPoly, Q: ComplexPoly, p) -> IdentityResidual:
    """Coefficients of 2 z P'Q' + (alpha P' - z P'')Q - ((alpha+2)Q' + z Q'')P.

    ``normalization`` is the largest coefficient among the three products.
    """
    alpha = _params(p).alpha
    if P.degree != Q.degree or P.degree < 1:
        raise DegreeMismatch(f"deg P = {P.degree}, deg Q = {Q.degree}")
    P1, P2 = P.derivative(), P.derivative().derivative()
    Q1, Q2 = Q.derivative(), Q.derivative().derivative()
    t1 = (P1 * Q1).shift(1).scale(2.0)
    t2 = (P1.scale(alpha) - P2.shift(1)) * Q
    t3 = -((Q1.scale(alpha + 2.0) + Q2.shift(1)) * P)
    return _residual([t1, t2, t3])


def reflect(P: ComplexPoly) -> ComplexPoly:
    """Coefficient map c_j -> (-1)^(p-j) conj(c_j); sends roots w to -conj(w)."""
    p = P.degree
    j = np.arange(p + 1)
    return ComplexPoly(np.where((p - j) % 2 == 0, 1.0, -1.0) * np.conj(P.coeffs))


def limit_identity_residual(Pcal: ComplexPoly) -> IdentityResidual:
    """Coefficients of (P'' - P')Q + (Q'' + Q')P - 2 P'Q' with Q = reflect(P)."""
    if not Pcal.is_monic(1e-14):
        raise NonMonic(f"leading coefficient is {Pcal.leading}")
    Q = reflect(Pcal)
    P1, P2 = Pcal.derivative(), Pcal.derivative().derivative()
    Q1, Q2 = Q.derivative(), Q.derivative().derivative()
    return _residual([(P2 - P1) * Q, (Q2 + Q1) * Pcal, -(P1 * Q1).scale(2.0)])


def limit_family(p: int, t: float = 0.0, s: float = 0.0) -> ComplexPoly:
    """(z + 1 + ti)^3 - 4 + si for p = 3, (z + 2 + ti)^3 (z - 2 + ti) for p = 4."""
    if p == 3:
        return ComplexPoly.from_roots([-(1 + 1j * t)] * 3) + ComplexPoly([-4.0 + 1j * s])
    if p == 4:
        return ComplexPoly.from_roots([-(2 + 1j * t)] * 3 + [2 - 1j * t])
    raise DomainError(f"explicit families exist for p = 3 and p = 4 only, got {p!r}")


def _backward_ok(P: ComplexPoly, roots, tol: float) -> bool:
    a = np.abs(P.coeffs)
    for r in roots:
        scale = np.sum(a * np.abs(r) ** np.arange(a.size))
        if not np.isfinite(scale) or abs(P(r)) > tol * scale:
            return False
    return True


def aberth(P: ComplexPoly, tol: float = 1e-8, max_iter: int = 500) -> np.ndarray:
    """Roots by Aberth-Ehrlich iteration.

    Raises RootFindingFailure unless every root has backward residual below
    ``tol`` times sum |c_j| |root|^j.
    """
    n = P.degree
    if n < 1:
        raise RootFindingFailure("constant polynomial has no roots")
    c = P.coeffs / P.leading
    if n == 1:
        return np.array([-c[0]])
    Pm = ComplexPoly(c)
    D = Pm.derivative()
    # initial guesses on a circle inside the Cauchy bound, rotated off symmetry
    R = 1.0 + np.abs(c[:-1]).max()
    z = R * 0.5 * np.exp(1j * (2.0 * np.pi * np.arange(n) / n + 0.4))
    for _ in range(max_iter):
        ratio = Pm(z) / D(z)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        inv = 1.0 / diff
        np.fill_diagonal(inv, 0.0)
        w = ratio / (1.0 - ratio * inv.sum(axis=1))
        w[~np.isfinite(w)] = 0.0
        z = z - w
        if np.abs(w).max() <= 1e-15 * max(1.0, np.abs(z).max()):
            break
    if np.all(np.isfinite(z)) and _backward_ok(P, z, tol):
        return z
    raise RootFindingFailure("Aberth iteration did not reach an acceptable backward residual")


def find_roots(P: ComplexPoly, tol: float = 1e-8) -> np.ndarray:
    """Companion-matrix eigenvalues, with Aberth iteration as the fallback.

    Eigenvalues of the companion matrix keep the root sum (its trace) to
    round-off even for clustered roots, which iterative polishing does not.
    """
    if P.degree < 1:
        raise RootFindingFailure("constant polynomial has no roots")
    z = np.roots(P.coeffs[::-1])
    if np.all(np.isfinite(z)) and _backward_ok(P, z, tol):
        return z
    return aberth(P, tol)


def root_structure_report(Pcal: ComplexPoly) -> tuple[float, float]:
    """Sum and maximum of the real parts of the roots of a monic polynomial."""
    if not Pcal.is_monic(1e-14):
        raise NonMonic(f"leading coefficient is {Pcal.leading}")
    r = find_roots(Pcal)
    return float(r.real.sum()), float(r.real.max())


def unit_circle_clearance(P: ComplexPoly) -> float:
    """Smallest distance of a root modulus from 1."""
    if P.degree < 1:
        raise RootFindingFailure("polynomial has no roots")
    return float(np.abs(np.abs(find_roots(P)) - 1.0).min())
