"""Closed-form spectrum of the Hamiltonian Hessian at the regular polygon.

In polar coordinates ``(r1, t1, ..., rm, tm)`` the Hessian at the polygon is
block circulant, ``H[j, k] = C[(k - j) % m]``, and the discrete Fourier
transform reduces it to m Hermitian 2x2 blocks

    M_p = sum_l C_l w^(p l) = [[mu_p, -i gamma_p], [i gamma_p, nu_p]],

with ``w = exp(2 pi i / m)``.  Everything here is evaluated from closed forms
in ``rho = r**2`` where ``r`` is the polygon radius.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError, InternalInconsistency
from .core_params import _params, check_peak_count, polygon_radius

__all__ = [
    "BlockCirculant",
    "LatticeSums",
    "ModeBlock",
    "assemble_blocks",
    "circulant_matrix",
    "lattice_sums",
    "lattice_sums_bruteforce",
    "mode_block",
    "mode_block_dft",
    "full_spectrum",
    "polar_zero_vector",
    "cartesian_zero_vector",
    "dft_conjugation_residual",
    "det_law",
    "count_zero_eigenvalues",
    "ZERO_THRESHOLD",
]

ZERO_THRESHOLD = 1e-10


@dataclass(frozen=True)
class BlockCirculant:
    blocks: np.ndarray  # shape (m, 2, 2)
    rho: float
    angles: np.ndarray  # 2 pi l / m
    gaps: np.ndarray  # 1 + rho^2 - 2 rho cos(angle)

    @property
    def m(self) -> int:
        return self.blocks.shape[0]


@dataclass(frozen=True)
class LatticeSums:
    R: float
    S: float
    T: float


@dataclass(frozen=True)
class ModeBlock:
    p: int
    mu: float
    nu: float
    gamma: float
    X: float
    Y: float
    a_hat: float
    b_hat: float
    rho: float
    m: int

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.mu, -1j * self.gamma], [1j * self.gamma, self.nu]])

    @property
    def det(self) -> float:
        return self.mu * self.nu - self.gamma**2

    @property
    def det_closed_form(self) -> float:
        return det_law(self.rho, self.m, self.p)

    def eigenvalues(self) -> np.ndarray:
        """Closed-form eigenvalues, ascending."""
        half_tr = 0.5 * (self.mu + self.nu)
        rad = np.hypot(0.5 * (self.mu - self.nu), self.gamma)
        return np.array([half_tr - rad, half_tr + rad])


def _setup(p, m):
    p = _params(p)
    m = check_peak_count(m)
    rho = polygon_radius(p, m) ** 2
    return p, m, rho


def _check_mode(m, pmode):
    if isinstance(pmode, bool) or int(pmode) != pmode or not 0 <= pmode < m:
        raise DomainError(f"Fourier mode must be an integer in [0, {m - 1}], got {pmode!r}")
    return int(pmode)


def lattice_sums(p, m, pmode) -> LatticeSums:
    """Closed forms of R_p, S_p, T_p.

    R_p = sum_{l=1}^{m-1} w^(pl) / sin^2(pi l/m),
    S_p = sum_l w^(pl) / D_l, T_p = sum_l w^(pl) / D_l^2.
    """
    p, m, rho = _setup(p, m)
    q = _check_mode(m, pmode)
    return _lattice_sums(m, q, rho)


def _lattice_sums(m, q, rho):
    q = q % m
    R = (m * m - 1) / 3.0 - 2.0 * q * (m - q)
    rm = rho**m
    S = m * (rho**q + rho ** (m - q)) / ((1.0 - rho**2) * (1.0 - rm))
    r4 = rho**2
    T = (
        m
        / ((1.0 - r4) ** 3 * (1.0 - rm) ** 2)
        * (
            rho**q * ((q + 1) - (q - 1) * r4 + rm * (m - q - 1 - (m - q + 1) * r4))
            + rho ** (m - q) * ((m - q + 1) - (m - q - 1) * r4 + rm * (q - 1 - (q + 1) * r4))
        )
    )
    return LatticeSums(R, S, T)


def lattice_sums_bruteforce(p, m, pmode) -> LatticeSums:
    """The three sums by direct summation over l."""
    p, m, rho = _setup(p, m)
    q = _check_mode(m, pmode)
    l = np.arange(m)
    w = np.exp(2j * np.pi * q * l / m)
    D = 1.0 + rho**2 - 2.0 * rho * np.cos(2.0 * np.pi * l / m)
    R = np.sum(w[1:] / np.sin(np.pi * l[1:] / m) ** 2) if m > 1 else 0.0
    return LatticeSums(float(np.real(R)), float(np.real(np.sum(w / D))), float(np.real(np.sum(w / D**2))))


def assemble_blocks(p, m) -> BlockCirculant:
    """The circulant blocks C_0..C_{m-1} of the polar Hessian at the polygon."""
    p, m, rho = _setup(p, m)
    beta = p.beta
    l = np.arange(m)
    angles = 2.0 * np.pi * l / m
    gaps = 1.0 + rho**2 - 2.0 * rho * np.cos(angles)
    blocks = np.zeros((m, 2, 2))

    s0 = _lattice_sums(m, 0, rho)
    S1 = s0.S - 1.0 / (1.0 - rho) ** 2
    T1 = s0.T - 1.0 / (1.0 - rho) ** 4
    k = 1.0 - rho**2
    blocks[0, 0, 0] = (
        -2.0 * (beta - 1.0) / rho
        - (m * m - 1) / (3.0 * rho)
        - 4.0 * (1.0 + rho) / (1.0 - rho) ** 2
        + 4.0 * S1 / rho
        - 2.0 * k * k * T1 / rho
    )
    blocks[0, 1, 1] = (m * m - 1) / 3.0 + 2.0 * k * k * T1 - 2.0 * (1.0 + rho**2) * S1

    if m > 1:
        th = angles[1:]
        D = gaps[1:]
        s2 = np.sin(th / 2.0) ** 2
        a = 1.0 / (rho * s2) + 2.0 * (1.0 + rho**2) / (rho * D) - 2.0 * k * k / (rho * D**2)
        c = -1.0 / s2 + 2.0 * (1.0 + rho**2) / D - 2.0 * k * k / D**2
        b = -4.0 * np.sqrt(rho) * k * np.sin(th) / D**2
        blocks[1:, 0, 0] = a
        blocks[1:, 0, 1] = -b
        blocks[1:, 1, 0] = b
        blocks[1:, 1, 1] = c
    return BlockCirculant(blocks, rho, angles, gaps)


def circulant_matrix(bc: BlockCirculant) -> np.ndarray:
    m = bc.m
    H = np.zeros((2 * m, 2 * m))
    for j in range(m):
        for k in range(m):
            H[2 * j : 2 * j + 2, 2 * k : 2 * k + 2] = bc.blocks[(k - j) % m]
    return H


def mode_block_dft(bc: BlockCirculant, pmode: int) -> np.ndarray:
    """M_p as the explicit sum of blocks against powers of w."""
    w = np.exp(2j * np.pi * pmode * np.arange(bc.m) / bc.m)
    return np.tensordot(w, bc.blocks, axes=(0, 0))


def mode_block(p, m, pmode, check: bool = True) -> ModeBlock:
    """Closed-form mode block, optionally cross-checked against the DFT sum."""
    p, m, rho = _setup(p, m)
    q = _check_mode(m, pmode)
    beta = p.beta
    X = (beta + m) * rho ** (m - q)
    Y = (beta + m) * rho**q
    ah = beta - m + 2.0 * q
    bh = beta + m - 2.0 * q
    mu = -(X + ah) * (Y + bh) / (2.0 * rho)
    nu = (X - ah) * (Y - bh) / 2.0
    gamma = (bh * X - ah * Y) / (2.0 * np.sqrt(rho))
    mb = ModeBlock(q, mu, nu, gamma, X, Y, ah, bh, rho, m)
    if check:
        ref = mode_block_dft(assemble_blocks(p, m), q)
        scale = max(1.0, np.abs(ref).max())
        err = np.abs(ref - mb.matrix).max()
        if err > 1e-9 * scale:
            raise InternalInconsistency(
                f"mode {q}: closed form and DFT sum differ by {err:.3e}"
            )
    return mb


def det_law(rho: float, m: int, pmode: int) -> float:
    return -4.0 * pmode**2 * (m - pmode) ** 2 / rho


def full_spectrum(p, m):
    """Sorted eigenvalues of the polar Hessian and the Cartesian zero vector.

    Returns ``(eigenvalues, zero_vector)``.  Exactly one eigenvalue should be
    below ``ZERO_THRESHOLD`` times the spectral radius in magnitude.
    """
    p, m, rho = _setup(p, m)
    ev = np.concatenate([mode_block(p, m, q).eigenvalues() for q in range(m)])
    ev.sort()
    return ev, cartesian_zero_vector(m)


def count_zero_eigenvalues(ev, threshold: float = ZERO_THRESHOLD) -> int:
    ev = np.asarray(ev)
    return int(np.sum(np.abs(ev) < threshold * np.abs(ev).max()))


def polar_zero_vector(m) -> np.ndarray:
    v = np.zeros(2 * m)
    v[1::2] = 1.0
    return v / np.linalg.norm(v)


def cartesian_zero_vector(m) -> np.ndarray:
    """Infinitesimal rotation of the polygon with vertex angles 2 pi j/m."""
    t = 2.0 * np.pi * np.arange(m) / m
    v = np.empty(2 * m)
    v[0::2] = -np.sin(t)
    v[1::2] = np.cos(t)
    return v / np.linalg.norm(v)


def dft_conjugation_residual(p, m) -> float:
    """Off-block-diagonal size of the Fourier-conjugated Hessian.

    Uses the unitary normalization ``(1/m) F* H F`` so that the diagonal
    blocks equal M_p; also adds the largest deviation of those blocks from
    the closed forms.
    """
    p, m, rho = _setup(p, m)
    bc = assemble_blocks(p, m)
    H = circulant_matrix(bc)
    j = np.arange(m)
    F = np.exp(2j * np.pi * np.outer(j, j) / m)
    FE = np.kron(F, np.eye(2))
    M = FE.conj().T @ H @ FE / m
    off = M.copy()
    dev = 0.0
    for q in range(m):
        sl = slice(2 * q, 2 * q + 2)
        dev = max(dev, float(np.abs(M[sl, sl] - mode_block(p, m, q, check=False).matrix).max()))
        off[sl, sl] = 0.0
    return float(np.abs(off).max()) + dev
