"""Reduced vortex Hamiltonian on the unit disk and the angular functional E0.

Configurations are 1-D complex arrays ``z`` of length m.  Gradients and
Hessians are ordered by point: ``(r1, t1, r2, t2, ...)`` in polar mode and
``(x1, y1, x2, y2, ...)`` in Cartesian mode.
"""

from __future__ import annotations

import numpy as np

from .exceptions import CollidingAngles, DegenerateConfig, StepTooLarge
from .core_params import DiskParams

__all__ = [
    "GUARD",
    "as_config",
    "rotate",
    "to_polar",
    "from_polar",
    "phi_m",
    "wirtinger_gradient",
    "critical_residual",
    "grad_phi_m",
    "hessian_analytic",
    "hessian_fd",
    "polar_jacobian",
    "e0_value",
    "e0_grad",
    "e0_hessian",
    "f0",
]

# minimum pairwise distance, distance to the origin and to the unit circle
GUARD = 1e-8


def _alpha(p) -> float:
    return p.alpha if isinstance(p, DiskParams) else DiskParams(p).alpha


def as_config(z) -> np.ndarray:
    """Validate a configuration and return it as a complex array."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if z.ndim != 1 or z.size == 0:
        raise DegenerateConfig("configuration must be a non-empty 1-D list of points")
    if not np.all(np.isfinite(z)):
        raise DegenerateConfig("configuration has non-finite entries")
    mod = np.abs(z)
    if mod.min() < GUARD:
        raise DegenerateConfig("a point sits at the origin")
    if (1.0 - mod).min() < GUARD:
        raise DegenerateConfig("a point lies on or outside the unit circle")
    if z.size > 1:
        d = np.abs(z[:, None] - z[None, :])
        d[np.diag_indices(z.size)] = np.inf
        if d.min() < GUARD:
            raise DegenerateConfig("two points collide")
    return z


def rotate(z, phi: float) -> np.ndarray:
    return np.asarray(z, dtype=complex) * np.exp(1j * phi)


def to_polar(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    q = np.empty(2 * z.size)
    q[0::2] = np.abs(z)
    q[1::2] = np.angle(z)
    return q


def from_polar(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q[0::2] * np.exp(1j * q[1::2])


def phi_m(z, p) -> float:
    """Value of the Hamiltonian in its explicit complex form."""
    z = as_config(z)
    alpha = _alpha(p)
    mod2 = np.abs(z) ** 2
    value = alpha * np.sum(np.log(mod2)) + 2.0 * np.sum(np.log1p(-mod2))
    if z.size > 1:
        off = ~np.eye(z.size, dtype=bool)
        cross = np.abs(1.0 - z[:, None] * np.conj(z[None, :]))[off]
        diff = np.abs(z[:, None] - z[None, :])[off]
        value += 2.0 * np.sum(np.log(cross)) - 2.0 * np.sum(np.log(diff))
    return float(value)


def wirtinger_gradient(z, p) -> np.ndarray:
    """d Phi / d z_j for each j (complex)."""
    z = as_config(z)
    alpha = _alpha(p)
    w = 1.0 / np.conj(z)
    g = alpha / z + 2.0 * np.sum(1.0 / (z[:, None] - w[None, :]), axis=1)
    if z.size > 1:
        d = z[:, None] - z[None, :]
        np.fill_diagonal(d, np.inf)
        g -= 2.0 * np.sum(1.0 / d, axis=1)
    return g


def critical_residual(z, p) -> np.ndarray:
    """Residual of sum_{k!=j} 1/(z_j-z_k) = alpha/(2 z_j) + sum_k 1/(z_j - 1/conj z_k).

    Equals ``-wirtinger_gradient / 2``; zero exactly at critical points.
    """
    z = as_config(z)
    alpha = _alpha(p)
    w = 1.0 / np.conj(z)
    d = z[:, None] - z[None, :]
    np.fill_diagonal(d, np.inf)
    return (
        np.sum(1.0 / d, axis=1)
        - alpha / (2.0 * z)
        - np.sum(1.0 / (z[:, None] - w[None, :]), axis=1)
    )


def _polar_gradient(z, alpha):
    r = np.abs(z)
    t = np.angle(z)
    gr = 2.0 * alpha / r - 4.0 * r / (1.0 - r * r)
    gt = np.zeros_like(r)
    if z.size > 1:
        rj, rk = r[:, None], r[None, :]
        dt = t[:, None] - t[None, :]
        c, s = np.cos(dt), np.sin(dt)
        d1 = 1.0 + rj * rj * rk * rk - 2.0 * rj * rk * c
        d2 = rj * rj + rk * rk - 2.0 * rj * rk * c
        np.fill_diagonal(d2, 1.0)
        term_r = (2.0 * rj * rk * rk - 2.0 * rk * c) / d1 - (2.0 * rj - 2.0 * rk * c) / d2
        term_t = rk * s * (1.0 / d1 - 1.0 / d2)
        np.fill_diagonal(term_r, 0.0)
        np.fill_diagonal(term_t, 0.0)
        gr += 2.0 * term_r.sum(axis=1)
        gt = 4.0 * r * term_t.sum(axis=1)
    out = np.empty(2 * z.size)
    out[0::2] = gr
    out[1::2] = gt
    return out


def grad_phi_m(z, p, mode: str = "polar") -> np.ndarray:
    """Gradient of the Hamiltonian.

    ``mode="polar"`` returns (dPhi/dr_j, dPhi/dtheta_j) from the real polar
    formulas; ``mode="complex"`` returns Cartesian (dPhi/dx_j, dPhi/dy_j)
    built from the Wirtinger derivative, dx - i dy = 2 d/dz.
    """
    z = as_config(z)
    if mode == "polar":
        return _polar_gradient(z, _alpha(p))
    if mode in ("complex", "cartesian"):
        g = wirtinger_gradient(z, p)
        out = np.empty(2 * z.size)
        out[0::2] = 2.0 * g.real
        out[1::2] = -2.0 * g.imag
        return out
    raise ValueError(f"unknown gradient mode {mode!r}")


def polar_jacobian(z) -> np.ndarray:
    """d(x, y)/d(r, theta), block diagonal."""
    z = np.asarray(z, dtype=complex)
    m = z.size
    r, t = np.abs(z), np.angle(z)
    J = np.zeros((2 * m, 2 * m))
    for j in range(m):
        c, s = np.cos(t[j]), np.sin(t[j])
        J[2 * j : 2 * j + 2, 2 * j : 2 * j + 2] = [[c, -r[j] * s], [s, r[j] * c]]
    return J


def hessian_analytic(z, p, coords: str = "polar") -> np.ndarray:
    """Exact Hessian from second Wirtinger derivatives.

    With A_jk = d2Phi/dz_j dz_k and B_jk = d2Phi/dz_j dzbar_k:
    xx = 2Re(A+B), yy = 2Re(B-A), xy = 2Im(B-A), yx = -2Im(A+B).
    """
    z = as_config(z)
    alpha = _alpha(p)
    m = z.size
    w = 1.0 / np.conj(z)
    zw = z[:, None] - w[None, :]
    B = -2.0 * w[None, :] ** 2 / zw**2
    A = np.zeros((m, m), dtype=complex)
    if m > 1:
        d = z[:, None] - z[None, :]
        np.fill_diagonal(d, 1.0)
        A = -2.0 / d**2
        np.fill_diagonal(A, 0.0)
    diag = -alpha / z**2 - 2.0 * np.sum(1.0 / zw**2, axis=1) - np.sum(A, axis=1)
    A[np.diag_indices(m)] = diag
    H = np.empty((2 * m, 2 * m))
    H[0::2, 0::2] = 2.0 * (A + B).real
    H[1::2, 1::2] = 2.0 * (B - A).real
    H[0::2, 1::2] = 2.0 * (B - A).imag
    H[1::2, 0::2] = -2.0 * (A + B).imag
    if coords in ("cartesian", "complex"):
        return H
    if coords != "polar":
        raise ValueError(f"unknown coordinates {coords!r}")
    J = polar_jacobian(z)
    Hp = J.T @ H @ J
    g = _polar_gradient(z, alpha)
    r = np.abs(z)
    for j in range(m):
        # second-derivative terms of the coordinate map
        Hp[2 * j, 2 * j + 1] += g[2 * j + 1] / r[j]
        Hp[2 * j + 1, 2 * j] += g[2 * j + 1] / r[j]
        Hp[2 * j + 1, 2 * j + 1] -= r[j] * g[2 * j]
    return 0.5 * (Hp + Hp.T)


def hessian_fd(z, p, step: float = 1e-5, method: str = "gradient") -> np.ndarray:
    """Finite-difference Hessian in polar coordinates, symmetrized.

    ``method="gradient"`` takes central differences of the polar gradient;
    ``method="value"`` takes central second differences of ``phi_m``.  The
    latter loses about ``eps*|Phi|/step**2`` to cancellation.
    """
    z = as_config(z)
    if step <= 0:
        raise ValueError("step must be positive")
    q0 = to_polar(z)
    n = q0.size
    r = q0[0::2]
    if r.min() - step < GUARD or 1.0 - (r.max() + step) < GUARD:
        raise StepTooLarge(f"step {step:g} pushes a probe point out of the punctured disk")

    probe = from_polar
    H = np.empty((n, n))
    try:
        if method == "gradient":
            for i in range(n):
                e = np.zeros(n)
                e[i] = step
                gp = grad_phi_m(probe(q0 + e), p, "polar")
                gm = grad_phi_m(probe(q0 - e), p, "polar")
                H[:, i] = (gp - gm) / (2.0 * step)
        elif method == "value":
            f = lambda q: phi_m(probe(q), p)  # noqa: E731
            f0_ = f(q0)
            for i in range(n):
                ei = np.zeros(n)
                ei[i] = step
                H[i, i] = (f(q0 + ei) - 2.0 * f0_ + f(q0 - ei)) / step**2
                for j in range(i):
                    ej = np.zeros(n)
                    ej[j] = step
                    H[i, j] = (
                        f(q0 + ei + ej) - f(q0 + ei - ej) - f(q0 - ei + ej) + f(q0 - ei - ej)
                    ) / (4.0 * step**2)
                    H[j, i] = H[i, j]
        else:
            raise ValueError(f"unknown method {method!r}")
    except DegenerateConfig as exc:
        raise StepTooLarge(f"probe left the admissible set: {exc}") from exc
    return 0.5 * (H + H.T)


# ---------------------------------------------------------------------------
# angular functional E0(phi) = sum_{j<k} csc^2((phi_j - phi_k)/2)


def _angle_differences(a):
    a = np.asarray(a, dtype=float)
    d = a[:, None] - a[None, :]
    # reduce to (-pi, pi]
    d = np.pi - np.mod(np.pi - d, 2.0 * np.pi)
    off = ~np.eye(a.size, dtype=bool)
    if a.size > 1 and np.min(np.abs(np.sin(d[off] / 2.0))) < GUARD:
        raise CollidingAngles("angles coincide modulo 2 pi")
    return d, off


def f0(phi):
    """(2 + cos phi) / (2 sin^4(phi/2)), the second derivative of csc^2(phi/2)."""
    phi = np.pi - np.mod(np.pi - np.asarray(phi, dtype=float), 2.0 * np.pi)
    return (2.0 + np.cos(phi)) / (2.0 * np.sin(phi / 2.0) ** 4)


def e0_value(a) -> float:
    d, off = _angle_differences(a)
    return float(0.5 * np.sum(1.0 / np.sin(d[off] / 2.0) ** 2))


def e0_grad(a) -> np.ndarray:
    d, off = _angle_differences(a)
    s = np.sin(d / 2.0)
    np.fill_diagonal(s, 1.0)
    t = -np.cos(d / 2.0) / s**3
    t[~off] = 0.0
    return t.sum(axis=1)


def e0_hessian(a) -> np.ndarray:
    d, off = _angle_differences(a)
    F = np.zeros_like(d)
    F[off] = f0(d[off])
    H = -F
    H[np.diag_indices(d.shape[0])] = F.sum(axis=1)
    return H
