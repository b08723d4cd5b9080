"""Finite-difference Newton solver for Delta u + lam |x|^(2 alpha) e^u = 0 on
the unit disk with u = 0 on the boundary.

Discretization
--------------
Unknowns are the origin value ``u_c`` and the values on rings ``r_0 < ... <
r_{Nr-2}``; the ring ``r_{Nr-1} = 1`` carries the boundary value 0.  A grid
may cover a sector of angle ``2 pi / sector_m`` with periodic identification.

Every ring equation is multiplied by r^2, so that with t = log r it reads

    u_tt + u_thth + lam r^(2 beta) e^u = 0,

discretized by the three-point second difference on the (nonuniform) t
nodes and the periodic three-point difference in theta.  Ring 0 uses the
flux form (1/r)(r u_r)_r with the origin as inner neighbour, and the origin
row is 4 (mean of ring 0 - u_c) = 0.  This scaling keeps the residual well
conditioned and makes the scheme exactly equivariant under x -> x^m on
pulled-back grids away from ring 0.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spl
from scipy.interpolate import RectBivariateSpline

from .exceptions import BranchLost, DomainError, NewtonDiverged, SingularJacobian
from .core_params import DiskParams, _params
from .radial_branches import degeneracy_lambda, f_k1, radial_pair

__all__ = [
    "PolarGrid",
    "Field2D",
    "Peak",
    "PeakReport",
    "BranchEntry",
    "MonotonicityVerdict",
    "residual",
    "residual_direct",
    "newton_solve",
    "radial_field",
    "mode_profile",
    "seed_from_bifurcation",
    "continue_in_lambda",
    "peak_report",
    "mass_2d",
    "power_map_field",
    "power_map_check",
    "angular_monotonicity_check",
]

PIVOT_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class PolarGrid:
    """Radial nodes ``r`` (last node 1) times ``Nt`` angles on a sector."""

    r: np.ndarray
    Nt: int
    sector_m: int = 1
    t: np.ndarray | None = None  # log r; stored so pulled-back grids scale exactly

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        object.__setattr__(self, "r", r)
        t = np.log(r) if self.t is None else np.asarray(self.t, dtype=float)
        if t.shape != r.shape:
            raise DomainError("log-radius array does not match the radial nodes")
        object.__setattr__(self, "t", t)
        if r.size < 16 or self.Nt < 16:
            raise DomainError("grids need at least 16 radial and 16 angular nodes")
        if r[0] <= 0 or r[-1] != 1.0 or np.any(np.diff(r) <= 0):
            raise DomainError("radial nodes must increase strictly in (0, 1] and end at 1")
        if int(self.sector_m) != self.sector_m or self.sector_m < 1:
            raise DomainError("sector_m must be a positive integer")

    @classmethod
    def uniform(cls, Nr: int, Nt: int, sector_m: int = 1) -> PolarGrid:
        return cls(np.arange(1, Nr + 1) / Nr, Nt, sector_m)

    @classmethod
    def graded(
        cls,
        Nr: int,
        Nt: int,
        sector_m: int = 1,
        power: float = 2.0,
        peak: float | None = None,
        width: float = 0.1,
        gain: float = 1.0,
    ) -> PolarGrid:
        """Nodes equidistributing the density (1/power) r^(1/power - 1) plus an
        optional Gaussian bump of relative weight ``gain`` at ``peak``.

        ``power > 1`` clusters nodes at the origin (r_0 ~ Nr^-power).
        """
        if power < 1:
            raise DomainError("power must be at least 1")
        xi = np.arange(1, Nr + 1) / Nr
        if peak is None:
            r = xi**power
        else:
            x = np.linspace(0.0, 1.0, 20001)
            # cumulative of the power part is x^(1/power); add the bump's cumulative
            bump = np.exp(-(((x - peak) / width) ** 2))
            cb = np.concatenate([[0.0], np.cumsum(0.5 * (bump[1:] + bump[:-1]) * np.diff(x))])
            cum = x ** (1.0 / power) + gain * cb / cb[-1]
            r = np.interp(xi, cum / cum[-1], x)
        r[-1] = 1.0
        return cls(r, Nt, sector_m)

    @property
    def Nr(self) -> int:
        return self.r.size

    @property
    def dtheta(self) -> float:
        return 2.0 * np.pi / (self.sector_m * self.Nt)

    @property
    def theta(self) -> np.ndarray:
        return np.arange(self.Nt) * self.dtheta

    @property
    def n(self) -> int:
        return 1 + (self.Nr - 1) * self.Nt

    def key(self):
        return (self.r.tobytes(), self.t.tobytes(), int(self.Nt), int(self.sector_m))

    def node_radius(self) -> np.ndarray:
        """Radius of every unknown, origin first."""
        return np.concatenate([[0.0], np.repeat(self.r[:-1], self.Nt)])

    def node_theta(self) -> np.ndarray:
        return np.concatenate([[0.0], np.tile(self.theta, self.Nr - 1)])


@lru_cache(maxsize=32)
def _laplacian(key):
    r = np.frombuffer(key[0])
    t = np.frombuffer(key[1])
    nt, sm = key[2], key[3]
    nr = r.size
    n = 1 + (nr - 1) * nt
    dth = 2.0 * np.pi / (sm * nt)
    h = np.diff(t)
    I = np.repeat(np.arange(nr - 1), nt)
    J = np.tile(np.arange(nt), nr - 1)
    k = 1 + I * nt + J
    rows = [np.array([0]), np.zeros(nt, int)]
    cols = [np.array([0]), 1 + np.arange(nt)]
    vals = [np.array([-4.0]), np.full(nt, 4.0 / nt)]
    cp = np.zeros(nr - 1)
    cm = np.zeros(nr - 1)
    # ring 0: flux form with the origin, times r_0^2
    rp, rm = 0.5 * (r[0] + r[1]), 0.5 * r[0]
    vol = r[0] * (rp - rm)
    cp[0] = rp / (r[1] - r[0]) / vol * r[0] ** 2
    cm[0] = rm / r[0] / vol * r[0] ** 2
    hp = h[1:]
    hm = h[:-1]
    cp[1:] = 2.0 / (hp * (hp + hm))
    cm[1:] = 2.0 / (hm * (hp + hm))
    ca = 1.0 / dth**2
    CP, CM = cp[I], cm[I]
    rows += [k, k, k, k]
    cols += [k, np.where(I == 0, 0, k - nt), 1 + I * nt + (J + 1) % nt, 1 + I * nt + (J - 1) % nt]
    vals += [-(CP + CM + 2.0 * ca), CM, np.full(k.size, ca), np.full(k.size, ca)]
    inner = I + 1 < nr - 1
    rows.append(k[inner])
    cols.append(k[inner] + nt)
    vals.append(CP[inner])
    L = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    )
    return L


@lru_cache(maxsize=32)
def _even_reduction(key):
    """Prolongation E and row selection for fields with u(theta) = u(-theta)."""
    r = np.frombuffer(key[0])
    nt = key[2]
    if nt % 2:
        raise DomainError("the even-symmetry reduction needs an even number of angles")
    nr = r.size
    n = 1 + (nr - 1) * nt
    half = nt // 2 + 1
    j = np.tile(np.arange(nt), nr - 1)
    i = np.repeat(np.arange(nr - 1), nt)
    jred = np.minimum(j, (nt - j) % nt)
    red = np.concatenate([[0], 1 + i * half + jred])
    nred = 1 + (nr - 1) * half
    E = sp.csr_matrix((np.ones(n), (np.arange(n), red)), shape=(n, nred))
    sel = np.concatenate([[0], (1 + np.arange(nr - 1)[:, None] * nt + np.arange(half)[None, :]).ravel()])
    return E, sel


@dataclass(eq=False)
class Field2D:
    """Grid values (Nr x Nt, boundary row zero), origin value and parameters."""

    grid: PolarGrid
    values: np.ndarray
    params: DiskParams
    origin: float = 0.0
    residual_norm: float = float("nan")
    iterations: int = 0

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.Nr, self.grid.Nt):
            raise DomainError(f"values have shape {v.shape}, grid is {(self.grid.Nr, self.grid.Nt)}")
        v[-1] = 0.0
        self.values = v

    def vector(self) -> np.ndarray:
        return np.concatenate([[self.origin], self.values[:-1].ravel()])

    @classmethod
    def from_vector(cls, grid: PolarGrid, x, params, **kw) -> Field2D:
        vals = np.zeros((grid.Nr, grid.Nt))
        vals[:-1] = np.asarray(x[1:]).reshape(grid.Nr - 1, grid.Nt)
        return cls(grid, vals, params, float(x[0]), **kw)

    @property
    def lam(self) -> float:
        return self.params.require_lambda()

    def unfold(self) -> Field2D:
        """The same field on the full disk (sector_m = 1)."""
        m = self.grid.sector_m
        if m == 1:
            return self
        g = PolarGrid(self.grid.r, self.grid.Nt * m, 1, self.grid.t)
        return replace(self, grid=g, values=np.tile(self.values, (1, m)))

    def rotate(self, steps: int) -> Field2D:
        """Rotate by ``steps`` angular grid steps."""
        return replace(self, values=np.roll(self.values, steps, axis=1))

    def max(self) -> float:
        return float(max(self.origin, self.values.max()))

    def to_csv(self, dest=None) -> str:
        """CSV with header r,theta,u: the origin first, then ring by ring."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "theta", "u"])
        w.writerow(["0.0", "0.0", _fmt(self.origin)])
        th = self.grid.theta
        for i, ri in enumerate(self.grid.r):
            for j, tj in enumerate(th):
                w.writerow([_fmt(ri), _fmt(tj), _fmt(self.values[i, j])])
        text = buf.getvalue()
        if dest is not None:
            with open(dest, "w", newline="") as fh:
                fh.write(text)
        return text


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _scaled_weight(grid, beta):
    return grid.node_radius() ** (2.0 * beta)


def _F(x, grid, p):
    L = _laplacian(grid.key())
    return L @ x + p.lam * _scaled_weight(grid, p.beta) * np.exp(x)


def residual(f: Field2D) -> np.ndarray:
    """Scaled discrete residual of a field, one entry per unknown."""
    return _F(f.vector(), f.grid, f.params)


def residual_direct(f: Field2D) -> float:
    """Max-norm of the scaled residual evaluated stencil by stencil on the
    value array, without the assembled matrix."""
    g, p = f.grid, f.params
    r = g.r
    h = np.diff(g.t)
    U = f.values
    ring0 = U[0]
    res = [abs(4.0 * (ring0.mean() - f.origin))]
    ang = (np.roll(U, -1, axis=1) - 2.0 * U + np.roll(U, 1, axis=1)) / g.dtheta**2
    rp, rm = 0.5 * (r[0] + r[1]), 0.5 * r[0]
    flux = (rp * (U[1] - U[0]) / (r[1] - r[0]) - rm * (U[0] - f.origin) / r[0]) / (r[0] * (rp - rm))
    nl = p.lam * r[:, None] ** (2.0 * p.beta) * np.exp(U)
    res.append(np.abs(r[0] ** 2 * flux + ang[0] + nl[0]).max())
    hp = h[1:, None]
    hm = h[:-1, None]
    utt = 2.0 * (hm * U[2:] - (hp + hm) * U[1:-1] + hp * U[:-2]) / (hp * hm * (hp + hm))
    res.append(np.abs(utt + ang[1:-1] + nl[1:-1]).max())
    return float(max(res))


def _roundoff_floor(L, W, x):
    """Size of the rounding error in one residual evaluation at x."""
    return 16.0 * np.finfo(float).eps * float(np.max(abs(L) @ np.abs(x) + W * np.exp(x)))


def _factor(J):
    try:
        lu = spl.splu(J.tocsc())
    except RuntimeError as exc:
        raise SingularJacobian(f"Jacobian factorization failed: {exc}", pivot=0.0) from exc
    d = np.abs(lu.U.diagonal())
    if not np.all(np.isfinite(d)) or d.min() < PIVOT_TOL * d.max():
        piv = float(d.min() / d.max()) if np.all(np.isfinite(d)) else float("nan")
        raise SingularJacobian(f"near-zero pivot {piv:.3e} (relative)", pivot=piv)
    return lu


def newton_solve(
    p,
    grid: PolarGrid,
    init: Field2D,
    tol: float = 1e-10,
    max_iter: int = 40,
    symmetry: str | None = None,
) -> Field2D:
    """Damped Newton on the scaled residual.

    Converged once the max-norm drops below ``tol`` or below the round-off
    floor of the residual evaluation, whichever is larger; on fine grids the
    floor can exceed a fixed absolute tolerance.

    ``symmetry="even"`` restricts to fields with u(theta) = u(-theta), which
    removes the rotational near-null mode of non-radial solutions.
    """
    p = _params(p)
    p.require_lambda()
    if init.grid.key() != grid.key():
        raise DomainError("initial field lives on a different grid")
    L = _laplacian(grid.key())
    W = p.lam * _scaled_weight(grid, p.beta)
    if symmetry == "even":
        E, sel = _even_reduction(grid.key())
        counts = np.asarray(E.sum(axis=0)).ravel()
        y = (E.T @ init.vector()) / counts
        expand = lambda y: E @ y  # noqa: E731
    elif symmetry is None:
        E, sel = None, None
        y = init.vector().copy()
        expand = lambda y: y  # noqa: E731
    else:
        raise DomainError(f"unknown symmetry {symmetry!r}")

    def F(y):
        x = expand(y)
        v = L @ x + W * np.exp(x)
        return v if sel is None else v[sel]

    Fy = F(y)
    nf = float(np.abs(Fy).max())
    it = 0
    while nf >= max(tol, _roundoff_floor(L, W, expand(y))):
        if it >= max_iter or not np.isfinite(nf):
            raise NewtonDiverged(f"no convergence after {it} iterations, residual {nf:.3e}")
        x = expand(y)
        J = L + sp.diags(W * np.exp(x))
        if sel is not None:
            J = J[sel] @ E
        d = _factor(J).solve(-Fy)
        s = 1.0
        while True:
            yn = y + s * d
            Fn = F(yn)
            nn = float(np.abs(Fn).max())
            if np.isfinite(nn) and nn < (1.0 - 1e-4 * s) * nf:
                break
            s *= 0.5
            if s < 1.0 / 1024:
                raise NewtonDiverged(f"line search failed at iteration {it}, residual {nf:.3e}")
        y, Fy, nf = yn, Fn, nn
        it += 1
    return Field2D.from_vector(grid, expand(y), p, residual_norm=nf, iterations=it)


def radial_field(p, grid: PolarGrid, branch: str = "minimal") -> Field2D:
    """Closed-form radial solution sampled on the grid."""
    p = _params(p)
    sols = {s.branch: s for s in radial_pair(p)}
    if branch not in sols:
        raise DomainError(f"no {branch} radial solution at lambda={p.lam!r}")
    s = sols[branch]
    vals = np.repeat(s(grid.r)[:, None], grid.Nt, axis=1)
    return Field2D(grid, vals, p, float(s(0.0)))


def mode_profile(grid: PolarGrid, Lambda: float, alpha: float, k: int) -> np.ndarray:
    """f_k1(s(r)) cos(k theta) on the unknowns, s = sqrt(Lam/(8 beta^2)) r^beta,
    scaled to unit max-norm."""
    beta = alpha + 1.0
    rr, th = grid.node_radius(), grid.node_theta()
    s = math.sqrt(Lambda / (8.0 * beta * beta)) * rr**beta
    phi = f_k1(s, k / beta) * np.cos(k * th)
    return phi / np.abs(phi).max()


def seed_from_bifurcation(
    p,
    grid: PolarGrid,
    lam_target: float,
    k: int = 1,
    sign: float = 1.0,
    da: float = 0.05,
    max_amplitude: float = 10.0,
    tol: float = 1e-10,
) -> Field2D:
    """Enter the branch that bifurcates from the singular radial branch in mode k.

    Starting at the degenerate coupling 2(beta^2 - k^2), the amplitude of the
    mode-k profile is stepped by ``da`` while lam is solved for (bordered
    Newton, even symmetry) until lam drops to ``lam_target``; a final Newton
    solve at exactly ``lam_target`` follows.  ``sign`` picks the peak at
    theta = 0 (positive) or at theta = pi/k.
    """
    p = _params(p)
    lam_k = degeneracy_lambda(k, p)
    if not 0 < lam_target < lam_k:
        raise DomainError(f"lam_target must lie in (0, {lam_k!r})")
    base = radial_field(p.with_lambda(lam_k), grid, "singular")
    Lk = max(s.Lambda for s in radial_pair(p.with_lambda(lam_k)))
    phi = mode_profile(grid, Lk, p.alpha, k)
    L = _laplacian(grid.key())
    E, sel = _even_reduction(grid.key())
    counts = np.asarray(E.sum(axis=0)).ravel()
    wb = _scaled_weight(grid, p.beta)
    proj = (E.T @ phi) / (phi @ phi)
    y = np.concatenate([(E.T @ base.vector()) / counts, [lam_k]])
    a = 0.0
    prev = None
    while True:
        a += da
        if a > max_amplitude:
            raise BranchLost(f"amplitude march passed {max_amplitude} before lam reached {lam_target}")
        target = sign * a
        z = y.copy()
        for _ in range(60):
            u = E @ z[:-1]
            lam = z[-1]
            R = (L @ u + lam * wb * np.exp(u))[sel]
            g = proj @ z[:-1] - target
            nf = max(float(np.abs(R).max()), abs(g))
            if nf < max(tol, _roundoff_floor(L, lam * wb, u)):
                break
            J = (L + sp.diags(lam * wb * np.exp(u)))[sel] @ E
            col = sp.csr_matrix((wb * np.exp(u))[sel][:, None])
            A = sp.bmat([[J, col], [sp.csr_matrix(proj[None, :]), None]]).tocsc()
            dz = spl.spsolve(A, -np.concatenate([R, [g]]))
            # cap the lam and u updates: the bordered system is nearly
            # singular close to the symmetric branch
            sc = min(1.0, 0.2 / max(abs(dz[-1]), 1e-300), 1.0 / max(np.abs(dz[:-1]).max(), 1e-300))
            z = z + sc * dz
        else:
            raise BranchLost(f"bordered Newton failed at amplitude {a:.3g}")
        prev, y = y, z
        if y[-1] <= lam_target:
            break
    # warm start from whichever march point is closer to the target coupling
    start = y if prev is None or abs(y[-1] - lam_target) <= abs(prev[-1] - lam_target) else prev
    init = Field2D.from_vector(grid, E @ start[:-1], p.with_lambda(lam_target))
    return newton_solve(p.with_lambda(lam_target), grid, init, tol=tol, symmetry="even")


@dataclass(frozen=True)
class Peak:
    r: float
    theta: float
    height: float


@dataclass
class PeakReport:
    peaks: list
    mass: float
    residual_norm: float

    def to_dict(self) -> dict:
        return {
            "peaks": [{"r": q.r, "theta": q.theta, "height": q.height} for q in self.peaks],
            "mass": self.mass,
            "residual_norm": self.residual_norm,
        }


@dataclass
class BranchEntry:
    lam: float
    field: Field2D
    report: PeakReport


def _refine_peak(f: Field2D, i: int, j: int) -> Peak:
    """Least-squares quadratic in (r, theta) through the 3x3 neighbourhood."""
    g = f.grid
    r, th, U = g.r, g.theta, f.values
    nt = g.Nt
    ri = r[[i - 1, i, i + 1]] if i > 0 else np.array([0.0, r[0], r[1]])
    dr = ri - r[i]
    dt = np.array([-g.dtheta, 0.0, g.dtheta])
    rows, rhs = [], []
    for a in range(3):
        for b in range(3):
            if i == 0 and a == 0:
                val = f.origin
            else:
                val = U[i - 1 + a, (j - 1 + b) % nt]
            x, y = dr[a], dt[b]
            rows.append([1.0, x, y, x * x, x * y, y * y])
            rhs.append(val)
    c = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)[0]
    H = np.array([[2 * c[3], c[4]], [c[4], 2 * c[5]]])
    try:
        off = np.linalg.solve(H, -c[1:3])
    except np.linalg.LinAlgError:
        off = np.zeros(2)
    if np.all(np.linalg.eigvalsh(H) < 0) and abs(off[0]) <= np.abs(dr).max() and abs(off[1]) <= g.dtheta:
        x, y = off
        h = c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y
        return Peak(float(r[i] + x), _wrap(th[j] + y), float(h))
    return Peak(float(r[i]), float(th[j]), float(U[i, j]))


def _wrap(theta) -> float:
    t = float(np.mod(theta, 2.0 * np.pi))
    return 0.0 if 2.0 * np.pi - t < 1e-12 else t


def _local_maxima(f: Field2D) -> list[Peak]:
    U = f.values
    nr = f.grid.Nr
    peaks = []
    # for a radial maximum the origin row makes u_c equal ring 0 to round-off
    if f.origin >= U[0].max() - 1e-12 * (1.0 + abs(f.origin)):
        peaks.append(Peak(0.0, 0.0, float(f.origin)))
    up = np.vstack([U[1:], np.full((1, U.shape[1]), -np.inf)])
    down = np.vstack([np.full((1, U.shape[1]), f.origin), U[:-1]])
    left, right = np.roll(U, 1, axis=1), np.roll(U, -1, axis=1)
    mask = (U > up) & (U > down) & (U > left) & (U > right)
    mask[-1] = False
    for i, j in zip(*np.nonzero(mask)):
        if i < nr - 1:
            peaks.append(_refine_peak(f, int(i), int(j)))
    return peaks


def mass_2d(f: Field2D) -> float:
    """lam * integral of |x|^(2 alpha) e^u over the disk.

    e^u is linear in r on each radial cell (origin included) and the factor
    r^(2 alpha + 1) is integrated exactly against it; the angular sum is the
    periodic rectangle rule.
    """
    g, p = f.grid, f.params
    q = 2.0 * p.alpha + 2.0
    r = np.concatenate([[0.0], g.r])
    e = np.exp(np.vstack([np.full((1, g.Nt), f.origin), f.values]))
    ra, rb = r[:-1], r[1:]
    M0 = (rb**q - ra**q) / q
    M1 = (rb ** (q + 1) - ra ** (q + 1)) / (q + 1)
    h = rb - ra
    wa = (rb * M0 - M1) / h
    wb = (M1 - ra * M0) / h
    cell = wa[:, None] * e[:-1] + wb[:, None] * e[1:]
    return float(p.lam * g.sector_m * g.dtheta * cell.sum())


def peak_report(f: Field2D) -> PeakReport:
    """Local maxima of the unfolded field, sorted by angle, with mass and residual."""
    full = f.unfold()
    peaks = sorted(_local_maxima(full), key=lambda q: (q.theta, q.r))
    return PeakReport(peaks, mass_2d(f), residual_direct(f))


def continue_in_lambda(
    p,
    lam_from: float,
    lam_to: float,
    steps: int,
    branch_init: Field2D,
    symmetry: str | None = "even",
    tol: float = 1e-10,
) -> list[BranchEntry]:
    """Natural-parameter continuation on a geometric lam schedule.

    Each solve starts from the previous field.  A failed step is retried once
    through the geometric midpoint; a second failure raises BranchLost with
    the entries computed so far.
    """
    p = _params(p)
    if not lam_from > lam_to > 0:
        raise DomainError("need lam_from > lam_to > 0")
    if steps < 1:
        raise DomainError("steps must be positive")
    grid = branch_init.grid
    sched = lam_from * (lam_to / lam_from) ** (np.arange(steps + 1) / steps)
    out: list[BranchEntry] = []
    cur = branch_init

    def solve(lam, start):
        q = p.with_lambda(float(lam))
        init = replace(start, params=q)
        return newton_solve(q, grid, init, tol=tol, symmetry=symmetry)

    for lam in sched:
        try:
            cur = solve(lam, cur)
        except (SingularJacobian, NewtonDiverged) as first:
            prev_lam = out[-1].lam if out else lam_from
            mid = math.sqrt(prev_lam * lam)
            try:
                cur = solve(lam, solve(mid, cur))
            except (SingularJacobian, NewtonDiverged) as exc:
                raise BranchLost(
                    f"continuation lost the branch near lambda={lam:.6g}: {exc}", partial=out
                ) from first
        out.append(BranchEntry(float(lam), cur, peak_report(cur)))
    return out


# ---------------------------------------------------------------------------
# power map x -> x^m


def power_map_field(f: Field2D, m: int, target: PolarGrid | None = None) -> Field2D:
    """v(x) = u(x^m) as a field for exponent m(alpha+1) - 1 and coupling m^2 lam.

    Without ``target`` the pulled-back grid (radii r^(1/m), sector m times
    narrower) is used and v takes the values of u node for node.  Otherwise
    u is interpolated bicubically in (log r, theta).
    """
    if int(m) != m or m < 1:
        raise DomainError("m must be a positive integer")
    m = int(m)
    p = f.params
    q = DiskParams(m * p.beta - 1.0, m * m * p.require_lambda())
    g = f.grid
    if target is None:
        rv = g.r ** (1.0 / m)
        rv[-1] = 1.0
        tg = PolarGrid(rv, g.Nt, g.sector_m * m, g.t / m)
        return Field2D(tg, f.values.copy(), q, f.origin)
    full = f.unfold()
    fg = full.grid
    th = fg.theta
    # periodic padding for the spline in theta
    pad = 3
    thp = np.concatenate([th[-pad:] - 2 * np.pi, th, th[:pad] + 2 * np.pi])
    Up = np.concatenate([full.values[:, -pad:], full.values, full.values[:, :pad]], axis=1)
    spline = RectBivariateSpline(np.log(fg.r), thp, Up, kx=3, ky=3)
    R = target.r[:, None] ** m
    T = np.mod(m * target.theta[None, :], 2.0 * np.pi) + 0.0 * R
    vals = spline.ev(np.log(np.broadcast_to(R, T.shape)), T)
    return Field2D(target, vals, q, f.origin)


def power_map_check(f: Field2D, m: int, target: PolarGrid | None = None) -> float:
    """Max-norm residual of the mapped field in its own discrete equation."""
    v = power_map_field(f, m, target)
    return float(np.abs(residual(v)).max())


@dataclass
class MonotonicityVerdict:
    verdict: str  # "pass", "fail" or "monotone-trivial"
    ring_radius: float
    violations: int
    arcs: int


def angular_monotonicity_check(f: Field2D, m: int, r0: float, flat_tol: float = 1e-9) -> MonotonicityVerdict:
    """Check u(r0, .) decreases on (2k pi/m, (2k+1) pi/m) and increases on the
    complementary arcs, on the ring nearest r0.

    One wrong-signed difference touching each arc endpoint is tolerated.
    """
    full = f.unfold()
    g = full.grid
    i = int(np.argmin(np.abs(g.r - r0)))
    u = full.values[i]
    if u.max() - u.min() <= flat_tol * (1.0 + np.abs(u).max()):
        return MonotonicityVerdict("monotone-trivial", float(g.r[i]), 0, 2 * m)
    th = g.theta
    du = np.roll(u, -1) - u  # difference on [th_j, th_j+1]
    mid = th + 0.5 * g.dtheta
    arc = np.floor(mid / (np.pi / m)).astype(int) % (2 * m)
    expect = np.where(arc % 2 == 0, -1.0, 1.0)
    # distance of each difference interval from the nearest arc endpoint
    edge = np.abs(mid / (np.pi / m) - np.round(mid / (np.pi / m))) * (np.pi / m) <= g.dtheta
    bad = (np.sign(du) != expect) & (du != 0)
    violations = int(np.sum(bad & ~edge))
    return MonotonicityVerdict("pass" if violations == 0 else "fail", float(g.r[i]), violations, 2 * m)
