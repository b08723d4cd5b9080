"""Radial solutions of Delta u + lam |x|^(2 alpha) e^u = 0 on the unit disk.

Every radial solution has the form

    u(r) = log(Lam / lam) - 2 log(1 + Lam r^(2 beta) / (8 beta^2)),

and the Dirichlet condition u(1) = 0 becomes lam = Lam / (1 + Lam/(8 beta^2))^2.
This module solves that scalar equation, tabulates the two branches, checks
them against an ODE shooting integrator, and analyses the Fourier modes of
the linearization through the explicit fundamental solutions in the bubble
variable s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.optimize import bisect, brentq, minimize_scalar

from .exceptions import BlowupInIntegration, DomainError, InconsistentPair
from .core_params import _params

__all__ = [
    "RadialSolution",
    "BranchPoint",
    "ModeAnalysis",
    "LimitBubble",
    "lambda_of_Lambda",
    "lambda_max",
    "solve_Lambda",
    "radial_solution",
    "radial_pair",
    "shoot",
    "shooting_defect",
    "fold_lambda_by_shooting",
    "mass",
    "mass_quadrature",
    "continuation",
    "mode_boundary_value",
    "degeneracy_lambda",
    "degeneracy_lambda_by_boundary",
    "degeneracy_lambda_by_shooting",
    "linearized_boundary_value",
    "f_k1",
    "f_k2",
    "mode_ode_residual",
    "second_solution_slope",
    "limit_bubble",
    "bubble_residual",
    "kernel_residual",
    "radial_ode_residual",
]

DEGENERACY_TOL = 1e-9


def lambda_of_Lambda(Lambda, p):
    """lam = Lam / (1 + Lam/(8 beta^2))^2."""
    b = _params(p).beta
    L = np.asarray(Lambda, dtype=float)
    out = L / (1.0 + L / (8.0 * b * b)) ** 2
    return float(out) if out.ndim == 0 else out


def lambda_max(p) -> float:
    """Largest coupling with a radial solution, reached at Lam = 8 beta^2."""
    b = _params(p).beta
    return 2.0 * b * b


def solve_Lambda(p) -> list[float]:
    """Roots Lam of lambda_of_Lambda(Lam) = lam, ascending.

    Two roots below the fold, the double root 8 beta^2 at the fold (within
    relative 1e-12), none above.  Each root is bisected on its monotone
    sub-branch.
    """
    p = _params(p)
    lam = p.require_lambda()
    if lam <= 0:
        raise DomainError("lambda must be positive")
    Lf = 8.0 * p.beta**2
    lmax = lambda_max(p)
    if abs(lam - lmax) <= 1e-12 * lmax:
        return [Lf]
    if lam > lmax:
        return []
    g = lambda L: lambda_of_Lambda(L, p) - lam  # noqa: E731
    # lower root: g(0) = -lam < 0 < g(Lf)
    L1 = bisect(g, 0.0, Lf, xtol=1e-300, rtol=1e-15, maxiter=4000)
    hi = 2.0 * Lf
    while g(hi) > 0:
        hi *= 2.0
    L2 = bisect(g, Lf, hi, xtol=1e-300, rtol=1e-15, maxiter=4000)
    return [L1, L2]


@dataclass(frozen=True)
class RadialSolution:
    Lambda: float
    lam: float
    alpha: float
    branch: str  # "minimal", "singular" or "fold"

    @property
    def beta(self) -> float:
        return self.alpha + 1.0

    @property
    def _a(self) -> float:
        return self.Lambda / (8.0 * self.beta**2)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return (
            math.log(self.Lambda / self.lam)
            - 2.0 * np.log1p(self._a * r ** (2.0 * self.beta))
        )

    def du(self, r):
        r = np.asarray(r, dtype=float)
        w = self._a * r ** (2.0 * self.beta)
        return -4.0 * self.beta * w / (r * (1.0 + w))

    def d2u(self, r):
        r = np.asarray(r, dtype=float)
        b = self.beta
        w = self._a * r ** (2.0 * b)
        return -4.0 * b * w * ((2.0 * b - 1.0) - w) / (r * r * (1.0 + w) ** 2)

    def ode_residual(self, r):
        """u'' + u'/r + lam r^(2 alpha) e^u at radii r > 0."""
        r = np.asarray(r, dtype=float)
        return self.d2u(r) + self.du(r) / r + self.lam * r ** (2.0 * self.alpha) * np.exp(self(r))

    @property
    def sup_norm(self) -> float:
        return math.log(self.Lambda / self.lam)


def _branch_tag(Lambda, beta):
    Lf = 8.0 * beta * beta
    if abs(Lambda - Lf) <= 1e-12 * Lf:
        return "fold"
    return "minimal" if Lambda < Lf else "singular"


def radial_solution(Lambda: float, p) -> RadialSolution:
    """Closed-form radial solution for a root Lam of the boundary equation."""
    p = _params(p)
    lam = p.require_lambda()
    if Lambda <= 0:
        raise DomainError("Lambda must be positive")
    implied = lambda_of_Lambda(Lambda, p)
    if abs(implied - lam) > 1e-10 * lam:
        raise InconsistentPair(f"Lambda={Lambda!r} gives lambda={implied!r}, not {lam!r}")
    return RadialSolution(float(Lambda), lam, p.alpha, _branch_tag(Lambda, p.beta))


def radial_pair(p) -> list[RadialSolution]:
    return [radial_solution(L, p) for L in solve_Lambda(p)]


def _integrate(rhs, y0, r0, r1, rtol):
    sol = solve_ivp(rhs, (r0, r1), y0, method="DOP853", rtol=rtol, atol=rtol * 1e-3)
    if sol.status != 0 or not np.all(np.isfinite(sol.y[:, -1])):
        raise BlowupInIntegration(f"integration failed: {sol.message}")
    return sol.y[:, -1]


def shoot(p, u0: float, eps: float = 1e-6, rtol: float = 1e-12) -> float:
    """u(1) for the radial ODE started from u(0) = u0.

    Starts at r = eps from u0 - lam e^u0 r^(2 beta) / (4 beta^2).
    """
    p = _params(p)
    lam = p.require_lambda()
    a, b = p.alpha, p.beta
    c = lam * math.exp(u0)
    y0 = [u0 - c * eps ** (2 * b) / (4 * b * b), -c * eps ** (2 * b - 1) / (2 * b)]

    def rhs(r, y):
        e = lam * r ** (2 * a) * math.exp(y[0]) if y[0] < 700 else math.inf
        return [y[1], -y[1] / r - e]

    return float(_integrate(rhs, y0, eps, 1.0, rtol)[0])


def _shoot_unit(p, c, eps=1e-6, rtol=1e-12):
    """v(1) for v'' + v'/r + c r^(2 alpha) e^v = 0, v(0) = 0."""
    a, b = p.alpha, p.beta
    y0 = [-c * eps ** (2 * b) / (4 * b * b), -c * eps ** (2 * b - 1) / (2 * b)]

    def rhs(r, y):
        return [y[1], -y[1] / r - c * r ** (2 * a) * math.exp(y[0])]

    return float(_integrate(rhs, y0, eps, 1.0, rtol)[0])


def shooting_defect(p, u0: float) -> float:
    """u(1) via the scaling u = u0 + v(lam e^u0): log-lam-free shooting map."""
    p = _params(p)
    lam = p.require_lambda()
    c = lam * math.exp(u0)
    return u0 + _shoot_unit(p, c)


def fold_lambda_by_shooting(p) -> float:
    """Largest lam with a zero of the shooting map.

    Since u(1) = log(c/lam) + v(1; c) with c = lam e^u0, the map has a zero
    iff lam <= max_c c exp(v(1; c)); the maximum is the double zero.
    """
    p = _params(p)
    b = p.beta
    obj = lambda t: -(t + _shoot_unit(p, math.exp(t)))  # noqa: E731
    # the maximizer sits near c = 8 beta^2; bracket generously in log c
    t0 = math.log(8.0 * b * b)
    res = minimize_scalar(obj, bounds=(t0 - 3.0, t0 + 3.0), method="bounded", options={"xatol": 1e-10})
    return math.exp(-res.fun)


def mass(Lambda, p) -> float:
    """lam * integral of |x|^(2 alpha) e^u over the disk: 8 pi beta Lam/(Lam + 8 beta^2)."""
    b = _params(p).beta
    return 8.0 * math.pi * b * Lambda / (Lambda + 8.0 * b * b)


def mass_quadrature(sol: RadialSolution) -> float:
    """Adaptive quadrature of lam |x|^(2 alpha) e^u after s = r^(2 beta)."""
    b = sol.beta

    def f(s):
        return sol.lam * math.exp(float(sol(s ** (1.0 / (2.0 * b)))))

    val, _ = quad(f, 0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)
    return math.pi / b * val


@dataclass(frozen=True)
class BranchPoint:
    lam: float
    Lambda: float
    mass: float
    sup_norm: float
    branch: str

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "Lambda": self.Lambda,
            "mass": self.mass,
            "sup_norm": self.sup_norm,
            "branch": self.branch,
        }


def continuation(p, lambda_grid) -> list[BranchPoint]:
    """Both radial branches at each lam of the grid, ordered by lam then branch."""
    p = _params(p)
    lmax = lambda_max(p)
    out = []
    for lam in sorted(float(x) for x in lambda_grid):
        if not 0 < lam <= lmax * (1 + 1e-12):
            raise DomainError(f"lambda {lam!r} outside (0, {lmax!r}]")
        q = p.with_lambda(min(lam, lmax))
        for s in radial_pair(q):
            out.append(BranchPoint(lam, s.Lambda, mass(s.Lambda, q), s.sup_norm, s.branch))
    return out


# ---------------------------------------------------------------------------
# Fourier modes of the linearization


def f_k1(s, delta):
    """Regular fundamental solution ((d+1) s^d + (d-1) s^(d+2)) / (1 + s^2)."""
    s = np.asarray(s, dtype=float)
    if delta == 1.0:
        return s / (1.0 + s * s)
    return ((delta + 1.0) * s**delta + (delta - 1.0) * s ** (delta + 2.0)) / (1.0 + s * s)


def f_k2(s, delta):
    """Second solution ((d+1) s^(2-d) + (d-1) s^(-d)) / (1 + s^2), for d != 1."""
    s = np.asarray(s, dtype=float)
    return ((delta + 1.0) * s ** (2.0 - delta) + (delta - 1.0) * s ** (-delta)) / (1.0 + s * s)


@dataclass(frozen=True)
class ModeAnalysis:
    k: int
    delta: float
    s_boundary: float
    f1_boundary: float
    degenerate: bool

    def normalized(self) -> float:
        return abs(self.f1_boundary) / max(1.0, self.s_boundary**self.delta)

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "delta": self.delta,
            "s_boundary": self.s_boundary,
            "f1_boundary": self.f1_boundary,
            "degenerate": self.degenerate,
        }


def _check_k(k):
    if isinstance(k, bool) or int(k) != k or k < 0:
        raise DomainError(f"mode index must be a nonnegative integer, got {k!r}")
    return int(k)


def mode_boundary_value(k: int, Lambda: float, p) -> ModeAnalysis:
    """Regular mode-k solution evaluated at the disk boundary s_b = sqrt(Lam/(8 beta^2))."""
    p = _params(p)
    k = _check_k(k)
    if Lambda <= 0:
        raise DomainError("Lambda must be positive")
    delta = k / p.beta
    sb = math.sqrt(Lambda / (8.0 * p.beta**2))
    f1 = float(f_k1(sb, delta))
    return ModeAnalysis(k, delta, sb, f1, abs(f1) < DEGENERACY_TOL * max(1.0, sb**delta))


def degeneracy_lambda(k: int, p) -> float:
    """Coupling 2(beta^2 - k^2) where mode k of the singular branch degenerates."""
    p = _params(p)
    k = _check_k(k)
    if k >= p.beta:
        raise DomainError(f"mode {k} never degenerates when k >= alpha + 1 = {p.beta:g}")
    return 2.0 * (p.beta**2 - k * k)


def degeneracy_lambda_by_boundary(k: int, p) -> float:
    """Root in Lam >= 8 beta^2 of f_k1(s_b(Lam)) = 0, mapped to lam."""
    p = _params(p)
    k = _check_k(k)
    if k >= p.beta:
        raise DomainError(f"mode {k} never degenerates when k >= alpha + 1 = {p.beta:g}")
    Lf = 8.0 * p.beta**2
    if k == 0:
        return lambda_of_Lambda(Lf, p)
    g = lambda t: mode_boundary_value(k, Lf * math.exp(t), p).f1_boundary  # noqa: E731
    hi = 1.0
    while g(hi) > 0:
        hi *= 2.0
    t = brentq(g, 0.0, hi, xtol=1e-15, rtol=1e-15)
    return lambda_of_Lambda(Lf * math.exp(t), p)


def linearized_boundary_value(k: int, sol: RadialSolution, eps: float = 1e-6, rtol: float = 1e-11) -> float:
    """phi(1) / 1 for the regular mode-k solution of the linearized equation.

    Solves phi'' + phi'/r + (lam r^(2 alpha) e^u - k^2/r^2) phi = 0 through
    psi = phi / r^k, which satisfies psi'' + (2k+1) psi'/r + V psi = 0 with
    psi(0) = 1.
    """
    k = _check_k(k)
    a = sol.alpha
    Lam, A = sol.Lambda, sol._a
    b = sol.beta

    def V(r):
        w = A * r ** (2 * b)
        return r ** (2 * a) * Lam / (1.0 + w) ** 2

    def rhs(r, y):
        return [y[1], -(2 * k + 1) * y[1] / r - V(r) * y[0]]

    v0 = Lam * eps ** (2 * a)
    y0 = [1.0 - Lam * eps ** (2 * b) / (4 * b * (b + k)), -v0 * eps / (2 * (b + k))]
    return float(_integrate(rhs, y0, eps, 1.0, rtol)[0])


def degeneracy_lambda_by_shooting(k: int, p) -> float:
    """Coupling on the singular branch where the linearized mode-k shot hits 0 at r = 1."""
    p = _params(p)
    k = _check_k(k)
    lmax = lambda_max(p)
    if k == 0:
        return fold_lambda_by_shooting(p)

    def g(lam):
        sols = radial_pair(p.with_lambda(lam))
        return linearized_boundary_value(k, sols[-1])

    lo, hi = 1e-3 * lmax, lmax * (1 - 1e-9)
    return brentq(g, lo, hi, xtol=1e-12, rtol=1e-14)


def _mode_terms(s, delta, which):
    """s^2 f'', s f', (8 s^2/(1+s^2)^2 - delta^2) f for f = (A s^e1 + B s^e2)/(1+s^2).

    Each piece g = s^e/D is differentiated logarithmically:
    s g' = g P and s^2 g'' = g (P^2 - P - 4 s^2/D^2) with P = e - 2 s^2/D.
    """
    if which == 1 and delta == 1.0:
        pieces = [(1.0, 1.0)]
    elif which == 1:
        pieces = [(delta + 1.0, delta), (delta - 1.0, delta + 2.0)]
    else:
        pieces = [(delta + 1.0, 2.0 - delta), (delta - 1.0, -delta)]
    D = 1.0 + s * s
    q = s * s / D
    f = sf1 = s2f2 = 0.0
    for A, e in pieces:
        g = A * s**e / D
        P = e - 2.0 * q
        f = f + g
        sf1 = sf1 + g * P
        s2f2 = s2f2 + g * (P * P - P - 4.0 * q / D)
    return s2f2, sf1, (8.0 * q / D - delta**2) * f


def mode_ode_residual(k: int, p, samples: int = 400) -> float:
    """Largest relative residual of the fundamental solutions in the mode equation.

    The equation f'' + f'/s + (8/(1+s^2)^2 - delta^2/s^2) f = 0 is multiplied
    by s^2 and each sample is scaled by the sum of the three term magnitudes.
    Both solutions are checked unless delta = 1.
    """
    p = _params(p)
    delta = _check_k(k) / p.beta
    s = np.logspace(-3, 3, samples)
    worst = 0.0
    for which in (1, 2):
        if which == 2 and delta == 1.0:
            continue
        t = _mode_terms(s, delta, which)
        worst = max(worst, float(np.max(np.abs(sum(t)) / (sum(np.abs(x) for x in t) + 1e-300))))
    return worst


def second_solution_slope(delta: float, s_small: float = 1e-4) -> float:
    """Log-log slope near s = 0 of a solution independent of f_k1.

    Integrates the mode equation in t = log s from s = 1, with data
    orthogonal (in the Wronskian sense) to f_k1, down to ``s_small``.
    """
    def rhs(t, y):
        s = math.exp(t)
        return [y[1], -(8.0 * s * s / (1.0 + s * s) ** 2 - delta**2) * y[0]]

    # in t = log s the equation is f_tt + (8 s^2/(1+s^2)^2 - delta^2) f = 0
    f1 = float(f_k1(1.0, delta))
    h = 1e-6
    df1 = float((f_k1(1.0 + h, delta) - f_k1(1.0 - h, delta)) / (2 * h))
    y0 = [-df1, f1]  # Wronskian with (f1, f1_t) equals f1^2 + df1^2 > 0
    t1 = math.log(s_small)
    sol = solve_ivp(rhs, (0.0, t1), y0, method="DOP853", rtol=1e-11, atol=1e-14, dense_output=True)
    y = sol.sol(t1)
    return float(y[1] / y[0])


# ---------------------------------------------------------------------------
# limit problem on the plane


@dataclass(frozen=True)
class LimitBubble:
    """U(x) = log(Lam^2 / (1 + Lam^2 |x^beta - xi|^2 / (8 beta^2))^2)."""

    Lambda: float
    xi: complex
    alpha: float

    @property
    def beta(self) -> float:
        return self.alpha + 1.0

    @property
    def _c(self) -> float:
        return self.Lambda**2 / (8.0 * self.beta**2)

    def _G(self, r, t):
        """|x^beta - xi|^2 and its polar derivatives."""
        b = self.beta
        xr, xi_ = self.xi.real, self.xi.imag
        rb = r**b
        C = xr * np.cos(b * t) + xi_ * np.sin(b * t)
        S = xr * np.sin(b * t) - xi_ * np.cos(b * t)
        G = rb * rb - 2.0 * rb * C + abs(self.xi) ** 2
        Gr = 2.0 * b * r ** (2 * b - 1) - 2.0 * b * r ** (b - 1) * C
        Grr = 2.0 * b * (2 * b - 1) * r ** (2 * b - 2) - 2.0 * b * (b - 1) * r ** (b - 2) * C
        Gt = 2.0 * b * rb * S
        Gtt = 2.0 * b * b * rb * C
        return G, Gr, Grr, Gt, Gtt

    def __call__(self, x):
        x = np.asarray(x, dtype=complex)
        r, t = np.abs(x), np.angle(x)
        G = self._G(r, t)[0]
        return 2.0 * math.log(self.Lambda) - 2.0 * np.log1p(self._c * G)

    def laplacian(self, x):
        """U_rr + U_r/r + U_tt/r^2 from explicit polar derivatives."""
        x = np.asarray(x, dtype=complex)
        r, t = np.abs(x), np.angle(x)
        c = self._c
        G, Gr, Grr, Gt, Gtt = self._G(r, t)
        E = 1.0 + c * G
        Ur = -2.0 * c * Gr / E
        Urr = -2.0 * c * (Grr * E - c * Gr * Gr) / E**2
        Utt = -2.0 * c * (Gtt * E - c * Gt * Gt) / E**2
        return Urr + Ur / r + Utt / (r * r)

    def density(self, x):
        x = np.asarray(x, dtype=complex)
        return np.abs(x) ** (2.0 * self.alpha) * np.exp(self(x))

    def total_mass(self) -> float:
        """Integral of |x|^(2 alpha) e^U over the plane, by quadrature."""
        b = self.beta
        if self.xi == 0:
            # s = r^(2 beta): integrand becomes pi/beta * e^U
            f = lambda s: math.exp(float(self(s ** (1.0 / (2 * b)))))  # noqa: E731
            v1, _ = quad(f, 0.0, 1.0, epsabs=0.0, epsrel=1e-12, limit=200)
            v2, _ = quad(f, 1.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=200)
            return math.pi / b * (v1 + v2)
        # y = x^beta is a beta-fold cover for integer beta; dy = beta^2 |x|^(2 alpha) dx
        c = self._c
        f = lambda rho: 2.0 * math.pi * rho * self.Lambda**2 / (1.0 + c * rho * rho) ** 2  # noqa: E731
        v, _ = quad(f, 0.0, np.inf, epsabs=0.0, epsrel=1e-12)
        return v / b


def limit_bubble(Lambda: float, xi, p) -> LimitBubble:
    """Finite-mass solution of Delta U + |x|^(2 alpha) e^U = 0 on the plane.

    A nonzero center ``xi`` needs integer alpha so that x^(alpha+1) is single valued.
    """
    p = _params(p)
    if Lambda <= 0:
        raise DomainError("Lambda must be positive")
    xi = complex(xi)
    if xi != 0 and p.alpha != round(p.alpha):
        raise DomainError("a nonzero center requires integer alpha")
    return LimitBubble(float(Lambda), xi, p.alpha)


def bubble_residual(b: LimitBubble, nr: int = 60, nt: int = 64, rmax: float = 3.0) -> float:
    """Max of |Delta U + |x|^(2 alpha) e^U| on a polar sample grid avoiding x = 0."""
    r = np.geomspace(1e-2, rmax, nr)
    t = 2.0 * np.pi * (np.arange(nt) + 0.5) / nt
    x = (r[:, None] * np.exp(1j * t[None, :])).ravel()
    return float(np.max(np.abs(b.laplacian(x) + b.density(x))))


def kernel_residual(which: str, samples: int = 500, seed: int = 0) -> float:
    """Max residual of psi0, psi1 or psi2 in Delta psi + 8 (1+|z|^2)^-2 psi = 0.

    Laplacians are taken in polar form from explicit radial derivatives:
    psi0 = g0(r), psi1 = g1(r) cos t, psi2 = g1(r) sin t with
    g0 = (1 - r^2)/(1 + r^2), g1 = r/(1 + r^2).
    """
    rng = np.random.default_rng(seed)
    r = rng.uniform(0.01, 5.0, samples)
    t = rng.uniform(0.0, 2.0 * np.pi, samples)
    D = 1.0 + r * r
    V = 8.0 / D**2
    if which == "psi0":
        g = (1.0 - r * r) / D
        g1 = -4.0 * r / D**2
        g2 = (-4.0 * D + 16.0 * r * r) / D**3
        res = g2 + g1 / r + V * g
    elif which in ("psi1", "psi2"):
        g = r / D
        g1 = (1.0 - r * r) / D**2
        g2 = (-2.0 * r * D - 4.0 * r * (1.0 - r * r)) / D**3
        ang = np.cos(t) if which == "psi1" else np.sin(t)
        res = (g2 + g1 / r - g / (r * r) + V * g) * ang
    else:
        raise DomainError(f"unknown kernel function {which!r}")
    return float(np.max(np.abs(res)))


def radial_ode_residual(sol: RadialSolution, n: int = 200) -> float:
    """Max |u'' + u'/r + lam r^(2 alpha) e^u| at Chebyshev-spaced radii in (0, 1]."""
    j = np.arange(n)
    r = 0.5 * (1.0 - np.cos(np.pi * (j + 1) / n))
    return float(np.max(np.abs(sol.ode_residual(r))))
