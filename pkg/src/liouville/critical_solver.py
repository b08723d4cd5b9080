"""Critical points of the Hamiltonian: damped Newton, multistart census, and
classification modulo rotation."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect, linear_sum_assignment, minimize_scalar

from .exceptions import DegenerateConfig, SizeMismatch
from .hamiltonian import as_config, from_polar, grad_phi_m, hessian_analytic, to_polar
from .core_params import _params, check_peak_count, polygon_radius

__all__ = [
    "CriticalPointReport",
    "SearchSummary",
    "SignChange",
    "newton_refine",
    "multistart_search",
    "sample_start",
    "classify",
    "canonical_rotation",
    "rotation_quotient_distance",
    "radial_profile_scan",
    "polygon_profile_derivative",
]

POLYGON_TOL = 1e-6
DEDUP_TOL = 1e-6
COND_LIMIT = 1e12
# Newton iterates must keep every point this far from the origin.  When
# m = alpha + 1 the Hamiltonian is scale invariant near the origin and a
# shrinking cluster has an arbitrarily small gradient without being critical.
ORIGIN_GUARD = 0.02
# a genuine critical point has only the rotational zero mode; with theta_1
# pinned its Hessian is well conditioned (below 1e5 for 0 < alpha <= 12)
PINNED_COND_LIMIT = 1e8
MAX_HALVINGS = 20


@dataclass
class CriticalPointReport:
    config: np.ndarray
    residual: float
    verdict: str  # "polygon", "non_polygon" or "not_converged"
    iterations: int
    radius: float | None = None
    theta0: float | None = None
    radius_error: float | None = None

    def to_dict(self) -> dict:
        return {
            "points": [[float(z.real), float(z.imag)] for z in self.config],
            "residual": float(self.residual),
            "verdict": self.verdict,
            "iterations": int(self.iterations),
            "radius": self.radius,
            "theta0": self.theta0,
            "radius_error": self.radius_error,
        }


@dataclass
class SearchSummary:
    restarts: int
    converged: int
    seed: int
    distinct_classes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "restarts": int(self.restarts),
            "converged": int(self.converged),
            "seed": int(self.seed),
            "distinct_classes": [c.to_dict() for c in self.distinct_classes],
        }


@dataclass(frozen=True)
class SignChange:
    lo: float
    hi: float
    root: float


def canonical_rotation(z) -> tuple[np.ndarray, float]:
    """Rotate so the outermost point (first by angle on ties) sits on the
    positive real axis.  Returns the rotated points sorted by angle in
    [0, 2 pi) and the original angle of the reference point."""
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    ang = np.mod(np.angle(z), 2.0 * np.pi)
    near_top = np.flatnonzero(r >= r.max() - POLYGON_TOL)
    ref = near_top[np.argmin(ang[near_top])]
    theta = float(ang[ref])
    w = z * np.exp(-1j * theta)
    w[ref] = r[ref]
    order = np.argsort(np.mod(np.angle(w), 2.0 * np.pi))
    return w[order], theta


def classify(z, p, residual, iterations, tol) -> CriticalPointReport:
    """Attach a verdict to a Newton end point."""
    p = _params(p)
    z = np.asarray(z, dtype=complex)
    m = z.size
    w, theta = canonical_rotation(z)
    if not np.isfinite(residual) or residual >= tol:
        return CriticalPointReport(w, residual, "not_converged", iterations)
    r = np.abs(w)
    rbar = float(r.mean())
    ang = np.mod(np.angle(w), 2.0 * np.pi)
    ideal = 2.0 * np.pi * np.arange(m) / m
    gap = np.abs(np.angle(np.exp(1j * (ang - ideal))))
    if np.abs(r - rbar).max() < POLYGON_TOL and gap.max() < POLYGON_TOL:
        try:
            rerr = abs(rbar - polygon_radius(p, m))
        except Exception:
            rerr = None
        theta0 = float(np.mod(theta, 2.0 * np.pi / m))
        return CriticalPointReport(w, residual, "polygon", iterations, rbar, theta0, rerr)
    return CriticalPointReport(w, residual, "non_polygon", iterations)


def _pinned_cond(H):
    keep = np.ones(H.shape[0], dtype=bool)
    keep[1] = False
    return float(np.linalg.cond(H[np.ix_(keep, keep)]))


def _newton_direction(H, g):
    if np.linalg.cond(H) > COND_LIMIT:
        # pin theta_1 to remove the rotational zero mode
        keep = np.ones(g.size, dtype=bool)
        keep[1] = False
        d = np.zeros_like(g)
        d[keep] = np.linalg.lstsq(H[np.ix_(keep, keep)], -g[keep], rcond=None)[0]
        return d
    return np.linalg.solve(H, -g)


def newton_refine(z, p, tol: float = 1e-10, max_iter: int = 100) -> CriticalPointReport:
    """Damped Newton on the polar gradient with Armijo backtracking on |g|^2.

    Failures (line search exhausted, iterates leaving the admissible set,
    iteration cap) come back as ``verdict="not_converged"``.
    """
    p = _params(p)
    z = as_config(z)
    q = to_polar(z)
    g = grad_phi_m(z, p, "polar")
    f = float(g @ g)
    res = float(np.abs(g).max())
    it = 0
    pinned = 0
    while res >= tol and it < max_iter:
        try:
            H = hessian_analytic(from_polar(q), p, "polar")
            d = _newton_direction(H, g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(d)):
            break
        t = 1.0
        accepted = False
        for _ in range(MAX_HALVINGS):
            trial = q + t * d
            gt = None
            if trial[0::2].min() >= ORIGIN_GUARD:
                try:
                    gt = grad_phi_m(from_polar(trial), p, "polar")
                except DegenerateConfig:
                    pass
            if gt is not None and np.all(np.isfinite(gt)):
                ft = float(gt @ gt)
                if ft <= (1.0 - 2e-4 * t) * f:
                    accepted = True
                    break
            t *= 0.5
        it += 1
        if not accepted:
            break
        q, g, f = trial, gt, ft
        res = float(np.abs(g).max())
        # a run parked at the origin guard is following a collapsing cluster
        pinned = pinned + 1 if q[0::2].min() < 1.5 * ORIGIN_GUARD else 0
        if pinned >= 3:
            break
    z = from_polar(q)
    if res < tol and _pinned_cond(hessian_analytic(z, p, "polar")) > PINNED_COND_LIMIT:
        # flat end point of a collapsing cluster, not a critical point
        res = float("inf")
    return classify(z, p, res, it, tol)


def sample_start(rng, m, rmin=0.1, rmax=0.95, min_sep=0.1, attempts=1000):
    """Uniform radii and angles, rejecting crowded draws."""
    for _ in range(attempts):
        z = rng.uniform(rmin, rmax, m) * np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, m))
        if m == 1:
            return z
        d = np.abs(z[:, None] - z[None, :])
        d[np.diag_indices(m)] = np.inf
        if d.min() >= min_sep:
            return z
    raise DegenerateConfig(f"could not draw a start with separation {min_sep} in {attempts} attempts")


def _threads():
    """Worker count from LIOUVILLE_THREADS, default the machine's CPU count."""
    default = os.cpu_count() or 1
    try:
        return max(1, int(os.environ.get("LIOUVILLE_THREADS", default)))
    except ValueError:
        return default


def multistart_search(
    p, m, restarts: int = 200, seed: int = 0, tol: float = 1e-10, max_iter: int = 100, workers=None
) -> SearchSummary:
    """Newton from ``restarts`` random starts, deduplicated modulo rotation.

    Restart ``i`` draws from ``default_rng([seed, i])`` so the result does not
    depend on scheduling.
    """
    p = _params(p)
    m = check_peak_count(m)
    if restarts < 1:
        raise ValueError("restarts must be at least 1")

    def run(i):
        rng = np.random.default_rng([int(seed), i])
        return newton_refine(sample_start(rng, m), p, tol, max_iter)

    workers = workers or _threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            reports = list(ex.map(run, range(restarts)))
    else:
        reports = [run(i) for i in range(restarts)]

    ok = [r for r in reports if r.verdict != "not_converged"]
    ok.sort(key=lambda r: (float(np.abs(r.config).mean()), r.theta0 or 0.0))
    classes = []
    for r in ok:
        if all(rotation_quotient_distance(r.config, c.config) >= DEDUP_TOL for c in classes):
            classes.append(r)
    return SearchSummary(restarts, len(ok), int(seed), classes)


def _bottleneck(a, b):
    """Min over bijections of the max pointwise distance, and the pairing."""
    D = np.abs(a[:, None] - b[None, :])
    vals = np.unique(D)
    lo, hi = 0, vals.size - 1
    best = None
    while lo < hi:
        mid = (lo + hi) // 2
        rows, cols = linear_sum_assignment(D > vals[mid])
        if np.any(D[rows, cols] > vals[mid]):
            lo = mid + 1
        else:
            hi = mid
            best = cols
    if best is None:
        best = linear_sum_assignment(D > vals[lo])[1]
    return float(vals[lo]), best


def _minimax_angle(a, b):
    """min over phi of max_j |a_j e^(i phi) - b_j| for a fixed pairing.

    The optimum is either the minimum of a single term (phi aligning a_j
    with b_j) or a crossing of two terms, where f_i^2 - f_j^2 =
    C - 2 Re(e^(i phi) w) vanishes; both have closed forms.
    """
    cands = list(np.angle(b * np.conj(a)))
    m = a.size
    for i in range(m):
        for j in range(i + 1, m):
            C = abs(a[i]) ** 2 + abs(b[i]) ** 2 - abs(a[j]) ** 2 - abs(b[j]) ** 2
            w = a[i] * np.conj(b[i]) - a[j] * np.conj(b[j])
            if abs(w) > 0 and abs(C) <= 2.0 * abs(w):
                c = np.arccos(C / (2.0 * abs(w)))
                cands += [c - np.angle(w), -c - np.angle(w)]
    phis = np.array(cands)
    return float(np.abs(a[None, :] * np.exp(1j * phis)[:, None] - b[None, :]).max(axis=1).min())


def rotation_quotient_distance(a, b, coarse: int = 720) -> float:
    """Distance between two configurations modulo rotation and relabeling.

    Minimizes, over rotation angle and bijection, the largest pointwise
    distance.  On each cell of a coarse angle grid the Hausdorff distance at
    the cell centre minus max|a| times the half-width bounds the objective
    from below; cells are refined in order of that bound until none can beat
    the best value found.  Each refinement ends with the exact minimax angle
    for the bijection it lands on.
    """
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.size != b.size:
        raise SizeMismatch(f"configurations have {a.size} and {b.size} points")
    phis = 2.0 * np.pi * np.arange(coarse) / coarse
    rot = a[None, :] * np.exp(1j * phis)[:, None]
    D = np.abs(rot[:, :, None] - b[None, None, :])
    haus = np.maximum(D.min(axis=2).max(axis=1), D.min(axis=1).max(axis=1))
    half = np.pi / coarse
    slack = float(np.abs(a).max()) * half
    obj = lambda phi: _bottleneck(a * np.exp(1j * phi), b)[0]  # noqa: E731
    best = np.inf
    for k in np.argsort(haus, kind="stable"):
        if haus[k] - slack >= best:
            break
        phi0 = phis[k]
        val0, pairing = _bottleneck(a * np.exp(1j * phi0), b)
        best = min(best, val0, _minimax_angle(a, b[pairing]))
        res = minimize_scalar(obj, bounds=(phi0 - half, phi0 + half), method="bounded", options={"xatol": 1e-10})
        pairing = _bottleneck(a * np.exp(1j * res.x), b)[1]
        best = min(best, float(res.fun), _minimax_angle(a, b[pairing]))
    return float(best)


def polygon_profile_derivative(p, m, r):
    """d/dr of the Hamiltonian along the regular polygon of radius r, as the
    sum of the radial partials."""
    z = r * np.exp(2j * np.pi * np.arange(m) / m)
    return float(grad_phi_m(z, p, "polar")[0::2].sum())


def radial_profile_scan(p, m, grid: int = 1000) -> list[SignChange]:
    """Sign changes of the polygon-restricted radial derivative on (0.01, 0.99).

    Samples whose magnitude is below the round-off level of the summed
    partials (about eps * m * (alpha + m) / r) carry no sign information and
    are skipped.
    """
    p = _params(p)
    m = check_peak_count(m)
    if grid < 100:
        raise ValueError("grid must be at least 100")
    rs = np.linspace(0.01, 0.99, grid)
    vals = np.array([polygon_profile_derivative(p, m, r) for r in rs])
    floor = 1e-12 * m * (p.alpha + m) * (1.0 / rs + 1.0 / (1.0 - rs))
    sign = np.where(np.abs(vals) > floor, np.sign(vals), 0.0)
    idx = np.flatnonzero(sign)
    out = []
    for i, j in zip(idx[:-1], idx[1:]):
        if sign[i] != sign[j]:
            root = bisect(lambda r: polygon_profile_derivative(p, m, r), rs[i], rs[j], xtol=1e-12)
            out.append(SignChange(float(rs[i]), float(rs[j]), float(root)))
    return out
