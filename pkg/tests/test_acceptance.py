"""Numbered acceptance criteria, each with its tolerance and runtime budget.

A one-line verdict per criterion is printed in the terminal summary.
"""

import io
import json
import math
import time
from contextlib import redirect_stdout
from functools import lru_cache

import numpy as np
import pytest

from liouville.cli import main
from liouville.critical_solver import multistart_search, radial_profile_scan
from liouville.hamiltonian import e0_grad, e0_hessian, e0_value, hessian_fd
from liouville.core_params import DiskParams, polygon_config, polygon_radius
from liouville.pde2d_solver import (
    PolarGrid,
    angular_monotonicity_check,
    continue_in_lambda,
    newton_solve,
    power_map_check,
    radial_field,
    seed_from_bifurcation,
)
from liouville.polynomial_identities import (
    build_PQ,
    limit_family,
    limit_identity_residual,
    pq_identity_residual,
    root_structure_report,
)
from liouville.radial_branches import (
    degeneracy_lambda_by_shooting,
    fold_lambda_by_shooting,
    mass,
    mass_quadrature,
    mode_boundary_value,
    radial_ode_residual,
    radial_pair,
    shoot,
    solve_Lambda,
)
from liouville.hessian_spectral import (
    assemble_blocks,
    circulant_matrix,
    count_zero_eigenvalues,
    dft_conjugation_residual,
    full_spectrum,
    lattice_sums,
    lattice_sums_bruteforce,
    mode_block,
    polar_zero_vector,
)

CENSUS_CASES = [(1, 1), (2, 1), (2.5, 2), (2.5, 3), (5, 4), (6.5, 5)]


@lru_cache(maxsize=None)
def _census():
    return {case: multistart_search(case[0], case[1], restarts=200, seed=0) for case in CENSUS_CASES}


def _spectral_grid():
    for alpha in np.arange(1.0, 6.01, 0.5):
        for m in range(1, int(math.ceil(alpha + 1.0))):
            if m < alpha + 1:
                yield float(alpha), m


def _rel(a, b):
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(a), abs(b))


def _term_sizes(p, m):
    rho = polygon_radius(p, m) ** 2
    l = np.arange(m)
    D = 1.0 + rho**2 - 2.0 * rho * np.cos(2.0 * np.pi * l / m)
    R = np.sum(1.0 / np.sin(np.pi * l[1:] / m) ** 2)
    return R, np.sum(1.0 / D), np.sum(1.0 / D**2)


@pytest.mark.acceptance(1, "polygon classification")
def test_criterion_01_polygon_classification():
    t0 = time.perf_counter()
    census = _census()
    elapsed = time.perf_counter() - t0
    for (alpha, m), summary in census.items():
        assert len(summary.distinct_classes) == 1, (alpha, m)
        cls = summary.distinct_classes[0]
        assert cls.verdict == "polygon"
        assert abs(cls.radius - polygon_radius(alpha, m)) < 1e-8
    assert elapsed < 30.0


@pytest.mark.acceptance(2, "nonexistence for m >= alpha + 1")
def test_criterion_02_nonexistence():
    t0 = time.perf_counter()
    for alpha, m in [(1, 2), (2, 3), (0.5, 2)]:
        summary = multistart_search(alpha, m, restarts=200, seed=0)
        assert summary.distinct_classes == [], (alpha, m)
        assert radial_profile_scan(alpha, m) == []
    assert time.perf_counter() - t0 < 10.0


@pytest.mark.acceptance(3, "block-circulant spectral suite")
def test_criterion_03_spectral_suite():
    t0 = time.perf_counter()
    cases = list(_spectral_grid())
    assert len(cases) == 41
    for alpha, m in cases:
        p = DiskParams(alpha)
        H = circulant_matrix(assemble_blocks(p, m))
        # (a) blocks against a finite-difference Hessian
        Hfd = hessian_fd(polygon_config(p, m), p)
        assert np.abs(H - Hfd).max() < 1e-5, (alpha, m)
        # (b) determinant law
        for q in range(m):
            mb = mode_block(p, m, q)
            if q == 0:
                assert abs(mb.det) < 1e-12 * max(1.0, mb.mu**2, mb.gamma**2)
            else:
                assert _rel(mb.det, mb.det_closed_form) < 1e-12, (alpha, m, q)
        # (c) one zero eigenvalue, eigenvector along the rotation
        ev, vecs = np.linalg.eigh(H)
        assert count_zero_eigenvalues(ev) == 1
        assert count_zero_eigenvalues(full_spectrum(p, m)[0]) == 1
        k = int(np.argmin(np.abs(ev)))
        assert abs(vecs[:, k] @ polar_zero_vector(m)) > 1.0 - 1e-8
        # (d) DFT conjugation
        assert dft_conjugation_residual(p, m) < 1e-11
        # (e) lattice sums
        for q in range(m):
            a, b = lattice_sums(p, m, q), lattice_sums_bruteforce(p, m, q)
            for x, y, size in zip((a.R, a.S, a.T), (b.R, b.S, b.T), _term_sizes(p, m)):
                if x == 0.0:
                    # exact cancellation: compare with the size of the summands
                    assert abs(y) <= 1e-12 * size, (alpha, m, q)
                else:
                    assert _rel(x, y) < 1e-12, (alpha, m, q)
    assert time.perf_counter() - t0 < 5.0


@pytest.mark.acceptance(4, "polynomial identities")
def test_criterion_04_polynomial_identities():
    census = _census()
    t0 = time.perf_counter()
    checked = 0
    for (alpha, m), summary in census.items():
        for cls in summary.distinct_classes:
            P, Q = build_PQ(cls.config)
            assert pq_identity_residual(P, Q, alpha).relative < 1e-10
            checked += 1
    assert checked == len(CENSUS_CASES)
    family = [limit_family(3, t, s) for t in (0, 1, -1, 2, -2) for s in (0, 1, -1, 2, -2)]
    family += [limit_family(4, t) for t in (0, 0.5, -0.5, 2, -2)]
    for P in family:
        assert limit_identity_residual(P).relative < 1e-12
        sum_re, max_re = root_structure_report(P)
        assert abs(sum_re + P.degree) < 1e-9
        assert max_re > 0
    assert time.perf_counter() - t0 < 2.0


@pytest.mark.acceptance(5, "radial branches")
def test_criterion_05_radial_branches():
    t0 = time.perf_counter()
    for alpha in (0.5, 1, 2, 3):
        beta = alpha + 1.0
        p = DiskParams(alpha, 0.1 * 2 * beta**2)
        sols = radial_pair(p)
        assert len(sols) == 2
        for s in sols:
            assert radial_ode_residual(s) < 1e-10
            assert abs(shoot(p, s.sup_norm)) < 1e-7
            m_closed = mass(s.Lambda, p)
            assert _rel(m_closed, mass_quadrature(s)) < 1e-8
            assert m_closed < 8 * math.pi * beta
    L1, L2 = solve_Lambda(DiskParams(1, 1))
    assert abs(L1 - 1.068) < 1e-3
    assert abs(L2 - 958.93) < 0.01
    assert abs(mass(L2, 1) - 48.64) < 0.01
    assert time.perf_counter() - t0 < 5.0


@pytest.mark.acceptance(6, "degeneracy loci")
def test_criterion_06_degeneracy_loci():
    t0 = time.perf_counter()
    for alpha in (1, 2.5, 3):
        beta = alpha + 1.0
        assert abs(fold_lambda_by_shooting(alpha) - 2 * beta**2) < 1e-6
        for k in range(1, int(math.ceil(beta))):
            if k < beta:
                assert abs(degeneracy_lambda_by_shooting(k, alpha) - 2 * (beta**2 - k * k)) < 1e-6
        if alpha == int(alpha):
            for Lam in np.geomspace(1.0, 1e6, 2000):
                ma = mode_boundary_value(int(beta), Lam, alpha)
                assert ma.delta == 1.0
                assert not ma.degenerate and ma.f1_boundary > 0
    assert time.perf_counter() - t0 < 10.0


@pytest.mark.acceptance(7, "nondegeneracy at small coupling")
def test_criterion_07_nondegeneracy():
    t0 = time.perf_counter()
    for alpha in (0.5, 1, 1.5, 2, 2.5, 3):
        beta = alpha + 1.0
        p = DiskParams(alpha, 0.05 * 2 * beta**2)
        for s in radial_pair(p):
            for k in range(int(math.ceil(beta))):
                if k < beta:
                    assert mode_boundary_value(k, s.Lambda, p).normalized() > 1e-3, (alpha, s.branch, k)
    for alpha, m in _spectral_grid():
        assert count_zero_eigenvalues(full_spectrum(alpha, m)[0]) == 1
    assert time.perf_counter() - t0 < 2.0


@pytest.mark.acceptance(8, "PDE branch realization")
def test_criterion_08_pde_branch():
    t0 = time.perf_counter()
    p = DiskParams(1.0)
    grid = PolarGrid.uniform(128, 128)
    seed = seed_from_bifurcation(p, grid, 5.8)
    branch = continue_in_lambda(p, 5.8, 0.5, 40, seed)
    assert abs(branch[-1].lam - 0.5) < 1e-12
    target = 1.0 / math.sqrt(3.0)
    dist = []
    for e in branch:
        off = [q for q in e.report.peaks if q.r > 0]
        assert len(off) == 1
        dist.append(abs(off[0].r - target))
        assert 8 * math.pi < e.report.mass < 16 * math.pi
    assert dist[-1] < 0.05
    assert np.all(np.diff(dist) <= 0)
    for r0 in (0.4, 0.6):
        assert angular_monotonicity_check(branch[-1].field, 1, r0).verdict == "pass"
    # power map on a radial solution
    rgrid = PolarGrid.graded(64, 64, power=2.0)
    q = DiskParams(1.0, 1.0)
    f = newton_solve(q, rgrid, radial_field(q, rgrid, "singular"))
    assert power_map_check(f, 2) < 10 * f.residual_norm
    assert time.perf_counter() - t0 < 180.0


@pytest.mark.acceptance(9, "solution census")
def test_criterion_09_census():
    t0 = time.perf_counter()
    buf = io.StringIO()
    with redirect_stdout(buf):
        assert main(["count", "--alpha", "2.5"]) == 0
    assert json.loads(buf.getvalue())["classes"] == 5
    # witnesses at lambda = 0.3
    p = DiskParams(2.5, 0.3)
    sols = radial_pair(p)
    assert [s.branch for s in sols] == ["minimal", "singular"]
    assert all(radial_ode_residual(s) < 1e-10 for s in sols)
    for m in (1, 2, 3):
        summary = multistart_search(p, m, restarts=20, seed=1)
        assert len(summary.distinct_classes) == 1
        assert summary.distinct_classes[0].verdict == "polygon"
        ev, _ = full_spectrum(p, m)
        assert count_zero_eigenvalues(ev) == 1
        for q in range(1, m):
            mb = mode_block(p, m, q)
            assert _rel(mb.det, mb.det_closed_form) < 1e-12
    assert len(sols) + 3 == 5
    assert time.perf_counter() - t0 < 60.0


@pytest.mark.acceptance(10, "angular functional E0")
def test_criterion_10_e0():
    t0 = time.perf_counter()
    for m in (3, 4, 5, 6):
        a = 2 * np.pi * np.arange(m) / m
        assert np.abs(e0_grad(a)).max() < 1e-12
        assert abs(e0_value(a) - m * (m * m - 1) / 6) < 1e-10
        # restrict to the complement of the common-shift direction
        basis = np.linalg.qr(np.eye(m) - 1.0 / m)[0][:, : m - 1]
        H = basis.T @ e0_hessian(a) @ basis
        assert np.linalg.eigvalsh(H).min() >= m / 2 - 1e-8
    assert time.perf_counter() - t0 < 1.0
