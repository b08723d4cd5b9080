import csv
import io
import math
from functools import lru_cache

import numpy as np
import pytest
import scipy.sparse as sp

from liouville import pde2d_solver
from liouville.exceptions import BranchLost, DomainError, NewtonDiverged, SingularJacobian
from liouville.core_params import DiskParams
from liouville.pde2d_solver import (
    Field2D,
    PolarGrid,
    angular_monotonicity_check,
    continue_in_lambda,
    mass_2d,
    newton_solve,
    peak_report,
    power_map_check,
    power_map_field,
    radial_field,
    residual,
    residual_direct,
    seed_from_bifurcation,
)
from liouville.radial_branches import mass, radial_pair


@lru_cache(maxsize=None)
def _one_peak(n=48, lam=0.5):
    p = DiskParams(1.0)
    grid = PolarGrid.uniform(n, n)
    branch = continue_in_lambda(p, 5.8, lam, 30, seed_from_bifurcation(p, grid, 5.8))
    return branch


@lru_cache(maxsize=None)
def _two_peak():
    p = DiskParams(3.0)
    grid = PolarGrid.uniform(64, 32, sector_m=2)
    return continue_in_lambda(p, 23.0, 2.0, 30, seed_from_bifurcation(p, grid, 23.0, k=2))


def test_grid_validation():
    g = PolarGrid.uniform(20, 16)
    assert g.Nr == 20 and g.r[-1] == 1.0 and g.n == 1 + 19 * 16
    assert abs(g.dtheta - 2 * np.pi / 16) < 1e-15
    assert PolarGrid.uniform(20, 16, sector_m=3).dtheta == pytest.approx(2 * np.pi / 48)
    with pytest.raises(DomainError):
        PolarGrid.uniform(10, 16)
    with pytest.raises(DomainError):
        PolarGrid.uniform(16, 8)
    with pytest.raises(DomainError):
        PolarGrid(np.linspace(0.1, 0.9, 20), 16)
    with pytest.raises(DomainError):
        PolarGrid(np.r_[np.linspace(0.05, 0.5, 10), np.linspace(0.5, 1, 10)], 16)
    with pytest.raises(DomainError):
        PolarGrid.uniform(16, 16, sector_m=0)


def test_graded_grid():
    g = PolarGrid.graded(32, 16, power=2.0)
    assert np.allclose(g.r, (np.arange(1, 33) / 32) ** 2)
    h = PolarGrid.graded(64, 16, power=1.0, peak=0.6, width=0.1, gain=2.0)
    dr = np.diff(h.r)
    near = np.abs(h.r[:-1] - 0.6) < 0.05
    assert dr[near].max() < dr[~near].max()
    with pytest.raises(DomainError):
        PolarGrid.graded(32, 16, power=0.5)


def test_field_boundary_and_csv(tmp_path):
    g = PolarGrid.uniform(16, 16)
    f = Field2D(g, np.ones((16, 16)), DiskParams(1, 1), origin=2.0)
    assert np.all(f.values[-1] == 0.0)
    text = f.to_csv(tmp_path / "u.csv")
    assert (tmp_path / "u.csv").read_text() == text
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["r", "theta", "u"]
    assert len(rows) == 2 + 16 * 16
    assert [float(x) for x in rows[1]] == [0.0, 0.0, 2.0]
    assert float(rows[2][0]) == g.r[0]
    assert float(rows[3][1]) == g.theta[1]
    back = np.array([[float(x) for x in row] for row in rows[2:]])
    assert np.array_equal(back[:, 2].reshape(16, 16), f.values)
    x = f.vector()
    assert Field2D.from_vector(g, x, f.params).vector().tolist() == x.tolist()
    with pytest.raises(DomainError):
        Field2D(g, np.ones((15, 16)), f.params)


def test_minimal_radial_solve():
    p = DiskParams(1.0, 1.0)
    for n in (32, 64):
        g = PolarGrid.uniform(n, n)
        exact = radial_field(p, g, "minimal")
        f = newton_solve(p, g, exact)
        assert f.iterations <= 3
        err = max(np.abs(f.values - exact.values).max(), abs(f.origin - exact.origin))
        assert err < 0.5 * (1 / n) ** 2


def test_grid_convergence():
    p = DiskParams(1.0, 1.0)
    errs = []
    for n in (16, 32, 64):
        g = PolarGrid.uniform(n, n)
        exact = radial_field(p, g, "singular")
        f = newton_solve(p, g, exact)
        errs.append(max(np.abs(f.values - exact.values).max(), abs(f.origin - exact.origin)))
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


def test_residual_routes_agree():
    p = DiskParams(2.0, 3.0)
    g = PolarGrid.graded(24, 20, power=1.5)
    f = radial_field(p, g, "singular")
    f = Field2D(g, f.values + 0.01 * np.cos(g.theta)[None, :], p, f.origin)
    assert abs(np.abs(residual(f)).max() - residual_direct(f)) < 1e-12 * residual_direct(f)


def test_lambda_scan_from_zero():
    p = DiskParams(1.0)
    g = PolarGrid.uniform(48, 48)
    zero = Field2D(g, np.zeros((48, 48)), p.with_lambda(1.0))
    for lam in (1.0, 4.0, 7.5):
        q = p.with_lambda(lam)
        f = newton_solve(q, g, Field2D(g, zero.values, q))
        ref = min(s.sup_norm for s in radial_pair(q))
        assert abs(f.origin - ref) < 5e-3
        assert np.ptp(f.values, axis=1).max() < 1e-12
    for lam in (9.0, 12.0):
        q = p.with_lambda(lam)
        with pytest.raises(NewtonDiverged):
            newton_solve(q, g, Field2D(g, zero.values, q))


def test_rotation_equivariance():
    entry = _one_peak()[10]
    f, g = entry.field, entry.field.grid
    bump = 0.05 * np.sin(g.theta + 0.3)[None, :] * np.sin(np.pi * g.r)[:, None]
    init = Field2D(g, f.values + bump, f.params, f.origin)
    # the discrete operator commutes with a one-cell rotation
    ra, rb = residual(init), residual(init.rotate(1))
    assert rb[0] == pytest.approx(ra[0], abs=1e-12)
    rolled = np.roll(ra[1:].reshape(g.Nr - 1, g.Nt), 1, axis=1)
    assert np.abs(rb[1:].reshape(g.Nr - 1, g.Nt) - rolled).max() < 1e-12
    # solved fields agree up to the Newton stopping tolerance
    a = newton_solve(f.params, g, init)
    b = newton_solve(f.params, g, init.rotate(1))
    tol = 100 * max(a.residual_norm, b.residual_norm)
    assert np.abs(a.rotate(1).values - b.values).max() < tol


def test_sector_consistency():
    p = DiskParams(3.0, 20.0)
    sector = PolarGrid.uniform(32, 16, sector_m=2)
    f = seed_from_bifurcation(DiskParams(3.0), sector, 20.0, k=2)
    full = f.unfold()
    assert full.grid.sector_m == 1 and full.grid.Nt == 32
    g = full.grid
    # symmetric perturbation as the full-disk start
    pert = 0.02 * np.cos(2 * g.theta)[None, :] * np.sin(np.pi * g.r)[:, None]
    start = Field2D(g, full.values + pert, p, full.origin + 0.01)
    h = newton_solve(p, g, start)
    assert np.abs(h.values - full.values).max() < 1e-9
    assert abs(h.origin - full.origin) < 1e-9


def test_one_peak_branch():
    branch = _one_peak()
    assert [round(e.lam, 12) for e in branch][0] == 5.8 and abs(branch[-1].lam - 0.5) < 1e-12
    end = branch[-1]
    peaks = end.report.peaks
    assert len(peaks) == 1 and 0.52 < peaks[0].r < 0.64
    assert abs(peaks[0].theta) < 1e-9
    # coarse grid: the lower mass bound is resolved only on finer grids
    assert all(e.report.mass < 16 * math.pi for e in branch)
    assert angular_monotonicity_check(end.field, 1, 0.5).verdict == "pass"
    quarter = end.field.rotate(end.field.grid.Nt // 4)
    assert angular_monotonicity_check(quarter, 1, 0.5).verdict == "fail"


def test_two_peak_branch():
    end = _two_peak()[-1]
    peaks = end.report.peaks
    assert len(peaks) == 2
    assert abs(peaks[0].height - peaks[1].height) < 1e-9
    assert abs((peaks[1].theta - peaks[0].theta) - np.pi) < 1e-3
    v = angular_monotonicity_check(end.field, 2, 0.7)
    assert v.verdict == "pass" and v.arcs == 4
    assert end.report.mass < 8 * math.pi * 4


def test_radial_peak_and_monotonicity():
    p = DiskParams(1.0, 1.0)
    g = PolarGrid.uniform(32, 32)
    f = newton_solve(p, g, radial_field(p, g, "singular"))
    rep = peak_report(f)
    assert len(rep.peaks) == 1 and rep.peaks[0].r == 0.0
    assert rep.peaks[0].height == f.origin
    assert angular_monotonicity_check(f, 1, 0.5).verdict == "monotone-trivial"
    assert set(rep.to_dict()) == {"peaks", "mass", "residual_norm"}


def test_mass_against_closed_form():
    p = DiskParams(1.0, 1.0)
    ref = mass(max(s.Lambda for s in radial_pair(p)), p)
    errs = []
    for n in (32, 64, 128):
        g = PolarGrid.uniform(n, n)
        f = newton_solve(p, g, radial_field(p, g, "singular"))
        errs.append(abs(mass_2d(f) - ref))
        assert mass_2d(f) < 16 * math.pi
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] < 1e-2


def test_mass_ordering_at_small_lambda():
    p = DiskParams(3.0)
    lam = 2.0
    masses = [mass(min(s.Lambda for s in radial_pair(p.with_lambda(lam))), p)]
    for k, nt in ((1, 64), (2, 32), (3, 24)):
        grid = PolarGrid.uniform(64, nt, sector_m=k)
        lk = 2 * (p.beta**2 - k * k)
        seed = seed_from_bifurcation(p, grid, 0.95 * lk, k=k)
        end = continue_in_lambda(p, 0.95 * lk, lam, 25, seed)[-1]
        assert len(end.report.peaks) == k
        masses.append(end.report.mass)
    masses.append(mass(max(s.Lambda for s in radial_pair(p.with_lambda(lam))), p))
    assert np.all(np.diff(masses) > 0)


def test_one_peak_mass_above_quantization():
    p = DiskParams(1.0)
    grid = PolarGrid.graded(128, 256, power=1.0, peak=0.58, width=0.12, gain=1.5)
    branch = continue_in_lambda(p, 5.8, 0.2, 40, seed_from_bifurcation(p, grid, 5.8))
    excess = branch[-1].report.mass - 8 * math.pi
    assert 0 < excess < 0.5
    assert abs(branch[-1].report.peaks[0].r - 1 / math.sqrt(3)) < 2e-3


def test_radial_branch_continuation():
    p = DiskParams(1.0)
    g = PolarGrid.uniform(48, 48)
    q = p.with_lambda(7.5)
    sing = continue_in_lambda(p, 7.5, 0.5, 30, radial_field(q, g, "singular"), symmetry=None)
    m = [e.report.mass for e in sing]
    assert np.all(np.diff(m) > 0) and m[-1] < 16 * math.pi
    mini = continue_in_lambda(p, 7.5, 1e-3, 30, radial_field(q, g, "minimal"), symmetry=None)
    assert mini[-1].field.max() < 1e-3


def test_power_map_identity_and_radial():
    p = DiskParams(1.0, 1.0)
    g = PolarGrid.graded(64, 64, power=2.0)
    f = newton_solve(p, g, radial_field(p, g, "singular"))
    assert np.array_equal(residual(power_map_field(f, 1)), residual(f))
    v = power_map_field(f, 2)
    assert v.params.alpha == 3.0 and v.params.lam == 4.0
    assert v.grid.sector_m == 2
    assert power_map_check(f, 2) < 10 * f.residual_norm
    # the mapped field approximates the closed-form radial solution for (3, 4)
    s = radial_pair(v.params)[1]
    assert np.abs(v.values[:, 0] - s(v.grid.r)).max() < 0.05


def test_power_map_off_axis_rows_exact():
    end = _one_peak()[-1]
    f = end.field
    v = power_map_field(f, 2)
    rf, rv = residual(f), residual(v)
    nt = f.grid.Nt
    off_axis = slice(1 + nt, None)
    assert np.abs(rv[off_axis] - 4 * rf[off_axis]).max() < 1e-9
    # the target grid variant interpolates onto a fresh grid
    target = PolarGrid.uniform(48, 24, sector_m=2)
    w = power_map_field(f, 2, target)
    assert w.grid is target
    assert np.abs(w.values[:, 0] - np.interp(target.r**2, f.grid.r, f.values[:, 0])).max() < 0.05


def test_power_map_axis_defect_shrinks():
    defects = []
    for n in (32, 64):
        f = _one_peak(n)[-1].field
        defects.append(power_map_check(f, 2))
    assert defects[1] < 0.6 * defects[0]


def test_seed_and_continue_errors(monkeypatch):
    p = DiskParams(1.0)
    g = PolarGrid.uniform(24, 24)
    with pytest.raises(DomainError):
        seed_from_bifurcation(p, g, 6.5)
    f = radial_field(p.with_lambda(2.0), g, "minimal")
    with pytest.raises(DomainError):
        continue_in_lambda(p, 1.0, 2.0, 5, f)
    with pytest.raises(DomainError):
        newton_solve(p.with_lambda(2.0), g, f, symmetry="odd")
    with pytest.raises(DomainError):
        newton_solve(p.with_lambda(2.0), PolarGrid.uniform(24, 16), f)

    calls = []

    def failing(*args, **kw):
        calls.append(1)
        if len(calls) > 2:
            raise NewtonDiverged("forced")
        return real(*args, **kw)

    real = pde2d_solver.newton_solve
    monkeypatch.setattr(pde2d_solver, "newton_solve", failing)
    with pytest.raises(BranchLost) as info:
        continue_in_lambda(p, 2.0, 1.0, 4, f)
    assert len(info.value.partial) == 2


def test_singular_jacobian_detected():
    J = sp.csc_matrix(np.array([[1.0, 2.0], [2.0, 4.0]]))
    with pytest.raises(SingularJacobian):
        pde2d_solver._factor(J)
