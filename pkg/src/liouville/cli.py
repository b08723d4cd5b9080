"""Command-line front end.

Every subcommand prints canonical JSON (sorted keys, floats with 17
significant digits) or a CSV with a fixed header.  Exit codes: 0 on
success, 1 on domain and usage errors (a JSON error object goes to stderr),
2 on anything unexpected.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import re
import sys

import numpy as np

from . import __version__
from .critical_solver import multistart_search
from .exceptions import InternalInconsistency, IoError, LiouvilleError, UsageError
from .hamiltonian import hessian_analytic
from .core_params import DiskParams, ceil_alpha, polygon_config, solution_count
from .pde2d_solver import (
    PolarGrid,
    Field2D,
    continue_in_lambda,
    newton_solve,
    peak_report,
    power_map_check,
    radial_field,
    seed_from_bifurcation,
)
from .polynomial_identities import (
    build_PQ,
    limit_family,
    limit_identity_residual,
    pq_identity_residual,
    root_structure_report,
    unit_circle_clearance,
)
from .radial_branches import (
    continuation,
    degeneracy_lambda,
    lambda_max,
    mass,
    mode_boundary_value,
    radial_pair,
)
from .hessian_spectral import count_zero_eigenvalues, dft_conjugation_residual, full_spectrum, mode_block

__all__ = ["main", "build_parser", "dispatch", "canonical_json", "emit"]


# ---------------------------------------------------------------------------
# serialization


def _num(x) -> str:
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return format(x + 0.0, ".17g")  # -0.0 + 0.0 is 0.0


def canonical_json(obj) -> str:
    """Sorted keys, no extra whitespace, floats with 17 significant digits."""
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ",".join(json.dumps(k) + ":" + canonical_json(v) for k, v in items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ",".join(canonical_json(v) for v in obj) + "]"
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def emit(text: str, output: str | None, stream=None) -> None:
    if output in (None, "-"):
        (stream or sys.stdout).write(text)
        return
    try:
        with open(output, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {output}: {exc}") from exc


# ---------------------------------------------------------------------------
# subcommands; each returns (json_object, csv_text or None)


def _critical(a):
    p = DiskParams(a.alpha)
    s = multistart_search(p, a.m, restarts=a.restarts, seed=a.seed)
    d = s.to_dict()
    d.update(alpha=p.alpha, m=a.m)
    rows = [
        (i, c.verdict, c.radius if c.radius is not None else "", c.theta0 if c.theta0 is not None else "", float(c.residual))
        for i, c in enumerate(s.distinct_classes)
    ]
    return d, _csv(["class", "verdict", "radius", "theta0", "residual"], rows)


def _hessian(a):
    p = DiskParams(a.alpha)
    blocks = [mode_block(p, a.m, q) for q in range(a.m)]
    ev, v = full_spectrum(p, a.m)
    H = hessian_analytic(polygon_config(p, a.m), p, "cartesian")
    d = {
        "alpha": p.alpha,
        "m": a.m,
        "rho": blocks[0].rho,
        "blocks": [
            {
                "p": b.p,
                "mu": b.mu,
                "nu": b.nu,
                "gamma": b.gamma,
                "det": b.det,
                "det_closed_form": b.det_closed_form,
                "det_error": abs(b.det - b.det_closed_form),
                "eigenvalues": b.eigenvalues(),
            }
            for b in blocks
        ],
        "spectrum": ev,
        "zero_eigenvalues": count_zero_eigenvalues(ev),
        "zero_vector_residual": float(np.linalg.norm(H @ v)),
        "dft_residual": dft_conjugation_residual(p, a.m),
    }
    rows = [(b.p, b.mu, b.nu, b.gamma, b.det, b.det_closed_form, abs(b.det - b.det_closed_form)) for b in blocks]
    return d, _csv(["p", "mu", "nu", "gamma", "det", "det_closed_form", "det_error"], rows)


def _poly_check(a):
    p = DiskParams(a.alpha)
    z = polygon_config(p, a.m, a.theta0)
    P, Q = build_PQ(z)
    res = pq_identity_residual(P, Q, p)
    d = {
        "alpha": p.alpha,
        "m": a.m,
        "theta0": a.theta0,
        "max_abs": res.max_abs,
        "relative": res.relative,
        "unit_circle_clearance": unit_circle_clearance(P),
    }
    return d, _csv(["alpha", "m", "max_abs", "relative", "unit_circle_clearance"], [(p.alpha, a.m, res.max_abs, res.relative, d["unit_circle_clearance"])])


def _limit_poly(a):
    P = limit_family(a.p, a.t, a.s)
    res = limit_identity_residual(P)
    sum_re, max_re = root_structure_report(P)
    d = {
        "p": a.p,
        "t": a.t,
        "s": a.s,
        "coefficients": [[c.real, c.imag] for c in P.coeffs],
        "max_abs": res.max_abs,
        "relative": res.relative,
        "sum_re": sum_re,
        "max_re": max_re,
    }
    return d, _csv(["p", "t", "s", "relative", "sum_re", "max_re"], [(a.p, a.t, a.s, res.relative, sum_re, max_re)])


def _radial(a):
    p = DiskParams(a.alpha, a.lam)
    sols = radial_pair(p)
    rows = [
        {"branch": s.branch, "Lambda": s.Lambda, "mass": mass(s.Lambda, p), "sup_norm": s.sup_norm}
        for s in sols
    ]
    d = {"alpha": p.alpha, "lambda": p.lam, "lambda_max": lambda_max(p), "solutions": rows}
    return d, _csv(["branch", "Lambda", "mass", "sup_norm"], [(r["branch"], r["Lambda"], r["mass"], r["sup_norm"]) for r in rows])


def _bifurcate(a):
    p = DiskParams(a.alpha)
    if not a.lambda_max > a.lambda_min > 0:
        raise UsageError("need 0 < --lambda-min < --lambda-max", flag="--lambda-min")
    grid = np.linspace(a.lambda_min, a.lambda_max, a.steps)
    pts = continuation(p, grid)
    d = {"alpha": p.alpha, "points": [q.to_dict() for q in pts]}
    rows = [(q.lam, q.branch, q.Lambda, q.mass, q.sup_norm) for q in pts]
    return d, _csv(["lambda", "branch", "Lambda", "mass", "sup_norm"], rows)


def _modes(a):
    p = DiskParams(a.alpha, a.lam)
    kmax = math.ceil(p.beta) - 1 if p.beta != int(p.beta) else int(p.beta)
    out = []
    for s in radial_pair(p):
        for k in range(kmax + 1):
            m = mode_boundary_value(k, s.Lambda, p)
            row = m.to_dict()
            row.update(branch=s.branch, normalized=m.normalized())
            out.append(row)
    loci = [{"k": k, "lambda": degeneracy_lambda(k, p)} for k in range(kmax + 1) if k < p.beta]
    d = {"alpha": p.alpha, "lambda": p.lam, "modes": out, "degeneracy_loci": loci}
    rows = [(r["branch"], r["k"], r["delta"], r["s_boundary"], r["f1_boundary"], r["normalized"], r["degenerate"]) for r in out]
    return d, _csv(["branch", "k", "delta", "s_boundary", "f1_boundary", "normalized", "degenerate"], rows)


def _grid(a, sector_m=None):
    sm = a.sector_m if sector_m is None else sector_m
    if a.grading == "graded":
        return PolarGrid.graded(a.nr, a.nt, sm)
    return PolarGrid.uniform(a.nr, a.nt, sm)


def _symmetry(a):
    return None if a.symmetry == "none" else a.symmetry


def _report_dict(f: Field2D):
    rep = peak_report(f)
    d = rep.to_dict()
    d.update(
        alpha=f.params.alpha,
        iterations=f.iterations,
        grid={"nr": f.grid.Nr, "nt": f.grid.Nt, "sector_m": f.grid.sector_m},
    )
    d["lambda"] = f.lam
    return d


def _pde2d_solve(a):
    p = DiskParams(a.alpha, a.lam)
    g = _grid(a)
    if a.init == "zero":
        init = Field2D(g, np.zeros((g.Nr, g.Nt)), p)
    else:
        init = radial_field(p, g, a.init)
    f = newton_solve(p, g, init, tol=a.tol, symmetry=_symmetry(a))
    return _report_dict(f), f.to_csv()


def _pde2d_continue(a):
    p = DiskParams(a.alpha)
    g = _grid(a)
    seed = seed_from_bifurcation(p, g, a.lambda_from, k=a.k, sign=a.sign, tol=a.tol)
    branch = continue_in_lambda(p, a.lambda_from, a.lambda_to, a.steps, seed, tol=a.tol)
    entries = []
    rows = []
    for e in branch:
        d = e.report.to_dict()
        d["lambda"] = e.lam
        entries.append(d)
        for i, q in enumerate(e.report.peaks):
            rows.append((e.lam, i, q.r, q.theta, q.height, e.report.mass, e.report.residual_norm))
    d = {"alpha": p.alpha, "k": a.k, "entries": entries}
    return d, _csv(["lambda", "peak", "r", "theta", "height", "mass", "residual_norm"], rows)


def _power_check(a):
    p = DiskParams(a.alpha, a.lam)
    g = _grid(a)
    f = newton_solve(p, g, radial_field(p, g, a.branch), tol=a.tol)
    res = power_map_check(f, a.m)
    d = {
        "alpha": p.alpha,
        "lambda": p.lam,
        "m": a.m,
        "target_alpha": a.m * p.beta - 1.0,
        "target_lambda": a.m * a.m * p.lam,
        "residual": res,
        "solver_residual": f.residual_norm,
        "ratio": res / f.residual_norm if f.residual_norm > 0 else None,
    }
    return d, _csv(["m", "residual", "solver_residual"], [(a.m, res, f.residual_norm)])


def _count(a):
    p = DiskParams(a.alpha)
    breakdown = ["minimal", "singular"] + [f"m={m}" for m in range(1, ceil_alpha(p) + 1)]
    n = solution_count(p)
    d = {"classes": n, "breakdown": breakdown}
    return d, _csv(["class"], [(b,) for b in breakdown])


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        m = re.match(r"argument ([^:]+):", message)
        flag = m.group(1).split("/")[0] if m else None
        raise UsageError(message, flag=flag)


def _positive(integer=False, allow_zero=False):
    def conv(text):
        try:
            v = int(text) if integer else float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {'an integer' if integer else 'a number'}, got {text!r}")
        if not math.isfinite(v) or v < 0 or (v == 0 and not allow_zero):
            raise argparse.ArgumentTypeError(f"must be {'nonnegative' if allow_zero else 'positive'}, got {text!r}")
        return v

    return conv


def _real():
    def conv(text):
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
        if not math.isfinite(v):
            raise argparse.ArgumentTypeError("must be finite")
        return v

    return conv


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="liouville", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help):
        sp = sub.add_parser(name, help=help)
        sp.set_defaults(func=fn)
        sp.add_argument("--format", choices=["json", "csv"], default="json")
        sp.add_argument("--output", default=None, help="file path (default: stdout)")
        return sp

    def alpha(sp):
        sp.add_argument("--alpha", type=_positive(), required=True)

    def lam(sp, required=True):
        sp.add_argument("--lambda", dest="lam", type=_positive(), required=required)

    def pde(sp, nr=128, nt=128):
        sp.add_argument("--nr", type=_positive(integer=True), default=nr)
        sp.add_argument("--nt", type=_positive(integer=True), default=nt)
        sp.add_argument("--grading", choices=["uniform", "graded"], default="uniform")
        sp.add_argument("--tol", type=_positive(), default=1e-10)

    sp = add("critical", _critical, "multistart census of critical configurations")
    alpha(sp)
    sp.add_argument("--m", type=_positive(integer=True), required=True)
    sp.add_argument("--restarts", type=_positive(integer=True), default=200)
    sp.add_argument("--seed", type=_positive(integer=True, allow_zero=True), default=0)

    sp = add("hessian", _hessian, "mode blocks and spectrum of the polygon Hessian")
    alpha(sp)
    sp.add_argument("--m", type=_positive(integer=True), required=True)

    sp = add("poly-check", _poly_check, "polynomial identity at the critical polygon")
    alpha(sp)
    sp.add_argument("--m", type=_positive(integer=True), required=True)
    sp.add_argument("--theta0", type=_real(), default=0.0)

    sp = add("limit-poly", _limit_poly, "limit-system identity and root structure")
    sp.add_argument("--p", type=_positive(integer=True), required=True)
    sp.add_argument("--t", type=_real(), default=0.0)
    sp.add_argument("--s", type=_real(), default=0.0)

    sp = add("radial", _radial, "both radial solutions at one coupling")
    alpha(sp)
    lam(sp)

    sp = add("bifurcate", _bifurcate, "radial bifurcation diagram on a uniform lambda grid")
    alpha(sp)
    sp.add_argument("--lambda-min", type=_positive(), required=True)
    sp.add_argument("--lambda-max", type=_positive(), required=True)
    sp.add_argument("--steps", type=_positive(integer=True), default=31)

    sp = add("modes", _modes, "Fourier-mode boundary values and degeneracy loci")
    alpha(sp)
    lam(sp)

    sp = add("pde2d-solve", _pde2d_solve, "Newton solve of the 2-D problem")
    alpha(sp)
    lam(sp)
    pde(sp, 64, 64)
    sp.add_argument("--sector-m", type=_positive(integer=True), default=1)
    sp.add_argument("--init", choices=["zero", "minimal", "singular"], default="zero")
    sp.add_argument("--symmetry", choices=["none", "even"], default="none")

    sp = add("pde2d-continue", _pde2d_continue, "seed a non-radial branch and continue it in lambda")
    alpha(sp)
    pde(sp)
    sp.add_argument("--sector-m", type=_positive(integer=True), default=1)
    sp.add_argument("--k", type=_positive(integer=True), default=1)
    sp.add_argument("--sign", type=float, choices=[1.0, -1.0], default=1.0)
    sp.add_argument("--lambda-from", type=_positive(), default=5.8)
    sp.add_argument("--lambda-to", type=_positive(), default=0.5)
    sp.add_argument("--steps", type=_positive(integer=True), default=40)

    sp = add("power-check", _power_check, "power-map equivariance on a radial field")
    alpha(sp)
    lam(sp)
    pde(sp, 64, 64)
    sp.set_defaults(grading="graded", sector_m=1)
    sp.add_argument("--m", type=_positive(integer=True), default=2)
    sp.add_argument("--branch", choices=["minimal", "singular"], default="singular")

    sp = add("count", _count, "number of solution classes at small lambda")
    alpha(sp)
    return ap


def dispatch(args) -> int:
    obj, text = args.func(args)
    if args.format == "csv":
        out = text
    else:
        out = canonical_json(obj) + "\n"
    emit(out, args.output)
    return 0


def _fail(exc, flag=None):
    err = {"code": getattr(exc, "code", "internal_error"), "message": str(exc), "flag": flag}
    sys.stderr.write(canonical_json({"error": err}) + "\n")


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return dispatch(args)
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    except UsageError as exc:
        _fail(exc, exc.flag)
        return 1
    except InternalInconsistency as exc:
        _fail(exc)
        return 2
    except LiouvilleError as exc:
        _fail(exc)
        return 1
    except Exception as exc:  # noqa: BLE001
        _fail(exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
