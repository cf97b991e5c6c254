"""Command-line entry point."""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import catalog, quadrature, rates, regularity, suite, viscosity, wirtinger
from .catalog import FamilyParams
from .suite import EXIT_CONFIG, EXIT_FAIL, EXIT_IO, EXIT_PASS, csv_text, fmt


class UsageError(ValueError):
    pass


def parse_point(text: str) -> tuple[complex, ...]:
    """``"0,1+2i"`` -> ``(0j, (1+2j))``; ``i`` and ``j`` both denote the imaginary unit."""
    try:
        return tuple(complex(part.strip().replace(" ", "").replace("i", "j")) for part in text.split(","))
    except ValueError:
        raise UsageError(f"cannot parse point {text!r}") from None


def parse_range(text: str) -> np.ndarray:
    """``start:stop:count`` -> geometric sequence."""
    try:
        a, b, k = text.split(":")
        return np.geomspace(float(a), float(b), int(k))
    except ValueError:
        raise UsageError(f"expected start:stop:count, got {text!r}") from None


def parse_floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None


def _params(args, eps=None) -> FamilyParams:
    e = args.eps if eps is None else eps
    e = parse_floats(e)[0] if isinstance(e, str) else float(e or 0.0)
    p = FamilyParams(n=args.n, beta=args.beta, gamma=args.gamma, eps=e)
    catalog.check_params(args.family, p)
    return p


def _emit(args, header, rows):
    text = csv_text(header, rows)
    if args.out:
        Path(args.out).write_text(text, newline="")
    else:
        sys.stdout.write(text)


def _points(args, n):
    if args.point:
        return np.array([parse_point(args.point)])
    rng = np.random.default_rng(args.seed)
    r = rng.uniform(0.2, 0.7, (args.grid or 10, n))
    return r * np.exp(1j * rng.uniform(0, 2 * math.pi, r.shape))


# ---------------------------------------------------------------- commands


def cmd_families(args):
    rows = [(f.family.value, f.domain, f.params, f.rhs) for f in catalog.list_families()]
    _emit(args, ["family", "domain", "params", "rhs"], rows)
    return EXIT_PASS


def cmd_eval(args):
    p = _params(args)
    z = _points(args, p.n)
    vals = np.atleast_1d(catalog.evaluate(args.family, p, z))
    _emit(args, ["point", "value"], [(";".join(fmt(c) for c in pt), v) for pt, v in zip(z, vals)])
    return EXIT_PASS


def cmd_jet(args):
    p = _params(args)
    z = _points(args, p.n)
    jet = wirtinger.fd_jet_family(args.family, p, z) if args.fd else catalog.jet_closed(args.family, p, z)
    rows = []
    for i, pt in enumerate(z):
        key = ";".join(fmt(c) for c in pt)
        rows.append((key, "value", "", "", float(jet.value[i])))
        for a in range(p.n):
            rows.append((key, "grad", a + 1, "", complex(jet.grad[i, a])))
        for a in range(p.n):
            for b in range(p.n):
                rows.append((key, "hess", a + 1, b + 1, complex(jet.hess[i, a, b])))
    _emit(args, ["point", "part", "i", "j", "entry"], rows)
    return EXIT_PASS


def cmd_verify(args):
    if args.what == "det":
        p = _params(args)
        z = _points(args, p.n)
        closed = np.atleast_1d(catalog.ma_det_closed(args.family, p, z))
        fd = np.atleast_1d(wirtinger.ma_det(wirtinger.fd_jet_family(args.family, p, z).hess))
        rel = np.abs(fd - closed) / np.maximum(1.0, np.abs(closed))
        rows = [(";".join(fmt(c) for c in pt), a, b, r) for pt, a, b, r in zip(z, closed, fd, rel)]
        _emit(args, ["point", "closed", "fd", "rel_error"], rows)
        return EXIT_PASS if np.all(rel < (args.tol or 1e-5)) else EXIT_FAIL
    if args.what == "residual":
        p = _params(args)
        z = _points(args, p.n)
        res = np.atleast_1d(catalog.ma_residual_closed(args.family, p, z))
        _emit(args, ["point", "residual"], [(";".join(fmt(c) for c in pt), r) for pt, r in zip(z, res)])
        return EXIT_PASS
    # psh: --eps e1,e2
    e1, e2 = (parse_floats(args.eps) + [None])[:2] if args.eps else (None, None)
    if e2 is None:
        raise UsageError("verify psh needs --eps e1,e2")
    p = _params(args, eps=0.0)
    R1, R2 = (parse_floats(args.domain) if args.domain else [0.7, 2.0])[:2]
    grid = viscosity.product_grid(R1, R2, args.grid or 20, p.n)
    ok = viscosity.psh_monotone_check(args.family, p, (e1, e2), grid)
    _emit(args, ["eps1", "eps2", "grid_points", "decreasing"], [(e1, e2, grid.shape[0], ok)])
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_sweep(args):
    p = _params(args, eps=0.0)
    eps = parse_range(args.eps_grid) if args.eps_grid else rates.DEFAULT_EPS_GRID
    dom = quadrature.DomainBox(tuple(parse_floats(args.domain))) if args.domain else None
    t = rates.eps_sweep(args.family, p, args.metric, eps, dom, workers=args.jobs)
    if args.out:
        t.write(args.out)
    else:
        sys.stdout.write(t.to_csv())
    if args.fit:
        sys.stderr.write(rates.fit_rate(t, args.fit).to_json() + "\n")
    return EXIT_PASS


def cmd_regularity(args):
    p = _params(args)
    radii = parse_range(args.grid_range) if args.grid_range else np.geomspace(1e-2, 1e-8, 13)
    if args.what == "sobolev":
        res = quadrature.sobolev_probe(args.family, p, args.order, args.exponent, quadrature.default_annuli(args.depth))
        _emit(args, ["annulus_outer", "partial_sum"], list(zip(res.annuli[:-1], res.partial_sums)))
        sys.stderr.write(f"classification {res.classification}\n")
        return EXIT_PASS
    s = regularity.modulus(args.family, p, radii, workers=args.jobs)
    _emit(args, ["r", "omega"], s.rows())
    if args.what == "holder":
        fit = regularity.holder_fit(s)
        sys.stderr.write(f"alpha {fmt(fit.alpha)} r_squared {fmt(fit.r_squared)}\n")
    else:
        d = regularity.dini_test(s)
        sys.stderr.write(f"classification {d.classification}\n")
    return EXIT_PASS


def cmd_viscosity(args):
    p = _params(args)
    if not args.point:
        raise UsageError("viscosity checks need --point")
    p0 = parse_point(args.point)
    if args.what == "super":
        rep = viscosity.supersolution_test(args.family, p, p0, args.jets, seed=args.seed, tol=1e-8 if args.tol is None else args.tol, M=args.M, workers=args.jobs)
        _emit(args, ["point", "jets", "accepted", "worst_margin", "max_tangent_diag", "verdict", "seed"],
              [(";".join(fmt(c) for c in rep.point), rep.n_jets, rep.n_accepted, rep.worst_margin,
                rep.max_tangent_diag, rep.verdict, rep.seed)])
        return EXIT_FAIL if rep.verdict == "fail" else EXIT_PASS
    radii = parse_range(args.grid_range) if args.grid_range else np.geomspace(1e-2, 1e-6, 5)
    res = viscosity.no_upper_contact(args.family, p, p0, args.M, radii)
    _emit(args, ["r", "g"], list(zip(res.radii, res.growth)))
    sys.stderr.write(f"no_upper_contact {res.verdict}\n")
    return EXIT_PASS if res.verdict else EXIT_FAIL


def cmd_report(args):
    try:
        cfg = suite.load_config(args.config)
    except OSError as exc:
        sys.stderr.write(f"error: cannot read config: {exc}\n")
        return EXIT_IO
    reports, code = suite.run_suite(cfg, args.out, jobs=args.jobs)
    for r in reports:
        tag = " (informational)" if r.informational else ""
        sys.stdout.write(f"{r.id}: {r.verdict}{tag}\n")
    return code


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--family", default="EX1")
    common.add_argument("--n", type=int, default=2)
    common.add_argument("--beta", type=float)
    common.add_argument("--gamma", type=float)
    common.add_argument("--eps", default=None, help="eps, or eps1,eps2 for verify psh")
    common.add_argument("--point", help="comma-separated complex coordinates, e.g. 0,1+2i")
    common.add_argument("--domain", help="comma-separated polydisc radii")
    common.add_argument("--grid", type=int, help="number of points (eval/jet/verify) or grid side (psh)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, help="tolerance (1e-5 for verify det, 1e-8 for viscosity)")
    common.add_argument("--out", help="output file (directory for report)")
    common.add_argument("--jobs", type=int, default=os.cpu_count() or 1)

    ap = argparse.ArgumentParser(prog="singularma", description="Checks for explicit singular solutions of det(dd-bar u) = f.")
    sub = ap.add_subparsers(dest="cmd", required=True)
    sub.add_parser("families", parents=[common], help="list the catalog").set_defaults(func=cmd_families)
    sub.add_parser("eval", parents=[common], help="evaluate a family").set_defaults(func=cmd_eval)
    j = sub.add_parser("jet", parents=[common], help="closed-form or finite-difference jet")
    j.add_argument("--fd", action="store_true")
    j.set_defaults(func=cmd_jet)
    v = sub.add_parser("verify", parents=[common], help="det | residual | psh")
    v.add_argument("what", choices=["det", "residual", "psh"])
    v.set_defaults(func=cmd_verify)
    s = sub.add_parser("sweep", parents=[common], help="eps sweep of a residual metric")
    s.add_argument("--metric", default="l1_residual")
    s.add_argument("--eps-grid", dest="eps_grid", help="start:stop:count (geometric)")
    s.add_argument("--fit", choices=["power", "logpower"])
    s.set_defaults(func=cmd_sweep)
    r = sub.add_parser("regularity", parents=[common], help="holder | dini | sobolev")
    r.add_argument("what", choices=["holder", "dini", "sobolev"])
    r.add_argument("--radii", dest="grid_range", help="start:stop:count (geometric)")
    r.add_argument("--order", type=int, default=1)
    r.add_argument("--exponent", type=float, default=2.0)
    r.add_argument("--depth", type=int, default=24)
    r.set_defaults(func=cmd_regularity)
    c = sub.add_parser("viscosity", parents=[common], help="super | contact")
    c.add_argument("what", choices=["super", "contact"])
    c.add_argument("--jets", type=int, default=200)
    c.add_argument("--M", type=float, default=10.0)
    c.add_argument("--radii", dest="grid_range", help="start:stop:count (geometric)")
    c.set_defaults(func=cmd_viscosity)
    rp = sub.add_parser("report", parents=[common], help="run a suite config")
    rp.add_argument("--config", help="JSON config; the bundled acceptance config by default")
    rp.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_PASS
    try:
        return args.func(args)
    except (UsageError, suite.ConfigError, catalog.DomainError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
