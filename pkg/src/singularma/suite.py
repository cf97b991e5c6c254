"""Config-driven check runner producing CSV data and a JSON summary."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable

import numpy as np

from . import catalog, quadrature, rates, regularity, viscosity, wirtinger
from .catalog import FamilyParams

SCHEMA = 1

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class ConfigError(ValueError):
    """Malformed or inadmissible suite configuration."""


@dataclass
class CheckReport:
    id: str
    kind: str
    provenance: str
    measured: dict
    tolerance: dict
    verdict: str  # pass | fail | inconclusive
    informational: bool = False
    runtime: float = 0.0

    def summary(self) -> dict:
        # runtime is kept out of the summary so reruns compare byte for byte
        return {
            "id": self.id,
            "kind": self.kind,
            "provenance": self.provenance,
            "measured": _jsonable(self.measured),
            "tolerance": _jsonable(self.tolerance),
            "verdict": self.verdict,
            "informational": self.informational,
        }


@dataclass
class CheckOutput:
    measured: dict
    tolerance: dict
    passed: bool | None  # None -> inconclusive
    tables: dict[str, tuple[list[str], list[tuple]]] = field(default_factory=dict)
    sidecars: dict[str, dict] = field(default_factory=dict)


@dataclass
class SuiteConfig:
    checks: list[dict]
    output: str = "out"
    seed: int = 0
    jobs: int | None = None


# ---------------------------------------------------------------- helpers


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return repr(x)
    return x


def fmt(x) -> str:
    """Round-trip decimal text for numbers."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (complex, np.complexfloating)):
        return repr(complex(x))
    return str(x)


def csv_text(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def params_from(spec: dict) -> FamilyParams:
    p = spec.get("params", {})
    return FamilyParams(
        n=int(p.get("n", 2)),
        beta=p.get("beta"),
        gamma=p.get("gamma"),
        eps=float(p.get("eps", 0.0)),
    )


def _family(spec: dict):
    fam = catalog.as_family(spec.get("family"))
    catalog.check_params(fam, params_from(spec))
    return fam


# ---------------------------------------------------------------- checks


def _random_smooth_points(n, count, rng, lo=0.2, hi=0.7):
    # moduli stay away from the locus and from the EX1 blow-up circle |z1| = 1
    r = rng.uniform(lo, hi, (count, n))
    a = rng.uniform(0, 2 * math.pi, (count, n))
    return r * np.exp(1j * a)


def check_closed_form(spec, seed, jobs):
    fam = _family(spec)
    base = params_from(spec)
    count = int(spec.get("points", 1000))
    tol_fd = float(spec.get("tol_fd", 1e-5))
    tol_rhs = float(spec.get("tol_rhs", 1e-12))
    eps_list = [float(e) for e in spec.get("eps", [0.0])]
    rng = np.random.default_rng(seed)
    rows, fd_max, rhs_max = [], 0.0, 0.0
    for eps in eps_list:
        p = base.with_eps(eps)
        z = _random_smooth_points(p.n, count, rng)
        closed = catalog.ma_det_closed(fam, p, z)
        jet = wirtinger.fd_jet_family(fam, p, z)
        fd = wirtinger.ma_det(jet.hess)
        rel = float(np.max(np.abs(fd - closed) / np.maximum(1.0, np.abs(closed))))
        fd_max = max(fd_max, rel)
        rhs_err = math.nan
        if eps == 0:
            hess_det = wirtinger.ma_det(catalog.jet_closed(fam, p, z).hess)
            f = catalog.rhs(fam, p, z)
            rhs_err = float(max(np.max(np.abs(closed - f)), np.max(np.abs(hess_det - f))))
            rhs_max = max(rhs_max, rhs_err)
        rows.append((eps, count, rel, rhs_err))
    passed = fd_max < tol_fd and rhs_max < tol_rhs
    return CheckOutput(
        {"max_rel_fd_error": fd_max, "max_rhs_error": rhs_max},
        {"rel_fd": tol_fd, "rhs": tol_rhs},
        passed,
        {"": (["eps", "points", "max_rel_fd_error", "max_rhs_error"], rows)},
    )


def check_hn_identity(spec, seed, jobs):
    ns = [int(k) for k in spec.get("n", [2, 3, 4, 5, 6])]
    m = int(spec.get("points", 100))
    tol = float(spec.get("tol", 1e-10))
    r = np.linspace(0.0, 1.0, m + 2)[1:-1]
    rows, worst, positive = [], 0.0, True
    for n in ns:
        h, h1, h2 = catalog.hn_eval(n, r)
        rhs = (-2.0) ** (n + 1) * r * np.log(r) ** (n - 1)
        err = float(np.max(np.abs(r * h2 + h1 - rhs)))
        pos = bool(np.all(h1 > 0))
        worst = max(worst, err)
        positive &= pos
        rows.append((n, err, pos, float(np.min(h1))))
    return CheckOutput(
        {"max_ode_residual": worst, "derivative_positive": positive},
        {"ode": tol},
        worst < tol and positive,
        {"": (["n", "max_ode_residual", "derivative_positive", "min_derivative"], rows)},
    )


def _eps_grid(spec):
    g = spec.get("eps_grid")
    if g is None:
        return rates.DEFAULT_EPS_GRID
    if isinstance(g, dict):
        return tuple(float(e) for e in np.geomspace(g["start"], g["stop"], int(g["count"])))
    return tuple(float(e) for e in g)


def _domain(spec, n):
    radii = spec.get("domain")
    return quadrature.DomainBox(tuple(radii)) if radii else quadrature.DomainBox((0.5,) + (1.0,) * (n - 1))


def _sweep(spec, metric, jobs):
    fam = _family(spec)
    p = params_from(spec)
    return rates.eps_sweep(fam, p, metric, _eps_grid(spec), _domain(spec, p.n), workers=jobs)


def _table(t: rates.SweepTable):
    return (["eps", "value", "err_est"], list(zip(t.eps, t.value, t.err_est)))


def check_rate_fit(spec, seed, jobs):
    t = _sweep(spec, spec.get("metric", "l1_residual"), jobs)
    rep = rates.fit_rate(t, spec.get("model", "logpower"))
    best = rep.best
    lo, hi = spec["exponent_range"]
    r2min = float(spec.get("r_squared_min", 0.98))
    measured = {
        "exponent": best.exponent,
        "r_squared": best.r_squared,
        "initial_fit": rep.initial._asdict(),
        "refit": None if rep.refit is None else rep.refit._asdict(),
    }
    passed = lo <= best.exponent <= hi and best.r_squared >= r2min
    meta = dict(t.meta, fit=json.loads(rep.to_json()))
    return CheckOutput(measured, {"exponent_range": [lo, hi], "r_squared_min": r2min}, passed,
                       {"": _table(t)}, {"": meta})


def check_sweep_decay(spec, seed, jobs):
    t = _sweep(spec, spec["metric"], jobs)
    mono = rates.monotone_verdict(t.value, "decreasing").verdict
    final = float(t.value[-1])
    below = spec.get("final_below")
    passed = mono and (below is None or final < below)
    return CheckOutput({"monotone_decreasing": mono, "final_value": final, "values": list(t.value)},
                       {"final_below": below}, passed, {"": _table(t)}, {"": t.meta})


def check_delta_threshold(spec, seed, jobs):
    lower = _sweep(spec, spec["below_metric"], jobs)
    upper = _sweep(spec, spec["above_metric"], jobs)
    last = int(spec.get("last", 4))
    below = float(spec.get("final_below", 1e-2))
    dec = rates.monotone_verdict(lower.value, "decreasing").verdict
    nondec = rates.monotone_verdict(upper.value, "nondecreasing", last=last).verdict
    final = float(lower.value[-1])
    measured = {
        "below_monotone_decreasing": dec,
        "below_final_value": final,
        "above_nondecreasing_tail": nondec,
        "below_values": list(lower.value),
        "above_values": list(upper.value),
    }
    return CheckOutput(measured, {"final_below": below, "tail_points": last}, dec and final < below and nondec,
                       {"below": _table(lower), "above": _table(upper)},
                       {"below": lower.meta, "above": upper.meta})


def check_sobolev(spec, seed, jobs):
    fam = _family(spec)
    p = params_from(spec)
    depth = int(spec.get("depth", 40))
    res = quadrature.sobolev_probe(fam, p, int(spec["order"]), float(spec["exponent"]), quadrature.default_annuli(depth))
    expected = spec["expect"]
    allowed = {expected} | set(spec.get("also_accept", []))
    got = res.classification
    if got in allowed:
        passed = True
    else:
        passed = None if got == "inconclusive" else False
    v = res.verdict
    rows = list(zip(res.annuli[:-1], res.partial_sums))
    return CheckOutput(
        {"classification": got, "model": v.model, "tail_ratio": v.tail_ratio, "rate": v.rate, "depth": depth},
        {"expect": expected},
        passed,
        {"": (["annulus_outer", "partial_sum"], rows)},
    )


def _radii(spec, default):
    g = spec.get("radii")
    if g is None:
        return default
    if isinstance(g, dict):
        return np.geomspace(g["start"], g["stop"], int(g["count"]))
    return np.asarray(g, dtype=float)


def check_holder(spec, seed, jobs):
    fam = _family(spec)
    p = params_from(spec)
    s = regularity.modulus(fam, p, _radii(spec, np.geomspace(1e-2, 1e-8, 13)), workers=jobs)
    fit = regularity.holder_fit(s)
    measured = {"alpha": fit.alpha, "r_squared": fit.r_squared}
    tol = {}
    passed = True
    if "alpha" in spec:
        a, da = float(spec["alpha"]), float(spec["alpha_tol"])
        tol = {"alpha": a, "alpha_tol": da}
        passed = abs(fit.alpha - a) <= da
    if "alpha_below" in spec:
        tol["alpha_below"] = float(spec["alpha_below"])
        passed = passed and fit.alpha < float(spec["alpha_below"])
    return CheckOutput(measured, tol, passed, {"": (["r", "omega"], s.rows())})


def check_dini(spec, seed, jobs):
    fam = _family(spec)
    p = params_from(spec)
    s = regularity.modulus(fam, p, _radii(spec, np.geomspace(1e-2, 1e-8, 13)), workers=jobs)
    d = regularity.dini_test(s)
    expected = spec["expect"]
    passed = None if d.classification == "inconclusive" else d.classification == expected
    return CheckOutput(
        {"classification": d.classification, "extrapolation": d.extrapolation, "final_partial_integral": float(d.partial_integrals[-1])},
        {"expect": expected},
        passed,
        {"": (["r", "omega"], s.rows()), "integrals": (["r0", "partial_integral"], list(zip(d.r0, d.partial_integrals)))},
    )


def _parse_point(p):
    return tuple(complex(str(c).replace(" ", "").replace("i", "j")) for c in p)


def check_supersolution(spec, seed, jobs):
    fam = _family(spec)
    p = params_from(spec)
    tol = float(spec.get("tol", 1e-8))
    rows, worst, ok, vacuous = [], math.inf, True, 0
    for pt in spec["points"]:
        rep = viscosity.supersolution_test(fam, p, _parse_point(pt), int(spec.get("jets", 200)),
                                           seed=seed, tol=tol, M=float(spec.get("M", 10.0)))
        rows.append((";".join(repr(c) for c in rep.point), rep.n_jets, rep.n_accepted, rep.worst_margin,
                     rep.max_tangent_diag, rep.verdict))
        worst = min(worst, rep.worst_margin)
        ok &= rep.verdict == "pass"
        vacuous += rep.verdict == "vacuous"
    return CheckOutput({"worst_margin": worst, "vacuous_points": vacuous}, {"margin": -tol}, ok,
                       {"": (["point", "jets", "accepted", "worst_margin", "max_tangent_diag", "verdict"], rows)})


def check_contact(spec, seed, jobs):
    fam = _family(spec)
    p = params_from(spec)
    radii = _radii(spec, np.geomspace(1e-2, 1e-6, 5))
    res = viscosity.no_upper_contact(fam, p, _parse_point(spec["point"]), float(spec.get("M", 10.0)), radii)
    at = float(spec.get("at", 1e-3))
    idx = int(np.argmin(np.abs(res.radii - at)))
    g_at = float(res.growth[idx])
    bound = float(spec.get("g_at_least", 15.8))
    decades = math.log10(res.radii[0] / res.radii[-1])
    passed = res.verdict and g_at >= bound and decades >= float(spec.get("decades", 4)) - 1e-9
    return CheckOutput({"verdict": res.verdict, "g_at": g_at, "decades": decades},
                       {"g_at_least": bound, "at": at}, passed,
                       {"": (["r", "g"], list(zip(res.radii, res.growth)))})


def check_weak(spec, seed, jobs):
    fam = _family(spec)
    p = params_from(spec)
    eps = _eps_grid(spec)
    bump = rates.default_bump(p.n)
    errs = quadrature.weak_convergence(fam, p, bump, eps)
    l1 = rates.eps_sweep(fam, p, "l1_residual", eps, bump.support_box(), workers=jobs)
    at = float(spec.get("at", 1e-8))
    below = float(spec.get("below", 1e-3))
    rows, bounded = [], True
    for w, v, ve in zip(errs, l1.value, l1.err_est):
        b = bump.sup * v
        ok = w.error <= b + bump.sup * ve + w.err_est
        bounded &= ok
        rows.append((w.eps, w.error, w.err_est, b, ok))
    i = int(np.argmin(np.abs(np.log(np.asarray(eps) / at))))
    mono = rates.monotone_verdict([w.error for w in errs], "decreasing").verdict
    passed = bounded and errs[i].error < below and mono
    return CheckOutput({"bounded": bounded, "error_at": errs[i].error, "monotone_decreasing": mono},
                       {"below": below, "at": at}, passed,
                       {"": (["eps", "weak_error", "err_est", "l1_bound", "bounded"], rows)})


def check_psh(spec, seed, jobs):
    fam = _family(spec)
    p = params_from(spec)
    R1, R2, k = spec.get("grid", [0.7, 2.0, 20])
    grid = viscosity.product_grid(float(R1), float(R2), int(k), p.n)
    rows, ok = [], True
    for pair in spec["eps_pairs"]:
        v = viscosity.psh_monotone_check(fam, p, tuple(pair), grid)
        ok &= v
        rows.append((pair[0], pair[1], grid.shape[0], v))
    return CheckOutput({"all_decreasing": ok}, {"slack": 1e-12}, ok,
                       {"": (["eps1", "eps2", "grid_points", "decreasing"], rows)})


CHECKS: dict[str, Callable] = {
    "closed_form": check_closed_form,
    "hn_identity": check_hn_identity,
    "rate_fit": check_rate_fit,
    "sweep_decay": check_sweep_decay,
    "delta_threshold": check_delta_threshold,
    "sobolev": check_sobolev,
    "holder": check_holder,
    "dini": check_dini,
    "supersolution": check_supersolution,
    "contact": check_contact,
    "weak": check_weak,
    "psh": check_psh,
}

_NO_FAMILY = {"hn_identity"}


# ---------------------------------------------------------------- config


def load_config(source=None) -> SuiteConfig:
    """Parse and validate a config (path, dict or ``None`` for the bundled one)."""
    if source is None:
        text = resources.files("singularma").joinpath("data/default.json").read_text()
        raw = json.loads(text)
    elif isinstance(source, dict):
        raw = source
    else:
        try:
            raw = json.loads(Path(source).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{source}: invalid JSON: {exc}") from None
    if not isinstance(raw, dict) or raw.get("schema") != SCHEMA:
        raise ConfigError(f"config must be an object with \"schema\": {SCHEMA}")
    checks = raw.get("checks")
    if not isinstance(checks, list) or not checks:
        raise ConfigError("config needs a nonempty \"checks\" list")
    seen = set()
    for c in checks:
        cid = c.get("id")
        if not cid or cid in seen:
            raise ConfigError(f"check ids must be unique and nonempty, got {cid!r}")
        seen.add(cid)
        kind = c.get("kind")
        if kind not in CHECKS:
            raise ConfigError(f"check {cid}: unknown kind {kind!r}")
        if not c.get("provenance"):
            raise ConfigError(f"check {cid}: provenance is required")
        if kind not in _NO_FAMILY:
            try:
                _family(c)
            except (catalog.DomainError, TypeError, ValueError) as exc:
                raise ConfigError(f"check {cid}: {exc}") from None
    return SuiteConfig(checks, str(raw.get("output", "out")), int(raw.get("seed", 0)), raw.get("jobs"))


def run_check(spec: dict, seed: int, jobs: int) -> tuple[CheckReport, CheckOutput | None]:
    t0 = time.perf_counter()
    fn = CHECKS[spec["kind"]]
    try:
        out = fn(spec, int(spec.get("seed", seed)), jobs)
        verdict = "inconclusive" if out.passed is None else ("pass" if out.passed else "fail")
        measured, tol = out.measured, out.tolerance
    except KeyError as exc:
        raise ConfigError(f"check {spec['id']}: missing field {exc}") from None
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        out, verdict = None, "fail"
        measured, tol = {"error": f"{type(exc).__name__}: {exc}"}, {}
    rep = CheckReport(spec["id"], spec["kind"], spec["provenance"], measured, tol, verdict,
                      bool(spec.get("informational", False)), time.perf_counter() - t0)
    return rep, out


def _write_outputs(outdir: Path, rep: CheckReport, out: CheckOutput | None):
    if out is None:
        return
    for suffix, (header, rows) in out.tables.items():
        name = rep.id + (f"_{suffix}" if suffix else "")
        (outdir / f"{name}.csv").write_text(csv_text(header, rows), newline="")
    for suffix, meta in out.sidecars.items():
        name = rep.id + (f"_{suffix}" if suffix else "")
        (outdir / f"{name}.json").write_text(json.dumps(_jsonable(meta), indent=2, sort_keys=True) + "\n")


def run_suite(config: SuiteConfig, outdir=None, jobs: int | None = None, only=None) -> tuple[list[CheckReport], int]:
    """Run every check; returns reports in config order and the exit code."""
    jobs = jobs or config.jobs or os.cpu_count() or 1
    outdir = Path(outdir or config.output)
    checks = [c for c in config.checks if only is None or c["id"] in only]
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError:
        return [], EXIT_IO
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(lambda c: run_check(c, config.seed, jobs), checks))
    reports = [r for r, _ in results]
    try:
        for rep, out in results:
            _write_outputs(outdir, rep, out)
        summary = [r.summary() for r in reports]
        (outdir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        stamp = time.strftime("%Y-%m-%dT%H:%M:%S")
        with (outdir / "runtime.log").open("a") as fh:
            for r in reports:
                fh.write(f"{stamp} {r.id} {r.verdict} {r.runtime!r}s\n")
    except OSError:
        return reports, EXIT_IO
    failed = any(r.verdict != "pass" and not r.informational for r in reports)
    return reports, EXIT_FAIL if failed else EXIT_PASS
