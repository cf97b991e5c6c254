"""Epsilon sweeps of convergence metrics and rate fitting."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from . import catalog
from .catalog import FamilyParams
from .quadrature import (
    Bump,
    DomainBox,
    IntegralResult,
    NormKind,
    QuadratureSpec,
    family_spec,
    norm_estimate,
    residual_field,
    weak_convergence,
)

DEFAULT_EPS_GRID = tuple(float(e) for e in np.geomspace(1e-2, 1e-10, 9))


@dataclass(frozen=True)
class Metric:
    """``l1_residual``, ``lp_residual(p)``, ``lloglp_residual(p)`` or ``weak_error``."""

    name: str
    p: float | None = None

    @classmethod
    def parse(cls, text: str) -> "Metric":
        text = text.strip()
        if text in ("l1_residual", "weak_error"):
            return cls(text)
        m = re.fullmatch(r"(lp_residual|lloglp_residual)\(([^)]+)\)", text)
        if not m:
            raise ValueError(f"unknown metric {text!r}")
        return cls(m.group(1), float(m.group(2)))

    def __str__(self) -> str:
        return self.name if self.p is None else f"{self.name}({self.p!r})"

    def kind(self) -> NormKind:
        if self.name == "l1_residual":
            return NormKind.lp(1.0)
        if self.name == "lp_residual":
            return NormKind.lp(self.p)
        if self.name == "lloglp_residual":
            return NormKind.llogl(self.p)
        raise ValueError(f"{self.name} is not a norm metric")


@dataclass
class SweepTable:
    """Rows ``(eps, value, err_est)`` with ``eps`` strictly decreasing."""

    eps: np.ndarray
    value: np.ndarray
    err_est: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.eps = np.asarray(self.eps, dtype=float)
        self.value = np.asarray(self.value, dtype=float)
        self.err_est = np.asarray(self.err_est, dtype=float)
        if not (self.eps.shape == self.value.shape == self.err_est.shape):
            raise ValueError("column lengths differ")
        if np.any(np.diff(self.eps) >= 0):
            raise ValueError("eps must be strictly decreasing")
        if not (np.all(np.isfinite(self.value)) and np.all(np.isfinite(self.err_est))):
            raise ValueError("sweep values must be finite")

    def __len__(self):
        return self.eps.size

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(["eps", "value", "err_est"])
        for row in zip(self.eps, self.value, self.err_est):
            w.writerow([repr(float(x)) for x in row])
        return buf.getvalue()

    def write(self, path) -> None:
        """CSV at ``path`` plus a ``.json`` metadata sidecar."""
        path = Path(path)
        path.write_text(self.to_csv(), newline="")
        path.with_suffix(".json").write_text(json.dumps(self.meta, indent=2, sort_keys=True) + "\n")

    @classmethod
    def read(cls, path) -> "SweepTable":
        path = Path(path)
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["eps", "value", "err_est"]:
            raise ValueError(f"{path}: expected header eps,value,err_est")
        data = np.array([[float(x) for x in r] for r in rows[1:]]).reshape(-1, 3)
        side = path.with_suffix(".json")
        meta = json.loads(side.read_text()) if side.exists() else {}
        return cls(data[:, 0], data[:, 1], data[:, 2], meta)


def default_bump(n: int = 2) -> Bump:
    """Bump with support in ``D_{1/2} x D_1^(n-1)``."""
    return Bump(tuple(0j for _ in range(n)), (0.5,) + (1.0,) * (n - 1))


def eps_sweep(
    family,
    params: FamilyParams,
    metric,
    eps_grid: Sequence[float] = DEFAULT_EPS_GRID,
    dom: DomainBox | None = None,
    spec: QuadratureSpec | None = None,
    phi: Bump | None = None,
    workers: int = 1,
) -> SweepTable:
    """One row per ``eps``; rows are independent and computed with the same spec."""
    fam = catalog.check_params(family, params)
    metric = Metric.parse(metric) if isinstance(metric, str) else metric
    eps = np.asarray(eps_grid, dtype=float)
    if eps.size == 0 or np.any(np.diff(eps) >= 0) or np.any(eps <= 0):
        raise ValueError("eps grid must be positive and strictly decreasing")
    for e in eps:
        catalog.check_params(fam, params.with_eps(e))
    n = params.n
    dom = dom or DomainBox((0.5,) + (1.0,) * (n - 1))
    if dom.n != n:
        raise ValueError("domain dimension does not match the family")
    if fam in (catalog.Family.EX1, catalog.Family.EX1_ND) and dom.radii[0] >= 1 - eps.max():
        raise catalog.DomainError("domain leaves |z1| < 1 - eps")
    spec = spec or QuadratureSpec()

    def row(e) -> IntegralResult:
        p = params.with_eps(float(e))
        if metric.name == "weak_error":
            w = weak_convergence(fam, p, phi or default_bump(n), [float(e)], spec)[0]
            return IntegralResult(w.error, w.err_est)
        return norm_estimate(residual_field(fam, p), metric.kind(), dom, family_spec(fam, p, spec))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            res = list(pool.map(row, eps))
    else:
        res = [row(e) for e in eps]
    meta = {
        "family": fam.value,
        "params": {k: v for k, v in asdict(params).items() if k != "eps"},
        "metric": str(metric),
        "domain": {"radii": list(dom.radii), "r_min": dom.r_min, "inner": list(dom.inner) if dom.inner else None},
        "spec": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(spec).items() if k != "workers"},
    }
    if metric.name == "weak_error":
        b = phi or default_bump(n)
        meta["bump"] = {"center": [repr(complex(c)) for c in b.center], "radii": list(b.radii), "amplitude": b.amplitude}
    return SweepTable(eps, [r.value for r in res], [r.err_est for r in res], meta)


class RateFit(NamedTuple):
    model: str  # power | logpower
    exponent: float
    amplitude: float
    r_squared: float
    n_points: int

    def to_json(self) -> str:
        return json.dumps(self._asdict(), sort_keys=True)


class FitReport(NamedTuple):
    """The fit on all points and, when its r^2 is below 0.99, the refit without the largest eps."""

    initial: RateFit
    refit: RateFit | None

    @property
    def best(self) -> RateFit:
        return self.refit if self.refit is not None else self.initial

    def to_json(self) -> str:
        return json.dumps(
            {"initial": self.initial._asdict(), "refit": None if self.refit is None else self.refit._asdict()},
            sort_keys=True,
        )


def _fit(x, y, model) -> RateFit:
    if model == "power":
        X = np.log(x)
        sign = 1.0
    elif model == "logpower":
        X = np.log(np.log(1.0 / x))
        sign = -1.0
    else:
        raise ValueError(f"unknown model {model!r}")
    Y = np.log(y)
    if np.ptp(X) == 0:
        raise ValueError("degenerate spread in x")
    slope, icpt = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + icpt)
    ss = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 if ss == 0 else min(1.0, max(0.0, 1.0 - float(resid @ resid) / ss))
    return RateFit(model, float(sign * slope), float(math.exp(icpt)), r2, int(x.size))


def fit_rate(data, model: str = "logpower", refit_below: float = 0.99) -> FitReport:
    """Fit ``y = c x^a`` (power) or ``y = c (log 1/x)^-q`` (logpower).

    ``data`` is a :class:`SweepTable` or a pair of sequences ``(x, y)``.
    """
    if isinstance(data, SweepTable):
        x, y = data.eps, data.value
    else:
        x, y = (np.asarray(a, dtype=float) for a in data)
    if x.size < 4 or x.shape != y.shape:
        raise ValueError("need at least 4 (x, y) points")
    if np.any(y <= 0) or np.any(x <= 0):
        raise ValueError("fit needs positive values")
    if model == "logpower" and np.any(x >= 1):
        raise ValueError("logpower model needs x < 1")
    order = np.argsort(-x)
    x, y = x[order], y[order]
    first = _fit(x, y, model)
    second = None
    if first.r_squared < refit_below and x.size > 4:
        second = _fit(x[1:], y[1:], model)
    return FitReport(first, second)


class MonotoneVerdict(NamedTuple):
    verdict: bool
    kind: str
    window: int


def monotone_verdict(values: Sequence[float], kind: str = "decreasing", last: int | None = None) -> MonotoneVerdict:
    """Strict decrease, or non-decrease, over the trailing ``last`` values (all by default)."""
    v = np.asarray(values, dtype=float)
    if last is not None:
        v = v[-last:]
    d = np.diff(v)
    if kind == "decreasing":
        ok = bool(np.all(d < 0))
    elif kind == "nondecreasing":
        ok = bool(np.all(d >= 0))
    else:
        raise ValueError("kind must be 'decreasing' or 'nondecreasing'")
    return MonotoneVerdict(ok, kind, int(v.size))
