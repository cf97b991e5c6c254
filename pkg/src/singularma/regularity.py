"""Moduli of continuity, Hoelder fits and Dini classification."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import catalog
from .catalog import Family, FamilyParams
from .quadrature import SeriesVerdict, classify_series


@dataclass(frozen=True)
class Scan:
    """Line ``t -> base + t * direction`` through a point of the singular locus."""

    base: tuple[complex, ...]
    direction: tuple[complex, ...]

    def points(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.asarray(self.base, dtype=complex) + t[..., None] * np.asarray(self.direction, dtype=complex)

    def describe(self) -> str:
        fmt = ",".join
        return f"base=({fmt(repr(complex(b)) for b in self.base)}) direction=({fmt(repr(complex(d)) for d in self.direction)})"


def default_scan(family, params: FamilyParams) -> Scan:
    """Worst-direction scan for each family.

    EX1 families vary ``z1`` at ``z2 = 1`` (real, where the ``|Re z2|^2``
    factor is active); EX2_V, EX3_W and HE vary ``z1`` at ``|z'| = 1``;
    BLOCKI varies ``z2`` at the origin.
    """
    fam = catalog.check_params(family, params)
    n = params.n
    e = lambda k: tuple(1.0 + 0j if i == k else 0j for i in range(n))  # noqa: E731
    if fam is Family.BLOCKI:
        return Scan(tuple(0j for _ in range(n)), e(1))
    return Scan(e(1), e(0))


@dataclass
class ModulusSamples:
    """``omega`` sampled at strictly decreasing radii, after the monotone envelope."""

    r: np.ndarray
    omega: np.ndarray
    locus: str = ""
    scan: str = ""
    raw: np.ndarray | None = None

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        if self.r.shape != self.omega.shape or self.r.ndim != 1:
            raise ValueError("r and omega must be 1-d arrays of equal length")
        if np.any(np.diff(self.r) >= 0) or np.any(self.r <= 0):
            raise ValueError("radii must be positive and strictly decreasing")
        if np.any(self.omega < 0) or not np.all(np.isfinite(self.omega)):
            raise ValueError("omega must be finite and nonnegative")

    @classmethod
    def from_function(cls, omega: Callable, r) -> "ModulusSamples":
        r = np.asarray(r, dtype=float)
        w = np.asarray(omega(r), dtype=float) * np.ones_like(r)
        return cls(r, envelope(w), "analytic", "analytic", w)

    def rows(self):
        return [(float(a), float(b)) for a, b in zip(self.r, self.omega)]


def envelope(omega_raw) -> np.ndarray:
    """Smallest non-decreasing-in-r majorant; radii are in decreasing order."""
    w = np.asarray(omega_raw, dtype=float)
    return np.maximum.accumulate(w[::-1])[::-1]


# pair offsets (in units of r) probed for each radius; includes t = 0 and t = -r
_OFFSETS = np.linspace(-1.5, 0.5, 41)


def modulus(family, params: FamilyParams, radii: Sequence[float], scan: Scan | None = None, workers: int = 1) -> ModulusSamples:
    """``omega(r) = max |u(p) - u(q)|`` over scan pairs with ``|p - q| = r``, enveloped."""
    fam = catalog.check_params(family, params)
    if params.eps != 0:
        raise catalog.DomainError("moduli are measured on the eps = 0 solutions")
    r = np.asarray(radii, dtype=float)
    if r.ndim != 1 or r.size < 2 or np.any(np.diff(r) >= 0) or np.any(r <= 0):
        raise ValueError("radii must be a decreasing sequence of positive numbers")
    scan = scan or default_scan(fam, params)
    if len(scan.base) != params.n or len(scan.direction) != params.n:
        raise ValueError("scan dimension does not match the family")
    if catalog.singular_locus(fam, params).distance(np.asarray(scan.base, dtype=complex)) != 0:
        raise catalog.DomainError("scan base point is not on the singular locus")
    u = catalog.field(fam, params)
    dnorm = float(np.linalg.norm(np.asarray(scan.direction, dtype=complex)))
    if dnorm == 0:
        raise ValueError("scan direction must be nonzero")

    def one(radius):
        t = radius * _OFFSETS / dnorm
        a = u(scan.points(t))
        b = u(scan.points(t + radius / dnorm))
        return float(np.max(np.abs(b - a)))

    try:
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                raw = np.array(list(pool.map(one, r)))
        else:
            raw = np.array([one(x) for x in r])
    except catalog.DomainError as exc:
        raise catalog.DomainError(f"scan leaves the domain: {exc}") from None
    locus = repr(catalog.singular_locus(fam, params).components)
    return ModulusSamples(r, envelope(raw), locus, scan.describe(), raw)


class HolderFit(NamedTuple):
    alpha: float
    r_squared: float
    amplitude: float


def holder_fit(samples: ModulusSamples) -> HolderFit:
    """Least-squares slope of ``log omega`` against ``log r``."""
    r, w = samples.r, samples.omega
    if r.size < 5:
        raise ValueError("need at least 5 samples")
    if math.log10(r[0] / r[-1]) < 3 - 1e-12:
        raise ValueError("samples must span at least 3 decades")
    if np.any(w <= 0):
        raise ValueError("degenerate samples: omega must be positive to fit a power")
    x, y = np.log(r), np.log(w)
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss == 0 else max(0.0, 1.0 - float(resid @ resid) / ss)
    return HolderFit(float(slope), r2, float(math.exp(icpt)))


# ---------------------------------------------------------------- Dini


def default_r0() -> np.ndarray:
    """``r0 = exp(-exp(t))`` for 25 values ``t`` in ``[0, 6]``.

    In these coordinates ``log log (1/r0)`` is linear, so a modulus
    ``1/log(1/r)`` produces equal increments and divergence is visible
    within a handful of steps.
    """
    return np.exp(-np.exp(np.linspace(0.0, 6.0, 25)))


class DiniResult(NamedTuple):
    classification: str  # dini | not_dini | inconclusive
    r0: np.ndarray
    partial_integrals: np.ndarray
    extrapolation: str
    verdict: SeriesVerdict


def _extrapolator(samples: ModulusSamples):
    """Interpolate ``log omega`` in ``log r``; extend by the better of two fitted laws."""
    r, w = samples.r, samples.omega
    if np.all(w == 0):
        return (lambda x: np.zeros_like(np.asarray(x, dtype=float))), "zero"
    if np.any(w <= 0):
        raise ValueError("omega must be positive where not identically zero")
    lr, lw = np.log(r), np.log(w)
    m = max(5, r.size // 2)
    tr, tw = lr[-m:], lw[-m:]
    # power law omega = c r^a against log-power law omega = c (log 1/r)^-q
    pa = np.polyfit(tr, tw, 1)
    ll = np.log(-tr)
    pq = np.polyfit(ll, tw, 1)
    rss_p = float(np.sum((tw - np.polyval(pa, tr)) ** 2))
    rss_q = float(np.sum((tw - np.polyval(pq, ll)) ** 2))
    use_power = rss_p <= rss_q
    lo, hi = lr[-1], lr[0]

    def omega(x):
        lx = np.log(np.asarray(x, dtype=float))
        inside = np.interp(lx, lr[::-1], lw[::-1])
        if use_power:
            below = np.polyval(pa, lx)
        else:
            below = np.polyval(pq, np.log(-lx))
        above = lw[0] + (lx - hi) * (pa[0] if use_power else pq[0] / hi)
        out = np.where(lx < lo, below, np.where(lx > hi, above, inside))
        return np.exp(out)

    return omega, "power" if use_power else "logpower"


def dini_test(samples_or_model, r0: Sequence[float] | None = None, nodes: int = 16) -> DiniResult:
    """Classify ``int_0 omega(r) dr / r`` by its partial integrals.

    ``I(r0_k) = int_{r0_k}^{r0_0} omega(r) dr / r`` is computed in the variable
    ``lambda = log(1/r)`` with Gauss-Legendre on each interval of the
    ``r0`` sequence.  The upper limit is the first ``r0``, not 1: moduli such
    as ``1/log(1/r)`` are not integrable against ``dr/r`` at ``r = 1``.
    """
    r0 = default_r0() if r0 is None else np.asarray(r0, dtype=float)
    if r0.ndim != 1 or r0.size < 7 or np.any(np.diff(r0) >= 0) or np.any(r0 <= 0) or r0[0] >= 1:
        raise ValueError("r0 must be >= 7 strictly decreasing radii in (0, 1)")
    if isinstance(samples_or_model, ModulusSamples):
        omega, how = _extrapolator(samples_or_model)
    elif callable(samples_or_model):
        omega, how = samples_or_model, "analytic"
    else:
        raise TypeError("expected ModulusSamples or a callable omega(r)")
    x, w = np.polynomial.legendre.leggauss(nodes)
    lam = -np.log(r0)
    incs = []
    for a, b in zip(lam[:-1], lam[1:]):
        L = 0.5 * (b - a) * x + 0.5 * (a + b)
        vals = np.asarray(omega(np.exp(-L)), dtype=float) * np.ones_like(L)
        if not np.all(np.isfinite(vals)) or np.any(vals < 0):
            raise ValueError("omega must be finite and nonnegative on the r0 range")
        incs.append(0.5 * (b - a) * float(w @ vals))
    S = np.concatenate([[0.0], np.cumsum(incs)])
    v = classify_series(S)
    cls = {"finite": "dini", "divergent": "not_dini"}.get(v.classification, "inconclusive")
    return DiniResult(cls, r0, S, how, v)
