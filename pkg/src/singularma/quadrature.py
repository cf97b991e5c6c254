"""Tensor-product quadrature on polydiscs with geometric grading toward the axes.

Each complex coordinate is integrated in polar form: Gauss-Legendre on radial
panels whose edges shrink geometrically toward ``|z_k| = 0`` and the periodic
trapezoid rule in the angle.  Coordinates declared toric are evaluated at
angle zero and weighted by ``2*pi``.

The grid is cut into cells (the radial panels of the first coordinate).
Cells are independent, may run on a thread pool and are reduced in a fixed
order, so results do not depend on the worker count.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import catalog
from .catalog import FamilyParams


class QuadratureError(ValueError):
    """Integrand returned non-finite samples or the domain is malformed."""


class QuadratureWarning(UserWarning):
    """Error estimate above the requested tolerance."""


class InconclusiveError(RuntimeError):
    """A divergence classification could not be decided; the data is attached."""

    def __init__(self, message, data=None):
        super().__init__(message)
        self.data = data


@dataclass(frozen=True)
class DomainBox:
    """Polydisc ``prod_k {inner_k <= |z_k| <= radii_k}``.

    ``r_min`` raises every inner radius to at least ``r_min``; since every
    catalog locus is a union of coordinate subspaces this excises a
    neighbourhood of the locus.
    """

    radii: tuple[float, ...]
    r_min: float = 0.0
    inner: tuple[float, ...] | None = None

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        object.__setattr__(self, "radii", radii)
        if not radii or any(not (r > 0 and math.isfinite(r)) for r in radii):
            raise QuadratureError("radii must be positive and finite")
        if not 0 <= self.r_min < min(radii):
            raise QuadratureError("r_min must satisfy 0 <= r_min < all radii")
        if self.inner is not None:
            inner = tuple(float(r) for r in self.inner)
            object.__setattr__(self, "inner", inner)
            if len(inner) != len(radii) or any(not 0 <= a < b for a, b in zip(inner, radii)):
                raise QuadratureError("inner radii must satisfy 0 <= inner < radius per coordinate")

    @property
    def n(self) -> int:
        return len(self.radii)

    def lower(self, k: int) -> float:
        a = self.inner[k] if self.inner is not None else 0.0
        return max(a, self.r_min)

    def volume(self) -> float:
        return float(np.prod([math.pi * (b * b - self.lower(k) ** 2) for k, b in enumerate(self.radii)]))

    def contains(self, other: "DomainBox") -> bool:
        return other.n == self.n and all(
            other.radii[k] <= self.radii[k] and other.lower(k) >= self.lower(k) for k in range(self.n)
        )


@dataclass(frozen=True)
class QuadratureSpec:
    """Resolution and reduction policy.

    Parameters
    ----------
    levels : int
        Number of geometric radial panels per coordinate.
    nodes : int
        Gauss-Legendre nodes per radial panel.
    angular : int
        Trapezoid points per circle (ignored for toric coordinates).
    ratio : float
        Geometric grading ratio; panel ``k`` spans ``[b*ratio^(k+1), b*ratio^k]``.
    summation : {"pairwise", "compensated"}
    toric : bool or tuple of int
        ``True`` for all coordinates, or the indices of toric coordinates.
    workers : int
        Thread-pool size for the cells; 1 runs inline.
    """

    levels: int = 40
    nodes: int = 8
    angular: int = 16
    ratio: float = 0.5
    summation: str = "pairwise"
    toric: bool | tuple[int, ...] = False
    workers: int = 1

    def __post_init__(self):
        if self.levels < 1:
            raise QuadratureError("levels must be >= 1")
        if self.nodes < 4 or self.angular < 4:
            raise QuadratureError("point counts must be >= 4")
        if not 0 < self.ratio < 1:
            raise QuadratureError("grading ratio must lie in (0, 1)")
        if self.summation not in ("pairwise", "compensated"):
            raise QuadratureError("summation must be 'pairwise' or 'compensated'")
        if self.workers < 1:
            raise QuadratureError("workers must be >= 1")

    def toric_set(self, n: int) -> frozenset[int]:
        if self.toric is True:
            return frozenset(range(n))
        if self.toric is False or self.toric is None:
            return frozenset()
        return frozenset(int(k) for k in self.toric)

    def coarse(self) -> "QuadratureSpec":
        """The lower resolution used for the error estimate."""
        return replace(
            self,
            levels=max(1, (3 * self.levels) // 4),
            nodes=max(4, self.nodes - 2),
            angular=max(4, self.angular // 2),
        )

    def refine(self) -> "QuadratureSpec":
        """Double the radial resolution."""
        return replace(self, levels=2 * self.levels, nodes=self.nodes)


class IntegralResult(NamedTuple):
    value: float
    err_est: float


# ---------------------------------------------------------------- rules


def _radial_rule(lo: float, hi: float, spec: QuadratureSpec):
    """Radial nodes and weights (including the Jacobian ``r``) as a list of panels."""
    x, w = np.polynomial.legendre.leggauss(spec.nodes)
    edges = [hi * spec.ratio**k for k in range(spec.levels + 1)]
    edges = [e for e in edges if e > lo] + [lo]
    panels = []
    for a, b in zip(edges[1:], edges[:-1]):
        if b <= a:
            continue
        r = 0.5 * (b - a) * x + 0.5 * (a + b)
        panels.append((r, 0.5 * (b - a) * w * r))
    return panels


def _coordinate_rule(lo, hi, spec, toric):
    """All nodes ``z`` and weights for one complex coordinate, panel by panel."""
    out = []
    for r, w in _radial_rule(lo, hi, spec):
        if toric:
            out.append((r.astype(complex), 2.0 * math.pi * w))
        else:
            th = 2.0 * math.pi * np.arange(spec.angular) / spec.angular
            z = (r[:, None] * np.exp(1j * th)[None, :]).ravel()
            ww = (w[:, None] * np.full(spec.angular, 2.0 * math.pi / spec.angular)[None, :]).ravel()
            out.append((z, ww))
    return out


def _reduce(vals, policy):
    vals = np.asarray(vals, dtype=float).ravel()
    if policy == "compensated":
        return math.fsum(vals)
    return float(np.sum(vals))


def _tensor_rest(dom, spec, tor):
    """Flattened nodes/weights for coordinates 2..n."""
    zs = np.zeros((1, 0), dtype=complex)
    ws = np.ones(1)
    for k in range(1, dom.n):
        cells = _coordinate_rule(dom.lower(k), dom.radii[k], spec, k in tor)
        zk = np.concatenate([c[0] for c in cells])
        wk = np.concatenate([c[1] for c in cells])
        zs = np.concatenate(
            [np.repeat(zs, zk.size, axis=0), np.tile(zk, zs.shape[0])[:, None]], axis=1
        )
        ws = np.repeat(ws, wk.size) * np.tile(wk, ws.size)
    return zs, ws


def _integrate_once(g, dom: DomainBox, spec: QuadratureSpec, cell_values=False):
    tor = spec.toric_set(dom.n)
    first = _coordinate_rule(dom.lower(0), dom.radii[0], spec, 0 in tor)
    rest_z, rest_w = _tensor_rest(dom, spec, tor)

    def cell(item):
        z1, w1 = item
        pts = np.empty((z1.size, rest_z.shape[0], dom.n), dtype=complex)
        pts[..., 0] = z1[:, None]
        pts[..., 1:] = rest_z[None, :, :]
        vals = np.asarray(g(pts), dtype=float)
        if vals.shape != pts.shape[:-1]:
            vals = np.broadcast_to(vals, pts.shape[:-1])
        if not np.all(np.isfinite(vals)):
            raise QuadratureError("integrand produced non-finite samples")
        return _reduce(vals * (w1[:, None] * rest_w[None, :]), spec.summation)

    if spec.workers > 1 and len(first) > 1:
        with ThreadPoolExecutor(max_workers=spec.workers) as pool:
            parts = list(pool.map(cell, first))
    else:
        parts = [cell(c) for c in first]
    if cell_values:
        return parts
    return _reduce(parts, spec.summation)


def integrate(g: Callable, dom: DomainBox, spec: QuadratureSpec | None = None, tol: float | None = None) -> IntegralResult:
    """Integrate ``g`` over ``dom`` against Lebesgue measure on C^n.

    ``g`` maps complex points of shape ``(..., n)`` to reals.  The error
    estimate is ``|I(spec) - I(spec.coarse())|``; when it exceeds ``tol``
    a :class:`QuadratureWarning` is issued and the result is still returned.
    """
    spec = spec or QuadratureSpec()
    fine = _integrate_once(g, dom, spec)
    coarse = _integrate_once(g, dom, spec.coarse())
    err = abs(fine - coarse)
    if tol is not None and err > tol:
        warnings.warn(f"quadrature error estimate {err!r} exceeds tolerance {tol!r}", QuadratureWarning, stacklevel=2)
    return IntegralResult(fine, err)


# ---------------------------------------------------------------- norms


@dataclass(frozen=True)
class NormKind:
    """``Lp``: ``(int |g|^p)^(1/p)``; ``LlogLp``: ``int |g| log(e + |g|)^p``."""

    tag: str
    p: float

    def __post_init__(self):
        if self.tag not in ("Lp", "LlogLp"):
            raise ValueError(f"unknown norm tag {self.tag!r}")
        if not (math.isfinite(self.p) and self.p >= (1 if self.tag == "Lp" else 0)):
            raise ValueError("exponent must be finite and >= 1 (Lp) or >= 0 (LlogLp)")

    @classmethod
    def lp(cls, p: float) -> "NormKind":
        return cls("Lp", float(p))

    @classmethod
    def llogl(cls, p: float) -> "NormKind":
        return cls("LlogLp", float(p))

    def density(self, v):
        a = np.abs(v)
        if self.tag == "Lp":
            return a**self.p
        return a * np.log(math.e + a) ** self.p

    def finish(self, res: IntegralResult) -> IntegralResult:
        if self.tag == "LlogLp" or self.p == 1:
            return res
        val = max(res.value, 0.0) ** (1.0 / self.p)
        # first-order propagation through t -> t^(1/p)
        if res.value > 0:
            err = res.err_est * val / (self.p * res.value)
        else:
            err = res.err_est ** (1.0 / self.p)
        return IntegralResult(val, err)


def norm_estimate(g: Callable, kind: NormKind, dom: DomainBox, spec: QuadratureSpec | None = None) -> IntegralResult:
    """Norm of ``g`` with a propagated error estimate."""
    res = integrate(lambda z: kind.density(g(z)), dom, spec)
    return kind.finish(res)


def norm(g: Callable, kind: NormKind, dom: DomainBox, spec: QuadratureSpec | None = None) -> float:
    return norm_estimate(g, kind, dom, spec).value


def residual_field(family, params: FamilyParams) -> Callable:
    """``z -> det(dd-bar u) - rhs`` from the closed-form determinant."""
    fam = catalog.check_params(family, params)

    def g(z):
        return catalog.ma_residual_closed(fam, params, z)

    return g


def family_spec(family, params: FamilyParams, spec: QuadratureSpec | None = None) -> QuadratureSpec:
    """``spec`` with the toric coordinates of ``family`` switched on."""
    spec = spec or QuadratureSpec()
    return replace(spec, toric=catalog.toric_coordinates(family, params.n))


# ---------------------------------------------------------------- divergence


class SeriesVerdict(NamedTuple):
    classification: str  # finite | divergent | inconclusive
    model: str  # geometric | algebraic | both | none
    tail_ratio: float
    rate: float
    partial_sums: np.ndarray


def _fit_line(x, y):
    A = np.vstack([np.ones_like(x), x]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return coef, float(resid @ resid)


def _verdict_from_tail(tail, total, divergent_ratio=10.0, finite_ratio=0.1):
    if not math.isfinite(tail):
        return "divergent"
    if total <= 0:
        return "inconclusive"
    t = tail / total
    if t >= divergent_ratio:
        return "divergent"
    if t <= finite_ratio:
        return "finite"
    return "inconclusive"


def classify_series(partial_sums: Sequence[float], dominance: float = 10.0) -> SeriesVerdict:
    """Decide whether nonnegative partial sums converge.

    The increments over the trailing half of the sequence are fitted by a
    geometric law ``d_k ~ c rho^k`` and an algebraic law ``d_k ~ c k^-b``.
    Each model extrapolates the remaining tail; the tail relative to the
    current sum decides finite (<= 0.1) or divergent (>= 10 or unbounded).
    A model whose residual is ``dominance`` times smaller than the other's
    decides alone; otherwise both must agree.
    """
    S = np.asarray(partial_sums, dtype=float)
    if S.ndim != 1 or S.size < 6:
        raise ValueError("need at least 6 partial sums")
    if not np.all(np.isfinite(S)):
        return SeriesVerdict("divergent", "none", math.inf, math.nan, S)
    d = np.abs(np.diff(S))
    K = d.size
    m = max(5, K // 2)
    k = np.arange(K - m + 1, K + 1, dtype=float)
    dt = d[-m:]
    if np.all(dt == 0):
        return SeriesVerdict("finite", "none", 0.0, 0.0, S)
    pos = dt > 0
    if pos.sum() < 3:
        # isolated nonzero increments in an otherwise stationary tail
        return SeriesVerdict("finite" if dt[-1] == 0 else "inconclusive", "none", 0.0, math.nan, S)
    k, ly = k[pos], np.log(dt[pos])
    total = abs(S[-1])

    (a_g, log_rho), rss_g = _fit_line(k, ly)
    rho = math.exp(log_rho)
    d_last = math.exp(a_g + log_rho * K)
    tail_g = d_last * rho / (1 - rho) if rho < 1 else math.inf

    (a_a, mb), rss_a = _fit_line(np.log(k), ly)
    b = -mb
    d_last_a = math.exp(a_a + mb * math.log(K))
    tail_a = d_last_a * K / (b - 1) if b > 1 else math.inf

    v_g = _verdict_from_tail(tail_g, total)
    v_a = _verdict_from_tail(tail_a, total)
    tiny = 1e-300
    if rss_g * dominance <= rss_a + tiny and rss_g < rss_a:
        return SeriesVerdict(v_g, "geometric", tail_g / total if total else math.inf, rho, S)
    if rss_a * dominance <= rss_g + tiny and rss_a < rss_g:
        return SeriesVerdict(v_a, "algebraic", tail_a / total if total else math.inf, b, S)
    if v_g == v_a:
        tail = max(tail_g, tail_a)
        return SeriesVerdict(v_g, "both", tail / total if total else math.inf, rho, S)
    return SeriesVerdict("inconclusive", "none", max(tail_g, tail_a) / total if total else math.inf, rho, S)


# ---------------------------------------------------------------- Sobolev probes


class ProbeResult(NamedTuple):
    classification: str
    partial_sums: np.ndarray
    annuli: np.ndarray
    verdict: SeriesVerdict

    def raise_if_inconclusive(self):
        if self.classification == "inconclusive":
            raise InconclusiveError("Sobolev probe inconclusive at this depth", self)
        return self


def default_annuli(depth: int = 24, r0: float = 0.5) -> np.ndarray:
    return r0 * 0.5 ** np.arange(depth + 1)


def sobolev_probe(
    family,
    params: FamilyParams,
    order: int,
    exponent: float,
    annuli: Sequence[float] | None = None,
    spec: QuadratureSpec | None = None,
    shell: tuple[float, float] | None = None,
) -> ProbeResult:
    """Integrate ``|D^order u|^exponent`` over shells ``r_{k+1} <= |z1| <= r_k``.

    Probes the ``{z1 = 0}`` component of the singular locus.  The other
    coordinates range over ``shell`` (inner, outer) per coordinate: the unit
    polydisc for the EX1 families and ``[0.5, 1]`` for the families whose
    locus also contains ``{z' = 0}``, which keeps the shells away from it.
    """
    fam = catalog.check_params(family, params)
    if params.eps != 0:
        raise catalog.DomainError("Sobolev probes are for the eps = 0 solutions")
    if fam is catalog.Family.BLOCKI:
        raise catalog.DomainError("BLOCKI is singular along {z' = 0}; probes cover {z1 = 0} only")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if not exponent > 0:
        raise ValueError("exponent must be positive")
    r = np.asarray(default_annuli() if annuli is None else annuli, dtype=float)
    if r.ndim != 1 or r.size < 7 or np.any(np.diff(r) >= 0) or r[-1] <= 0:
        raise ValueError("annuli must be >= 7 strictly decreasing positive radii")
    if fam in (catalog.Family.EX1, catalog.Family.EX1_ND) and r[0] >= 1:
        raise catalog.DomainError("annuli must stay inside |z1| < 1")
    if shell is None:
        shell = (0.5, 1.0) if fam in (catalog.Family.EX2_V, catalog.Family.EX3_W) else (0.0, 1.0)
    n = params.n
    base = spec or QuadratureSpec(levels=1, nodes=8, angular=16)
    qs = family_spec(fam, params, base)
    rest_spec = replace(qs, levels=4)

    def g(z):
        jet = catalog.jet_closed(fam, params, z)
        v = jet.real_gradient_norm() if order == 1 else jet.real_hessian_norm()
        return v**exponent

    incs = []
    for a, b in zip(r[:-1], r[1:]):
        dom = DomainBox((a,) + (shell[1],) * (n - 1), inner=(b,) + (shell[0],) * (n - 1))
        incs.append(_annulus_integral(g, dom, qs, rest_spec))
    S = np.cumsum(incs)
    v = classify_series(S)
    return ProbeResult(v.classification, S, r, v)


def _annulus_integral(g, dom, spec_first, spec_rest):
    # one Gauss panel across the shell in z1, graded panels in the rest
    tor = spec_first.toric_set(dom.n)
    x, w = np.polynomial.legendre.leggauss(spec_first.nodes)
    a, b = dom.lower(0), dom.radii[0]
    r = 0.5 * (b - a) * x + 0.5 * (a + b)
    wr = 0.5 * (b - a) * w * r
    if 0 in tor:
        z1, w1 = r.astype(complex), 2 * math.pi * wr
    else:
        th = 2 * math.pi * np.arange(spec_first.angular) / spec_first.angular
        z1 = (r[:, None] * np.exp(1j * th)).ravel()
        w1 = np.repeat(wr, th.size) * 2 * math.pi / th.size
    rest_z, rest_w = _tensor_rest(dom, spec_rest, tor)
    pts = np.empty((z1.size, rest_z.shape[0], dom.n), dtype=complex)
    pts[..., 0] = z1[:, None]
    pts[..., 1:] = rest_z[None]
    vals = np.asarray(g(pts), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise QuadratureError("integrand produced non-finite samples")
    return _reduce(vals * (w1[:, None] * rest_w[None, :]), spec_first.summation)


# ---------------------------------------------------------------- weak convergence


@dataclass(frozen=True)
class Bump:
    """``amplitude * exp(1 - 1/(1 - rho^2))`` with ``rho^2 = sum |z_k - c_k|^2 / R_k^2``.

    Smooth, supported in the ellipsoid ``rho < 1`` and hence in the polydisc
    of radii ``R`` around ``center``; its maximum is ``amplitude``.
    """

    center: tuple[complex, ...]
    radii: tuple[float, ...]
    amplitude: float = 1.0

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        c = np.asarray(self.center, dtype=complex)
        R = np.asarray(self.radii, dtype=float)
        rho2 = np.sum(np.abs(z - c) ** 2 / R**2, axis=-1)
        out = np.zeros(rho2.shape)
        inside = rho2 < 1
        out[inside] = self.amplitude * np.exp(1.0 - 1.0 / (1.0 - rho2[inside]))
        return out

    @property
    def sup(self) -> float:
        return abs(self.amplitude)

    def support_box(self) -> DomainBox:
        """Polydisc centred at the origin containing the support."""
        return DomainBox(tuple(abs(complex(c)) + R for c, R in zip(self.center, self.radii)))

    @property
    def toric(self) -> bool:
        return all(complex(c) == 0 for c in self.center)


class WeakError(NamedTuple):
    eps: float
    error: float
    err_est: float


def weak_convergence(
    family,
    params: FamilyParams,
    phi: Bump,
    eps_list: Sequence[float],
    spec: QuadratureSpec | None = None,
) -> list[WeakError]:
    """``|int phi (det(dd-bar u^eps) - f) dV|`` for each ``eps``."""
    fam = catalog.check_params(family, params)
    if len(phi.center) != params.n or len(phi.radii) != params.n:
        raise ValueError("bump dimension does not match the family")
    box = phi.support_box()
    if fam in (catalog.Family.EX1, catalog.Family.EX1_ND):
        worst = max(eps_list) if len(eps_list) else 0.0
        if box.radii[0] >= 1.0 - worst:
            raise catalog.DomainError("bump support leaves |z1| < 1 - eps")
    out = []
    for eps in eps_list:
        p = params.with_eps(eps)
        catalog.check_params(fam, p)
        if phi.amplitude == 0:
            out.append(WeakError(float(eps), 0.0, 0.0))
            continue
        res_f = residual_field(fam, p)
        qs = spec or QuadratureSpec()
        if phi.toric:
            qs = family_spec(fam, p, qs)
        else:
            qs = replace(qs, toric=False)
        res = integrate(lambda z: phi(z) * res_f(z), box, qs)
        out.append(WeakError(float(eps), abs(res.value), res.err_est))
    return out
