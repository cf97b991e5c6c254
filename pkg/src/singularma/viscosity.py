"""Viscosity super/subsolution checks with quadratic test functions.

A test function touching ``u`` from below at a locus point ``p0`` is sought
among random real quadratics.  Each candidate is shifted down by
``t |z - p0|^2 / 2`` until it lies below ``u`` on a fixed verification grid;
``t`` is taken from a ladder so that accepted jets are reproducible.
The supersolution condition is then ``F(dd-bar phi) >= -tol`` with
``F(A) = f - det A`` for ``A >= 0`` and ``+inf`` otherwise.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import catalog
from .catalog import FamilyParams
from .wirtinger import FdScheme, fd_jet_family, hermitize, ma_det, psd_check, wirtinger_from_real


@dataclass
class QuadraticJet:
    """``phi(z) = c + 2 Re<a, w> + w^* H w + Re(w^T B w)`` with ``w = z - p0``.

    ``H`` is the complex Hessian ``d^2 phi / dz_i d(conj z_j)`` and ``B`` the
    holomorphic part, so ``d^2 phi / dz_i dz_j = B_ij``.
    """

    p0: np.ndarray
    c: float
    a: np.ndarray
    H: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        self.p0 = np.asarray(self.p0, dtype=complex)
        self.a = np.asarray(self.a, dtype=complex)
        self.H = hermitize(self.H)
        B = np.asarray(self.B, dtype=complex)
        self.B = 0.5 * (B + B.T)

    @classmethod
    def from_real(cls, p0, c, grad_real, S) -> "QuadraticJet":
        """From a real gradient and symmetric real Hessian in interleaved layout."""
        g, H, B = wirtinger_from_real(np.asarray(grad_real, dtype=float), np.asarray(S, dtype=float))
        return cls(p0, float(c), g, H, B)

    def __call__(self, z) -> np.ndarray:
        w = np.asarray(z, dtype=complex) - self.p0
        lin = 2.0 * np.real(w @ self.a)
        herm = np.real(np.einsum("...i,ij,...j->...", np.conj(w), self.H.T, w))
        holo = np.real(np.einsum("...i,ij,...j->...", w, self.B, w))
        return self.c + lin + herm + holo

    def shifted(self, t: float) -> "QuadraticJet":
        """Subtract ``t |w|^2 / 2``; the complex Hessian drops by ``t/2``."""
        n = self.p0.size
        return QuadraticJet(self.p0, self.c, self.a, self.H - 0.5 * t * np.eye(n), self.B)


def F_operator(H, f: float) -> float:
    """``f - det H`` if ``H`` is positive semidefinite, else ``+inf``."""
    ok, _ = psd_check(H, tol=1e-12)
    if not ok:
        return math.inf
    return float(f - ma_det(H))


class ViscosityReport(NamedTuple):
    point: tuple[complex, ...]
    n_jets: int
    n_accepted: int
    worst_margin: float
    verdict: str  # pass | fail | vacuous
    seed: int
    max_tangent_diag: float
    margins: tuple[float, ...]


@dataclass(frozen=True)
class ContactGrid:
    radii: tuple[float, ...] = (1e-2, 1e-3, 1e-4)
    random_per_ball: int = 64
    tangent_angles: int = 16
    transverse_dirs: int = 16


def _locus_coords(fam, params, p0):
    """Coordinate roles at ``p0`` from the locus components through it.

    Returns ``(off, tangent, linear)``: coordinates leaving some component,
    coordinates along some component, and coordinates transverse to all of
    them (the only ones where a touching jet may have a linear part).
    """
    loc = catalog.singular_locus(fam, params)
    comps = [set(c) for c in loc.components if np.all(p0[list(c)] == 0)]
    if not comps:
        raise catalog.DomainError("p0 is not on the singular locus")
    n = params.n
    off = sorted(set().union(*comps))
    tangent = sorted(k for k in range(n) if any(k not in c for c in comps))
    linear = sorted(set.intersection(*comps))
    return off, tangent, linear


def _grid_offsets(n, off, tangent, grid: ContactGrid, rng) -> np.ndarray:
    out = []
    th = 2 * math.pi * np.arange(grid.tangent_angles) / grid.tangent_angles
    for rad in grid.radii:
        # uniform in the ball of C^n
        g = rng.standard_normal((grid.random_per_ball, 2 * n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        g *= rad * rng.uniform(0, 1, (grid.random_per_ball, 1)) ** (1.0 / (2 * n))
        out.append(np.ascontiguousarray(g).view(complex))
        # circles along the locus
        for k in tangent:
            w = np.zeros((th.size, n), dtype=complex)
            w[:, k] = rad * np.exp(1j * th)
            out.append(w)
        # sphere in the coordinates leaving the locus
        d = rng.standard_normal((grid.transverse_dirs, 2 * len(off)))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        w = np.zeros((grid.transverse_dirs, n), dtype=complex)
        w[:, off] = rad * np.ascontiguousarray(d).view(complex)
        out.append(w)
    return np.concatenate(out)


def supersolution_test(
    family,
    params: FamilyParams,
    p0,
    n_jets: int = 200,
    seed: int = 0,
    tol: float = 1e-8,
    M: float = 10.0,
    grid: ContactGrid | None = None,
    t_max: float | None = None,
    workers: int = 1,
    include_zero: bool = True,
) -> ViscosityReport:
    """Random quadratic test functions touching ``u`` from below at ``p0``.

    ``n_jets`` random jets are drawn, preceded by the zero jet when
    ``include_zero``; the report counts every jet tested.
    """
    fam = catalog.check_params(family, params)
    if params.eps != 0:
        raise catalog.DomainError("viscosity checks are for the eps = 0 solutions")
    n = params.n
    p0 = catalog.as_points(p0, n)
    off, tang, linear = _locus_coords(fam, params, p0)
    grid = grid or ContactGrid()
    t_max = 8 * M if t_max is None else t_max
    rng_grid = np.random.default_rng([seed, 0])
    rng_jet = np.random.default_rng([seed, 1])
    offs = _grid_offsets(n, off, tang, grid, rng_grid)
    u = catalog.field(fam, params)
    u0 = float(u(p0))
    du = u(p0 + offs) - u0
    q = 0.5 * np.sum(np.abs(offs) ** 2, axis=-1)
    f = float(catalog.rhs(fam, params, p0))
    tmask = np.zeros(2 * n, dtype=bool)
    for k in linear:
        tmask[2 * k: 2 * k + 2] = True

    # draw all jets first so acceptance does not depend on scheduling;
    # the zero jet leads when requested
    draws = [(np.zeros(2 * n), np.zeros((2 * n, 2 * n)))] if include_zero else []
    for _ in range(n_jets):
        S = rng_jet.uniform(-M, M, (2 * n, 2 * n))
        S = 0.5 * (S + S.T)
        g = rng_jet.uniform(-M, M, 2 * n) * tmask
        if rng_jet.uniform() < 0.5:
            g = np.zeros(2 * n)
        draws.append((g, S))

    step = M / 4

    def one(draw):
        g, S = draw
        jet = QuadraticJet.from_real(p0, u0, g, S)
        phi = jet(p0 + offs) - u0
        need = np.max((phi - du) / q)
        t = max(0.0, math.ceil(need / step) * step) if need > 0 else 0.0
        if t > t_max:
            return None
        sj = jet.shifted(t)
        if np.max(sj(p0 + offs) - u0 - du) > 1e-10:
            return None
        margin = F_operator(sj.H, f)
        diag = max((float(sj.H[k, k].real) for k in tang), default=-math.inf)
        return margin, diag

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            res = list(pool.map(one, draws))
    else:
        res = [one(d) for d in draws]
    acc = [r for r in res if r is not None]
    margins = tuple(m for m, _ in acc)
    point = tuple(complex(x) for x in p0)
    if not acc:
        return ViscosityReport(point, len(draws), 0, math.inf, "vacuous", seed, -math.inf, ())
    worst = min(margins)
    verdict = "pass" if worst >= -tol else "fail"
    return ViscosityReport(point, len(draws), len(acc), worst, verdict, seed, max(d for _, d in acc), margins)


def taylor_jet(family, params: FamilyParams, p0, scheme: FdScheme | None = None) -> QuadraticJet:
    """Second-order Taylor jet at a smooth point from finite differences."""
    p0 = catalog.as_points(p0, params.n)
    jet = fd_jet_family(family, params, p0, scheme)
    return QuadraticJet(p0, float(jet.value), jet.grad, jet.hess, jet.holo)


def check_jet(family, params: FamilyParams, jet: QuadraticJet) -> float:
    """``F(dd-bar phi)`` at the jet's base point."""
    f = float(catalog.rhs(family, params, jet.p0))
    return F_operator(jet.H, f)


class ContactResult(NamedTuple):
    verdict: bool
    radii: np.ndarray
    growth: np.ndarray


def no_upper_contact(
    target,
    params: FamilyParams | None,
    p0,
    M: float = 10.0,
    radii: Sequence[float] = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6),
    coord: int = 0,
    angles: int = 16,
) -> ContactResult:
    """``g(r) = min_{|w_coord| = r} (u(p0 + w) - u(p0)) / r^2``.

    Returns true iff ``g`` strictly increases as ``r`` decreases and its
    last value exceeds ``M``: then no quadratic with Hessian bound ``M``
    touches ``u`` from above at ``p0``.  ``target`` is a family name
    (with ``params``) or a vectorized callable.
    """
    if callable(target) and not isinstance(target, str):
        u = target
        p0 = np.asarray(p0, dtype=complex)
        n = p0.size
    else:
        fam = catalog.check_params(target, params)
        if params.eps != 0:
            raise catalog.DomainError("contact checks are for the eps = 0 solutions")
        n = params.n
        p0 = catalog.as_points(p0, n)
        u = catalog.field(fam, params)
        if catalog.singular_locus(fam, params).distance(p0) != 0:
            raise catalog.DomainError("p0 is not on the singular locus")
    r = np.asarray(radii, dtype=float)
    if r.ndim != 1 or r.size < 2 or np.any(np.diff(r) >= 0):
        raise ValueError("radii must be decreasing")
    th = 2 * math.pi * np.arange(angles) / angles
    u0 = float(np.asarray(u(p0)))
    g = np.empty(r.size)
    for i, rad in enumerate(r):
        w = np.zeros((angles, n), dtype=complex)
        w[:, coord] = rad * np.exp(1j * th)
        g[i] = float(np.min(np.asarray(u(p0 + w)) - u0)) / rad**2
    verdict = bool(np.all(np.diff(g) > 0) and g[-1] > M)
    return ContactResult(verdict, r, g)


def product_grid(R1: float, R2: float, k: int, n: int = 2) -> np.ndarray:
    """``k^3`` points: ``k`` radii for ``z1`` in ``[0, R1)`` times a ``k x k`` square in ``z2``.

    ``z1`` angles follow a golden-ratio sequence; the square is inscribed in
    the disc of radius ``R2``; further coordinates are zero.
    """
    r1 = R1 * np.arange(k) / k
    a1 = 2 * math.pi * ((np.arange(k) * 0.6180339887498949) % 1.0)
    z1 = r1 * np.exp(1j * a1)
    s = np.linspace(-R2, R2, k) / math.sqrt(2) * (1 - 1e-12)
    X, Y = np.meshgrid(s, s, indexing="ij")
    z2 = (X + 1j * Y).ravel()
    pts = np.zeros((k, z2.size, n), dtype=complex)
    pts[..., 0] = z1[:, None]
    pts[..., 1] = z2[None, :]
    return pts.reshape(-1, n)


def psh_monotone_check(family, params: FamilyParams, eps_pair: tuple[float, float], grid) -> bool:
    """True iff ``u^{eps1} >= u^{eps2} - 1e-12`` on ``grid`` for ``eps1 >= eps2``."""
    e1, e2 = map(float, eps_pair)
    if e1 < e2:
        raise ValueError("eps_pair must be ordered eps1 >= eps2")
    fam = catalog.check_params(family, params)
    a = catalog.evaluate(fam, params.with_eps(e1), grid)
    b = catalog.evaluate(fam, params.with_eps(e2), grid)
    return bool(np.all(np.asarray(a) >= np.asarray(b) - 1e-12))
