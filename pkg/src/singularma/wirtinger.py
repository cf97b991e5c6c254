"""Finite-difference Wirtinger jets, Monge-Ampere determinants and positivity checks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .catalog import Jet


class FdError(ValueError):
    """Stencil produced non-finite field values."""


@dataclass(frozen=True)
class FdScheme:
    """Central-difference scheme; ``h=None`` selects the step from the locus distance."""

    h: float | None = None
    order: int = 2
    richardson: bool = True

    def __post_init__(self):
        if self.h is not None and not self.h > 0:
            raise ValueError("step h must be positive")
        if self.order not in (2, 4):
            raise ValueError("order must be 2 or 4")


def default_step(distance) -> float:
    """``max(1e-5, 1e-3 * distance)``, capped at 1e-3 far from any locus."""
    d = float(np.min(distance))
    if not math.isfinite(d):
        d = 1.0
    return max(1e-5, 1e-3 * min(d, 1.0))


# first-derivative weights and offsets
_D1 = {2: ([-1, 1], [-0.5, 0.5]), 4: ([-2, -1, 1, 2], [1 / 12, -8 / 12, 8 / 12, -1 / 12])}
# pure second-derivative weights
_D2 = {2: ([-1, 0, 1], [1.0, -2.0, 1.0]), 4: ([-2, -1, 0, 1, 2], [-1 / 12, 16 / 12, -30 / 12, 16 / 12, -1 / 12])}


def _real_derivatives(f, x, h, order):
    """Real gradient and Hessian of ``f`` at real points ``x`` (shape (..., d))."""
    d = x.shape[-1]
    offs1, w1 = _D1[order]
    offs2, w2 = _D2[order]
    stencil = []
    # pure second and first derivatives share axis offsets
    axis_offsets = sorted(set(offs1) | set(offs2))
    for a in range(d):
        for o in axis_offsets:
            if o == 0:
                continue
            e = np.zeros(d)
            e[a] = o * h
            stencil.append(e)
    pairs = [(a, b) for a in range(d) for b in range(a + 1, d)]
    for a, b in pairs:
        for oa in offs1:
            for ob in offs1:
                e = np.zeros(d)
                e[a] = oa * h
                e[b] = ob * h
                stencil.append(e)
    stencil = np.array(stencil) if stencil else np.zeros((0, d))
    pts = x[..., None, :] + stencil
    allpts = np.concatenate([x[..., None, :], pts], axis=-2)
    vals = np.asarray(f(np.ascontiguousarray(allpts).view(complex)), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise FdError("non-finite field values on the stencil")
    f0 = vals[..., 0]
    vals = vals[..., 1:]

    shape = x.shape[:-1]
    grad = np.zeros(shape + (d,))
    hess = np.zeros(shape + (d, d))
    k = 0
    nz = [o for o in axis_offsets if o != 0]
    for a in range(d):
        fv = {0: f0}
        for o in nz:
            fv[o] = vals[..., k]
            k += 1
        grad[..., a] = sum(w * fv[o] for o, w in zip(offs1, w1)) / h
        hess[..., a, a] = sum(w * fv[o] for o, w in zip(offs2, w2)) / h**2
    for a, b in pairs:
        acc = 0.0
        for wa in w1:
            for wb in w1:
                acc = acc + wa * wb * vals[..., k]
                k += 1
        hess[..., a, b] = hess[..., b, a] = acc / h**2
    return f0, grad, hess


def hermitize(H):
    """Average with the conjugate transpose; idempotent."""
    H = np.asarray(H, dtype=complex)
    return 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))


def wirtinger_from_real(grad, hess):
    """Convert a real gradient/Hessian in interleaved (x, y) layout to Wirtinger form."""
    gx, gy = grad[..., 0::2], grad[..., 1::2]
    sxx = hess[..., 0::2, 0::2]
    syy = hess[..., 1::2, 1::2]
    sxy = hess[..., 0::2, 1::2]
    syx = hess[..., 1::2, 0::2]
    g = 0.5 * (gx - 1j * gy)
    hc = 0.25 * ((sxx + syy) + 1j * (sxy - syx))
    hh = 0.25 * ((sxx - syy) - 1j * (sxy + syx))
    return g, hermitize(hc), hh


def fd_jet(f, z, scheme: FdScheme | None = None, h: float | None = None) -> Jet:
    """Wirtinger jet of a real field by central differences.

    ``f`` maps complex arrays of shape ``(..., n)`` to reals and must be
    safe to call concurrently if callers parallelize.
    """
    scheme = scheme or FdScheme()
    z = np.asarray(z, dtype=complex)
    x = np.ascontiguousarray(z).view(float)
    step = h if h is not None else (scheme.h if scheme.h is not None else 1e-3)
    f0, g, s = _real_derivatives(f, x, step, scheme.order)
    if scheme.richardson:
        _, g2, s2 = _real_derivatives(f, x, step / 2, scheme.order)
        k = 2.0**scheme.order
        g = (k * g2 - g) / (k - 1)
        s = (k * s2 - s) / (k - 1)
    grad, hess, holo = wirtinger_from_real(g, 0.5 * (s + np.swapaxes(s, -1, -2)))
    return Jet(np.asarray(f0), grad, hess, holo)


def fd_jet_family(family, params, z, scheme: FdScheme | None = None) -> Jet:
    """``fd_jet`` on a catalog family, step chosen from the singular-locus distance."""
    from . import catalog

    scheme = scheme or FdScheme()
    z = catalog.check_domain(family, params, z)
    if scheme.h is None:
        dist = catalog.singular_locus(family, params).distance(z)
        if params.eps > 0:
            locus0 = catalog.singular_locus(family, params.with_eps(0.0))
            dist = np.sqrt(locus0.distance(z) ** 2 + params.eps)
        h = default_step(dist)
    else:
        h = scheme.h
    return fd_jet(catalog.field(family, params), z, scheme, h=h)


def ma_det(H, rtol: float = 1e-12):
    """Real determinant of Hermitian matrices (stacked on leading axes).

    A relative imaginary residue above ``rtol`` raises: it means the
    input was not Hermitian.
    """
    H = np.asarray(H, dtype=complex)
    n = H.shape[-1]
    if n == 1:
        det = H[..., 0, 0]
    elif n == 2:
        det = H[..., 0, 0] * H[..., 1, 1] - H[..., 0, 1] * H[..., 1, 0]
    else:
        flat = hermitize(H).reshape(-1, n, n)
        det = np.empty(flat.shape[0], dtype=complex)
        for i, A in enumerate(flat):
            _, D, _ = scipy.linalg.ldl(A, lower=True, hermitian=True)
            det[i] = _block_diag_det(D)
        det = det.reshape(H.shape[:-2])
    scale = np.maximum(1.0, np.abs(det.real))
    if np.any(np.abs(det.imag) > rtol * scale):
        raise ValueError("determinant has an imaginary residue; matrix is not Hermitian")
    out = np.asarray(det.real)
    return float(out) if out.ndim == 0 else out


def _block_diag_det(D):
    n = D.shape[0]
    det = 1.0 + 0j
    i = 0
    while i < n:
        if i + 1 < n and D[i + 1, i] != 0:
            det *= D[i, i] * D[i + 1, i + 1] - D[i, i + 1] * D[i + 1, i]
            i += 2
        else:
            det *= D[i, i]
            i += 1
    return det


def psd_check(H, tol: float = 0.0):
    """``(is_psd, min_eigenvalue)`` via a Hermitian eigensolve."""
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    lam = np.linalg.eigvalsh(hermitize(H))[..., 0]
    ok = lam >= -tol
    if np.ndim(lam) == 0:
        return bool(ok), float(lam)
    return ok, lam


def ma_measure_density(f, z, scheme: FdScheme | None = None, h: float | None = None):
    """Density of (dd^c u)^n against Lebesgue measure: 4^n n! det(dd-bar u)."""
    jet = fd_jet(f, z, scheme, h=h)
    n = jet.hess.shape[-1]
    return 4.0**n * math.factorial(n) * ma_det(jet.hess)
