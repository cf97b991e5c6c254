"""Explicit singular solutions of det(dd-bar u) = f and their regularizations.

Every family is evaluated in closed form on batches of points.  Points are
complex arrays of shape ``(..., n)``; viewed as ``float64`` they are the
canonical interleaved real layout ``(x_1, y_1, ..., x_n, y_n)``.

Hessians follow ``hess[..., i, j] = d^2 u / dz_i d(conj z_j)``; ``holo`` holds
the holomorphic second derivatives ``d^2 u / dz_i dz_j`` needed for real
second-derivative norms.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np


class DomainError(ValueError):
    """Point or parameters outside a family's admissible region."""


class SingularPointError(DomainError):
    """Closed-form jet requested on the singular locus of an eps=0 family."""


class Family(str, enum.Enum):
    EX1 = "EX1"
    EX1_ND = "EX1_ND"
    EX2_V = "EX2_V"
    EX3_W = "EX3_W"
    BLOCKI = "BLOCKI"
    HE = "HE"


def as_family(family) -> Family:
    try:
        return Family(family)
    except ValueError:
        raise DomainError(f"unknown family {family!r}") from None


@dataclass(frozen=True)
class FamilyParams:
    n: int = 2
    beta: float | None = None
    gamma: float | None = None
    eps: float = 0.0

    def with_eps(self, eps: float) -> "FamilyParams":
        return replace(self, eps=float(eps))


@dataclass
class Jet:
    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    holo: np.ndarray | None = None

    def real_gradient_norm(self) -> np.ndarray:
        # for real u: d_x u = 2 Re u_z, d_y u = -2 Im u_z
        return 2.0 * np.sqrt(np.sum(np.abs(self.grad) ** 2, axis=-1))

    def real_hessian_norm(self) -> np.ndarray:
        """Frobenius norm of the real 2n x 2n Hessian."""
        if self.holo is None:
            raise ValueError("jet carries no holomorphic second derivatives")
        s = np.sum(np.abs(self.holo) ** 2 + np.abs(self.hess) ** 2, axis=(-2, -1))
        return np.sqrt(8.0 * s)


class FamilyInfo(NamedTuple):
    family: Family
    domain: str
    params: str
    rhs: str


class HnSolution(NamedTuple):
    n: int
    coeffs: tuple[float, ...]


class Locus(NamedTuple):
    """Finite union of coordinate subspaces ``{z_k = 0 for k in comp}``."""

    components: tuple[tuple[int, ...], ...]

    @property
    def empty(self) -> bool:
        return not self.components

    def distance(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.empty:
            return np.full(z.shape[:-1], np.inf)
        d = [np.sqrt(np.sum(np.abs(z[..., list(c)]) ** 2, axis=-1)) for c in self.components]
        return np.min(d, axis=0)

    def contains(self, z) -> np.ndarray:
        return self.distance(z) == 0.0


_FAMILIES = (
    FamilyInfo(Family.EX1, "D x C^(n-1), n = 2; |z1| < 1 - eps for eps > 0",
               "n = 2, eps in [0, 1)", "1"),
    FamilyInfo(Family.EX1_ND, "D x C^(n-1); |z1| < 1 - eps for eps > 0",
               "n >= 2, eps in [0, 1)", "1"),
    FamilyInfo(Family.EX2_V, "C^n", "n >= 2, beta in [0, 1), eps >= 0", "1"),
    FamilyInfo(Family.EX3_W, "C^n", "n >= 2, gamma in [0, 2), eps >= 0", "1"),
    FamilyInfo(Family.BLOCKI, "C^n", "n >= 2, eps = 0", "(1 + |z1|^2)^(n-2)"),
    FamilyInfo(Family.HE, "C^n", "n >= 2, eps = 0", "1"),
)


def list_families() -> list[FamilyInfo]:
    return list(_FAMILIES)


def is_toric(family) -> bool:
    return as_family(family) not in (Family.EX1, Family.EX1_ND)


def toric_coordinates(family, n: int) -> tuple[int, ...]:
    """Coordinates in which the family (and its residual) is rotation invariant."""
    if is_toric(family):
        return tuple(range(n))
    return (0,)


def check_params(family, params: FamilyParams) -> Family:
    fam = as_family(family)
    n, eps = params.n, params.eps
    if int(n) != n or n < 2:
        raise DomainError(f"dimension n must be an integer >= 2, got {n}")
    if fam is Family.EX1 and n != 2:
        raise DomainError("EX1 is the two-dimensional example; use EX1_ND for n > 2")
    if not (eps >= 0 and math.isfinite(eps)):
        raise DomainError(f"eps must be finite and >= 0, got {eps}")
    if fam in (Family.EX1, Family.EX1_ND) and eps >= 1:
        raise DomainError("eps must lie in [0, 1) for the EX1 families")
    if fam in (Family.BLOCKI, Family.HE) and eps != 0:
        raise DomainError(f"{fam.value} has no regularized family; eps must be 0")
    if fam is Family.EX2_V:
        if params.beta is None or not 0 <= params.beta < 1:
            raise DomainError(f"EX2_V needs beta in [0, 1), got {params.beta}")
    if fam is Family.EX3_W:
        if params.gamma is None or not 0 <= params.gamma < 2:
            raise DomainError(f"EX3_W needs gamma in [0, 2), got {params.gamma}")
    return fam


def as_points(z, n: int) -> np.ndarray:
    """Coerce ``z`` to a complex array of shape ``(..., n)``.

    Real input with trailing dimension ``2n`` is read as interleaved
    ``(x_1, y_1, ...)`` coordinates.
    """
    z = np.asarray(z)
    if not np.iscomplexobj(z) and z.shape[-1:] == (2 * n,):
        z = np.ascontiguousarray(z, dtype=float).view(complex)
    z = np.asarray(z, dtype=complex)
    if z.shape[-1:] != (n,):
        raise DomainError(f"points must have trailing dimension {n} (complex) or {2 * n} (real)")
    if not np.all(np.isfinite(z)):
        raise DomainError("non-finite coordinates")
    return z


def check_domain(family, params: FamilyParams, z) -> np.ndarray:
    fam = check_params(family, params)
    z = as_points(z, params.n)
    if fam in (Family.EX1, Family.EX1_ND):
        bound = 1.0 - params.eps
        if np.any(np.abs(z[..., 0]) >= bound):
            raise DomainError(f"{fam.value} requires |z1| < {bound}")
    return z


# ---------------------------------------------------------------- h_n ODE


def hn_coeffs(n: int) -> HnSolution:
    """Coefficients a_{n,0..n-1} of h_n(r) = r^2 sum_k a_{n,k} log^k r."""
    if int(n) != n or n < 2:
        raise DomainError(f"h_n is defined for integers n >= 2, got {n}")
    n = int(n)
    coeffs = [math.factorial(n)]
    for k in range(1, n):
        a = (-2) ** k * (math.factorial(n) // math.factorial(k) - math.factorial(n - 1) // math.factorial(k - 1))
        coeffs.append(a)
    return HnSolution(n, tuple(float(a) for a in coeffs))


def _poly_log(coeffs, ell):
    """P(l), P'(l), P''(l) for P(l) = sum_k a_k l^k."""
    p = np.zeros_like(ell)
    dp = np.zeros_like(ell)
    d2p = np.zeros_like(ell)
    for k in range(len(coeffs) - 1, -1, -1):
        d2p = d2p * ell + 2.0 * dp
        dp = dp * ell + p
        p = p * ell + coeffs[k]
    return p, dp, d2p


def hn_eval(n: int, r):
    """Return ``(h, h', h'')`` of the h_n solution at ``r`` in [0, 1).

    At ``r = 0`` the continuous extension ``h = h' = 0`` is used and
    ``h''`` is ``+inf``.
    """
    sol = hn_coeffs(n)
    r = np.asarray(r, dtype=float)
    if np.any((r < 0) | (r >= 1)) or not np.all(np.isfinite(r)):
        raise DomainError("h_n is evaluated on [0, 1)")
    with np.errstate(divide="ignore", invalid="ignore"):
        ell = np.log(r)
        p, dp, d2p = _poly_log(sol.coeffs, ell)
        h = r * r * p
        h1 = r * (2.0 * p + dp)
        h2 = 2.0 * p + 3.0 * dp + d2p
    zero = r == 0
    h = np.where(zero, 0.0, h)
    h1 = np.where(zero, 0.0, h1)
    h2 = np.where(zero, np.inf, h2)
    if h.ndim == 0:
        return float(h), float(h1), float(h2)
    return h, h1, h2


def _hn_of_s(coeffs, s):
    """B(s) = h_n(sqrt s) and its first two s-derivatives."""
    # with l = log sqrt(s): B = s P(l), B' = P + P'/2, B'' = (P' + P''/2) / (2 s)
    ell = 0.5 * np.log(s)
    p, dp, d2p = _poly_log(coeffs, ell)
    return s * p, p + 0.5 * dp, (dp + 0.5 * d2p) / (2.0 * s)


# ---------------------------------------------------------------- locus


def singular_locus(family, params: FamilyParams) -> Locus:
    fam = check_params(family, params)
    if params.eps > 0:
        return Locus(())
    rest = tuple(range(1, params.n))
    if fam is Family.EX2_V:
        return Locus(((0,), rest))
    if fam is Family.BLOCKI:
        return Locus((rest,))
    return Locus(((0,),))


def _refuse_locus(fam, params, z):
    loc = singular_locus(fam, params)
    if not loc.empty and np.any(loc.contains(z)):
        raise SingularPointError(f"{fam.value} jet is undefined on its singular locus")


# ---------------------------------------------------------------- values


def _cn(n):
    return 2.0 ** (-1.0 / n) * n ** ((n + 1.0) / n) / (n - 1.0)


def evaluate(family, params: FamilyParams, z) -> np.ndarray | float:
    """Closed-form value; the continuous extension on the singular locus."""
    fam = check_params(family, params)
    z = check_domain(fam, params, z)
    n, eps = params.n, params.eps
    a1 = np.abs(z[..., 0])
    zp2 = np.sum(np.abs(z[..., 1:]) ** 2, axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        if fam in (Family.EX1, Family.EX1_ND):
            x2 = np.sum(z[..., 1:].real ** 2, axis=-1)
            s = a1**2 + eps
            coeffs = hn_coeffs(n).coeffs
            b, _, _ = _hn_of_s(coeffs, s)
            val = -2.0 * x2 / np.log(s) + b
            val = np.where(s == 0, 0.0, val)
        elif fam is Family.EX2_V:
            beta = params.beta
            K = _cn(n) * (1.0 - beta) ** (-2.0 / n)
            q = a1**2 + eps
            hq = (q ** (beta / 2) + q ** (1 - beta / 2)) ** (2.0 / n)
            val = K * (zp2 + eps) ** ((n - 1.0) / n) * hq
        elif fam is Family.EX3_W:
            g = params.gamma
            q = a1**2 + eps
            val = q ** (g / (2.0 * (n - 1))) * zp2 + 4.0 / (2.0 - g) ** 2 * q ** ((2.0 - g) / 2)
        elif fam is Family.BLOCKI:
            val = n / (n - 1.0) * (1.0 + a1**2) * zp2 ** ((n - 1.0) / n)
        else:
            val = n ** (2.0 / n) * a1 ** (2.0 / n) * (1.0 + zp2)
    val = np.asarray(val, dtype=float)
    return float(val) if val.ndim == 0 else val


def field(family, params: FamilyParams) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized scalar field ``z -> u(z)`` for the finite-difference and quadrature tools."""
    fam = check_params(family, params)

    def u(z):
        return np.asarray(evaluate(fam, params, z), dtype=float)

    u.family = fam
    u.params = params
    return u


def rhs(family, params: FamilyParams, z=None):
    fam = check_params(family, params)
    if fam is Family.BLOCKI:
        if z is None:
            raise ValueError("BLOCKI right-hand side depends on z1")
        z = as_points(z, params.n)
        out = (1.0 + np.abs(z[..., 0]) ** 2) ** (params.n - 2)
        return float(out) if out.ndim == 0 else out
    if z is None:
        return 1.0
    shape = np.shape(as_points(z, params.n))[:-1]
    return 1.0 if shape == () else np.ones(shape)


# ---------------------------------------------------------------- jets


def _assemble(n, shape, value, g1, gk, h11, h1k, hkj, o11, o1k, okj):
    """Build a Jet from the radial building blocks.

    ``h1k[..., k]`` is hess[0, k+1]; ``hkj`` is the (n-1)x(n-1) lower block,
    likewise for the holomorphic parts.
    """
    grad = np.empty(shape + (n,), dtype=complex)
    grad[..., 0] = g1
    grad[..., 1:] = gk
    hess = np.empty(shape + (n, n), dtype=complex)
    hess[..., 0, 0] = h11
    hess[..., 0, 1:] = h1k
    hess[..., 1:, 0] = np.conj(h1k)
    hess[..., 1:, 1:] = hkj
    holo = np.empty(shape + (n, n), dtype=complex)
    holo[..., 0, 0] = o11
    holo[..., 0, 1:] = o1k
    holo[..., 1:, 0] = o1k
    holo[..., 1:, 1:] = okj
    return Jet(np.asarray(value, dtype=float), grad, hess, holo)


def jet_closed(family, params: FamilyParams, z) -> Jet:
    """Value, Wirtinger gradient and complex Hessian from hand-derived formulas."""
    fam = check_params(family, params)
    z = check_domain(fam, params, z)
    _refuse_locus(fam, params, z)
    n, eps = params.n, params.eps
    shape = z.shape[:-1]
    z1 = z[..., 0]
    zr = z[..., 1:]
    c1 = np.conj(z1)
    cr = np.conj(zr)
    m1 = np.abs(z1) ** 2
    R = np.sum(np.abs(zr) ** 2, axis=-1)
    eye = np.eye(n - 1)

    if fam in (Family.EX1, Family.EX1_ND):
        # u = A(s) X + B(s), s = |z1|^2 + eps, X = |Re z'|^2, A = -2/log s
        xr = zr.real
        X = np.sum(xr**2, axis=-1)
        s = m1 + eps
        L = np.log(s)
        A = -2.0 / L
        A1 = 2.0 / (s * L**2)
        A2 = -2.0 / (s**2 * L**2) - 4.0 / (s**2 * L**3)
        B, B1, B2 = _hn_of_s(hn_coeffs(n).coeffs, s)
        d1 = A1 * X + B1
        d2 = A2 * X + B2
        return _assemble(
            n, shape, A * X + B,
            d1 * c1, A[..., None] * xr,
            d2 * m1 + d1, (A1 * c1)[..., None] * xr, 0.5 * A[..., None, None] * eye,
            d2 * c1**2, (A1 * c1)[..., None] * xr, 0.5 * A[..., None, None] * eye,
        )

    if fam is Family.EX2_V:
        # v = K G(P) H(Q), P = |z'|^2 + eps, Q = |z1|^2 + eps
        beta = params.beta
        K = _cn(n) * (1.0 - beta) ** (-2.0 / n)
        P = R + eps
        Q = m1 + eps
        e = (n - 1.0) / n
        G = P**e
        G1 = e * P ** (e - 1)
        G2 = e * (e - 1) * P ** (e - 2)
        a, b = beta / 2, 1 - beta / 2
        S = Q**a + Q**b
        S1 = a * Q ** (a - 1) + b * Q ** (b - 1)
        S2 = a * (a - 1) * Q ** (a - 2) + b * (b - 1) * Q ** (b - 2)
        t = 2.0 / n
        H = S**t
        H1 = t * S ** (t - 1) * S1
        H2 = t * (t - 1) * S ** (t - 2) * S1**2 + t * S ** (t - 1) * S2
        outer = cr[..., :, None] * zr[..., None, :]
        outer_h = cr[..., :, None] * cr[..., None, :]
        return _assemble(
            n, shape, K * G * H,
            K * G * H1 * c1, (K * G1 * H)[..., None] * cr,
            K * G * (H2 * m1 + H1),
            (K * G1 * H1 * c1)[..., None] * zr,
            (K * H)[..., None, None] * (G1[..., None, None] * eye + G2[..., None, None] * outer),
            K * G * H2 * c1**2,
            (K * G1 * H1 * c1)[..., None] * cr,
            (K * H * G2)[..., None, None] * outer_h,
        )

    if fam is Family.EX3_W:
        # w = A(Q) R + B(Q), A = Q^m, B = c Q^(1 - gamma/2)
        g = params.gamma
        m = g / (2.0 * (n - 1))
        Q = m1 + eps
        A = Q**m
        A1 = m * Q ** (m - 1)
        A2 = m * (m - 1) * Q ** (m - 2)
        B = 4.0 / (2.0 - g) ** 2 * Q ** (1 - g / 2)
        B1 = 2.0 / (2.0 - g) * Q ** (-g / 2)
        B2 = -g / (2.0 - g) * Q ** (-g / 2 - 1)
        d1 = A1 * R + B1
        d2 = A2 * R + B2
        zero = np.zeros(shape + (n - 1, n - 1), dtype=complex)
        return _assemble(
            n, shape, A * R + B,
            d1 * c1, A[..., None] * cr,
            d2 * m1 + d1, (A1 * c1)[..., None] * zr, A[..., None, None] * eye,
            d2 * c1**2, (A1 * c1)[..., None] * cr, zero,
        )

    if fam is Family.BLOCKI:
        a = n / (n - 1.0)
        E = 1.0 + m1
        e = (n - 1.0) / n
        G = R**e
        G1 = e * R ** (e - 1)
        G2 = e * (e - 1) * R ** (e - 2)
        outer = cr[..., :, None] * zr[..., None, :]
        outer_h = cr[..., :, None] * cr[..., None, :]
        return _assemble(
            n, shape, a * E * G,
            a * G * c1, (a * E * G1)[..., None] * cr,
            a * G, (a * G1 * c1)[..., None] * zr,
            (a * E)[..., None, None] * (G1[..., None, None] * eye + G2[..., None, None] * outer),
            np.zeros(shape, dtype=complex), (a * G1 * c1)[..., None] * cr,
            (a * E * G2)[..., None, None] * outer_h,
        )

    # HE: w = b Q^(1/n) (1 + |z'|^2), Q = |z1|^2
    b = n ** (2.0 / n)
    E = 1.0 + R
    A = m1 ** (1.0 / n)
    A1 = (1.0 / n) * m1 ** (1.0 / n - 1)
    A2 = (1.0 / n) * (1.0 / n - 1) * m1 ** (1.0 / n - 2)
    zero = np.zeros(shape + (n - 1, n - 1), dtype=complex)
    return _assemble(
        n, shape, b * A * E,
        b * A1 * E * c1, (b * A)[..., None] * cr,
        b * E * (A2 * m1 + A1), (b * A1 * c1)[..., None] * zr, (b * A)[..., None, None] * eye,
        b * E * A2 * c1**2, (b * A1 * c1)[..., None] * cr, zero,
    )


def ma_residual_closed(family, params: FamilyParams, z):
    """``det(dd-bar u) - rhs`` without forming ``1 + small`` for the regularized families."""
    fam = check_params(family, params)
    z = check_domain(fam, params, z)
    _refuse_locus(fam, params, z)
    n, eps = params.n, params.eps
    m1 = np.abs(z[..., 0]) ** 2
    R = np.sum(np.abs(z[..., 1:]) ** 2, axis=-1)

    if fam is Family.EX1:
        x2 = z[..., 1].real ** 2
        s = m1 + eps
        L = np.log(s)
        out = -eps * (2.0 * x2 / (s**2 * L**3) + 1.0 / (s * L))
    elif fam is Family.EX1_ND:
        X = np.sum(z[..., 1:].real ** 2, axis=-1)
        s = m1 + eps
        nl = -np.log(s)
        _, h1, _ = hn_eval(n, np.sqrt(s))
        out = (-eps / s + 2.0 * eps * X / (s**2 * nl ** (n + 1))
               + eps * h1 / (2.0 * s**1.5 * nl ** (n - 1)))
    elif fam is Family.EX2_V:
        b = params.beta
        Q = m1 + eps
        P = R + eps
        out = (eps / (2 * (1 - b) ** 2) * (b * Q ** (b - 2) + (2 - b) * Q ** (-b) + 2 * b * (2 - b) / Q)
               + eps / (2 * (n - 1) * (1 - b) ** 2) * (2 + b**2 * Q ** (b - 1) + (2 - b) ** 2 * Q ** (1 - b)) / P
               + eps**2 / (2 * (n - 1) * (1 - b)) * (b * Q ** (b - 2) - (2 - b) * Q ** (-b)) / P)
    elif fam is Family.EX3_W:
        g = params.gamma
        Q = m1 + eps
        # second term is g/((2-g) Q); the printed expansion carries a stray |z1|^2
        out = eps * (g * R / (2.0 * (n - 1)) * Q ** (n * g / (2.0 * (n - 1)) - 2) + g / ((2.0 - g) * Q))
    else:
        from .wirtinger import ma_det

        out = ma_det(jet_closed(fam, params, z).hess) - rhs(fam, params, z)
    out = np.asarray(out, dtype=float)
    return float(out) if out.ndim == 0 else out


def ma_det_closed(family, params: FamilyParams, z):
    """Closed-form det of the complex Hessian.

    The regularized families use their expanded determinant formulas; the
    two reference solutions use the determinant of the closed-form Hessian.
    """
    fam = check_params(family, params)
    if fam in (Family.BLOCKI, Family.HE):
        from .wirtinger import ma_det

        z = check_domain(fam, params, z)
        _refuse_locus(fam, params, z)
        out = np.asarray(ma_det(jet_closed(fam, params, z).hess), dtype=float)
    else:
        out = 1.0 + np.asarray(ma_residual_closed(fam, params, z))
    return float(out) if out.ndim == 0 else out
