import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from singularma import catalog
from singularma.catalog import FamilyParams
from singularma.quadrature import (
    Bump,
    DomainBox,
    InconclusiveError,
    NormKind,
    QuadratureError,
    QuadratureSpec,
    QuadratureWarning,
    classify_series,
    default_annuli,
    integrate,
    norm,
    norm_estimate,
    residual_field,
    sobolev_probe,
    weak_convergence,
)


def one(z):
    return np.ones(z.shape[:-1])


def test_area_of_disc():
    res = integrate(one, DomainBox((1.0,)))
    assert res.value == pytest.approx(math.pi, rel=1e-12)


def test_radial_identity():
    # int_{D_R} |z|^2 dA = pi R^4 / 2
    res = integrate(lambda z: np.abs(z[..., 0]) ** 2, DomainBox((0.7,)))
    assert res.value == pytest.approx(math.pi * 0.7**4 / 2, rel=1e-12)


def test_bidisc_moment():
    # int |z1|^2 |z2|^4 over D_a x D_b
    a, b = 0.5, 1.3
    want = (math.pi * a**4 / 2) * (math.pi * b**6 / 3)
    res = integrate(lambda z: np.abs(z[..., 0]) ** 2 * np.abs(z[..., 1]) ** 4, DomainBox((a, b)))
    assert res.value == pytest.approx(want, rel=1e-12)


def test_inner_radius_and_volume():
    dom = DomainBox((1.0, 2.0), inner=(0.5, 0.0))
    assert dom.volume() == pytest.approx(math.pi * 0.75 * math.pi * 4)
    assert integrate(one, dom).value == pytest.approx(dom.volume(), rel=1e-12)
    assert DomainBox((1.0, 2.0)).contains(dom)


def test_domain_validation():
    with pytest.raises(QuadratureError):
        DomainBox((1.0, -1.0))
    with pytest.raises(QuadratureError):
        DomainBox((1.0,), r_min=2.0)
    with pytest.raises(QuadratureError):
        QuadratureSpec(nodes=2)


def test_norm_examples():
    assert norm(one, NormKind.lp(2), DomainBox((1.0,))) == pytest.approx(math.sqrt(math.pi), rel=1e-12)
    c = 3.0
    val = norm(lambda z: np.full(z.shape[:-1], c), NormKind.llogl(1), DomainBox((1.0,)))
    assert val == pytest.approx(math.pi * c * math.log(math.e + c), rel=1e-12)
    with pytest.raises(ValueError):
        NormKind.lp(0.5)


def ex1_l1_reduced(eps):
    # x2^2 integrates to pi/4 over D_1, and the field is radial in z1
    def f(rho):
        s = rho * rho + eps
        L = -math.log(s)
        return 2 * math.pi * rho * eps * (2 * (math.pi / 4) / (s * s * L**3) + math.pi / (s * L))

    return quad(f, 0, 0.5, points=[math.sqrt(eps)], limit=400, epsabs=0, epsrel=1e-13)[0]


@pytest.mark.parametrize("eps", [1e-2, 1e-4, 1e-7])
def test_ex1_l1_matches_reduced_integral(eps):
    p = FamilyParams(2, eps=eps)
    dom = DomainBox((0.5, 1.0))
    val = norm(residual_field("EX1", p), NormKind.lp(1), dom, QuadratureSpec(toric=(0,)))
    assert val == pytest.approx(ex1_l1_reduced(eps), rel=1e-10)


def test_toric_matches_full_tensor():
    p = FamilyParams(2, beta=0.4, eps=1e-3)
    g = residual_field("EX2_V", p)
    dom = DomainBox((0.5, 1.0))
    a = norm(g, NormKind.lp(1), dom, QuadratureSpec(levels=30, toric=True))
    b = norm(g, NormKind.lp(1), dom, QuadratureSpec(levels=30, toric=False))
    assert a == pytest.approx(b, rel=1e-12)


def test_worker_count_is_deterministic():
    p = FamilyParams(2, eps=1e-5)
    g = residual_field("EX1", p)
    dom = DomainBox((0.5, 1.0))
    vals = {norm(g, NormKind.lp(1), dom, QuadratureSpec(toric=(0,), workers=w)) for w in (1, 3, 8)}
    assert len(vals) == 1
    comp = {norm(g, NormKind.lp(1), dom, QuadratureSpec(toric=(0,), workers=w, summation="compensated")) for w in (1, 4)}
    assert len(comp) == 1


def test_tolerance_warning():
    with pytest.warns(QuadratureWarning):
        integrate(lambda z: np.abs(z[..., 0]) ** -1.9, DomainBox((1.0,)), QuadratureSpec(levels=4), tol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 0.9), st.floats(1.0, 2.0), st.floats(1e-8, 1e-2))
def test_norm_monotone_in_domain(a, grow, eps):
    g = residual_field("EX2_V", FamilyParams(2, beta=0.5, eps=eps))
    spec = QuadratureSpec(levels=20, toric=True)
    small = norm(g, NormKind.lp(1), DomainBox((a * 0.5, a)), spec)
    big = norm(g, NormKind.lp(1), DomainBox((min(a * 0.5 * grow, 0.99), a * grow)), spec)
    assert big >= small * (1 - 1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 3.0))
def test_lp_homogeneous(c):
    dom = DomainBox((0.5, 1.0))
    g = residual_field("EX1", FamilyParams(2, eps=1e-3))
    spec = QuadratureSpec(levels=20, toric=(0,))
    base = norm(g, NormKind.lp(2), dom, spec)
    assert norm(lambda z: c * g(z), NormKind.lp(2), dom, spec) == pytest.approx(c * base, rel=1e-12)


# ---------------------------------------------------------------- series classifier


def test_classifier_examples():
    k = np.arange(1, 41)
    assert classify_series(np.cumsum(0.5**k)).classification == "finite"
    assert classify_series(np.cumsum(k**-2.0)).classification in ("finite", "inconclusive")
    assert classify_series(np.cumsum(1.0 / k)).classification in ("divergent", "inconclusive")
    assert classify_series(np.cumsum(np.ones(40))).classification == "divergent"
    assert classify_series(np.cumsum(2.0**k)).classification == "divergent"
    assert classify_series(np.ones(10)).classification == "finite"
    with pytest.raises(ValueError):
        classify_series([1, 2, 3])


@settings(max_examples=30, deadline=None)
@given(st.floats(0.05, 0.8), st.floats(0.1, 10.0))
def test_geometric_series_finite(rho, c):
    k = np.arange(30)
    assert classify_series(np.cumsum(c * rho**k)).classification == "finite"


@settings(max_examples=30, deadline=None)
@given(st.floats(1.05, 3.0), st.floats(0.1, 10.0))
def test_growing_series_divergent(q, c):
    k = np.arange(30)
    assert classify_series(np.cumsum(c * q**k)).classification == "divergent"


# ---------------------------------------------------------------- Sobolev probes


def test_default_annuli():
    r = default_annuli(5)
    assert r[0] == 0.5 and r.size == 6 and np.allclose(r[1:] / r[:-1], 0.5)


def test_sobolev_examples():
    p = FamilyParams(2)
    assert sobolev_probe("EX1", p, 1, 2.0, default_annuli(40)).classification == "finite"
    assert sobolev_probe("EX1", p, 2, 1.0, default_annuli(40)).classification == "finite"
    assert sobolev_probe("EX1", p, 2, 1.5, default_annuli(40)).classification == "divergent"
    assert sobolev_probe("EX1", p, 1, 2.5, default_annuli(40)).classification == "divergent"


def test_sobolev_depth_stable():
    p = FamilyParams(2, beta=0.5)
    got = {sobolev_probe("EX2_V", p, 2, 1.5, default_annuli(d)).classification for d in (24, 32, 40)}
    assert got == {"divergent"}


def test_sobolev_refusals():
    with pytest.raises(catalog.DomainError):
        sobolev_probe("EX1", FamilyParams(2, eps=0.1), 1, 2.0)
    with pytest.raises(catalog.DomainError):
        sobolev_probe("BLOCKI", FamilyParams(3), 1, 2.0)
    with pytest.raises(ValueError):
        sobolev_probe("EX1", FamilyParams(2), 3, 2.0)


def test_inconclusive_raises_on_request():
    res = sobolev_probe("EX1", FamilyParams(2), 1, 2.0, default_annuli(40))
    assert res.raise_if_inconclusive() is res
    fake = res._replace(classification="inconclusive")
    with pytest.raises(InconclusiveError):
        fake.raise_if_inconclusive()


# ---------------------------------------------------------------- weak convergence


def test_bump():
    b = Bump((0j, 0j), (0.5, 1.0), amplitude=2.0)
    assert b(np.zeros(2, complex)) == pytest.approx(2.0)
    assert b(np.array([0.5, 0.0], complex)) == 0.0
    assert b.sup == 2.0 and b.toric
    assert b.support_box().radii == (0.5, 1.0)


def test_weak_zero_test_function():
    out = weak_convergence("EX1", FamilyParams(2), Bump((0j, 0j), (0.5, 1.0), 0.0), [1e-2, 1e-4])
    assert [w.error for w in out] == [0.0, 0.0]


def test_weak_error_bounded_by_l1():
    phi = Bump((0j, 0j), (0.5, 1.0))
    for eps in (1e-2, 1e-5):
        p = FamilyParams(2, eps=eps)
        w = weak_convergence("EX1", p, phi, [eps])[0]
        l1 = norm(residual_field("EX1", p), NormKind.lp(1), DomainBox((0.5, 1.0)), QuadratureSpec(toric=(0,)))
        assert w.error <= phi.sup * l1 * (1 + 1e-9)


def test_weak_support_check():
    with pytest.raises(catalog.DomainError):
        weak_convergence("EX1", FamilyParams(2), Bump((0j, 0j), (0.95, 1.0)), [0.1])


def test_norm_estimate_error_small():
    res = norm_estimate(residual_field("EX1", FamilyParams(2, eps=1e-4)), NormKind.lp(1), DomainBox((0.5, 1.0)),
                        QuadratureSpec(toric=(0,)))
    assert res.err_est < 1e-6 * res.value
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        integrate(one, DomainBox((1.0,)), tol=1e-10)
