import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from singularma import catalog as c
from singularma.catalog import FamilyParams
from singularma.wirtinger import fd_jet_family, ma_det

P2 = FamilyParams(2)


def test_list_families():
    fams = c.list_families()
    assert len(fams) == 6
    ex1 = next(f for f in fams if f.family is c.Family.EX1)
    assert ex1.domain.startswith("D x C^(n-1)")
    blocki = next(f for f in fams if f.family is c.Family.BLOCKI)
    assert blocki.rhs == "(1 + |z1|^2)^(n-2)"


def test_unknown_family():
    with pytest.raises(c.DomainError):
        c.as_family("EX9")


def test_param_regions():
    with pytest.raises(c.DomainError):
        c.check_params("EX2_V", FamilyParams(2, beta=1.0))
    with pytest.raises(c.DomainError):
        c.check_params("EX3_W", FamilyParams(2, gamma=2.0))
    with pytest.raises(c.DomainError):
        c.check_params("EX1", FamilyParams(2, eps=1.0))
    with pytest.raises(c.DomainError):
        c.check_params("BLOCKI", FamilyParams(3, eps=0.1))
    with pytest.raises(c.DomainError):
        c.check_params("EX1", FamilyParams(3))
    with pytest.raises(c.DomainError):
        c.evaluate("EX1", FamilyParams(2, eps=0.2), (0.85, 0))


def test_eval_examples():
    e = math.exp(-1)
    assert c.evaluate("EX1", P2, (e, 1)) == pytest.approx(1 + 4 * math.exp(-2), rel=1e-14)
    assert c.evaluate("EX1", P2, (0, 3 + 1j)) == 0.0
    assert c.evaluate("EX3_W", FamilyParams(2, gamma=1.0), (1, 1)) == pytest.approx(5.0, rel=1e-14)
    assert c.evaluate("EX2_V", FamilyParams(2, beta=0.0), (1, 1)) == pytest.approx(4.0, rel=1e-14)
    # frozen closed-form value
    assert c.evaluate("EX1", P2, (0.5, 1)) == pytest.approx(2.289268631168936, rel=1e-14)


def test_real_interleaved_points():
    z = np.array([0.3 + 0.2j, -0.4 + 1.1j])
    x = z.view(float)
    assert c.evaluate("EX1", P2, x) == c.evaluate("EX1", P2, z)


def test_ex2v_two_dimensional_reduction():
    rng = np.random.default_rng(3)
    beta = 0.37
    z = rng.uniform(-1, 1, (50, 2)) + 1j * rng.uniform(-1, 1, (50, 2))
    a1, a2 = np.abs(z[:, 0]), np.abs(z[:, 1])
    want = 2.0 / (1 - beta) * a2 * (a1**beta + a1 ** (2 - beta))
    assert np.allclose(c.evaluate("EX2_V", FamilyParams(2, beta=beta), z), want, rtol=1e-13)


def test_jet_examples():
    jet = c.jet_closed("EX1", FamilyParams(2, eps=0.1), (0, 0))
    assert jet.hess[1, 1].real == pytest.approx(-1 / math.log(0.1), rel=1e-14)
    jet = c.jet_closed("EX1", P2, (math.exp(-1), 1))
    assert jet.grad[1].real == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(c.SingularPointError):
        c.jet_closed("EX1", P2, (0, 1))


def test_det_examples():
    assert c.ma_det_closed("EX1", P2, (0.5, 2 + 1j)) == pytest.approx(1.0, abs=1e-14)
    assert c.ma_det_closed("EX1", FamilyParams(2, eps=math.exp(-10)), (0, 0)) == pytest.approx(1.1, rel=1e-14)
    rng = np.random.default_rng(0)
    z = rng.uniform(0.1, 2, (20, 2)) * np.exp(1j * rng.uniform(0, 6.3, (20, 2)))
    assert np.allclose(c.ma_det_closed("BLOCKI", FamilyParams(2), z), 1.0, atol=1e-12)


def test_rhs():
    assert c.rhs("EX2_V", FamilyParams(2, beta=0.5)) == 1.0
    assert c.rhs("BLOCKI", FamilyParams(3), (1, 0.3, 0.2)) == pytest.approx(2.0)
    assert c.rhs("HE", FamilyParams(3)) == 1.0


def test_hn_coefficients():
    assert c.hn_coeffs(2).coeffs == (2.0, -2.0)
    assert c.hn_coeffs(3).coeffs == (6.0, -8.0, 4.0)
    a4 = c.hn_coeffs(4).coeffs
    assert a4[0] == 24 and a4[3] == -8
    with pytest.raises(c.DomainError):
        c.hn_coeffs(1)


def test_hn_values():
    h, h1, _ = c.hn_eval(2, 1 - 1e-12)
    assert h == pytest.approx(2.0, rel=1e-10)
    assert c.hn_eval(2, 0.0)[:2] == (0.0, 0.0)
    r = 0.5
    h, h1, h2 = c.hn_eval(3, r)
    assert abs(r * h2 + h1 - 16 * r * math.log(r) ** 2) < 1e-12
    with pytest.raises(c.DomainError):
        c.hn_eval(2, 1.0)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_hn_ode_and_monotone(n):
    r = np.linspace(0.001, 0.999, 100)
    h, h1, h2 = c.hn_eval(n, r)
    assert np.max(np.abs(r * h2 + h1 - (-2.0) ** (n + 1) * r * np.log(r) ** (n - 1))) < 1e-10
    assert np.all(c.hn_eval(n, np.linspace(0.1, 0.9, 9))[1] > 0)


def test_hn_ode_against_numeric_integration():
    # integrate (r h')' = (-2)^(n+1) r log^(n-1) r from h(0) = h'(0) = 0
    from scipy.integrate import quad

    n, r1 = 4, 0.6
    rh1 = quad(lambda s: (-2.0) ** (n + 1) * s * math.log(s) ** (n - 1), 0, r1, epsabs=1e-13)[0]
    assert c.hn_eval(n, r1)[1] == pytest.approx(rh1 / r1, rel=1e-9)


def test_singular_locus():
    assert c.singular_locus("EX1", P2).components == ((0,),)
    assert c.singular_locus("EX2_V", FamilyParams(3, beta=0.2)).components == ((0,), (1, 2))
    assert c.singular_locus("BLOCKI", FamilyParams(3)).components == ((1, 2),)
    assert c.singular_locus("HE", FamilyParams(3)).components == ((0,),)
    assert c.singular_locus("EX3_W", FamilyParams(2, gamma=0.5, eps=0.1)).empty


CASES = [
    ("EX1", FamilyParams(2)),
    ("EX1", FamilyParams(2, eps=0.05)),
    ("EX1_ND", FamilyParams(3)),
    ("EX1_ND", FamilyParams(3, eps=0.05)),
    ("EX2_V", FamilyParams(2, beta=0.5)),
    ("EX2_V", FamilyParams(3, beta=0.3, eps=0.02)),
    ("EX3_W", FamilyParams(2, gamma=0.5, eps=0.02)),
    ("EX3_W", FamilyParams(3, gamma=1.5)),
    ("BLOCKI", FamilyParams(3)),
    ("HE", FamilyParams(3)),
]

coord = st.tuples(st.floats(0.2, 0.7), st.floats(0, 2 * math.pi))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(CASES), st.lists(coord, min_size=3, max_size=3))
def test_closed_jet_matches_fd(case, polar):
    fam, p = case
    z = np.array([r * np.exp(1j * a) for r, a in polar[: p.n]])
    closed = c.jet_closed(fam, p, z)
    fd = fd_jet_family(fam, p, z)
    scale = max(1.0, np.max(np.abs(closed.hess)))
    assert np.max(np.abs(closed.hess - fd.hess)) < 1e-6 * scale
    assert np.max(np.abs(closed.grad - fd.grad)) < 1e-6 * max(1.0, np.max(np.abs(closed.grad)))
    assert np.allclose(closed.hess, np.conj(np.swapaxes(closed.hess, -1, -2)))
    assert abs(c.ma_det_closed(fam, p, z) - ma_det(closed.hess)) < 1e-10 * max(1.0, abs(ma_det(closed.hess)))


@settings(max_examples=30, deadline=None)
@given(st.sampled_from([c for c in CASES if c[1].eps == 0]), st.lists(coord, min_size=3, max_size=3))
def test_singular_solutions_solve_equation(case, polar):
    fam, p = case
    z = np.array([r * np.exp(1j * a) for r, a in polar[: p.n]])
    f = c.rhs(fam, p, z)
    assert abs(ma_det(c.jet_closed(fam, p, z).hess) - f) < 1e-10 * f


@settings(max_examples=40, deadline=None)
@given(
    st.sampled_from(["EX1", "EX2_V", "EX3_W"]),
    st.floats(1e-6, 0.3),
    st.floats(0.1, 0.9),
    st.lists(coord, min_size=2, max_size=2),
)
def test_regularizations_decrease(fam, e1, ratio, polar):
    p = FamilyParams(2, beta=0.5 if fam == "EX2_V" else None, gamma=0.5 if fam == "EX3_W" else None)
    z = np.array([r * np.exp(1j * a) for r, a in polar])
    hi = c.evaluate(fam, p.with_eps(e1), z)
    lo = c.evaluate(fam, p.with_eps(e1 * ratio), z)
    assert hi >= lo - 1e-12


@pytest.mark.parametrize("fam,p", [("EX1", P2), ("EX2_V", FamilyParams(2, beta=0.4)), ("HE", FamilyParams(2))])
def test_continuity_at_locus(fam, p):
    t = np.geomspace(1e-2, 1e-12, 11)
    z = np.stack([t + 0j, np.full(t.shape, 1.0 + 0.5j)], axis=-1)
    v = c.evaluate(fam, p, z)
    assert np.all(np.diff(np.abs(v)) < 0) and abs(v[-1]) < 0.05


def test_residual_consistency():
    rng = np.random.default_rng(1)
    z = rng.uniform(-0.5, 0.5, (100, 2)) + 1j * rng.uniform(-0.5, 0.5, (100, 2))
    for fam, p in [("EX1", FamilyParams(2, eps=1e-3)), ("EX2_V", FamilyParams(2, beta=0.5, eps=1e-3)),
                   ("EX3_W", FamilyParams(2, gamma=0.5, eps=1e-3))]:
        assert np.allclose(c.ma_det_closed(fam, p, z) - 1.0, c.ma_residual_closed(fam, p, z), atol=1e-12)


def test_toric_families_ignore_phases():
    z = np.array([0.3 + 0.4j, 0.6 - 0.8j])
    w = np.abs(z).astype(complex)
    for fam, p in [("EX2_V", FamilyParams(2, beta=0.3)), ("EX3_W", FamilyParams(2, gamma=0.7)), ("HE", FamilyParams(2))]:
        assert c.evaluate(fam, p, z) == pytest.approx(c.evaluate(fam, p, w), rel=1e-14)
