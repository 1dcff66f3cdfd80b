import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kobvis.domains import ball_polynomial, model_polynomial, polydisc_polynomial
from kobvis.polynomial import CompiledPolynomial, Polynomial, monomial, real_hessian, to_complex, to_real

finite = st.floats(-1.5, 1.5, allow_nan=False)
points = st.lists(finite, min_size=4, max_size=4).map(lambda x: to_complex(np.array(x)))


def test_roundtrip_monomials():
    p = model_polynomial()
    q = Polynomial.from_monomials(2, p.to_monomials())
    assert dict(q.terms) == {k: v for k, v in p.terms.items() if v != 0}


def test_rejects_bad_powers():
    with pytest.raises(ValueError):
        Polynomial.from_monomials(2, [monomial(2, [1], [0, 0])])
    with pytest.raises(ValueError):
        Polynomial.from_monomials(2, [monomial(2, [-1, 0], [0, 0])])


def test_hermitian_defect_detects_complex_valued():
    assert model_polynomial().hermitian_defect() == 0
    p = Polynomial.from_monomials(1, [monomial(1, [1], [0], 1.0)])
    assert p.hermitian_defect() > 0


def test_model_value_at_sample():
    rho = CompiledPolynomial(model_polynomial())
    assert rho.eval(np.array([-0.1, 0])) == pytest.approx(-0.09, abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(points)
def test_gradient_matches_finite_differences(z):
    rho = CompiledPolynomial(model_polynomial())
    g = rho.grad_z(z)
    h = 1e-6
    for j in range(2):
        e = np.zeros(2, complex)
        e[j] = 1
        dx = (rho.eval(z + h * e) - rho.eval(z - h * e)) / (2 * h)
        dy = (rho.eval(z + 1j * h * e) - rho.eval(z - 1j * h * e)) / (2 * h)
        # d/dz = (d/dx - i d/dy) / 2
        assert g[j] == pytest.approx(0.5 * (dx - 1j * dy), abs=1e-6 * (1 + abs(g[j])))


@settings(max_examples=40, deadline=None)
@given(points)
def test_real_hessian_matches_finite_differences(z):
    rho = CompiledPolynomial(model_polynomial())
    _, _, A, L = rho.all_derivatives(z)
    H = real_hessian(A, L)
    x = to_real(z)
    h = 1e-4
    for a in range(4):
        for b in range(4):
            ea, eb = np.eye(4)[a] * h, np.eye(4)[b] * h
            f = lambda y: rho.eval(to_complex(y))  # noqa: E731
            fd = (f(x + ea + eb) - f(x + ea - eb) - f(x - ea + eb) + f(x - ea - eb)) / (4 * h * h)
            assert H[a, b] == pytest.approx(fd, abs=1e-5 * (1 + abs(fd)))


@settings(max_examples=30, deadline=None)
@given(points)
def test_high_powers_agree_with_direct_formula(z):
    rho = CompiledPolynomial(polydisc_polynomial(32))
    direct = np.abs(z[0]) ** 64 + np.abs(z[1]) ** 64 - 1
    assert rho.eval(z) == pytest.approx(direct, rel=1e-12, abs=1e-12)


def test_compose_affine_identity_and_shift():
    p = ball_polynomial(2)
    q = p.compose_affine(np.zeros(2), np.eye(2))
    z = np.array([0.3 + 0.1j, -0.2j])
    assert CompiledPolynomial(q).eval(z) == pytest.approx(CompiledPolynomial(p).eval(z))
    base = np.array([1.0, 0])
    frame = np.array([[-1.0, 0], [0, 1.0], [0, 0]])
    r = ball_polynomial(3).compose_affine(np.append(base, 0), frame)
    w = np.array([0.2 + 0.1j, 0.4j])
    expected = abs(1 - w[0]) ** 2 + abs(w[1]) ** 2 - 1
    assert CompiledPolynomial(r).eval(w) == pytest.approx(expected, abs=1e-14)


def test_vectorised_evaluation_matches_pointwise():
    rho = CompiledPolynomial(model_polynomial())
    rng = np.random.default_rng(0)
    Z = rng.standard_normal((5, 3, 2)) + 1j * rng.standard_normal((5, 3, 2))
    vals = rho.eval(Z)
    assert vals.shape == (5, 3)
    assert vals[2, 1] == pytest.approx(rho.eval(Z[2, 1]))
    assert rho.levi_matrix(Z).shape == (5, 3, 2, 2)
