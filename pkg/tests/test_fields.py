import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from algebroid_lab.errors import InputError
from algebroid_lab.fields import (Field, field_norm, get_cap, mul, partial_derivative,
                                  truncation_cap)

XS = np.linspace(0.0, 2 * np.pi, 7, endpoint=False)


def test_constant_product():
    assert mul(Field.constant(2.0), Field.constant(3.0)).constant_value() == pytest.approx(6.0)


def test_sin_plus_sin_coefficients():
    s = Field.sin(1, 0)
    two = s + s
    assert two.coeff((1,)) == pytest.approx(-1j)
    assert two.coeff((-1,)) == pytest.approx(1j)


def test_sin_times_cos():
    p = mul(Field.sin(1, 0), Field.cos(1, 0))
    # sin x cos x = sin(2x)/2
    assert p.coeff((2,)) == pytest.approx(-0.25j)
    assert p.coeff((-2,)) == pytest.approx(0.25j)
    assert abs(p.coeff((0,))) < 1e-15


def test_derivatives():
    d = partial_derivative(Field.sin(1, 0), 1)
    assert np.allclose(d.coeffs, Field.cos(1, 0).coeffs)
    assert partial_derivative(Field.constant(4.0), 1).norm() == 0.0
    assert partial_derivative(Field.sin(2, 0), 2).norm() == 0.0
    with pytest.raises(InputError):
        partial_derivative(Field.sin(1, 0), 2)


def test_t_integration():
    one = Field.constant(1.0)
    p = Field.tpoly([one * 0.0, one * -1.0, one])  # t^2 - t
    assert p.integrate_unit().constant_value() == pytest.approx(-1 / 6)
    c = Field.constant(2.5)
    assert Field.tpoly([c]).integrate_unit().constant_value() == pytest.approx(2.5)


def test_t_linear_integrand(rng):
    f = Field.random(rng, (2,), 1, 2)
    p = Field.tpoly([f * 0.0, f])
    assert np.allclose(p.integrate_unit().coeffs, 0.5 * f.coeffs)


def test_norm_examples():
    assert field_norm(Field.zeros()) == 0.0
    assert field_norm(Field.sin(1, 0)) == pytest.approx(1.0)
    assert field_norm(Field.constant(-3.0)) == pytest.approx(3.0)


def test_cap_from_env_and_context(monkeypatch):
    monkeypatch.setenv("ALGEBROID_LAB_TRUNC_CAP", "5")
    assert get_cap() == 5
    with truncation_cap(3):
        assert get_cap() == 3
    monkeypatch.delenv("ALGEBROID_LAB_TRUNC_CAP")
    assert get_cap() == 8


def test_truncation_is_tracked():
    f = Field.cos(1, 0, 3)
    with truncation_cap(4):
        p = mul(f, f)
    assert p.N == 4
    # cos^2(3x) = 1/2 + cos(6x)/2; the k=+-6 half is lost
    assert p.lost == pytest.approx(0.5)
    assert p.coeff((0,)) == pytest.approx(0.5)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 2))
def test_product_matches_pointwise(seed, d):
    rng = np.random.default_rng(seed)
    a = Field.random(rng, (), d, 2)
    b = Field.random(rng, (), d, 2)
    p = mul(a, b)
    x = rng.uniform(0, 2 * np.pi, size=d)
    assert p.lost == 0.0
    assert p.evaluate(x) == pytest.approx(a.evaluate(x) * b.evaluate(x), abs=1e-12)


@given(st.integers(0, 2 ** 32 - 1))
def test_fields_stay_real(seed):
    rng = np.random.default_rng(seed)
    a = Field.random(rng, (2, 2), 1, 3)
    p = mul(a, a, "ij,jk->ik")
    flipped = np.conj(np.flip(p.coeffs, axis=-1))
    assert np.allclose(p.coeffs, flipped)


@given(st.integers(0, 2 ** 32 - 1))
def test_derivative_is_a_derivation(seed):
    rng = np.random.default_rng(seed)
    a = Field.random(rng, (), 1, 2)
    b = Field.random(rng, (), 1, 2)
    lhs = mul(a, b).derivative(0)
    rhs = mul(a.derivative(0), b) + mul(a, b.derivative(0))
    assert (lhs - rhs).norm() < 1e-12


def test_evaluate_sin():
    vals = [Field.sin(1, 0).evaluate([x]) for x in XS]
    assert np.allclose(np.ravel(vals), np.sin(XS))


def test_from_literals_roundtrip():
    f = Field.from_literals(2, [{"index": [0, 1], "im": -0.5}])
    assert f.evaluate([0.0, 1.2]) == pytest.approx(np.sin(1.2))
    assert Field.from_literals(1, []).norm() == 0.0
