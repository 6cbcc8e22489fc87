import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from algebroid_lab.algebroid import (LForm, Section, bracket, build_transitive, d_L,
                                     example_model, lift_form, product_with_line,
                                     reduction_quotient, riemannian_reduction, tangent, validate,
                                     wedge)
from algebroid_lab.errors import InputError
from algebroid_lab.fields import Field, mul
from algebroid_lab.fixtures import corrupted
from algebroid_lab.lie import abelian, commutator, matrix_units, so3

seeds = st.integers(0, 2 ** 32 - 1)


def random_section(L, rng, N=2):
    return Section(L, Field.random(rng, (L.rank,), L.dim, N))


def test_tangent_bracket_example():
    T = tangent(1)
    xi = Section(T, Field.stack([Field.sin(1, 0)]))
    eta = T.frame(0)
    br = bracket(xi, eta)
    assert np.allclose(br.comps.coeffs, (Field.cos(1, 0) * -1.0).coeffs.reshape(1, -1))


@given(seeds)
def test_bracket_is_alternating(seed):
    rng = np.random.default_rng(seed)
    L = example_model()
    xi = random_section(L, rng)
    assert bracket(xi, xi).norm() < 1e-12


@given(seeds)
def test_leibniz_rule(seed):
    rng = np.random.default_rng(seed)
    L = example_model()
    xi, eta = random_section(L, rng, 1), random_section(L, rng, 1)
    f = Field.random(rng, (), 1, 1)
    lhs = bracket(xi, Section(L, mul(f, eta.comps)))
    rhs = Section(L, mul(f, bracket(xi, eta).comps) + mul(L.rho(xi, f), eta.comps))
    assert (lhs - rhs).norm() < 1e-12


def test_kernel_bracket_is_commutator(rng):
    L = example_model()
    s1, s2 = rng.normal(size=(2, 2, 2))
    br = bracket(L.kernel_section(s1), L.kernel_section(s2))
    expect = L.kernel_section(commutator(s1, s2))
    assert (br - expect).norm() < 1e-14


def test_validation_examples():
    assert validate(tangent(2)).max_defect == 0.0
    rep = validate(example_model())
    assert rep.passed and rep.max_defect <= 1e-12
    bad = validate(corrupted(example_model(), 0.1))
    assert not bad.passed
    assert bad["jacobi"].defect == pytest.approx(0.1)
    assert validate(build_transitive(2, so3())).passed


def test_abelian_line():
    L = build_transitive(1, abelian(1))
    assert L.rank == 2
    assert L.structure.norm() == 0.0


def test_de_rham_case():
    T = tangent(1)
    f = Field.sin(1, 0, 2)
    df = d_L(LForm(T, 0, Field.stack([f])))
    assert np.allclose(df.values.coeffs, Field.stack([f.derivative(0)]).coeffs)


def test_constant_kernel_form(rng):
    L = example_model()
    zeta = np.zeros(L.rank)
    zeta[list(L.kernel_index)] = rng.normal(size=4)
    dz = d_L(LForm.constant(L, 1, zeta))
    s1, s2 = rng.normal(size=(2, 2, 2))
    got = dz.evaluate(L.kernel_section(s1), L.kernel_section(s2)).constant_value()
    want = -zeta[list(L.kernel_index)] @ commutator(s1, s2).ravel()
    assert got == pytest.approx(want)


@given(seeds, st.integers(0, 2))
def test_d_squared_vanishes(seed, k):
    rng = np.random.default_rng(seed)
    L = example_model()
    w = LForm.random(L, k, rng, N=2)
    assert d_L(d_L(w)).norm() < 1e-10


@given(seeds, st.integers(0, 1), st.integers(0, 2))
def test_d_is_a_graded_derivation(seed, p, q):
    rng = np.random.default_rng(seed)
    L = example_model()
    a, b = LForm.random(L, p, rng, N=1), LForm.random(L, q, rng, N=1)
    lhs = d_L(wedge(a, b))
    rhs = wedge(d_L(a), b) + wedge(a, d_L(b)) * (-1.0) ** p
    assert (lhs - rhs).norm() < 1e-10


def test_top_degree_has_no_differential():
    T = tangent(1)
    with pytest.raises(InputError):
        d_L(LForm.zeros(T, 1))


def test_product_with_line(rng):
    T = tangent(1)
    P = product_with_line(T)
    assert validate(P).passed
    xi = random_section(T, rng)
    lifted = Section(P, Field.stack([Field.zeros((), 1).with_t(),
                                     xi.comps.with_t().take([0]).reshape(())]))
    assert bracket(P.frame(0), lifted).norm() < 1e-14
    f = Field.random(rng, (), 1, 2)
    tf = Field.tpoly([f * 0.0, f])
    assert np.allclose(P.rho(P.frame(0), tf).trim_t().coeffs[..., 0], f.coeffs)


def test_lift_form_commutes_with_d(rng):
    L = example_model()
    P = product_with_line(L)
    w = LForm.random(L, 1, rng, N=1)
    assert (d_L(lift_form(w, P)) - lift_form(d_L(w), P)).norm() < 1e-12


def test_reduction_quotient(rng):
    L = example_model()
    B = riemannian_reduction(L, np.eye(2))
    assert B.check().passed
    skew = np.array([[0.0, 1.0], [-1.0, 0.0]])
    assert reduction_quotient(B, skew).norm() < 1e-15
    E1 = matrix_units(2)[0]
    assert np.allclose(reduction_quotient(B, E1).constant_value(), [1.0, 0.0, 0.0])
    s, t = rng.normal(size=(2, 2, 2))
    a = 0.7
    lhs = reduction_quotient(B, a * s + t).constant_value()
    rhs = a * reduction_quotient(B, s).constant_value() + reduction_quotient(B, t).constant_value()
    assert np.allclose(lhs, rhs)
