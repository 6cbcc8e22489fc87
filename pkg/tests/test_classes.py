import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from algebroid_lab.algebroid import LForm, d_L, end_model, example_model, riemannian_reduction, wedge
from algebroid_lab.classes import (InvariantCochain, chern_simons, commutation_defect,
                                   crainic_matrix_class, delta_bar, delta_cochain,
                                   delta_universal, exactness_residual, invariance_check,
                                   omega_B_nabla, pfaffian_cochain, pullback, relation_constant,
                                   relation_k1, trace_cochain, u_class)
from algebroid_lab.connections import (adjoint_connection, canonical_splitting, difference_form,
                                       gauge_flat, identity, symmetric_form, trace)
from algebroid_lab.errors import PreconditionError
from algebroid_lab.fields import Field, mul
from algebroid_lab.fixtures import (non_flat, random_metric, reduction_algebroid, second_flat,
                                    skew_gauge, twisted_pair)
from algebroid_lab.lie import (ConstAltForm, FibreMetric, VolumeElement, commutator, pfaffian,
                               symmetrize)

seeds = st.integers(0, 2 ** 32 - 1)
E1 = np.array([[1.0, 0.0], [0.0, 0.0]])
E3 = np.array([[0.0, 1.0], [1.0, 0.0]])
SKEW = np.array([[0.0, 1.0], [-1.0, 0.0]])
I2 = FibreMetric.identity(2)
VOL = VolumeElement(2, 1.0)


@pytest.fixture(scope="module")
def model():
    A = example_model()
    B = riemannian_reduction(A, I2)
    return A, B, trace_cochain(B, I2, 1), pfaffian_cochain(B, I2, VOL)


def test_invariance(model, rng):
    A, B, y1, y2 = model
    assert invariance_check(y1).passed
    assert invariance_check(y2).passed
    bad = InvariantCochain(B, ConstAltForm(2, 3, rng.normal(size=3)), "random")
    assert not invariance_check(bad).passed


def test_dbar_examples(model, rng):
    A, B, y1, y2 = model
    assert delta_bar(y1).form.norm() < 1e-15
    for psi in (y1, y2, InvariantCochain(B, ConstAltForm(1, 3, rng.normal(size=3)))):
        assert delta_bar(delta_bar(psi)).form.norm() < 1e-12


def test_omega_on_kernel_section(model):
    A, B, _, _ = model
    w = omega_B_nabla(identity(A), B)
    # the splitting sends (0, s) to s, and the form carries a minus sign
    assert np.allclose(w.evaluate(A.kernel_section(E1)).constant_value(), [-1.0, 0.0, 0.0])


def test_delta_y1_is_minus_trace(model, rng):
    A, B, y1, _ = model
    D = delta_universal(y1)
    X = rng.normal()
    s = rng.normal(size=(2, 2))
    xi = A.section(np.concatenate([[X], s.ravel()]))
    assert D.evaluate(xi).constant_value() == pytest.approx(-np.trace(s))


def test_delta_y2_pointwise(model, rng):
    A, B, _, y2 = model
    D = delta_universal(y2)
    for _ in range(5):
        X, s1, s2 = rng.normal(size=2), rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
        xi = A.section(np.concatenate([[X[0]], s1.ravel()]))
        eta = A.section(np.concatenate([[X[1]], s2.ravel()]))
        want = pfaffian(commutator(symmetrize(s1, I2), symmetrize(s2, I2)))
        assert D.evaluate(xi, eta).constant_value() == pytest.approx(want, abs=1e-12)


def test_pfaffian_cochain_examples(model, rng):
    _, _, _, y2 = model
    assert y2(E1, E3) == 1.0
    s = rng.normal(size=(2, 2))
    assert abs(y2(s, s)) < 1e-14
    assert abs(y2(SKEW, s)) < 1e-15


def test_delta_trivial_cases(model):
    A, B, y1, y2 = model
    zero = InvariantCochain(B, ConstAltForm.zeros(2, 3))
    assert delta_universal(zero).norm() == 0.0
    assert (pullback(identity(A), delta_universal(y2)) - delta_universal(y2)).norm() == 0.0


def test_delta_is_multiplicative(model, rng):
    A, B, y1, _ = model
    other = InvariantCochain(B, ConstAltForm(1, 3, rng.normal(size=3)))
    lhs = delta_cochain(y1.wedge(other), identity(A))
    rhs = wedge(delta_cochain(y1, identity(A)), delta_cochain(other, identity(A)))
    assert (lhs - rhs).norm() < 1e-12


def test_vanishing_into_B(model):
    A, B, y1, y2 = model
    LB, incl = reduction_algebroid(A, I2)
    for psi in (y1, y2):
        assert np.abs(delta_cochain(psi, incl).values.coeffs).max() == 0.0


@given(seeds)
def test_factorization_and_splitting_independence(seed):
    rng = np.random.default_rng(seed)
    A, nab, h = twisted_pair(2, rng)
    B = riemannian_reduction(A, h)
    psi = pfaffian_cochain(B, h, VOL)
    direct = delta_cochain(psi, nab)
    assert (direct - pullback(nab, delta_universal(psi))).norm() < 1e-12
    twist = Field.constant(B.h_basis @ rng.normal(size=(B.h_basis.shape[1], 1)), 1)
    assert (direct - delta_cochain(psi, nab, canonical_splitting(A, twist))).norm() < 1e-12


def test_splitting_outside_B_is_rejected(model):
    A, B, y1, _ = model
    twist = Field.constant(np.ones((4, 1)), 1)
    with pytest.raises(PreconditionError):
        delta_cochain(y1, identity(A), canonical_splitting(A, twist))


def test_commutation_gauge_flat(rng):
    A, nab, h = twisted_pair(2, rng)
    B = riemannian_reduction(A, h)
    for psi in (trace_cochain(B, h, 1), pfaffian_cochain(B, h, VOL)):
        assert commutation_defect(psi, nab).passed
    bad = non_flat(2)
    B2 = riemannian_reduction(bad.target, I2)
    with pytest.raises(PreconditionError):
        commutation_defect(trace_cochain(B2, I2, 1), bad)


def test_crainic_examples(rng):
    assert crainic_matrix_class(skew_gauge(2), I2, 1).form.norm() == 0.0
    K = np.array([[1.0, 0.5], [0.5, -3.0]])
    phi = Field.sin(1, 0) + Field.cos(1, 0, 2)
    cls = crainic_matrix_class(gauge_flat(K, phi), I2, 1)
    assert (cls.form.values.reshape(()) - phi.derivative(0) * np.trace(K)).norm() < 1e-14
    A, nab, h = twisted_pair(3, rng)
    for k in (1, 2):
        assert crainic_matrix_class(nab, h, k).closedness <= 1e-9


def test_riemannian_classes_vanish(rng):
    A, _, h = twisted_pair(3, rng)
    LB, incl = reduction_algebroid(A, h)
    for k in (1, 2):
        assert crainic_matrix_class(incl, h, k).form.norm() < 1e-14
        assert u_class(incl, h, k).form.norm() < 1e-14


def test_cs_examples(rng):
    A, nab, h = twisted_pair(2, rng)
    for mode in ("quadrature", "closed_form"):
        assert chern_simons(nab, nab, 2, mode).norm() == 0.0
    nh = adjoint_connection(nab, h)
    cs1 = chern_simons(nab, nh, 1, "quadrature")
    assert (cs1 - trace(difference_form(nab, nh))).norm() < 1e-14


@given(seeds)
def test_cs_quadrature_matches_closed_form(seed):
    rng = np.random.default_rng(seed)
    A, nab, _ = twisted_pair(3, rng)
    other = second_flat(A, rng)
    q = chern_simons(nab, other, 2, "quadrature")
    c = chern_simons(nab, other, 2, "closed_form")
    assert (q - c).norm() <= 1e-8 * c.norm()
    assert (chern_simons(nab, other, 2, "exact") - c).norm() <= 1e-8 * c.norm()


def test_cs_closed_form_needs_flatness():
    nab = non_flat(2)
    with pytest.raises(PreconditionError):
        chern_simons(nab, nab, 1, "closed_form")


def test_u1_is_twice_trace(rng):
    A, nab, h = twisted_pair(2, rng)
    u1 = u_class(nab, h, 1).form
    assert (u1 - trace(symmetric_form(nab, h)) * 2.0).norm() < 1e-13


def test_u5_closed_on_end4():
    A, nab, h = twisted_pair(4, None)
    u5 = u_class(nab, h, 3)
    assert u5.closedness <= 1e-9


def test_relation_constant():
    assert relation_constant(1) == -0.5
    assert relation_k1(example_model(), I2) < 1e-10


def test_exactness_oracles(rng):
    A = example_model()
    zeta = LForm.random(A, 1, rng, N=2)
    res = exactness_residual(d_L(zeta), 2)
    assert res.residual <= 1e-9
    assert exactness_residual(LForm.zeros(A, 2), 1).residual == 0.0
