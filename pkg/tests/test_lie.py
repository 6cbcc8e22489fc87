import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from algebroid_lab.errors import InputError, PreconditionError
from algebroid_lab.lie import (ConstAltForm, FibreMetric, LieStructure, VolumeElement, abelian,
                               alpha_map, ce_differential, commutator, gl, jacobi_defect,
                               pfaffian, so3, symmetrize, trace_form, z_form)

E1 = np.array([[1.0, 0.0], [0.0, 0.0]])
E3 = np.array([[0.0, 1.0], [1.0, 0.0]])
E4 = np.array([[0.0, -1.0], [1.0, 0.0]])
I2 = FibreMetric.identity(2)

seeds = st.integers(0, 2 ** 32 - 1)


def random_form(rng, g, k):
    from algebroid_lab.combi import n_combos
    return ConstAltForm(k, g.dim, rng.normal(size=n_combos(g.dim, k)))


def test_structure_validation():
    assert jacobi_defect(gl(2).c) < 1e-14
    c = gl(2).c.copy()
    c[0, 0, 1] += 0.1
    c[0, 1, 0] -= 0.1
    with pytest.raises(InputError, match="Jacobi"):
        LieStructure(c)
    with pytest.raises(InputError, match="antisymmetric"):
        LieStructure(np.ones((2, 2, 2)))


def test_commutator_examples(rng):
    assert np.array_equal(commutator(E1, E3), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    A = rng.normal(size=(3, 3))
    assert np.abs(commutator(A, A)).max() == 0.0
    assert np.abs(commutator(np.eye(3), A)).max() == 0.0


def test_symmetrize_examples(rng):
    S = rng.normal(size=(3, 3))
    skew, sym = S - S.T, S + S.T
    h3 = FibreMetric.identity(3)
    assert np.abs(symmetrize(skew, h3)).max() == 0.0
    assert np.allclose(symmetrize(sym, h3), sym)
    h = FibreMetric(np.diag([1.0, 2.0]))
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert np.allclose(symmetrize(A, h), [[0.0, 0.5], [0.25, 0.0]])


def test_pfaffian_examples():
    assert pfaffian([[0.0, 1.0], [-1.0, 0.0]]) == 1.0
    assert pfaffian(np.zeros((4, 4))) == 0.0
    a, b = 1.7, -0.3
    S = np.zeros((4, 4))
    S[0, 1], S[1, 0], S[2, 3], S[3, 2] = a, -a, b, -b
    assert pfaffian(S) == pytest.approx(a * b)
    assert pfaffian(commutator(E1, E3)) == 1.0
    with pytest.raises(InputError):
        pfaffian(np.zeros((3, 3)))
    with pytest.raises(PreconditionError):
        pfaffian(np.eye(2))


def test_pfaffian_volume_scaling():
    S = np.array([[0.0, 2.0], [-2.0, 0.0]])
    assert pfaffian(S, VolumeElement(2, 3.0)) == pytest.approx(6.0)
    with pytest.raises(InputError):
        VolumeElement(2, 0.0)
    with pytest.raises(InputError):
        VolumeElement(3, 1.0)


@given(seeds, st.sampled_from([2, 4, 6]))
def test_pfaffian_squares_to_determinant(seed, n):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, n))
    S = X - X.T
    B = rng.normal(size=(n, n))
    assert pfaffian(S) ** 2 == pytest.approx(np.linalg.det(S), rel=1e-9, abs=1e-9)
    assert pfaffian(B @ S @ B.T) == pytest.approx(np.linalg.det(B) * pfaffian(S),
                                                   rel=1e-8, abs=1e-8)


def test_alpha_examples(rng):
    S = rng.normal(size=(2, 2))
    assert alpha_map(S + S.T, I2).norm() == 0.0
    assert alpha_map(E4, I2)[(0, 1)] == pytest.approx(1.0)
    h3 = FibreMetric.identity(3)
    A, B = rng.normal(size=(2, 3, 3))
    lhs = alpha_map(A + B, h3)
    assert np.allclose(lhs.values, (alpha_map(A, h3) + alpha_map(B, h3)).values)


def test_z_form_examples(rng):
    e = VolumeElement(2, 1.0)
    assert z_form([E4], I2, e) == pytest.approx(1.0)
    S = rng.normal(size=(2, 2))
    assert z_form([S + S.T], I2, e) == 0.0
    h4 = FibreMetric.identity(4)
    e4 = VolumeElement(4, 1.0)
    A, B = rng.normal(size=(2, 4, 4))
    assert abs(z_form([A, A, B], h4, e4)) < 1e-12


def test_ce_examples(rng):
    ab = abelian(3)
    psi = random_form(rng, ab, 1)
    assert ce_differential(psi, ab).norm() == 0.0
    g = so3()
    d = ce_differential(ConstAltForm.coform(0, 3), g)
    # only the pair (v2, v3) brackets onto v1
    assert abs(d[(1, 2)]) == pytest.approx(1.0)
    assert d[(0, 1)] == 0.0 and d[(0, 2)] == 0.0


def test_ce_sign_convention():
    # (d psi)(v1, v2) = psi([v1, v2]) in the convention used throughout
    g = so3()
    d = ce_differential(ConstAltForm.coform(2, 3), g)
    assert d[(0, 1)] == pytest.approx(g.c[2, 0, 1])


@given(seeds, st.sampled_from(["so3", "gl2"]), st.integers(1, 2))
def test_ce_squares_to_zero(seed, name, k):
    rng = np.random.default_rng(seed)
    g = so3() if name == "so3" else gl(2)
    psi = random_form(rng, g, k)
    assert ce_differential(ce_differential(psi, g), g).norm() < 1e-12


def test_trace_form_examples(rng):
    a, b = 1.25, -0.5
    assert trace_form([np.diag([a, b])], I2) == pytest.approx(a + b)
    assert trace_form([E4], I2) == 0.0
    h3 = FibreMetric.identity(3)
    A, B, C, D = rng.normal(size=(4, 3, 3))
    assert abs(trace_form([A, B, A, C, D], h3)) < 1e-12


@given(seeds)
def test_wedge_is_graded_commutative(seed):
    rng = np.random.default_rng(seed)
    g = gl(2)
    a, b = random_form(rng, g, 1), random_form(rng, g, 2)
    c = random_form(rng, g, 1)
    assert np.allclose(a.wedge(b).values, b.wedge(a).values)
    assert np.allclose(a.wedge(c).values, -c.wedge(a).values)


@given(seeds)
def test_pullback_evaluates_on_images(seed):
    rng = np.random.default_rng(seed)
    psi = ConstAltForm(2, 4, rng.normal(size=6))
    M = rng.normal(size=(4, 3))
    v = rng.normal(size=(2, 3))
    assert psi.pullback(M).evaluate(v) == pytest.approx(psi.evaluate((M @ v.T).T))


def test_metric_validation():
    with pytest.raises(InputError):
        FibreMetric(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(InputError):
        FibreMetric(-np.eye(2))
