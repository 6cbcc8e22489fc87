"""Acceptance suite: one test per criterion, each printing a single pass/fail line."""
import json
from pathlib import Path

import numpy as np
import pytest

from algebroid_lab.algebroid import (LForm, d_L, example_model, product_with_line,
                                     riemannian_reduction, tangent, validate)
from algebroid_lab.classes import (chern_simons, commutation_defect, crainic_matrix_class,
                                   delta_bar, delta_cochain, delta_universal,
                                   exactness_residual, pfaffian_cochain, proof_structure,
                                   pullback, relation_check, trace_cochain)
from algebroid_lab.cli import main
from algebroid_lab.connections import (LConnection, adjoint_connection, canonical_splitting, curvature,
                                       curvature_power_contraction, d_nabla, difference_form,
                                       from_kernel_form, gauge_flat, identity, is_flat,
                                       wedge_bracket)
from algebroid_lab.fields import Field, mul
from algebroid_lab.fixtures import (corrupted, non_flat, reduction_algebroid, second_flat,
                                    skew_gauge, twisted_pair)
from algebroid_lab.lie import (ConstAltForm, FibreMetric, VolumeElement, commutator, pfaffian,
                               symmetrize)

from conftest import record

I2 = FibreMetric.identity(2)
VOL = VolumeElement(2, 1.0)
E1 = np.array([[1.0, 0.0], [0.0, 0.0]])
E3 = np.array([[0.0, 1.0], [1.0, 0.0]])
CONFIGS = Path(__file__).resolve().parents[1] / "configs"
NIL = np.array([[0.0, 1.0], [0.0, 0.0]])


def seeded(i):
    return np.random.default_rng([2024, i])


def model():
    A = example_model()
    B = riemannian_reduction(A, I2)
    return A, B, trace_cochain(B, I2, 1), pfaffian_cochain(B, I2, VOL)


def test_criterion_01_structure_validation():
    algs = [tangent(1), example_model(), product_with_line(example_model()),
            product_with_line(tangent(1))]
    worst = max(validate(L).max_defect for L in algs)
    bad = validate(corrupted(example_model(), 0.1))
    ok = worst <= 1e-10 and not bad.passed
    assert record(1, ok, f"max defect {worst:.2e}; corrupted jacobi defect "
                         f"{bad['jacobi'].defect:.2e} rejected={not bad.passed}")


def test_criterion_02_complex_properties():
    A, B, _, _ = model()
    worst_d = worst_bar = 0.0
    for i in range(20):
        rng = seeded(i)
        w = LForm.random(A, i % 3, rng, N=2)
        worst_d = max(worst_d, d_L(d_L(w)).norm())
        k = 1 + i % 2
        from algebroid_lab.classes import InvariantCochain
        from algebroid_lab.combi import n_combos
        psi = InvariantCochain(B, ConstAltForm(k, B.q, rng.normal(size=n_combos(B.q, k))))
        worst_bar = max(worst_bar, delta_bar(delta_bar(psi)).form.norm())
    ok = worst_d <= 1e-10 and worst_bar <= 1e-10
    assert record(2, ok, f"d_L^2 {worst_d:.2e}; dbar^2 {worst_bar:.2e} over 20 forms each")


def test_criterion_03_commutation():
    A, B, y1, y2 = model()
    twisted = twisted_pair(2, seeded(50))[1]
    cases = [(identity(A), (y1, y2)), (type(twisted)(A, A, twisted.matrix, "twisted"), (y1, y2))]
    # a gauge-flat connection out of T(T^2); only degree 1 fits below its rank
    A2 = example_model(2)
    B2 = riemannian_reduction(A2, I2)
    phi = Field.sin(2, 0) + Field.cos(2, 1)
    cases.append((gauge_flat(NIL, phi, A=A2), (trace_cochain(B2, I2, 1),)))
    worst = 0.0
    for nab, psis in cases:
        for psi in psis:
            worst = max(worst, commutation_defect(psi, nab).max_defect)
    assert record(3, worst <= 1e-10, f"max commutation defect {worst:.2e} "
                                     f"(id and twisted with y~1, y~2; gauge flat with y~1)")


def test_criterion_04_factorization():
    A, B, y1, y2 = model()
    fac = ind = 0.0
    for i in range(10):
        rng = seeded(100 + i)
        _, nab, _ = twisted_pair(2, rng)
        nab = type(nab)(A, A, nab.matrix, "twisted")
        twist = Field.constant(B.h_basis @ rng.normal(size=(1, 1)), 1)
        for psi in (y1, y2):
            direct = delta_cochain(psi, nab)
            fac = max(fac, (direct - pullback(nab, delta_universal(psi))).norm())
            ind = max(ind, (direct - delta_cochain(psi, nab, canonical_splitting(A, twist)))
                      .norm())
    van = 0.0
    _, incl = reduction_algebroid(A, I2)
    into_b = [incl]
    for i in range(10):
        rng = seeded(200 + i)
        # identity on the tangent frame, every kernel image inside h
        M = np.zeros((A.rank, A.rank) + (5,), complex)
        M[0, 0, 2] = 1.0
        coef = Field.random(rng, (A.rank,), 1, 2)
        kern = mul(Field.constant(B.h_basis[:, 0]), coef, "g,p->gp")
        M[list(A.kernel_index)] = kern.padded(2).coeffs
        into_b.append(LConnection(A, A, Field(M, 1, symmetrize=False), "into B"))
    for nab in into_b:
        for psi in (y1, y2):
            van = max(van, float(np.abs(delta_cochain(psi, nab).values.coeffs).max()))
    ok = fac <= 1e-12 and ind <= 1e-12 and van == 0.0
    assert record(4, ok, f"factorization {fac:.2e}; splitting independence {ind:.2e}; "
                         f"vanishing max |coeff| {van:.1e}")


def test_criterion_05_lemma():
    worst = 0.0
    for n in (2, 3):
        A, nab, h = twisted_pair(n)
        nh = adjoint_connection(nab, h)
        for k in (1, 2, 3):
            worst = max(worst, max(curvature_power_contraction(nab, nh, k)
                                   .coefficient_defects()))
    assert record(5, worst <= 1e-9, f"max per-t-coefficient defect {worst:.2e}")


def test_criterion_06_chern_simons():
    worst = 0.0
    self_max = 0.0
    for n in (2, 3):
        A, nab, h = twisted_pair(n, seeded(300 + n))
        pairs = [(nab, adjoint_connection(nab, h)), (nab, second_flat(A, seeded(310 + n)))]
        for n0, n1 in pairs:
            theta = difference_form(n0, n1).norm()
            for k in (1, 2, 3):
                q = chern_simons(n0, n1, k, "quadrature")
                c = chern_simons(n0, n1, k, "closed_form")
                worst = max(worst, (q - c).norm() / max(c.norm(), theta ** (2 * k - 1)))
                s = chern_simons(n0, n0, k, "quadrature")
                self_max = max(self_max, float(np.abs(s.values.coeffs).max()))
    ok = worst <= 1e-8 and self_max == 0.0
    assert record(6, ok, f"max relative error {worst:.2e}; max |cs(nabla, nabla)| {self_max}")


def test_criterion_07_crainic():
    closed = 0.0
    flat_adj = 0.0
    for n in (2, 3):
        A, nab, h = twisted_pair(n, seeded(400 + n))
        for k in (1, 2):
            closed = max(closed, crainic_matrix_class(nab, h, k).closedness)
        flat_adj = max(flat_adj, is_flat(adjoint_connection(nab, h))[1].max_defect)
    riem = 0.0
    A3 = twisted_pair(3)[0]
    _, incl = reduction_algebroid(A3, FibreMetric.identity(3))
    for nab, h, ks in ((skew_gauge(2), I2, (1,)), (incl, FibreMetric.identity(3), (1, 2))):
        for k in ks:
            riem = max(riem, float(np.abs(crainic_matrix_class(nab, h, k)
                                          .form.values.coeffs).max()))
    ok = closed <= 1e-9 and riem == 0.0 and flat_adj <= 1e-10
    assert record(7, ok, f"closedness {closed:.2e}; Riemannian max |coeff| {riem}; "
                         f"adjoint curvature {flat_adj:.2e}")


def test_criterion_08_relations():
    A = example_model()
    k1 = relation_check(1, [(A, I2)])
    fixtures = []
    for i in range(3):
        A3, _, h = twisted_pair(3, seeded(500 + i))
        fixtures.append((A3, h))
    k2 = relation_check(2, fixtures)
    scal = k2["relation_k2_stability"].detail["scalars"]
    ok = k1.passed and k2.passed
    assert record(8, ok, f"k=1 defect {k1.max_defect:.2e}; k=2 scalars "
                         f"{[round(s, 12) for s in scal]} spread "
                         f"{k2['relation_k2_stability'].defect:.2e}")


def test_criterion_09_example():
    A, B, _, y2 = model()
    target = delta_universal(y2)
    pf = pfaffian(commutator(E1, E3), VOL)
    point = 0.0
    for i in range(10):
        rng = seeded(600 + i)
        X, s1, s2 = rng.normal(size=2), rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
        xi = A.section(np.concatenate([[X[0]], s1.ravel()]))
        eta = A.section(np.concatenate([[X[1]], s2.ravel()]))
        want = pfaffian(commutator(symmetrize(s1, I2), symmetrize(s2, I2)))
        point = max(point, abs(float(target.evaluate(xi, eta).constant_value()) - want))
    rel = {N: exactness_residual(target, N).relative for N in (1, 2, 3)}
    floor_ok = all(r >= 0.1 for r in rel.values())
    chain = proof_structure(A, 3, target)
    chain_ok = chain["stage1_constant"].passed and chain["stated_chain_forces_zero"].passed
    ok = point <= 1e-12 and pf == 1.0 and floor_ok and chain_ok
    rels = ", ".join(f"N={N}: {r:.2e}" for N, r in rel.items())
    assert record(9, ok, f"pointwise {point:.2e}; Pf([E1,E3]) = {pf}; residual/target "
                         f"{rels} (floor 0.1); chain reproduced={chain_ok}")


def test_criterion_10_d_nabla_squared():
    nab = non_flat(2)
    worst = 0.0
    for i in range(3):
        nu = LForm.random(nab.source, 0, seeded(700 + i), N=1, value_shape=(4,))
        lhs = d_nabla(nab, d_nabla(nab, nu))
        rhs = wedge_bracket(curvature(nab), nu, nab)
        worst = max(worst, (lhs - rhs).norm())
    assert record(10, worst <= 1e-9, f"max defect {worst:.2e} on a non-flat connection")


def test_criterion_11_cli(tmp_path):
    def cfg(doc, name):
        p = tmp_path / name
        p.write_text(json.dumps(doc))
        return str(p)

    good = cfg({"preset": "gauge_flat_end2", "scenario": "secondary", "seed": 5}, "g.json")
    outs = []
    for i, extra in enumerate(([], [], ["--parallel"])):
        out = tmp_path / f"o{i}.json"
        outs.append((main(["run", good, "--out", str(out)] + extra), out.read_bytes()))
    identical = len({b for _, b in outs}) == 1
    codes = {
        0: outs[0][0],
        1: main(["run", str(CONFIGS / "nonflat_crainic.json"), "--out",
                 str(tmp_path / "nf_out.json")]),
        2: main(["run", cfg({"preset": "unknown"}, "bad.json")]),
    }
    ok = identical and all(k == v for k, v in codes.items())
    assert record(11, ok, f"byte-identical json={identical}; exit codes {codes}")
