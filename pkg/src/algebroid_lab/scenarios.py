"""Scenario orchestration: each scenario is a fixed list of check groups."""
from __future__ import annotations

import contextvars
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import __version__
from .algebroid import (LForm, d_L, product_with_line, riemannian_reduction, validate)
from .classes import (chern_simons, commutation_defect, crainic_matrix_class, delta_bar,
                      delta_cochain, delta_universal, exactness_residual, invariance_check,
                      pfaffian_class, proof_structure, pullback, relation_check, trace_cochain,
                      u_class)
from .config import (RunConfig, build_algebroid, build_connection, build_metric, build_volume)
from .connections import (adjoint_connection, canonical_splitting, curvature,
                          curvature_power_contraction, d_nabla, difference_form, identity, is_flat,
                          validate_connection, wedge_bracket)
from .errors import InputError, PreconditionError
from .fields import Field, get_cap, truncation_cap
from .fixtures import non_flat, reduction_algebroid, second_flat, twisted_pair
from .lie import FibreMetric, commutator, pfaffian, pfaffian_metric, symmetrize
from .report import Report


@dataclass
class RunReport:
    scenario: str
    seed: int
    truncation_cap: int
    config: dict
    checks: Report
    classes: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.checks.passed

    def to_dict(self, timings: bool = False) -> dict:
        d = {
            "tool": "algebroid_lab",
            "version": __version__,
            "scenario": self.scenario,
            "seed": self.seed,
            "truncation_cap": self.truncation_cap,
            "config": self.config,
            "passed": self.passed,
            "checks": self.checks.to_dict()["checks"],
            "classes": self.classes,
        }
        if timings:
            d["timings"] = self.timings
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(d["scenario"], d["seed"], d["truncation_cap"], d["config"],
                   Report.from_dict({"title": d["scenario"], "checks": d["checks"]}), d.get("classes", []),
                   d.get("timings", {}))


@dataclass
class Context:
    cfg: RunConfig
    A: object
    nabla: object
    h: FibreMetric | None
    e: object
    seed: int

    def rng(self, tag: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, tag])

    def need_end(self):
        if self.A.kernel_shape is None or len(self.A.kernel_shape) != 2:
            raise InputError("scenario needs an End(R^n) model algebroid")


Group = Callable[[Context, Report, list], None]


# -- validate --------------------------------------------------------------------------------------

def g_structure(ctx: Context, rep: Report, classes: list):
    tol = ctx.cfg.tol("structure")
    for c in validate(ctx.A, tol).checks:
        c.name = f"{ctx.A.name}: {c.name}"
        rep.checks.append(c)
    if not ctx.A.has_t:
        P = product_with_line(ctx.A)
        for c in validate(P, tol).checks:
            c.name = f"{P.name}: {c.name}"
            rep.checks.append(c)


def g_complex(ctx: Context, rep: Report, classes: list):
    rng = ctx.rng(1)
    A = ctx.A
    worst = 0.0
    for i in range(ctx.cfg.samples):
        k = i % max(A.rank - 1, 1)
        if k + 2 > A.rank:
            continue
        w = LForm.random(A, k, rng, N=2)
        worst = max(worst, d_L(d_L(w)).norm())
    rep.add("d_L squared", "d_L o d_L = 0 on random forms", worst, ctx.cfg.tol("complex"))


def g_connection(ctx: Context, rep: Report, classes: list):
    if ctx.nabla is None:
        return
    rep.extend(validate_connection(ctx.nabla, ctx.cfg.tol("structure")))


# -- secondary ---------------------------------------------------------------------------------------

def _cochains(ctx: Context):
    B = riemannian_reduction(ctx.A, ctx.h)
    psis = [trace_cochain(B, ctx.h, 1)]
    if ctx.e is not None and ctx.h.n == 2:
        psis.append(pfaffian_class(B, ctx.e, ctx.h)[0])
    return B, psis


def g_invariance(ctx: Context, rep: Report, classes: list):
    ctx.need_end()
    B, psis = _cochains(ctx)
    rep.extend(B.check(ctx.cfg.tol("structure")))
    for psi in psis:
        r = invariance_check(psi, ctx.cfg.tol("commutation"))
        r.checks[0].name = f"invariance {psi.name}"
        rep.extend(r)
        dd = delta_bar(delta_bar(psi)).form.norm()
        rep.add(f"dbar squared {psi.name}", "dbar o dbar = 0", dd, ctx.cfg.tol("complex"))


def _connections(ctx: Context):
    conns = [identity(ctx.A)]
    if ctx.nabla is not None and ctx.nabla.name != "id":
        conns.append(ctx.nabla)
    return conns


def g_commutation(ctx: Context, rep: Report, classes: list):
    ctx.need_end()
    B, psis = _cochains(ctx)
    for nab in _connections(ctx):
        for psi in psis:
            r = commutation_defect(psi, nab, tol=ctx.cfg.tol("commutation"))
            r.checks[0].name = f"commutation {psi.name} / {nab.name}"
            rep.extend(r)


def g_factorization(ctx: Context, rep: Report, classes: list):
    ctx.need_end()
    B, psis = _cochains(ctx)
    rng = ctx.rng(4)
    A = ctx.A
    skew = B.h_basis
    twist = Field.constant(skew @ rng.normal(size=(skew.shape[1], A.n_axes)), A.dim)
    lam2 = canonical_splitting(A, twist)
    fac = ind = 0.0
    for nab in _connections(ctx):
        for psi in psis:
            direct = delta_cochain(psi, nab)
            fac = max(fac, (direct - pullback(nab, delta_universal(psi))).norm())
            ind = max(ind, (direct - delta_cochain(psi, nab, lam2)).norm())
    tol = ctx.cfg.tol("factorization")
    rep.add("factorization", "Delta factors through the universal map", fac, tol)
    rep.add("auxiliary independence", "Delta independent of the auxiliary splitting", ind, tol)
    LB, incl = reduction_algebroid(A, ctx.h)
    van = max(np.abs(delta_cochain(psi, incl).values.coeffs).max(initial=0.0) for psi in psis)
    if np.array_equal(ctx.h.h, np.eye(ctx.h.n)):
        rep.add("vanishing into B", "Delta vanishes for connections into B", float(van), 0.0,
                "==")
    else:
        # a general metric puts the B basis on irrational coordinates: roundoff level only
        rep.add("vanishing into B", "Delta vanishes for connections into B", float(van),
                64 * np.finfo(float).eps * np.linalg.cond(ctx.h.h))


# -- crainic -------------------------------------------------------------------------------------------

def _flat_connection(ctx: Context):
    nab = ctx.nabla if ctx.nabla is not None else identity(ctx.A)
    flat, frep = is_flat(nab, ctx.cfg.tol("flat"))
    if not flat:
        raise PreconditionError(f"connection {nab.name} is not flat", frep.max_defect)
    return nab


def g_crainic(ctx: Context, rep: Report, classes: list):
    ctx.need_end()
    nab = _flat_connection(ctx)
    tol = ctx.cfg.tol("closedness")
    for k in (1, 2):
        if 2 * k - 1 > nab.source.rank:
            continue
        cr = crainic_matrix_class(nab, ctx.h, k)
        classes.append(cr.to_dict())
        rep.add(f"crainic k={k} closed", "trace classes are closed", cr.closedness, tol,
                lost=cr.lost)
    nh = adjoint_connection(nab, ctx.h)
    rep.add("adjoint flat", "adjoint of a flat connection is flat",
            is_flat(nh)[1].max_defect, ctx.cfg.tol("flat"))


def g_riemannian(ctx: Context, rep: Report, classes: list):
    ctx.need_end()
    LB, incl = reduction_algebroid(ctx.A, ctx.h)
    worst = 0.0
    for k in (1, 2):
        if 2 * k - 1 <= LB.rank:
            worst = max(worst, float(np.abs(crainic_matrix_class(incl, ctx.h, k)
                                            .form.values.coeffs).max(initial=0.0)))
    rep.add("riemannian vanishing", "trace classes vanish for Riemannian connections",
            worst, ctx.cfg.tol("closedness"))


def g_cs(ctx: Context, rep: Report, classes: list):
    ctx.need_end()
    nab = _flat_connection(ctx)
    nh = adjoint_connection(nab, ctx.h)
    pairs = [("adjoint", nab, nh), ("second flat", nab, second_flat(ctx.A, ctx.rng(6)))]
    for label, n0, n1 in pairs:
        theta = difference_form(n0, n1).norm()
        for k in (1, 2, 3):
            if 2 * k - 1 > n0.source.rank:
                continue
            q = chern_simons(n0, n1, k, "quadrature")
            c = chern_simons(n0, n1, k, "closed_form")
            # relative to the natural size of the form; tr(theta^(2k-1)) may vanish identically
            scale = max(c.norm(), theta ** (2 * k - 1), 1e-300)
            rep.add(f"cs k={k} quadrature vs closed ({label})", "Chern-Simons closed form",
                    (q - c).norm() / scale, ctx.cfg.tol("cs_relative"), closed_norm=c.norm(),
                    scale=scale)
    for k in (1, 2, 3):
        if 2 * k - 1 > nab.source.rank:
            continue
        self_cs = chern_simons(nab, nab, k, "quadrature")
        rep.add(f"cs k={k} self", "cs(nabla, nabla) = 0",
                float(np.abs(self_cs.values.coeffs).max(initial=0.0)), 0.0, "==")
    for k in (1, 2):
        u = u_class(nab, ctx.h, k)
        classes.append(u.to_dict())


def g_relations(ctx: Context, rep: Report, classes: list):
    ctx.need_end()
    rep.extend(relation_check(1, [(ctx.A, ctx.h)], ctx.cfg.tol("relation_k1")))
    rng = ctx.rng(7)
    fixtures = [twisted_pair(3, rng)[::2] for _ in range(3)]
    rep.extend(relation_check(2, fixtures, ctx.cfg.tol("relation_fit")))


# -- example -------------------------------------------------------------------------------------------

E1 = np.array([[1.0, 0.0], [0.0, 0.0]])
E3 = np.array([[0.0, 1.0], [1.0, 0.0]])


def g_example_values(ctx: Context, rep: Report, classes: list):
    ctx.need_end()
    if ctx.A.kernel_shape != (2, 2):
        raise InputError("the example scenario runs on the End(R^2) model")
    pf = pfaffian(commutator(E1, E3), ctx.e)
    rep.add("Pf([E1,E3])", "Pfaffian of the commutator of E1 and E3", abs(pf - 1.0), 0.0, "==",
            value=pf)
    B = riemannian_reduction(ctx.A, ctx.h)
    psi, cr, prep = pfaffian_class(B, ctx.e, ctx.h, ctx.rng(9), ctx.cfg.samples)
    rep.extend(prep)
    classes.append(cr.to_dict())
    target = cr.form
    rng = ctx.rng(10)
    worst = 0.0
    d = ctx.A.dim
    for _ in range(ctx.cfg.samples):
        X1, X2 = rng.normal(size=(2, d))
        s1, s2 = rng.normal(size=(2, 2, 2))
        xi = ctx.A.section(np.concatenate([X1, s1.ravel()]))
        eta = ctx.A.section(np.concatenate([X2, s2.ravel()]))
        got = float(target.evaluate(xi, eta).constant_value())
        want = pfaffian_metric(commutator(symmetrize(s1, ctx.h), symmetrize(s2, ctx.h)),
                               ctx.h, ctx.e)
        worst = max(worst, abs(got - want))
    rep.add("Delta_o(y~2) pointwise", "universal Pfaffian class on section pairs", worst,
            ctx.cfg.tol("pointwise"))
    r = commutation_defect(psi, identity(ctx.A), tol=ctx.cfg.tol("commutation"))
    rep.extend(r)


def g_example_residual(ctx: Context, rep: Report, classes: list):
    ctx.need_end()
    B = riemannian_reduction(ctx.A, ctx.h)
    psi = pfaffian_class(B, ctx.e, ctx.h)[0]
    target = delta_universal(psi)
    floor = ctx.cfg.tol("residual_floor")
    for N in ctx.cfg.residual_truncations:
        res = exactness_residual(target, N)
        rep.add(f"residual floor N={N}", "no 1-form with modes <= N has this differential",
                res.relative, floor, ">=", residual=res.residual, target_norm=res.target_norm,
                rank_deficient=res.rank_deficient)
    rep.extend(proof_structure(ctx.A, max(ctx.cfg.residual_truncations), target))


# -- lemma ------------------------------------------------------------------------------------------------

def _lemma_pairs(ctx: Context):
    if ctx.nabla is not None and ctx.nabla.name != "id" and ctx.h is not None:
        return [(ctx.nabla, adjoint_connection(ctx.nabla, ctx.h), ctx.A.kernel_shape[0])]
    out = []
    for n in (2, 3):
        A, nab, h = twisted_pair(n)
        out.append((nab, adjoint_connection(nab, h), n))
    return out


def g_lemma(ctx: Context, rep: Report, classes: list):
    for nab, nh, n in _lemma_pairs(ctx):
        for k in (1, 2, 3):
            pc = curvature_power_contraction(nab, nh, k)
            if pc.closed is None:
                raise PreconditionError("lemma closed form needs flat connections")
            rep.add(f"lemma End(R^{n}) k={k}", "affine curvature power vs closed form",
                    max(pc.coefficient_defects()), ctx.cfg.tol("lemma"),
                    direct_norm=pc.direct.norm(), lost=pc.direct.lost)


def g_dnabla(ctx: Context, rep: Report, classes: list):
    nab = non_flat(2)
    rng = ctx.rng(12)
    Om = LForm.random(nab.source, 0, rng, N=1, value_shape=(4,))
    lhs = d_nabla(nab, d_nabla(nab, Om))
    rhs = wedge_bracket(curvature(nab), Om, nab)
    rep.add("d_nabla squared", "d^nabla d^nabla = R wedge", (lhs - rhs).norm(),
            ctx.cfg.tol("dnabla"), flat=bool(is_flat(nab)[0]))


SCENARIO_GROUPS: dict[str, list[tuple[str, Group]]] = {
    "validate": [("structure", g_structure), ("complex", g_complex),
                 ("connection", g_connection)],
    "secondary": [("invariance", g_invariance), ("commutation", g_commutation),
                  ("factorization", g_factorization)],
    "crainic": [("crainic", g_crainic), ("riemannian", g_riemannian), ("cs", g_cs),
                ("relations", g_relations)],
    "example": [("example", g_example_values), ("residual", g_example_residual)],
    "lemma": [("lemma", g_lemma), ("dnabla", g_dnabla)],
}


def _run_group(ctx: Context, name: str, fn: Group):
    rep, classes = Report(name), []
    t0 = time.perf_counter()
    try:
        fn(ctx, rep, classes)
    except PreconditionError as exc:
        defect = exc.defect if exc.defect is not None else float("nan")
        rep.fail(f"{name}: precondition", "precondition of the check group", defect, 0.0,
                 str(exc))
    return rep, classes, time.perf_counter() - t0


def run_scenario(cfg: RunConfig, scenario: str | None = None, seed: int | None = None,
                 parallel: bool = False) -> RunReport:
    scenario = scenario or cfg.scenario
    if scenario not in SCENARIO_GROUPS:
        raise InputError(f"unknown scenario {scenario!r}")
    seed = cfg.seed if seed is None else seed
    cap = cfg.truncation_cap if cfg.truncation_cap is not None else get_cap()
    with truncation_cap(cap):
        A = build_algebroid(cfg)
        ctx = Context(cfg, A, build_connection(cfg, A), build_metric(cfg, A),
                      build_volume(cfg, A), seed)
        groups = SCENARIO_GROUPS[scenario]
        if parallel:
            with ThreadPoolExecutor() as ex:
                futs = [ex.submit(contextvars.copy_context().run, _run_group, ctx, n, f)
                        for n, f in groups]
                results = [f.result() for f in futs]
        else:
            results = [_run_group(ctx, n, f) for n, f in groups]
    checks = Report(scenario)
    classes, timings = [], {}
    for (name, _), (rep, cls, dt) in zip(groups, results):
        checks.extend(rep)
        classes.extend(cls)
        timings[name] = dt
    echo = cfg.echo()
    echo["scenario"] = scenario
    echo["seed"] = seed
    return RunReport(scenario, seed, cap, echo, checks, classes, timings)
