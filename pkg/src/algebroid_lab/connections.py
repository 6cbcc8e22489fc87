"""L-connections into transitive algebroids: curvature, d^nabla, adjoints,
flat fixtures and the affine combination over T(R) x L."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .algebroid import (LForm, Section, TrivLieAlgebroid, bracket, cartan, end_model, letters,
                        product_with_line, tangent, wedge)
from .combi import combos, n_combos
from .errors import InputError, PreconditionError
from .fields import Field, mul
from .lie import FibreMetric
from .report import Report


@dataclass(frozen=True, eq=False)
class LConnection:
    """A bundle map L -> A given by its frame matrix (r_A x r_L)."""

    source: TrivLieAlgebroid
    target: TrivLieAlgebroid
    matrix: Field
    name: str = ""

    def __post_init__(self):
        if self.matrix.vshape != (self.target.rank, self.source.rank):
            raise InputError(f"connection matrix must be {self.target.rank} x {self.source.rank}")
        if self.source.n_axes != self.target.n_axes or self.source.dim != self.target.dim:
            raise InputError("source and target live over different bases")

    def __call__(self, xi: Section) -> Section:
        if xi.alg is not self.source:
            raise InputError("section is not on the source algebroid")
        return Section(self.target, mul(self.matrix, xi.comps, "ai,i->a"))

    @property
    def kernel_block(self) -> Field:
        """Kernel coordinates of the image of each source frame, shape (g, r_L)."""
        return self.matrix.take(list(self.target.kernel_index), 0)

    def form(self) -> LForm:
        """The End-valued connection 1-form on L: omega(e_i) as an n x n matrix."""
        n = self._fibre()
        w = self.kernel_block.moveaxis(1, 0).reshape((self.source.rank, n, n))
        return LForm(self.source, 1, w)

    def _fibre(self) -> int:
        ks = self.target.kernel_shape
        if ks is None or len(ks) != 2:
            raise InputError("target is not an End(R^n) model")
        return ks[0]

    @cached_property
    def curvature_form(self) -> LForm:
        return curvature(self)


def identity(A: TrivLieAlgebroid) -> LConnection:
    return LConnection(A, A, Field.constant(np.eye(A.rank), A.dim), "id")


def from_kernel_form(L: TrivLieAlgebroid, A: TrivLieAlgebroid, omega: Field,
                     name: str = "") -> LConnection:
    """Connection xi -> (#xi, omega(xi)) for A = TM + g with canonical splitting.

    ``omega`` has shape (g, r_L) (or (n, n, r_L) for End models).
    """
    g = len(A.kernel_index)
    omega = omega.reshape((g, L.rank))
    tang = [i for i in range(A.rank) if i not in A.kernel_index]
    if len(tang) != A.n_axes or L.n_axes != A.n_axes:
        raise InputError("target is not of the form TM + g over the base of L")
    anchor = L.anchor.with_t() if omega.has_t else L.anchor
    anchor = anchor.padded(max(omega.N, anchor.N), omega.tdeg if omega.has_t else None)
    omega = omega.padded(anchor.N)
    M = np.zeros((A.rank, L.rank) + omega.coeffs.shape[2:], complex)
    # tangent rows are the anchor of L in coordinate fields
    M[tang] = np.moveaxis(anchor.coeffs, 1, 0)
    M[list(A.kernel_index)] = omega.coeffs
    return LConnection(L, A, Field(M, L.dim, omega.has_t, omega.lost, symmetrize=False), name)


# -- validation / curvature -------------------------------------------------------------

def anchor_defect(nabla: LConnection) -> float:
    lhs = mul(nabla.matrix, nabla.target.anchor, "mi,ma->ia")
    return (lhs - nabla.source.anchor).max_norm()


def validate_connection(nabla: LConnection, tol: float = 1e-10) -> Report:
    rep = Report(f"connection {nabla.name}")
    rep.add("anchor_compatibility", "connection commutes with the anchors",
            anchor_defect(nabla), tol)
    return rep


def _require_valid(nabla: LConnection, tol: float = 1e-10):
    d = anchor_defect(nabla)
    if d > tol:
        raise PreconditionError(f"not an L-connection (anchor defect {d:.3g})", d)


def curvature_tensor(nabla: LConnection) -> Field:
    """R[k, i, j] = ([nabla e_i, nabla e_j]_A - nabla [e_i, e_j]_L)^k in A-frame coordinates."""
    L, A, M = nabla.source, nabla.target, nabla.matrix
    D = A.frame_derivs(M)  # D[k, j, p] = rho_A(e_p) M[k, j]
    rho = mul(D, M, "kjp,pi->kij")  # rho_A(nabla e_i) M[k, j]
    brak = mul(A.structure, mul(M, M, "pi,qj->pqij"), "kpq,pqij->kij")
    brak = brak + rho - rho.transpose((0, 2, 1))
    return brak - mul(M, L.structure, "kp,pij->kij")


def curvature(nabla: LConnection) -> LForm:
    """Kernel-valued curvature 2-form on L, values in kernel coordinates."""
    _require_valid(nabla)
    R = curvature_tensor(nabla)
    rows, _ = combos(nabla.source.rank, 2)
    kern = R.take(list(nabla.target.kernel_index), 0)
    vals = Field(kern.coeffs[:, rows[:, 0], rows[:, 1]], R.dim, R.has_t, R.lost,
                 symmetrize=False).moveaxis(1, 0)
    return LForm(nabla.source, 2, vals)


def is_flat(nabla: LConnection, tol: float = 1e-10) -> tuple[bool, Report]:
    rep = Report(f"flatness {nabla.name}")
    R = curvature_tensor(nabla)
    rep.add("curvature", "curvature vanishes", R.max_norm(), tol, lost=R.lost)
    return rep.passed, rep


# -- d^nabla on kernel-valued forms ---------------------------------------------------------

def _kernel_values(nabla: LConnection, Omega: LForm) -> tuple[Field, tuple]:
    g = len(nabla.target.kernel_index)
    vs = Omega.value_shape
    if int(np.prod(vs)) != g or not vs:
        raise InputError(f"form values must live in the kernel (dimension {g}), got {vs}")
    return Omega.values.reshape((Omega.values.vshape[0], g)), vs


def connection_action(nabla: LConnection) -> Field:
    """Gamma[i, k, q]: kernel part of [nabla e_i, (0, e_q)]_A without derivative terms."""
    A = nabla.target
    kidx = list(A.kernel_index)
    G = mul(nabla.matrix, A.structure, "pi,kpq->ikq")
    return G.take(kidx, 1).take(kidx, 2)


def d_nabla(nabla: LConnection, Omega: LForm) -> LForm:
    """Exterior covariant derivative of a kernel-valued form on L."""
    if Omega.alg is not nabla.source:
        raise InputError("form does not live on the source algebroid")
    L = nabla.source
    vals, vs = _kernel_values(nabla, Omega)
    Gamma = connection_action(nabla)

    def act(v: Field) -> Field:
        D = L.frame_derivs(v).moveaxis(2, 1)  # (C, r_L, g)
        return D + mul(Gamma, v, "ikq,zq->zik")

    out = cartan(L, vals, Omega.degree, act)
    return LForm(L, Omega.degree + 1, out.reshape((out.vshape[0],) + vs))


def wedge_bracket(a: LForm, b: LForm, nabla_or_alg) -> LForm:
    """Wedge of kernel-valued forms with values combined by the kernel bracket."""
    A = nabla_or_alg.target if isinstance(nabla_or_alg, LConnection) else nabla_or_alg
    kidx = list(A.kernel_index)
    g = len(kidx)
    c = A.structure.take(kidx, 0).take(kidx, 1).take(kidx, 2)
    aa = LForm(a.alg, a.degree, a.values.reshape((a.values.vshape[0], g)))
    bb = LForm(b.alg, b.degree, b.values.reshape((b.values.vshape[0], g)))
    w = wedge(aa, bb, "p,q->pq")
    vals = mul(w.values, c, "zpq,kpq->zk")
    vs = max(a.value_shape, b.value_shape, key=len)
    return LForm(a.alg, w.degree, vals.reshape((vals.vshape[0],) + vs))


# -- End-model helpers --------------------------------------------------------------------------

def matrix_form(nabla: LConnection) -> Field:
    """omega as an (n, n, r_L) field array."""
    n = nabla._fibre()
    return nabla.kernel_block.reshape((n, n, nabla.source.rank))


def adjoint_connection(nabla: LConnection, h) -> LConnection:
    """The metric-adjoint connection for a constant fibre metric: omega^h = -h^-1 omega^T h."""
    h = h if isinstance(h, FibreMetric) else FibreMetric(np.asarray(h, float))
    n = nabla._fibre()
    if h.n != n:
        raise InputError("metric size does not match the fibre")
    w = matrix_form(nabla)
    wT = w.transpose((1, 0, 2))
    wh = -1.0 * wT.contract(h.inv, "ab,bcz->acz").contract(h.h, "cd,acz->adz")
    M = nabla.matrix.coeffs.copy()
    M[list(nabla.target.kernel_index)] = wh.reshape((n * n, nabla.source.rank)).coeffs
    return LConnection(nabla.source, nabla.target,
                       Field(M, nabla.matrix.dim, nabla.matrix.has_t, wh.lost, symmetrize=False),
                       f"{nabla.name}^h")


def symmetric_form(nabla: LConnection, h) -> LForm:
    """The End-valued 1-form 1/2 (nabla - nabla^h): the h-symmetric part of omega."""
    h = h if isinstance(h, FibreMetric) else FibreMetric(np.asarray(h, float))
    w = matrix_form(nabla)
    wT = w.transpose((1, 0, 2))
    star = wT.contract(h.inv, "ab,bcz->acz").contract(h.h, "cd,acz->adz")
    s = (w + star) * 0.5
    return LForm(nabla.source, 1, s.moveaxis(2, 0))


def difference_form(nabla0: LConnection, nabla1: LConnection) -> LForm:
    """theta = nabla1 - nabla0 as an End-valued 1-form."""
    _same_model(nabla0, nabla1)
    n = nabla0._fibre()
    th = (nabla1.kernel_block - nabla0.kernel_block).moveaxis(1, 0)
    return LForm(nabla0.source, 1, th.reshape((nabla0.source.rank, n, n)))


def _same_model(a: LConnection, b: LConnection):
    if a.source is not b.source or a.target is not b.target:
        raise InputError("connections must share source and target")


# -- fixtures -------------------------------------------------------------------------------------

def gauge_flat(K, phi: Field, A: TrivLieAlgebroid | None = None,
               L: TrivLieAlgebroid | None = None) -> LConnection:
    """Flat connection on T(T^d) with omega(d_a) = (d_a phi) K."""
    K = np.asarray(K, float)
    n = K.shape[0]
    d = phi.dim
    L = L or tangent(d)
    A = A or end_model(d, n)
    dphi = phi.grad(d)  # (d,)
    omega = mul(Field.constant(K.ravel(), d), dphi, "g,a->ga")
    return from_kernel_form(L, A, omega, "gauge_flat")


def gauge_twisted_identity(A: TrivLieAlgebroid, Nmat, phi: Field) -> LConnection:
    """Identity of A conjugated by g = I + phi N with N nilpotent (N^2 = 0).

    Flat with non-constant coefficients:
    (d_a, 0) -> (d_a, -d_a phi N) and (0, E) -> (0, g E g^-1).
    """
    Nmat = np.asarray(Nmat, float)
    n = Nmat.shape[0]
    if A.kernel_shape != (n, n):
        raise InputError("nilpotent generator does not match the fibre")
    if np.abs(Nmat @ Nmat).max() > 1e-14:
        raise PreconditionError("generator must square to zero")
    d = A.dim
    kidx = list(A.kernel_index)
    tang = [i for i in range(A.rank) if i not in kidx]
    g = len(kidx)
    dphi = phi.grad(d)
    # conjugation E -> (I + phi N) E (I - phi N) = E + phi [N, E] - phi^2 N E N
    units = np.eye(g).reshape(g, n, n)
    com = np.array([(Nmat @ E - E @ Nmat).ravel() for E in units]).T
    nen = np.array([(Nmat @ E @ Nmat).ravel() for E in units]).T
    phi2 = mul(phi, phi)
    conj = (Field.constant(np.eye(g), d) + mul(Field.constant(com, d), phi, "pq,->pq")
            - mul(Field.constant(nen, d), phi2, "pq,->pq"))
    tang_img = mul(Field.constant(-Nmat.ravel(), d), dphi, "g,a->ga")
    blocks = np.zeros((A.rank, A.rank) + conj.padded(max(conj.N, tang_img.N)).coeffs.shape[2:],
                      complex)
    Nn = max(conj.N, tang_img.N)
    I_t = Field.constant(np.eye(len(tang)), d).padded(Nn).coeffs
    for a_i, a in enumerate(tang):
        for b_i, b in enumerate(tang):
            blocks[a, b] = I_t[a_i, b_i]
    kk = np.ix_(kidx, kidx)
    blocks[kk] = conj.padded(Nn).coeffs
    blocks[np.ix_(kidx, tang)] = tang_img.padded(Nn).coeffs
    return LConnection(A, A, Field(blocks, d, symmetrize=False), "gauge_twisted_identity")


# -- affine combination over T(R) x L --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AffinePair:
    nabla0: LConnection
    nabla1: LConnection
    conn: LConnection

    @property
    def source(self) -> TrivLieAlgebroid:
        return self.conn.source


def affine_combination(nabla0: LConnection, nabla1: LConnection) -> AffinePair:
    """(1 - t) nabla0 + t nabla1 lifted to T(R) x L -> T(R) x A, d/dt -> d/dt."""
    _same_model(nabla0, nabla1)
    PL = product_with_line(nabla0.source)
    PA = product_with_line(nabla0.target)
    M0, M1 = nabla0.matrix, nabla1.matrix
    Mt = Field.tpoly([M0, M1 - M0])
    rA, rL = nabla0.target.rank, nabla0.source.rank
    c = np.zeros((rA + 1, rL + 1) + Mt.coeffs.shape[2:], complex)
    c[0, 0][(Mt.N,) * Mt.dim + (0,)] = 1.0
    c[1:, 1:] = Mt.coeffs
    conn = LConnection(PL, PA, Field(c, Mt.dim, True, Mt.lost, symmetrize=False), "affine")
    return AffinePair(nabla0, nabla1, conn)


def _end_values(form: LForm, n: int) -> LForm:
    return LForm(form.alg, form.degree, form.values.reshape((form.values.vshape[0], n, n)))


def affine_curvature_parts(pair: AffinePair) -> tuple[LForm, LForm]:
    """Split the curvature of the affine connection into the d/dt-contraction
    (a 1-form on L) and the restriction to L (a 2-form on L), End-valued."""
    n = pair.nabla0._fibre()
    R = _end_values(curvature(pair.conn), n)
    rL = pair.nabla0.source.rank
    L = pair.nabla0.source
    _, lut2 = combos(rL + 1, 2)
    iota = [lut2[(0, j + 1)] for j in range(rL)]
    rows, _ = combos(rL, 2)
    rest = [lut2[(int(a) + 1, int(b) + 1)] for a, b in rows]
    return (LForm(L, 1, R.values.take(iota)), LForm(L, 2, R.values.take(rest)))


def matrix_power(form: LForm, k: int) -> LForm:
    out = form
    for _ in range(k - 1):
        out = wedge(out, form, "ij,jk->ik")
    return out


def trace(form: LForm) -> LForm:
    """Matrix trace of an End-valued form."""
    v = form.values
    tr = Field(np.trace(v.coeffs, axis1=1, axis2=2), v.dim, v.has_t, v.lost, symmetrize=False)
    return LForm(form.alg, form.degree, tr)


@dataclass(frozen=True, eq=False)
class PowerContraction:
    k: int
    direct: LForm
    closed: LForm | None
    flat: bool

    def coefficient_defects(self) -> list[float]:
        if self.closed is None:
            return []
        diff = self.direct.values - self.closed.values
        return [c.max_norm() for c in diff.t_coeffs()]


def contracted_power(pair: AffinePair, k: int) -> LForm:
    """iota_{d/dt} (R^aff)^k computed from the curvature of the affine connection.

    The contraction is a derivation and R^aff has even degree, so
    iota (R^k) = sum_j R_L^j ^ (iota R) ^ R_L^(k-1-j).
    """
    iota, RL = affine_curvature_parts(pair)
    total = None
    for j in range(k):
        term = iota
        if j:
            term = wedge(matrix_power(RL, j), term, "ij,jk->ik")
        if k - 1 - j:
            term = wedge(term, matrix_power(RL, k - 1 - j), "ij,jk->ik")
        total = term if total is None else total + term
    return total


def closed_form_power(theta: LForm, k: int) -> LForm:
    """k t^(k-1) (t - 1)^(k-1) theta^(2k-1) with a t-polynomial coefficient."""
    poly = np.polynomial.polynomial.polypow([-1.0, 1.0], k - 1)
    poly = k * np.concatenate([np.zeros(k - 1), poly])
    th = matrix_power(theta, 2 * k - 1)
    coeffs = [th.values * float(p) for p in poly]
    return LForm(theta.alg, th.degree, Field.tpoly(coeffs))


def curvature_power_contraction(nabla0: LConnection, nabla1: LConnection, k: int,
                                tol: float = 1e-10) -> PowerContraction:
    if k < 1:
        raise InputError("k must be positive")
    pair = affine_combination(nabla0, nabla1)
    direct = contracted_power(pair, k)
    flat = is_flat(nabla0, tol)[0] and is_flat(nabla1, tol)[0]
    closed = closed_form_power(difference_form(nabla0, nabla1), k) if flat else None
    return PowerContraction(k, direct, closed, flat)


# -- connection forms of splittings ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConnectionForm:
    """A splitting lam: TM -> A of the anchor and its kernel-valued form breve-lam."""

    alg: TrivLieAlgebroid
    splitting: Field  # (r_A, d)

    def __post_init__(self):
        A = self.alg
        if self.splitting.vshape != (A.rank, A.n_axes):
            raise InputError("splitting must be r_A x d")

    @property
    def breve(self) -> Field:
        """Kernel coordinates of breve-lam(e_p) for each A-frame p: shape (g, r_A)."""
        A = self.alg
        kidx = list(A.kernel_index)
        lam_anchor = mul(self.splitting, A.anchor, "ka,pa->kp")  # lam(#e_p)
        eye = Field.constant(np.eye(A.rank), A.dim)
        return (eye - lam_anchor).take(kidx, 0)

    def defect(self) -> float:
        A = self.alg
        kidx = list(A.kernel_index)
        incl = np.zeros((A.rank, len(kidx)))
        incl[kidx, range(len(kidx))] = 1.0
        ib = self.breve.contract(incl, "kg,gp->kp")
        lam_anchor = mul(self.splitting, A.anchor, "ka,pa->kp")
        return (ib + lam_anchor - Field.constant(np.eye(A.rank), A.dim)).max_norm()


def canonical_splitting(A: TrivLieAlgebroid, twist: Field | None = None) -> ConnectionForm:
    """lam(d_a) = (d_a, twist_a); ``twist`` has shape (g, d) in kernel coordinates."""
    d = A.n_axes
    tang = [i for i in range(A.rank) if i not in A.kernel_index]
    S = np.zeros((A.rank, d))
    S[tang, range(d)] = 1.0
    lam = Field.constant(S, A.dim)
    if twist is not None:
        kidx = list(A.kernel_index)
        c = np.zeros((A.rank, d) + twist.coeffs.shape[2:], complex)
        c[kidx] = twist.coeffs
        lam = lam + Field(c, A.dim, twist.has_t, symmetrize=False)
    return ConnectionForm(A, lam)
