"""Trivialized Lie algebroids over flat tori, their sections and forms.

Everything is stored in a fixed global frame e_1..e_r.  The anchor is an
``(r, n_axes)`` field array (row i = the vector field #e_i) and the bracket is
given by structure functions ``c[k, i, j]`` with [e_i, e_j] = c^k_ij e_k; the
Leibniz rule extends this to arbitrary sections.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .combi import action_table, bracket_table, combos, n_combos, shuffle_table, signed_perms
from .errors import InputError
from .fields import Field, mul
from .lie import LieStructure
from .report import Report

_LETTERS = "abcdefghijklmnopqrstuvwxy"


def letters(n: int, start: int = 0) -> str:
    return _LETTERS[start:start + n]


@dataclass(frozen=True, eq=False)
class TrivLieAlgebroid:
    """Rank-r algebroid on T^d (or R x T^d when fields carry a t-axis)."""

    anchor: Field
    structure: Field
    kernel_index: tuple[int, ...] = ()
    lie: LieStructure | None = None
    kernel_shape: tuple[int, ...] | None = None
    name: str = ""

    def __post_init__(self):
        r = self.anchor.vshape[0] if self.anchor.vshape else 0
        if len(self.anchor.vshape) != 2:
            raise InputError("anchor must be an (r, n_axes) field array")
        if self.structure.vshape != (r, r, r):
            raise InputError(f"structure functions must have shape {(r, r, r)}")
        if self.anchor.vshape[1] != self.n_axes:
            raise InputError("anchor columns must match the base coordinates")
        anti = (self.structure + self.structure.moveaxis(1, 2)).max_norm()
        if anti > 1e-12:
            raise InputError("structure functions are not antisymmetric")

    @property
    def dim(self) -> int:
        return self.anchor.dim

    @property
    def has_t(self) -> bool:
        return self.anchor.has_t or self.structure.has_t

    @property
    def n_axes(self) -> int:
        return self.dim + (1 if self.anchor.has_t else 0)

    @property
    def rank(self) -> int:
        return self.anchor.vshape[0]

    @property
    def constant_structure(self) -> bool:
        return self.structure.is_constant

    def nonzero_structure(self) -> np.ndarray:
        return np.abs(self.structure.coeffs).reshape(self.rank, self.rank, self.rank, -1).max(-1) > 0

    # -- the anchor as a derivation ---------------------------------------------
    def frame_derivs(self, f: Field) -> Field:
        """rho(e_i)(f) for every frame index i, on a new trailing value axis."""
        g = f.grad(self.n_axes)
        nv = len(f.vshape)
        X = letters(nv, 2)
        if self.anchor.is_constant:
            return g.contract(self.anchor.constant_value(), f"ia,{X}a->{X}i")
        return mul(g, self.anchor, f"{X}a,ia->{X}i")

    def rho(self, xi: "Section", f: Field) -> Field:
        D = self.frame_derivs(f)
        X = letters(len(f.vshape), 2)
        return mul(D, xi.comps, f"{X}i,i->{X}")

    # -- sections ------------------------------------------------------------------
    def section(self, comps) -> "Section":
        if not isinstance(comps, Field):
            comps = Field.constant(np.asarray(comps, float), self.dim)
        return Section(self, comps)

    def frame(self, i: int) -> "Section":
        v = np.zeros(self.rank)
        v[i] = 1.0
        return self.section(v)

    def kernel_section(self, sigma, scalar: Field | None = None) -> "Section":
        """The section (0, sigma) for a kernel vector or a kernel-shaped matrix."""
        sigma = np.asarray(sigma, float).reshape(-1)
        if sigma.size != len(self.kernel_index):
            raise InputError("kernel vector has the wrong length")
        v = np.zeros(self.rank)
        v[list(self.kernel_index)] = sigma
        s = self.section(v)
        return s if scalar is None else Section(self, mul(scalar, s.comps))


@dataclass(frozen=True, eq=False)
class Section:
    alg: TrivLieAlgebroid
    comps: Field

    def __post_init__(self):
        if self.comps.vshape != (self.alg.rank,):
            raise InputError(f"a section needs {self.alg.rank} components, got {self.comps.vshape}")

    def _same(self, other: "Section"):
        if other.alg is not self.alg:
            raise InputError("sections live on different algebroids")

    def __add__(self, other: "Section") -> "Section":
        self._same(other)
        return Section(self.alg, self.comps + other.comps)

    def __sub__(self, other: "Section") -> "Section":
        self._same(other)
        return Section(self.alg, self.comps - other.comps)

    def __rmul__(self, f) -> "Section":
        if isinstance(f, Field):
            return Section(self.alg, mul(f, self.comps))
        return Section(self.alg, self.comps * float(f))

    def norm(self) -> float:
        return self.comps.norm()


def bracket(xi: Section, eta: Section) -> Section:
    """[xi, eta]^k = xi^i eta^j c^k_ij + rho(xi)(eta^k) - rho(eta)(xi^k)."""
    xi._same(eta)
    L = xi.alg
    out = mul(L.structure, mul(xi.comps, eta.comps, "i,j->ij"), "kij,ij->k")
    out = out + L.rho(xi, eta.comps) - L.rho(eta, xi.comps)
    return Section(L, out)


def anchor_of(xi: Section) -> Field:
    """#xi as a vector field (components along the base coordinates)."""
    return mul(xi.comps, xi.alg.anchor, "i,ia->a")


# -- forms ---------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LForm:
    """Alternating k-form on an algebroid, stored on sorted frame tuples.

    ``values`` has value shape ``(C(r, k),) + value_shape``; a non-empty
    ``value_shape`` makes it a vector-valued form (e.g. End-valued with
    value_shape ``(n, n)``).
    """

    alg: TrivLieAlgebroid
    degree: int
    values: Field

    def __post_init__(self):
        if not 0 <= self.degree <= self.alg.rank:
            raise InputError(f"degree {self.degree} out of range for rank {self.alg.rank}")
        want = n_combos(self.alg.rank, self.degree)
        if not self.values.vshape or self.values.vshape[0] != want:
            raise InputError(f"a {self.degree}-form needs {want} components")

    @property
    def value_shape(self) -> tuple[int, ...]:
        return self.values.vshape[1:]

    @classmethod
    def zeros(cls, alg: TrivLieAlgebroid, degree: int, value_shape=()) -> "LForm":
        return cls(alg, degree, Field.zeros((n_combos(alg.rank, degree),) + tuple(value_shape),
                                            alg.dim))

    @classmethod
    def constant(cls, alg: TrivLieAlgebroid, degree: int, values) -> "LForm":
        return cls(alg, degree, Field.constant(np.asarray(values, float), alg.dim))

    @classmethod
    def random(cls, alg: TrivLieAlgebroid, degree: int, rng, N: int = 2, value_shape=(),
               scale: float = 1.0) -> "LForm":
        vs = (n_combos(alg.rank, degree),) + tuple(value_shape)
        return cls(alg, degree, Field.random(rng, vs, alg.dim, N, scale))

    def _check(self, other: "LForm"):
        if other.alg is not self.alg or other.degree != self.degree:
            raise InputError("forms differ in algebroid or degree")

    def __add__(self, other: "LForm") -> "LForm":
        self._check(other)
        return LForm(self.alg, self.degree, self.values + other.values)

    def __sub__(self, other: "LForm") -> "LForm":
        self._check(other)
        return LForm(self.alg, self.degree, self.values - other.values)

    def __neg__(self) -> "LForm":
        return LForm(self.alg, self.degree, -self.values)

    def __mul__(self, s) -> "LForm":
        if isinstance(s, Field):
            X = letters(len(self.value_shape), 1)
            return LForm(self.alg, self.degree, mul(self.values, s, f"z{X},->z{X}"))
        return LForm(self.alg, self.degree, self.values * float(s))

    __rmul__ = __mul__

    def norm(self) -> float:
        return self.values.norm()

    @property
    def lost(self) -> float:
        return self.values.lost

    def component(self, idx) -> Field:
        """Value on an arbitrary frame tuple (antisymmetry applied)."""
        from .combi import sort_with_sign
        s, srt = sort_with_sign(tuple(int(i) for i in idx))
        if s == 0:
            return self.values[0] * 0.0
        return self.values[combos(self.alg.rank, self.degree)[1][srt]] * s

    def map_values(self, const, subscripts: str) -> "LForm":
        """Apply a constant linear map to the values, e.g. ``'qab,ab->q'``."""
        return LForm(self.alg, self.degree, self.values.contract(const, subscripts))

    def evaluate(self, *sections: Section) -> Field:
        """omega(xi_1, ..., xi_k) as a field array of shape value_shape."""
        if len(sections) != self.degree:
            raise InputError(f"{self.degree}-form evaluated on {len(sections)} sections")
        for s in sections:
            if s.alg is not self.alg:
                raise InputError("section from a different algebroid")
        X = letters(len(self.value_shape), 1)
        if self.degree == 0:
            return self.values[0]
        M = Field.stack([s.comps for s in sections], axis=1)
        mins = minors(M, self.degree)
        return mul(mins, self.values, f"z,z{X}->{X}").reshape(self.value_shape)


def minors(M: Field, k: int) -> Field:
    """All k x k minors of an (r, s) field matrix, shape (C(r,k), C(s,k))."""
    r, s = M.vshape
    rows, _ = combos(r, k)
    cols, _ = combos(s, k)
    if k == 0:
        return Field.constant(np.ones((1, 1)), M.dim)
    if M.is_constant:
        V = M.constant_value()
        sub = V[rows[:, None, :, None], cols[None, :, None, :]]
        return Field.constant(np.linalg.det(sub), M.dim)
    perms, signs = signed_perms(k)
    total = None
    for p, sg in zip(perms, signs):
        term = None
        for l in range(k):
            # entries M[I_l, J_p(l)] for every (I, J)
            ri = rows[:, l][:, None].repeat(len(cols), 1)
            cj = cols[:, p[l]][None, :].repeat(len(rows), 0)
            f = Field(M.coeffs[ri, cj], M.dim, M.has_t, M.lost, symmetrize=False)
            term = f if term is None else mul(term, f)
        term = term * sg
        total = term if total is None else total + term
    return total


def wedge(a: LForm, b: LForm, subscripts: str | None = None) -> LForm:
    """Wedge product with values combined by an einsum on value axes.

    With no ``subscripts`` one factor must be scalar-valued.  For matrix-valued
    forms ``'ij,jk->ik'`` gives the usual wedge with matrix multiplication.
    """
    if a.alg is not b.alg:
        raise InputError("wedge of forms on different algebroids")
    L = a.alg
    p, q = a.degree, b.degree
    if p + q > L.rank:
        raise InputError("wedge degree exceeds the rank")
    if subscripts is None:
        if a.value_shape and b.value_shape:
            raise InputError("give subscripts to wedge two vector-valued forms")
        X = letters(len(a.value_shape) + len(b.value_shape))
        sa, sb = X[:len(a.value_shape)], X[len(a.value_shape):]
        subscripts = f"{sa},{sb}->{X}"
    lhs, out = subscripts.split("->")
    sa, sb = lhs.split(",")
    o, ia, ib, sg = shuffle_table(L.rank, p, q)
    A = a.values.take(ia)
    B = b.values.take(ib)
    prod = mul(A, B, f"z{sa},z{sb}->z{out}")
    return LForm(L, p + q, prod.scatter_add(n_combos(L.rank, p + q), o, sg))


# -- the Cartan-type differential ---------------------------------------------------------

def cartan(L: TrivLieAlgebroid, omega_values: Field, k: int,
           action: Callable[[Field], Field]) -> Field:
    """Sum_i (-1)^i act(e_i) w(..i^..) + sum_{i<j} (-1)^{i+j} w([e_i, e_j], ..).

    ``action(values)`` must return the action of every frame on every
    component, with value shape ``(C(r,k), r) + value_shape``.
    """
    r = L.rank
    if k >= r:
        raise InputError("no differential out of top degree")
    n_out = n_combos(r, k + 1)
    vs = omega_values.vshape[1:]
    X = letters(len(vs), 1)
    o, fr, inner, sg = action_table(r, k)
    acted = action(omega_values)
    gathered = Field(acted.coeffs[inner, fr], acted.dim, acted.has_t, acted.lost,
                     symmetrize=False)
    out = gathered.scatter_add(n_out, o, sg)
    if k >= 1:
        bo, s, i, j, binner, bsg = bracket_table(r, k, L.nonzero_structure())
        if len(bo):
            cg = Field(L.structure.coeffs[s, i, j], L.dim, L.structure.has_t,
                       L.structure.lost, symmetrize=False)
            wg = omega_values.take(binner)
            term = mul(cg, wg, f"z,z{X}->z{X}")
            out = out + term.scatter_add(n_out, bo, bsg)
    return out


def _anchor_action(L: TrivLieAlgebroid) -> Callable[[Field], Field]:
    def act(values: Field) -> Field:
        D = L.frame_derivs(values)
        return D.moveaxis(len(D.vshape) - 1, 1)
    return act


def d_L(omega: LForm) -> LForm:
    """The algebroid differential of a scalar (or trivially-valued) form."""
    L = omega.alg
    if omega.degree >= L.rank:
        raise InputError("d_L of a top-degree form")
    return LForm(L, omega.degree + 1, cartan(L, omega.values, omega.degree, _anchor_action(L)))


def pullback(M: Field, omega: LForm, source: TrivLieAlgebroid) -> LForm:
    """(M* omega)(xi_1..xi_k) = omega(M xi_1, .., M xi_k) for a frame map M (r_A x r_L)."""
    if M.vshape != (omega.alg.rank, source.rank):
        raise InputError("bundle map shape does not match the algebroids")
    k = omega.degree
    X = letters(len(omega.value_shape), 2)
    mins = minors(M, k)
    vals = mul(mins, omega.values, f"IJ,I{X}->J{X}")
    return LForm(source, k, vals)


# -- builders ------------------------------------------------------------------------------

def tangent(d: int) -> TrivLieAlgebroid:
    return TrivLieAlgebroid(Field.constant(np.eye(d), d), Field.constant(np.zeros((d,) * 3), d),
                            name=f"T(T^{d})")


def build_transitive(d: int, g: LieStructure, kernel_shape=None, name: str = "") -> TrivLieAlgebroid:
    """TM + (M x g): tangent frames first, then the basis of g, constant structure."""
    r = d + g.dim
    anchor = np.zeros((r, d))
    anchor[:d, :d] = np.eye(d)
    c = np.zeros((r, r, r))
    c[d:, d:, d:] = g.c
    if kernel_shape is None and g.basis is not None:
        kernel_shape = tuple(g.basis.shape[1:])
    return TrivLieAlgebroid(Field.constant(anchor, d), Field.constant(c, d),
                            tuple(range(d, r)), g, kernel_shape, name or f"TM+g(dim {g.dim})")


def end_model(d: int, n: int) -> TrivLieAlgebroid:
    from .lie import gl
    return build_transitive(d, gl(n), (n, n), f"T(T^{d})+End(R^{n})")


def example_model(d: int = 1) -> TrivLieAlgebroid:
    return end_model(d, 2)


def product_with_line(L: TrivLieAlgebroid) -> TrivLieAlgebroid:
    """The algebroid T(R) x L: frame 0 is d/dt, the t-coordinate is the last axis."""
    if L.has_t:
        raise InputError("algebroid already carries a t-direction")
    r, n = L.rank, L.n_axes
    A = L.anchor.with_t().coeffs
    anchor = np.zeros((r + 1, n + 1) + A.shape[2:], complex)
    anchor[0, n][(L.anchor.N,) * L.dim + (0,)] = 1.0
    anchor[1:, :n] = A
    C = L.structure.with_t().coeffs
    c = np.zeros((r + 1,) * 3 + C.shape[3:], complex)
    c[1:, 1:, 1:] = C
    kidx = tuple(i + 1 for i in L.kernel_index)
    return TrivLieAlgebroid(Field(anchor, L.dim, True, symmetrize=False),
                            Field(c, L.dim, True, symmetrize=False),
                            kidx, L.lie, L.kernel_shape, f"T(R)x{L.name}")


def lift_form(omega: LForm, P: TrivLieAlgebroid) -> LForm:
    """Pull a form on L back to T(R) x L along the projection (no dt legs)."""
    r = omega.alg.rank
    if P.rank != r + 1 or not P.has_t:
        raise InputError("target is not the product of the form's algebroid with a line")
    M = np.zeros((r, r + 1))
    M[:, 1:] = np.eye(r)
    vals = pullback(Field.constant(M, omega.alg.dim), omega, P).values
    return LForm(P, omega.degree, vals.with_t())


# -- validation -------------------------------------------------------------------------------

def jacobi_defect(L: TrivLieAlgebroid) -> float:
    """max over frame triples of |[[e_i,e_j],e_k] + cyclic|."""
    c = L.structure
    cc = mul(c, c, "mij,lmk->lijk")
    D = L.frame_derivs(c)  # D[l,i,j,k] = rho(e_k) c^l_ij
    J = cc - D
    tot = J + J.transpose((0, 2, 3, 1)) + J.transpose((0, 3, 1, 2))
    return tot.max_norm()


def anchor_defect(L: TrivLieAlgebroid) -> float:
    """max over frame pairs of |#[e_i,e_j] - [#e_i, #e_j]|."""
    A = L.anchor
    lhs = mul(L.structure, A, "mij,ma->ija")
    dA = L.frame_derivs(A)  # dA[j,a,i] = rho(e_i)(A[j,a])
    rhs = dA.moveaxis(2, 0) - dA.moveaxis(2, 0).moveaxis(0, 1)
    return (lhs - rhs).max_norm()


def validate(L: TrivLieAlgebroid, tol: float = 1e-10) -> Report:
    rep = Report(f"validate {L.name}")
    rep.add("jacobi", "Jacobi identity on frame sections", jacobi_defect(L), tol,
            lost=L.structure.lost)
    rep.add("anchor_homomorphism", "anchor is bracket-preserving", anchor_defect(L), tol)
    return rep


# -- reductions ----------------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Reduction:
    """B = TM + (M x h) inside a transitive A, with a chosen complement of h in g.

    ``h_basis`` and ``complement`` hold kernel coordinate vectors as columns.
    """

    parent: TrivLieAlgebroid
    h_basis: np.ndarray
    complement: np.ndarray
    name: str = ""
    proj: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        H = np.asarray(self.h_basis, float).reshape(len(self.parent.kernel_index), -1)
        C = np.asarray(self.complement, float).reshape(len(self.parent.kernel_index), -1)
        full = np.hstack([H, C])
        if full.shape[0] != full.shape[1] or abs(np.linalg.det(full)) < 1e-12:
            raise InputError("h basis and complement must together span g")
        inv = np.linalg.inv(full)
        object.__setattr__(self, "h_basis", H)
        object.__setattr__(self, "complement", C)
        object.__setattr__(self, "proj", inv[H.shape[1]:])

    @property
    def g(self) -> LieStructure:
        return self.parent.lie

    @property
    def q(self) -> int:
        return self.complement.shape[1]

    def frame_matrix(self) -> np.ndarray:
        """Columns are the frame of B written in A's frame (tangent first)."""
        A = self.parent
        r = A.rank
        tang = [i for i in range(r) if i not in A.kernel_index]
        cols = []
        for i in tang:
            v = np.zeros(r)
            v[i] = 1.0
            cols.append(v)
        for hcol in self.h_basis.T:
            v = np.zeros(r)
            v[list(A.kernel_index)] = hcol
            cols.append(v)
        return np.array(cols).T

    def quotient_matrix(self) -> np.ndarray:
        """The linear map A-frame coordinates -> complement coordinates (kernel part only)."""
        A = self.parent
        P = np.zeros((self.q, A.rank))
        P[:, list(A.kernel_index)] = self.proj
        return P

    def check(self, tol: float = 1e-10) -> Report:
        rep = Report(f"reduction {self.name}")
        g = self.g
        worst = 0.0
        for a in self.h_basis.T:
            for b in self.h_basis.T:
                worst = max(worst, float(np.abs(self.proj @ g.bracket(a, b)).max(initial=0.0)))
        rep.add("h_subalgebra", "h closed under the kernel bracket", worst, tol)
        F = self.frame_matrix()
        A = self.parent
        worst = 0.0
        P = self.quotient_matrix()
        for i in range(F.shape[1]):
            for j in range(F.shape[1]):
                br = bracket(A.section(F[:, i]), A.section(F[:, j]))
                worst = max(worst, br.comps.contract(P, "qa,a->q").max_norm())
        rep.add("B_closed", "B closed under the bracket of A", worst, tol)
        return rep


def reduction_quotient(B: Reduction, sigma) -> Field:
    """Complement coordinates of a kernel section (or kernel vector / matrix)."""
    A = B.parent
    if isinstance(sigma, Section):
        tang = [i for i in range(A.rank) if i not in A.kernel_index]
        if tang and sigma.comps.take(tang).max_norm() > 1e-12:
            raise InputError("section is not in the kernel of the anchor")
        return sigma.comps.contract(B.quotient_matrix(), "qa,a->q")
    v = np.asarray(sigma, float).reshape(-1)
    if v.size != len(A.kernel_index):
        raise InputError("kernel vector has the wrong length")
    return Field.constant(B.proj @ v, A.dim)


def riemannian_reduction(A: TrivLieAlgebroid, h) -> Reduction:
    """h-skew endomorphisms as the sub-algebra, h-symmetric ones as complement."""
    from .lie import FibreMetric
    h = h if isinstance(h, FibreMetric) else FibreMetric(np.asarray(h, float))
    if A.kernel_shape is None or len(A.kernel_shape) != 2:
        raise InputError("the Riemannian reduction needs an End(R^n) kernel")
    n = A.kernel_shape[0]
    if n != h.n:
        raise InputError("metric size does not match the fibre")
    hinv = h.inv
    skew, sym = [], []
    for i in range(n):
        E = np.zeros((n, n))
        E[i, i] = 1.0
        sym.append(hinv @ E)
    for i in range(n):
        for j in range(i + 1, n):
            E = np.zeros((n, n))
            E[i, j], E[j, i] = 1.0, 1.0
            sym.append(hinv @ E)
            K = np.zeros((n, n))
            K[i, j], K[j, i] = 1.0, -1.0
            skew.append(hinv @ K)
    H = np.array([m.ravel() for m in skew]).T
    C = np.array([m.ravel() for m in sym]).T
    return Reduction(A, H, C, f"Riemannian reduction of {A.name}")
