"""Finite-dimensional kernel: matrices, Lie structure constants, constant
alternating forms, the Pfaffian and the forms built from it."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import factorial

import numpy as np

from .combi import bracket_table, combos, n_combos, perm_sign, shuffle_table, signed_perms
from .errors import InputError, PreconditionError

JACOBI_TOL = 1e-10
SKEW_TOL = 1e-12


def as_matrix(A, n: int | None = None) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise InputError(f"expected a square matrix, got shape {A.shape}")
    if n is not None and A.shape[0] != n:
        raise InputError(f"expected a {n}x{n} matrix, got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError("matrix has non-finite entries")
    return A


@dataclass(frozen=True)
class FibreMetric:
    h: np.ndarray

    def __post_init__(self):
        h = as_matrix(self.h)
        if np.abs(h - h.T).max() > 1e-12:
            raise InputError("metric must be symmetric")
        if any(np.linalg.det(h[:k, :k]) <= 0 for k in range(1, h.shape[0] + 1)):
            raise InputError("metric must be positive definite")
        object.__setattr__(self, "h", h)

    @property
    def n(self) -> int:
        return self.h.shape[0]

    @property
    def inv(self) -> np.ndarray:
        return np.linalg.inv(self.h)

    @classmethod
    def identity(cls, n: int) -> "FibreMetric":
        return cls(np.eye(n))


@dataclass(frozen=True)
class VolumeElement:
    n: int
    scalar: float = 1.0

    def __post_init__(self):
        if self.n <= 0 or self.n % 2:
            raise InputError("volume elements are only used in even rank")
        if self.scalar == 0:
            raise InputError("volume element must be nonzero")


@dataclass(frozen=True)
class LieStructure:
    """Structure constants c[k, i, j]: [e_i, e_j] = sum_k c[k, i, j] e_k."""

    c: np.ndarray
    basis: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 3 or len(set(c.shape)) != 1:
            raise InputError(f"structure constants must be r x r x r, got {c.shape}")
        if np.abs(c + c.transpose(0, 2, 1)).max(initial=0.0) > JACOBI_TOL:
            raise InputError("structure constants are not antisymmetric")
        defect = jacobi_defect(c)
        if defect > JACOBI_TOL:
            raise InputError(f"Jacobi identity fails (defect {defect:.3g})")
        c.setflags(write=False)
        object.__setattr__(self, "c", c)

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    def bracket(self, x, y) -> np.ndarray:
        return np.einsum("kij,i,j->k", self.c, x, y)

    def ad(self, x) -> np.ndarray:
        return np.einsum("kij,i->kj", self.c, x)

    @classmethod
    def from_basis(cls, basis) -> "LieStructure":
        """Structure constants of a matrix Lie algebra spanned by ``basis``."""
        basis = np.asarray(basis, dtype=float)
        r = basis.shape[0]
        flat = basis.reshape(r, -1).T
        c = np.zeros((r, r, r))
        for i in range(r):
            for j in range(r):
                C = commutator(basis[i], basis[j]).ravel()
                coef, *_ = np.linalg.lstsq(flat, C, rcond=None)
                if np.abs(flat @ coef - C).max() > 1e-10:
                    raise InputError("basis does not span a Lie subalgebra")
                c[:, i, j] = coef
        return cls(c, basis)


def jacobi_defect(c: np.ndarray) -> float:
    c = np.asarray(c, float)
    t = np.einsum("mij,lmk->ijkl", c, c)
    total = t + t.transpose(1, 2, 0, 3) + t.transpose(2, 0, 1, 3)
    return float(np.abs(total).max(initial=0.0))


def matrix_units(n: int) -> np.ndarray:
    """E_(a,b) in row-major order, so coordinate vectors reshape to matrices."""
    return np.eye(n * n).reshape(n * n, n, n)


def gl(n: int) -> LieStructure:
    return LieStructure.from_basis(matrix_units(n))


def so3() -> LieStructure:
    c = np.zeros((3, 3, 3))
    for i, j, k in itertools.permutations(range(3)):
        c[k, i, j] = perm_sign((i, j, k))
    return LieStructure(c)


def abelian(r: int) -> LieStructure:
    return LieStructure(np.zeros((r, r, r)))


# -- matrix operations --------------------------------------------------------------

def commutator(A, B) -> np.ndarray:
    A = as_matrix(A)
    B = as_matrix(B, A.shape[0])
    return A @ B - B @ A


def adjoint(A, h: FibreMetric) -> np.ndarray:
    A = as_matrix(A, h.n)
    return h.inv @ A.T @ h.h


def symmetrize(A, h: FibreMetric) -> np.ndarray:
    return 0.5 * (as_matrix(A, h.n) + adjoint(A, h))


def skew_part(A, h: FibreMetric) -> np.ndarray:
    return 0.5 * (as_matrix(A, h.n) - adjoint(A, h))


def _pf(S: np.ndarray) -> float:
    n = S.shape[0]
    if n == 0:
        return 1.0
    total = 0.0
    rest = list(range(1, n))
    for pos, j in enumerate(rest):
        if S[0, j] == 0:
            continue
        keep = [x for x in rest if x != j]
        total += (-1) ** pos * S[0, j] * _pf(S[np.ix_(keep, keep)])
    return total


def pfaffian(S, e: VolumeElement | None = None) -> float:
    """Pfaffian by expansion over perfect matchings, scaled by the volume.

    Normalised so that Pf([[0, 1], [-1, 0]]) = 1 for the standard volume.
    """
    S = as_matrix(S)
    n = S.shape[0]
    if n % 2:
        raise InputError("Pfaffian needs even size")
    if np.abs(S + S.T).max(initial=0.0) > SKEW_TOL:
        raise PreconditionError("Pfaffian needs a skew-symmetric matrix")
    scale = 1.0 if e is None else e.scalar
    return scale * _pf(S)


def pfaffian_metric(C, h: FibreMetric, e: VolumeElement | None = None) -> float:
    """Pfaffian of an h-skew endomorphism: Pf of the lowered 2-form h C."""
    M = h.h @ as_matrix(C, h.n)
    return pfaffian(0.5 * (M - M.T), e)


# -- constant alternating forms --------------------------------------------------------

@dataclass(frozen=True)
class ConstAltForm:
    """Alternating k-form on R^r stored on sorted index tuples."""

    degree: int
    dim: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if v.size != n_combos(self.dim, self.degree):
            raise InputError(f"{self.degree}-form on R^{self.dim} needs "
                             f"{n_combos(self.dim, self.degree)} values, got {v.size}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, degree: int, dim: int) -> "ConstAltForm":
        return cls(degree, dim, np.zeros(n_combos(dim, degree)))

    @classmethod
    def coform(cls, i: int, dim: int) -> "ConstAltForm":
        v = np.zeros(dim)
        v[i] = 1.0
        return cls(1, dim, v)

    @classmethod
    def from_multilinear(cls, fn, basis, degree: int) -> "ConstAltForm":
        """Components fn(b_I1, ..., b_Ik) over sorted index tuples of ``basis``."""
        rows, _ = combos(len(basis), degree)
        vals = [fn(*[basis[i] for i in I]) for I in rows]
        return cls(degree, len(basis), np.array(vals, float))

    def __getitem__(self, idx) -> float:
        s, srt = _sorted_sign(idx)
        if s == 0:
            return 0.0
        return s * self.values[combos(self.dim, self.degree)[1][srt]]

    def __add__(self, other: "ConstAltForm") -> "ConstAltForm":
        self._check(other)
        return ConstAltForm(self.degree, self.dim, self.values + other.values)

    def __sub__(self, other: "ConstAltForm") -> "ConstAltForm":
        return self + other * -1.0

    def __mul__(self, s: float) -> "ConstAltForm":
        return ConstAltForm(self.degree, self.dim, self.values * float(s))

    __rmul__ = __mul__

    def _check(self, other):
        if (self.degree, self.dim) != (other.degree, other.dim):
            raise InputError("form degree/dimension mismatch")

    def norm(self) -> float:
        return float(np.abs(self.values).max(initial=0.0))

    def evaluate(self, vectors) -> float:
        """psi(v_1, ..., v_k) for arbitrary vectors (columns of a dim x k matrix)."""
        V = np.asarray(vectors, float).reshape(self.degree, self.dim).T
        return float(self.values @ _minors(V, self.degree))

    def pullback(self, mat) -> "ConstAltForm":
        """Pull back along the linear map ``mat`` (dim x new_dim)."""
        mat = np.asarray(mat, float)
        if mat.shape[0] != self.dim:
            raise InputError("pullback matrix has wrong row count")
        k = self.degree
        new_dim = mat.shape[1]
        if k == 0:
            return ConstAltForm(0, new_dim, self.values)
        rows_old, _ = combos(self.dim, k)
        rows_new, _ = combos(new_dim, k)
        sub = mat[rows_old[:, None, :, None], rows_new[None, :, None, :]]
        vals = self.values @ np.linalg.det(sub).reshape(len(rows_old), len(rows_new))
        return ConstAltForm(k, new_dim, vals)

    def wedge(self, other: "ConstAltForm") -> "ConstAltForm":
        if self.dim != other.dim:
            raise InputError("wedge of forms on different spaces")
        p, q = self.degree, other.degree
        if p + q > self.dim:
            return ConstAltForm(p + q, self.dim, np.zeros(0))
        o, a, b, s = shuffle_table(self.dim, p, q)
        vals = np.zeros(n_combos(self.dim, p + q))
        np.add.at(vals, o, s * self.values[a] * other.values[b])
        return ConstAltForm(p + q, self.dim, vals)

    def derivation(self, D) -> "ConstAltForm":
        """(D.psi)(v_1..v_k) = sum_j psi(v_1, .., D v_j, .., v_k)."""
        D = np.asarray(D, float)
        k = self.degree
        rows, _ = combos(self.dim, k)
        out = np.zeros(len(rows))
        for row_i, I in enumerate(rows):
            acc = 0.0
            for j in range(k):
                for m in np.nonzero(D[:, I[j]])[0]:
                    idx = tuple(I[:j]) + (int(m),) + tuple(I[j + 1:])
                    acc += D[m, I[j]] * self[idx]
            out[row_i] = acc
        return ConstAltForm(k, self.dim, out)


def _sorted_sign(idx):
    idx = tuple(int(i) for i in idx)
    return perm_sign(idx), tuple(sorted(idx))


def _minors(V: np.ndarray, k: int) -> np.ndarray:
    """All k x k minors of V (rows chosen by sorted tuples, columns all)."""
    rows, _ = combos(V.shape[0], k)
    if k == 0:
        return np.ones(1)
    return np.linalg.det(V[rows])


# -- the Chevalley-Eilenberg differential ----------------------------------------------

def ce_differential(psi: ConstAltForm, g: LieStructure) -> ConstAltForm:
    """(d psi)(v_1..v_{k+1}) = sum_{i<j} (-1)^{i+j+1} psi([v_i, v_j], ...), 1-based."""
    if psi.dim != g.dim:
        raise InputError("form and Lie algebra dimensions differ")
    k = psi.degree
    if k >= g.dim:
        return ConstAltForm(k + 1, g.dim, np.zeros(n_combos(g.dim, k + 1)))
    if k == 0:
        return ConstAltForm.zeros(1, g.dim)
    o, s, i, j, inner, sign = bracket_table(g.dim, k, g.c != 0)
    vals = np.zeros(n_combos(g.dim, k + 1))
    # bracket_table carries the (-1)^{m+l} sign of 0-based positions; the
    # 1-based (-1)^{i+j+1} convention is its negative
    np.add.at(vals, o, -sign * g.c[s, i, j] * psi.values[inner])
    return ConstAltForm(k + 1, g.dim, vals)


# -- forms built from matrices -------------------------------------------------------------

def alpha_map(A, h: FibreMetric) -> ConstAltForm:
    """Bivector with (alpha(A), nu ^ mu) = 1/2 (h(A nu, mu) - h(nu, A mu))."""
    S = alpha_lowered(A, h)
    n = h.n
    rows, _ = combos(n, 2)
    return ConstAltForm(2, n, S[rows[:, 0], rows[:, 1]])


def alpha_lowered(A, h: FibreMetric) -> np.ndarray:
    A = as_matrix(A, h.n)
    return 0.5 * (A.T @ h.h - h.h @ A)


def _top_wedge(bivectors: list[np.ndarray]) -> float:
    # coefficient of e_1 ^ ... ^ e_2m in b_1 ^ ... ^ b_m, b = 1/2 sum B_ij e_i ^ e_j
    m = len(bivectors)
    perms, signs = signed_perms(2 * m)
    prod = np.ones(len(perms))
    for l, B in enumerate(bivectors):
        prod = prod * B[perms[:, 2 * l], perms[:, 2 * l + 1]]
    return float(signs @ prod) / 2 ** m


def c_const(m: int) -> float:
    return (-1) ** (m - 1) * factorial(m - 1) / (2 ** (m - 1) * factorial(2 * m - 1))


def z_form(args, h: FibreMetric, e: VolumeElement) -> float:
    """The Cartan image of the Pfaffian evaluated on 2m-1 matrices."""
    n = h.n
    if n % 2 or e.n != n:
        raise InputError("z-form needs an even-rank fibre and matching volume")
    m = n // 2
    mats = [as_matrix(A, n) for A in args]
    if len(mats) != 2 * m - 1:
        raise InputError(f"z_{2 * m - 1} takes {2 * m - 1} arguments, got {len(mats)}")
    hinv = h.inv

    def raised(A):
        return hinv @ alpha_lowered(A, h) @ hinv

    total = 0.0
    perms, signs = signed_perms(2 * m - 1)
    for p, sg in zip(perms, signs):
        bivs = [raised(mats[p[0]])]
        for l in range(m - 1):
            bivs.append(raised(commutator(mats[p[2 * l + 1]], mats[p[2 * l + 2]])))
        total += sg * _top_wedge(bivs)
    return c_const(m) * e.scalar * float(np.linalg.det(h.h)) * total


def trace_form(args, h: FibreMetric) -> float:
    """1/(2j-1)! sum_sigma sgn(sigma) tr(A~_sigma(1) ... A~_sigma(2j-1))."""
    mats = [symmetrize(A, h) for A in args]
    k = len(mats)
    if k % 2 == 0:
        raise InputError("trace forms have odd arity")
    perms, signs = signed_perms(k)
    total = 0.0
    for p, sg in zip(perms, signs):
        P = np.eye(h.n)
        for i in p:
            P = P @ mats[i]
        total += sg * np.trace(P)
    return total / factorial(k)
