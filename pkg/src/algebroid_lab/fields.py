"""Truncated Fourier series on the flat torus T^d.

A :class:`Field` is an array of real-valued functions on T^d, stored as
complex Fourier coefficients on the cube ``max|k_i| <= N``.  Leading axes of
``coeffs`` are value axes (so one object can hold a whole matrix or a whole
differential form worth of functions); the trailing ``dim`` axes are the
frequency grid, centred so that index ``N`` is the zero mode.

A field may additionally be polynomial in an extra real variable ``t``.  The
t-axis is stored last and indexed by the power of ``t``; it is never
truncated.  This is what the product algebroid over R x T^d works with.

Products are exact convolutions followed by truncation to
``min(cap, N_a + N_b)``; the l1 mass of discarded coefficients is tracked in
``lost`` so that every identity check can report whether truncation
happened.
"""
from __future__ import annotations

import contextlib
import contextvars
import os
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import fft as sfft

from .errors import InputError

DEFAULT_CAP = 8
_cap_override: contextvars.ContextVar[int | None] = contextvars.ContextVar(
    "algebroid_lab_trunc_cap", default=None
)


def get_cap() -> int:
    cap = _cap_override.get()
    if cap is not None:
        return cap
    env = os.environ.get("ALGEBROID_LAB_TRUNC_CAP")
    return int(env) if env else DEFAULT_CAP


@contextlib.contextmanager
def truncation_cap(n: int):
    """Temporarily set the global product truncation cap."""
    if n < 0:
        raise InputError("truncation cap must be nonnegative")
    token = _cap_override.set(int(n))
    try:
        yield
    finally:
        _cap_override.reset(token)


def _hermitian(c: np.ndarray, dim: int, has_t: bool) -> np.ndarray:
    stop = c.ndim - (1 if has_t else 0)
    axes = tuple(range(stop - dim, stop))
    return 0.5 * (c + np.conj(np.flip(c, axis=axes)))


class Field:
    """Array of real functions on T^d (optionally polynomial in t)."""

    __slots__ = ("coeffs", "dim", "has_t", "lost")

    def __init__(self, coeffs, dim: int, has_t: bool = False, lost: float = 0.0,
                 *, symmetrize: bool = True):
        if dim < 1:
            raise InputError("base dimension must be positive")
        c = np.asarray(coeffs, dtype=complex)
        ng = dim + (1 if has_t else 0)
        if c.ndim < ng:
            raise InputError(f"coefficient array needs at least {ng} axes")
        per = c.shape[c.ndim - ng: c.ndim - ng + dim]
        if len(set(per)) != 1 or per[0] % 2 != 1:
            raise InputError(f"periodic axes must share one odd length, got {per}")
        if symmetrize:
            c = _hermitian(c, dim, has_t)
        c.setflags(write=False)
        self.coeffs = c
        self.dim = dim
        self.has_t = has_t
        self.lost = float(lost)

    # -- shape bookkeeping -------------------------------------------------
    @property
    def grid_ndim(self) -> int:
        return self.dim + (1 if self.has_t else 0)

    @property
    def vshape(self) -> tuple[int, ...]:
        return self.coeffs.shape[: self.coeffs.ndim - self.grid_ndim]

    @property
    def N(self) -> int:
        return (self.coeffs.shape[len(self.vshape)] - 1) // 2

    @property
    def tdeg(self) -> int:
        return self.coeffs.shape[-1] - 1 if self.has_t else 0

    degree = tdeg

    @property
    def base_dim(self) -> int:
        return self.dim

    @property
    def truncation(self) -> int:
        return self.N

    @property
    def is_constant(self) -> bool:
        return self.N == 0 and self.tdeg == 0

    def _like(self, coeffs, lost=None, symmetrize=True, has_t=None) -> "Field":
        return Field(coeffs, self.dim, self.has_t if has_t is None else has_t,
                     self.lost if lost is None else lost, symmetrize=symmetrize)

    # -- constructors --------------------------------------------------------
    @classmethod
    def zeros(cls, vshape: Sequence[int] = (), dim: int = 1, N: int = 0,
              tdeg: int | None = None) -> "Field":
        shape = tuple(vshape) + (2 * N + 1,) * dim
        if tdeg is not None:
            shape += (tdeg + 1,)
        return cls(np.zeros(shape, complex), dim, tdeg is not None, symmetrize=False)

    @classmethod
    def constant(cls, values, dim: int = 1) -> "Field":
        v = np.asarray(values, dtype=float)
        return cls(v.reshape(v.shape + (1,) * dim), dim, symmetrize=False)

    @classmethod
    def from_modes(cls, dim: int, modes: Mapping[tuple, complex], N: int | None = None) -> "Field":
        """Build a scalar field from {frequency: coefficient}.

        Only one of each +-k pair needs to be given; the partner is filled in
        by conjugation.  A pair given twice is averaged into Hermitian form.
        """
        modes = {tuple(int(x) for x in k): complex(v) for k, v in modes.items()}
        for k in modes:
            if len(k) != dim:
                raise InputError(f"mode {k} does not have {dim} entries")
        need = max((max(abs(x) for x in k) for k in modes), default=0)
        N = need if N is None else N
        if need > N:
            raise InputError("mode outside the requested truncation")
        c = np.zeros((2 * N + 1,) * dim, complex)
        for k, v in modes.items():
            neg = tuple(-x for x in k)
            c[tuple(x + N for x in k)] = v
            if neg not in modes:
                c[tuple(x + N for x in neg)] = np.conj(v)
        return cls(c, dim)

    @classmethod
    def from_literals(cls, dim: int, records: Iterable[Mapping]) -> "Field":
        """Config-file field literal: [{index: [...], re: x, im: y}, ...]."""
        modes: dict[tuple, complex] = {}
        for rec in records:
            k = tuple(rec["index"])
            modes[k] = modes.get(k, 0) + complex(rec.get("re", 0.0), rec.get("im", 0.0))
        if not modes:
            return cls.zeros((), dim)
        return cls.from_modes(dim, modes)

    @classmethod
    def sin(cls, dim: int, axis: int, freq: int = 1, amp: float = 1.0) -> "Field":
        k = [0] * dim
        k[axis] = freq
        return cls.from_modes(dim, {tuple(k): -0.5j * amp})

    @classmethod
    def cos(cls, dim: int, axis: int, freq: int = 1, amp: float = 1.0) -> "Field":
        k = [0] * dim
        k[axis] = freq
        return cls.from_modes(dim, {tuple(k): 0.5 * amp})

    @classmethod
    def random(cls, rng: np.random.Generator, vshape=(), dim: int = 1, N: int = 2,
               scale: float = 1.0) -> "Field":
        shape = tuple(vshape) + (2 * N + 1,) * dim
        c = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        return cls(scale * c / (2 * N + 1) ** dim, dim)

    @classmethod
    def stack(cls, fields: Sequence["Field"], axis: int = 0) -> "Field":
        if not fields:
            raise InputError("cannot stack an empty list")
        fs = align(*fields)
        c = np.stack([f.coeffs for f in fs], axis=axis)
        return Field(c, fs[0].dim, fs[0].has_t, sum(f.lost for f in fs), symmetrize=False)

    @classmethod
    def tpoly(cls, coeffs: Sequence["Field"]) -> "Field":
        """Polynomial in t with the given field coefficients (index = power)."""
        fs = align(*coeffs)
        if any(f.has_t for f in fs):
            raise InputError("t-polynomial coefficients must be t-free")
        c = np.stack([f.coeffs for f in fs], axis=-1)
        return Field(c, fs[0].dim, True, sum(f.lost for f in fs), symmetrize=False)

    # -- layout changes ------------------------------------------------------
    def padded(self, N: int | None = None, tdeg: int | None = None) -> "Field":
        N = self.N if N is None else N
        if N < self.N:
            raise InputError("padding cannot shrink")
        pads = [(0, 0)] * len(self.vshape) + [(N - self.N, N - self.N)] * self.dim
        if self.has_t:
            t = self.tdeg if tdeg is None else tdeg
            pads.append((0, t - self.tdeg))
        elif tdeg is not None:
            return self.with_t().padded(N, tdeg)
        if all(p == (0, 0) for p in pads):
            return self
        return self._like(np.pad(self.coeffs, pads), symmetrize=False)

    def with_t(self) -> "Field":
        if self.has_t:
            return self
        return Field(self.coeffs[..., None], self.dim, True, self.lost, symmetrize=False)

    def truncated(self, N: int) -> "Field":
        if N >= self.N:
            return self
        lo, hi = self.N - N, self.N + N + 1
        sl = (slice(None),) * len(self.vshape) + (slice(lo, hi),) * self.dim
        kept = self.coeffs[sl]
        lost = self.lost + float(np.abs(self.coeffs).sum() - np.abs(kept).sum())
        return self._like(kept, lost=lost, symmetrize=False)

    def __getitem__(self, idx) -> "Field":
        if not isinstance(idx, tuple):
            idx = (idx,)
        if len(idx) > len(self.vshape) or any(i is Ellipsis for i in idx):
            raise InputError("index only addresses value axes")
        return self._like(self.coeffs[idx], symmetrize=False)

    def take(self, indices, axis: int = 0) -> "Field":
        if axis < 0:
            axis += len(self.vshape)
        return self._like(np.take(self.coeffs, indices, axis=axis), symmetrize=False)

    def reshape(self, vshape: Sequence[int]) -> "Field":
        return self._like(self.coeffs.reshape(tuple(vshape) + self.coeffs.shape[len(self.vshape):]),
                          symmetrize=False)

    def moveaxis(self, src: int, dst: int) -> "Field":
        return self._like(np.moveaxis(self.coeffs, src, dst), symmetrize=False)

    def transpose(self, axes: Sequence[int]) -> "Field":
        """Permute value axes (grid axes stay in place)."""
        axes = tuple(axes) + tuple(range(len(self.vshape), self.coeffs.ndim))
        return self._like(self.coeffs.transpose(axes), symmetrize=False)

    def sum(self, axis) -> "Field":
        return self._like(self.coeffs.sum(axis=axis), symmetrize=False)

    def contract(self, const, subscripts: str) -> "Field":
        """Apply a constant tensor on value axes: ``'ab,b->a'`` = const x field."""
        lhs, out = subscripts.split("->")
        a, b = lhs.split(",")
        expr = f"{a},{b}...->{out}..."
        return self._like(np.einsum(expr, np.asarray(const), self.coeffs), symmetrize=False)

    def scatter_add(self, n_out: int, index: np.ndarray, signs: np.ndarray | None = None) -> "Field":
        """out[index[t]] += signs[t] * self[t] along the first value axis."""
        c = self.coeffs
        if signs is not None:
            c = c * np.asarray(signs, float).reshape((-1,) + (1,) * (c.ndim - 1))
        out = np.zeros((n_out,) + c.shape[1:], complex)
        np.add.at(out, np.asarray(index, dtype=np.intp), c)
        return self._like(out, symmetrize=False)

    # -- arithmetic ------------------------------------------------------------
    def __add__(self, other):
        if np.isscalar(other):
            other = Field.constant(np.full(self.vshape, float(other)), self.dim)
        a, b = align(self, other)
        return a._like(a.coeffs + b.coeffs, lost=a.lost + b.lost, symmetrize=False)

    __radd__ = __add__

    def __neg__(self):
        return self._like(-self.coeffs, symmetrize=False)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Field) else -float(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Field):
            return mul(self, other)
        if np.iscomplexobj(other) and np.any(np.imag(other) != 0):
            raise InputError("scaling by a complex number breaks realness")
        return self._like(self.coeffs * np.real(other), symmetrize=False)

    __rmul__ = __mul__

    def __truediv__(self, s):
        return self * (1.0 / float(s))

    def derivative(self, axis: int) -> "Field":
        """d/dx_axis for 0 <= axis < dim; axis == dim means d/dt."""
        nv = len(self.vshape)
        if 0 <= axis < self.dim:
            k = np.arange(-self.N, self.N + 1)
            shape = [1] * self.coeffs.ndim
            shape[nv + axis] = k.size
            return self._like(self.coeffs * (1j * k).reshape(shape), symmetrize=False)
        if axis == self.dim and self.has_t:
            if self.tdeg == 0:
                return self._like(np.zeros_like(self.coeffs), symmetrize=False)
            p = np.arange(1, self.tdeg + 1, dtype=float)
            return self._like(self.coeffs[..., 1:] * p, symmetrize=False)
        if axis == self.dim:
            return self._like(np.zeros_like(self.coeffs), symmetrize=False)
        raise InputError(f"axis {axis} out of range for a field on T^{self.dim}")

    def grad(self, n_axes: int | None = None) -> "Field":
        """Stack of derivatives along a new trailing value axis."""
        n_axes = self.dim + (1 if self.has_t else 0) if n_axes is None else n_axes
        parts = [self.derivative(a) for a in range(n_axes)]
        parts = align(*parts)
        c = np.stack([p.coeffs for p in parts], axis=len(self.vshape))
        return Field(c, self.dim, parts[0].has_t, self.lost, symmetrize=False)

    # -- t polynomials -----------------------------------------------------------
    def t_coeffs(self) -> list["Field"]:
        if not self.has_t:
            return [self]
        return [Field(self.coeffs[..., j], self.dim, False, self.lost, symmetrize=False)
                for j in range(self.tdeg + 1)]

    def integrate_unit(self) -> "Field":
        """Exact integral over t in [0, 1]."""
        if not self.has_t:
            return self
        w = 1.0 / np.arange(1, self.tdeg + 2)
        return Field(self.coeffs @ w, self.dim, False, self.lost, symmetrize=False)

    def at_t(self, t: float) -> "Field":
        if not self.has_t:
            return self
        w = float(t) ** np.arange(self.tdeg + 1)
        return Field(self.coeffs @ w, self.dim, False, self.lost, symmetrize=False)

    def trim_t(self, tol: float = 0.0) -> "Field":
        if not self.has_t:
            return self
        c = self.coeffs
        p = c.shape[-1]
        while p > 1 and np.abs(c[..., p - 1]).max(initial=0.0) <= tol:
            p -= 1
        return self._like(c[..., :p], symmetrize=False)

    # -- measurement ---------------------------------------------------------------
    def l1(self) -> np.ndarray:
        """Per-element l1 coefficient norm (an upper bound for the sup norm)."""
        axes = tuple(range(len(self.vshape), self.coeffs.ndim))
        return np.abs(self.coeffs).sum(axis=axes)

    def norm(self) -> float:
        return float(np.abs(self.coeffs).sum())

    def max_norm(self) -> float:
        n = self.l1()
        return float(np.max(n)) if n.size else 0.0

    def coeff(self, k: Sequence[int]) -> complex | np.ndarray:
        if any(abs(x) > self.N for x in k):
            return 0j
        idx = (Ellipsis,) + tuple(x + self.N for x in k) + ((0,) if self.has_t else ())
        return self.coeffs[idx]

    def constant_value(self) -> np.ndarray:
        """Real part of the zero mode (the value, for constant fields)."""
        idx = (Ellipsis,) + (self.N,) * self.dim + ((0,) if self.has_t else ())
        return np.real(self.coeffs[idx])

    def evaluate(self, x, t: float | None = None) -> np.ndarray:
        """Point values at x (shape (P, dim)); returns vshape + (P,)."""
        x = np.atleast_2d(np.asarray(x, float))
        f = self.at_t(t) if (self.has_t and t is not None) else self
        if f.has_t:
            raise InputError("pass t to evaluate a t-polynomial field")
        k = np.arange(-f.N, f.N + 1)
        phase = np.ones((x.shape[0],) + (k.size,) * f.dim, complex)
        for a in range(f.dim):
            shape = [x.shape[0]] + [1] * f.dim
            shape[1 + a] = k.size
            phase = phase * np.exp(1j * np.multiply.outer(x[:, a], k)).reshape(shape)
        gl = "".join(chr(ord("a") + i) for i in range(f.dim))
        return np.real(np.einsum(f"...{gl},p{gl}->...p", f.coeffs, phase))

    def __repr__(self) -> str:
        t = f", t^{self.tdeg}" if self.has_t else ""
        return f"Field(vshape={self.vshape}, d={self.dim}, N={self.N}{t})"


ScalarField = Field
TPolyField = Field


def align(*fields: Field) -> list[Field]:
    """Pad fields to a common truncation (and common t-degree if any has t)."""
    dims = {f.dim for f in fields}
    if len(dims) != 1:
        raise InputError(f"base dimension mismatch: {sorted(dims)}")
    N = max(f.N for f in fields)
    if any(f.has_t for f in fields):
        T = max(f.tdeg for f in fields)
        return [f.with_t().padded(N, T) for f in fields]
    return [f.padded(N) for f in fields]


def _with_ellipsis(subscripts: str) -> str:
    lhs, out = subscripts.replace(" ", "").split("->")
    return ",".join(p + "..." for p in lhs.split(",")) + "->" + out + "..."


def mul(a: Field, b: Field, subscripts: str | None = None) -> Field:
    """Pointwise product of field arrays.

    Without ``subscripts`` value axes broadcast like numpy; with them the value
    axes are combined by ``np.einsum`` (e.g. ``'ij,jk->ik'`` is a matrix
    product of matrix-valued fields).  Grid axes are convolved exactly and the
    result truncated to ``min(cap, N_a + N_b)``.
    """
    if a.dim != b.dim:
        raise InputError(f"base dimension mismatch: {a.dim} vs {b.dim}")
    if a.has_t != b.has_t:
        a, b = a.with_t(), b.with_t()
    dim, has_t = a.dim, a.has_t
    n_out = min(get_cap(), a.N + b.N)
    lost = a.lost + b.lost
    expr = _with_ellipsis(subscripts) if subscripts else None

    if a.is_constant or b.is_constant:
        # one factor is constant: a plain (exact) product
        c = np.einsum(expr, a.coeffs, b.coeffs) if expr else a.coeffs * b.coeffs
        f = Field(c, dim, has_t, lost, symmetrize=False)
        return f.truncated(n_out)

    ng = a.grid_ndim
    gaxes = tuple(range(-ng, 0))
    full = [a.coeffs.shape[ax] + b.coeffs.shape[ax] - 1 for ax in gaxes]
    size = [sfft.next_fast_len(n) for n in full]
    A = sfft.fftn(a.coeffs, s=size, axes=gaxes)
    B = sfft.fftn(b.coeffs, s=size, axes=gaxes)
    C = np.einsum(expr, A, B) if expr else A * B
    c = sfft.ifftn(C, axes=gaxes)
    c = c[(Ellipsis,) + tuple(slice(0, n) for n in full)]
    centre = a.N + b.N
    lo, hi = centre - n_out, centre + n_out + 1
    sl = (Ellipsis,) + (slice(lo, hi),) * dim + ((slice(None),) if has_t else ())
    kept = c[sl]
    if n_out < centre:
        lost += float(np.abs(c).sum() - np.abs(kept).sum())
    return Field(kept, dim, has_t, lost)


# -- the module-level operations named in the design ------------------------------------

def field_arith(a: Field, b: Field | float, op: str) -> Field:
    if op == "add":
        return a + b
    if op == "mul":
        return mul(a, b) if isinstance(b, Field) else a * b
    if op == "scale":
        return a * float(b)
    raise InputError(f"unknown op {op!r}")


def partial_derivative(f: Field, axis: int) -> Field:
    """Derivative along coordinate ``axis`` (1-based, as in x_1 ... x_d)."""
    if not 1 <= axis <= f.dim:
        raise InputError(f"axis {axis} out of range 1..{f.dim}")
    return f.derivative(axis - 1)


def tpoly_integrate_unit(p: Field) -> Field:
    return p.integrate_unit()


def field_norm(f: Field, kind: str = "l1_coeff") -> float:
    if kind not in ("l1_coeff", "sup_estimate"):
        raise InputError(f"unknown norm {kind!r}")
    return f.norm()
