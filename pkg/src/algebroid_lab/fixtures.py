"""Seeded test fixtures shared by scenarios, tests and scripts."""
from __future__ import annotations

import numpy as np

from .algebroid import (TrivLieAlgebroid, build_transitive, end_model, riemannian_reduction,
                        tangent)
from .connections import LConnection, from_kernel_form, gauge_flat, gauge_twisted_identity
from .fields import Field, mul
from .lie import FibreMetric, LieStructure


def random_metric(rng: np.random.Generator, n: int) -> FibreMetric:
    X = rng.normal(size=(n, n))
    return FibreMetric(X @ X.T / n + np.eye(n))


def nilpotent(n: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """A square-zero matrix: strictly upper block mapping the last coordinate to the first."""
    N = np.zeros((n, n))
    N[0, n - 1] = 1.0
    if rng is not None and n > 2:
        N[0, 1:n - 1] = 0.0
        N[0, n - 1] = rng.uniform(0.5, 1.5)
    return N


def phase(rng: np.random.Generator | None, d: int = 1) -> Field:
    """A low-frequency periodic phase function."""
    if rng is None:
        return Field.sin(d, 0) + Field.cos(d, 0, 2, 0.5)
    modes = {}
    for a in range(d):
        k = [0] * d
        k[a] = 1
        modes[tuple(k)] = complex(*rng.normal(size=2)) * 0.5
    return Field.from_modes(d, modes)


def twisted_pair(n: int, rng: np.random.Generator | None = None, d: int = 1):
    """(A, nabla, h): a flat, non-Riemannian, non-constant connection A -> A."""
    A = end_model(d, n)
    nab = gauge_twisted_identity(A, nilpotent(n, rng), phase(rng, d))
    h = random_metric(rng, n) if rng is not None else FibreMetric(np.eye(n) + 0.25 * np.diag(
        np.arange(n)))
    return A, nab, h


def second_flat(A: TrivLieAlgebroid, rng: np.random.Generator | None = None) -> LConnection:
    """Another flat connection A -> A, twisted by the transposed square-zero generator."""
    n = A.kernel_shape[0]
    return gauge_twisted_identity(A, nilpotent(n, rng).T, phase(rng, A.dim))


def reduction_algebroid(A: TrivLieAlgebroid, h: FibreMetric) -> tuple[TrivLieAlgebroid, LConnection]:
    """B = TM + h-skew as an algebroid in its own right, with its inclusion into A."""
    B = riemannian_reduction(A, h)
    n = A.kernel_shape[0]
    basis = np.array([c.reshape(n, n) for c in B.h_basis.T])
    LB = build_transitive(A.dim, LieStructure.from_basis(basis), name="B")
    M = B.frame_matrix()
    incl = LConnection(LB, A, Field.constant(M, A.dim), "inclusion of B")
    return LB, incl


def skew_gauge(n: int, d: int = 1) -> LConnection:
    """Flat Riemannian (h = I) connection on T(T^d): omega = d phi K with K skew."""
    K = np.zeros((n, n))
    K[0, 1], K[1, 0] = 1.0, -1.0
    return gauge_flat(K, phase(None, d))


def non_flat(d: int = 2) -> LConnection:
    """Non-flat connection T(T^2) -> End(R^2) model: omega_1 = sin x2 K1, omega_2 = cos x1 K2."""
    K1 = np.array([[1.0, 0.0], [0.0, -1.0]])
    K2 = np.array([[0.0, 1.0], [0.0, 0.0]])
    A = end_model(d, 2)
    cols = [mul(Field.constant(K1.ravel(), d), Field.sin(d, 1), "g,->g"),
            mul(Field.constant(K2.ravel(), d), Field.cos(d, 0), "g,->g")]
    return from_kernel_form(tangent(d), A, Field.stack(cols, axis=1), "non_flat")


def corrupted(A: TrivLieAlgebroid, amount: float = 0.1) -> TrivLieAlgebroid:
    """Add ``amount`` to one structure constant (and its antisymmetric partner)."""
    c = A.structure.constant_value().copy()
    k = i = A.kernel_index[0] if A.kernel_index else 0
    j = i + 1
    c[k, i, j] += amount
    c[k, j, i] -= amount
    return TrivLieAlgebroid(A.anchor, Field.constant(c, A.dim), A.kernel_index, None,
                            A.kernel_shape, A.name + " (corrupted)")
