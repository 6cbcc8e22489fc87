"""Least-squares exactness residual of the universal Pfaffian class.

Prints the relative residual for several truncations, the kernel part of the
minimizing 1-form and the outcome of the constraint solver, which is the data
used to set (and assess) the residual floor.
"""
import numpy as np

from algebroid_lab.algebroid import example_model, riemannian_reduction
from algebroid_lab.classes import delta_universal, exactness_residual, pfaffian_cochain, proof_structure
from algebroid_lab.lie import FibreMetric, VolumeElement


def main():
    A = example_model()
    h = FibreMetric.identity(2)
    B = riemannian_reduction(A, h)
    target = delta_universal(pfaffian_cochain(B, h, VolumeElement(2, 1.0)))
    print(f"target norm {target.norm():.6g}")
    for N in (0, 1, 2, 3, 4):
        res = exactness_residual(target, N)
        kern = res.zeta.values.take(list(A.kernel_index)).constant_value()
        print(f"N={N}: residual/target = {res.relative:.3e}  "
              f"rank deficient={res.rank_deficient}  "
              f"constant kernel part of zeta = {np.round(kern, 12)}")
    for c in proof_structure(A, 3, target).checks:
        print(f"{c.name:40s} value {c.defect:.3g}  expected {c.relation} {c.tolerance:g}  "
              f"{'ok' if c.passed else 'differs'}")


if __name__ == "__main__":
    main()
