"""Fit the scalar relating the degree-5 trace class to u_5 on seeded End(R^3) metrics."""
from math import factorial

import numpy as np

from algebroid_lab.classes import relation_constant, relation_fit
from algebroid_lab.fixtures import twisted_pair


def main(count: int = 5):
    for i in range(count):
        A, _, h = twisted_pair(3, np.random.default_rng([7, i]))
        s, misfit = relation_fit(A, h, 2)
        print(f"fixture {i}: scalar {s:.15g}  misfit {misfit:.2e}")
    c = relation_constant(2)
    print(f"stated constant {c:.15g}; divided by 5! {c / factorial(5):.15g}")


if __name__ == "__main__":
    main()
