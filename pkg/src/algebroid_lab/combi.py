"""Index bookkeeping for antisymmetric tensors stored on sorted index tuples."""
from __future__ import annotations

import itertools
from functools import lru_cache
from math import comb

import numpy as np


@lru_cache(maxsize=None)
def combos(r: int, k: int) -> tuple[np.ndarray, dict]:
    """Sorted k-subsets of range(r) as an array plus a tuple -> row lookup."""
    rows = list(itertools.combinations(range(r), k))
    arr = np.array(rows, dtype=np.intp).reshape(len(rows), k)
    arr.setflags(write=False)
    return arr, {t: i for i, t in enumerate(rows)}


def n_combos(r: int, k: int) -> int:
    return comb(r, k) if 0 <= k <= r else 0


def perm_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
            elif seq[i] == seq[j]:
                return 0
    return sign


@lru_cache(maxsize=None)
def signed_perms(k: int) -> tuple[np.ndarray, np.ndarray]:
    perms = np.array(list(itertools.permutations(range(k))), dtype=np.intp).reshape(-1, k)
    signs = np.array([perm_sign(p) for p in perms], dtype=float)
    return perms, signs


def sort_with_sign(idx) -> tuple[int, tuple]:
    """Sign of the sorting permutation (0 on a repeat) and the sorted tuple."""
    s = perm_sign(idx)
    return s, tuple(sorted(idx))


@lru_cache(maxsize=None)
def shuffle_table(r: int, p: int, q: int):
    """Rows (out, left, right, sign) for the wedge of a p-form with a q-form.

    out indexes combos(r, p+q); left/right index combos(r, p)/combos(r, q);
    sign is that of the (p, q)-shuffle splitting the output tuple.
    """
    out_rows, lut = combos(r, p + q)
    _, lp = combos(r, p)
    _, lq = combos(r, q)
    o, a, b, s = [], [], [], []
    for J_i, J in enumerate(map(tuple, out_rows)):
        for pos in itertools.combinations(range(p + q), p):
            rest = tuple(x for x in range(p + q) if x not in pos)
            o.append(J_i)
            a.append(lp[tuple(J[x] for x in pos)])
            b.append(lq[tuple(J[x] for x in rest)])
            s.append(perm_sign(pos + rest))
    return (np.array(o, np.intp), np.array(a, np.intp), np.array(b, np.intp),
            np.array(s, float))


@lru_cache(maxsize=None)
def action_table(r: int, k: int):
    """Rows (out, frame, inner, sign) for sum_m (-1)^m act(e_{J_m}, w(J without J_m))."""
    out_rows, _ = combos(r, k + 1)
    _, lk = combos(r, k)
    o, f, i, s = [], [], [], []
    for J_i, J in enumerate(map(tuple, out_rows)):
        for m in range(k + 1):
            o.append(J_i)
            f.append(J[m])
            i.append(lk[J[:m] + J[m + 1:]])
            s.append((-1) ** m)
    return (np.array(o, np.intp), np.array(f, np.intp), np.array(i, np.intp),
            np.array(s, float))


_bracket_cache: dict = {}


def bracket_table(r: int, k: int, nonzero: np.ndarray):
    """Rows for sum_{m<l} (-1)^{m+l} w([e_{J_m}, e_{J_l}], rest) on a k-form.

    ``nonzero[s, i, j]`` marks structure functions c^s_{ij} that can be
    nonzero; only those rows are emitted.  Each row is
    (out, s, i, j, inner, sign) meaning  out += sign * c^s_{ij} * w[inner].
    """
    key = (r, k, nonzero.tobytes())
    hit = _bracket_cache.get(key)
    if hit is not None:
        return hit
    out_rows, _ = combos(r, k + 1)
    _, lk = combos(r, k)
    nz_by_pair = {}
    for s_, i_, j_ in zip(*np.nonzero(nonzero)):
        nz_by_pair.setdefault((int(i_), int(j_)), []).append(int(s_))
    o, S, I, Jj, inner, sg = [], [], [], [], [], []
    if k >= 1:
        for J_i, J in enumerate(map(tuple, out_rows)):
            for m in range(k + 1):
                for l in range(m + 1, k + 1):
                    ss = nz_by_pair.get((J[m], J[l]))
                    if not ss:
                        continue
                    rest = J[:m] + J[m + 1:l] + J[l + 1:]
                    base = (-1) ** (m + l)
                    for s_ in ss:
                        if s_ in rest:
                            continue
                        pos = sum(1 for x in rest if x < s_)
                        srt = rest[:pos] + (s_,) + rest[pos:]
                        o.append(J_i); S.append(s_); I.append(J[m]); Jj.append(J[l])
                        inner.append(lk[srt]); sg.append(base * (-1) ** pos)
    table = tuple(np.array(x, np.intp) for x in (o, S, I, Jj, inner)) + (np.array(sg, float),)
    _bracket_cache[key] = table
    return table
