"""Exterior-power (compound matrix) linear algebra.

A k-frame V (m x k, columns v_1..v_k) is represented on the exterior
power Lambda^k(C^m) by its Pluecker coordinates: the k x k minors of V
indexed by increasing row subsets in lexicographic order.  A matrix M on
C^m induces a matrix on Lambda^k(C^m) acting as a derivation,

    M^(k) (v_1 ^ .. ^ v_k) = sum_j v_1 ^ .. ^ M v_j ^ .. ^ v_k,

so that expm(t M^(k)) wedge(V) = wedge(expm(t M) V).  Dimensions stay
small here (at most C(7,4) = 35), so everything is dense.
"""

from functools import lru_cache
from itertools import combinations

import numpy as np

__all__ = [
    "subsets",
    "wedge_of_columns",
    "induced_matrix",
    "complement_pairing",
    "frame_from_wedge",
    "decomposability_residual",
]


@lru_cache(maxsize=None)
def subsets(m, k):
    """Increasing k-subsets of range(m) in lexicographic order."""
    if not 0 <= k <= m:
        raise ValueError(f"need 0 <= k <= m, got k={k}, m={m}")
    return tuple(combinations(range(m), k))


@lru_cache(maxsize=None)
def _subset_positions(m, k):
    return {S: i for i, S in enumerate(subsets(m, k))}


def wedge_of_columns(V):
    """Pluecker coordinates of the column span of an m x k matrix."""
    V = np.asarray(V)
    m, k = V.shape
    out = np.empty(len(subsets(m, k)), dtype=complex)
    for i, S in enumerate(subsets(m, k)):
        out[i] = np.linalg.det(V[list(S), :])
    return out


@lru_cache(maxsize=None)
def _derivation_stencil(m, k):
    """Index/sign stencil for building induced matrices quickly.

    Off-diagonal entries of M^(k) connect subsets differing in exactly
    one element: for target S = sorted(T - {t} + {s}) the entry is
    (-1)^(pos_T(t) + pos_S(s)) M[s, t].
    """
    subs = subsets(m, k)
    pos = _subset_positions(m, k)
    rows, cols, srcs, dsts, signs = [], [], [], [], []
    for j, T in enumerate(subs):
        for jt, t in enumerate(T):
            rest = T[:jt] + T[jt + 1 :]
            for s in range(m):
                if s == t or s in rest:
                    continue
                S = tuple(sorted(rest + (s,)))
                js = S.index(s)
                rows.append(pos[S])
                cols.append(j)
                srcs.append(s)
                dsts.append(t)
                signs.append(-1.0 if (jt + js) % 2 else 1.0)
    return (
        np.array(rows, dtype=int),
        np.array(cols, dtype=int),
        np.array(srcs, dtype=int),
        np.array(dsts, dtype=int),
        np.array(signs, dtype=float),
    )


def induced_matrix(M, k):
    """Derivation induced by M on Lambda^k, as a dense matrix."""
    M = np.asarray(M)
    m = M.shape[0]
    if M.shape != (m, m):
        raise ValueError("M must be square")
    subs = subsets(m, k)
    N = len(subs)
    out = np.zeros((N, N), dtype=complex)
    diag = np.array([M[list(S), list(S)].sum() for S in subs])
    out[np.arange(N), np.arange(N)] = diag
    rows, cols, srcs, dsts, signs = _derivation_stencil(m, k)
    if rows.size:
        np.add.at(out, (rows, cols), signs * M[srcs, dsts])
    return out


@lru_cache(maxsize=None)
def _complement_signs(m, k):
    """Sign of the shuffle permutation (S, complement(S)) for each S.

    e_S ^ e_{S^c} = sign * e_{(0..m-1)}.
    """
    subs = subsets(m, k)
    comp_pos = _subset_positions(m, m - k)
    signs = np.empty(len(subs))
    comp_idx = np.empty(len(subs), dtype=int)
    for i, S in enumerate(subs):
        Sc = tuple(q for q in range(m) if q not in S)
        seq = S + Sc
        inv = 0
        for a in range(m):
            for b in range(a + 1, m):
                if seq[a] > seq[b]:
                    inv += 1
        signs[i] = -1.0 if inv % 2 else 1.0
        comp_idx[i] = comp_pos[Sc]
    return signs, comp_idx


def complement_pairing(w1, w2, m, k):
    """Coefficient of e_0^..^e_{m-1} in w1 ^ w2.

    w1 lives in Lambda^k(C^m), w2 in Lambda^(m-k)(C^m).  For decomposable
    arguments this equals det([V1 V2]) of the concatenated frames.
    """
    w1 = np.asarray(w1)
    w2 = np.asarray(w2)
    signs, comp_idx = _complement_signs(m, k)
    if w1.shape != signs.shape or w2.shape[0] != len(subsets(m, m - k)):
        raise ValueError("pairing arguments have wrong exterior degrees")
    return np.sum(signs * w1 * w2[comp_idx])


def frame_from_wedge(w, m, k):
    """Reconstruct an m x k frame from Pluecker coordinates.

    Uses the largest coordinate |w_S| as pivot block; the returned frame
    has identity rows on S.  Exact inverse of wedge_of_columns (up to the
    overall scale w_S) when w is decomposable.
    """
    w = np.asarray(w)
    subs = subsets(m, k)
    pos = _subset_positions(m, k)
    i0 = int(np.argmax(np.abs(w)))
    if w[i0] == 0:
        raise ValueError("zero wedge has no frame")
    S0 = subs[i0]
    V = np.zeros((m, k), dtype=complex)
    for i, s in enumerate(S0):
        V[s, i] = 1.0
    rest = [j for j in range(m) if j not in S0]
    for j in rest:
        for i, s in enumerate(S0):
            T = tuple(sorted(set(S0) - {s} | {j}))
            p = T.index(j)
            sign = -1.0 if (p + i) % 2 else 1.0
            V[j, i] = sign * w[pos[T]] / w[i0]
    return V, i0


def decomposability_residual(w, m, k):
    """Relative distance from w to the pure-wedge variety.

    Zero (to roundoff) iff w is a wedge of k vectors.  Reconstructs a
    candidate frame from the dominant coordinate and re-wedges it.
    """
    w = np.asarray(w)
    nrm = np.linalg.norm(w)
    if nrm == 0:
        return 0.0
    V, i0 = frame_from_wedge(w, m, k)
    rebuilt = wedge_of_columns(V)
    return float(np.linalg.norm(rebuilt - w / w[i0]) / np.linalg.norm(rebuilt))
