"""Vectorized filters and minimum-distance screening for batches of encoders.

All encoders in a batch share one memory split, hence one state-transition
structure; only their output tables differ.  The minimum event distance of
every (encoder, labeling) pair is found with a batched min-plus Bellman-Ford
on the pair-state graph.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .encoder import _state_tables


@dataclass(frozen=True)
class SplitStructure:
    memories: tuple[int, ...]
    k: int
    nu: int
    jtab: np.ndarray  # (S, A) packed j vector of each branch
    ntab: np.ndarray  # (S, A) next state
    # incoming edges of every pair (t, t') as flattened index p = t*S + t'
    in_src: np.ndarray  # (S*S, A*A) source pair index
    in_a: np.ndarray  # (S*S, A*A) branch index s*A + a of the first path
    in_b: np.ndarray  # (S*S, A*A) branch index of the second path
    diag: np.ndarray  # (S,) indices of merged pairs
    same_branch: np.ndarray  # (S, A*A) incoming edge into merged pair that is not an event

    @property
    def num_states(self) -> int:
        return 1 << self.nu


@lru_cache(maxsize=32)
def split_structure(memories: tuple[int, ...]) -> SplitStructure:
    k = len(memories)
    nu = sum(memories)
    jtab, ntab = _state_tables(memories)
    S, A = 1 << nu, 1 << k
    preds: list[list[tuple[int, int]]] = [[] for _ in range(S)]
    for s in range(S):
        for a in range(A):
            preds[int(ntab[s, a])].append((s, a))
    if any(len(p) != A for p in preds):
        raise AssertionError("shift-register trellis must have 2^k predecessors per state")
    P = S * S
    in_src = np.empty((P, A * A), dtype=np.int64)
    in_a = np.empty((P, A * A), dtype=np.int64)
    in_b = np.empty((P, A * A), dtype=np.int64)
    for t in range(S):
        for u in range(S):
            p = t * S + u
            j = 0
            for s, a in preds[t]:
                for r, b in preds[u]:
                    in_src[p, j] = s * S + r
                    in_a[p, j] = s * A + a
                    in_b[p, j] = r * A + b
                    j += 1
    diag = np.arange(S) * (S + 1)
    same_branch = in_a[diag] == in_b[diag]
    return SplitStructure(memories, k, nu, jtab, ntab, in_src, in_a, in_b, diag, same_branch)


def taps_from_entries(entries: np.ndarray, memories: tuple[int, ...], m: int) -> np.ndarray:
    """Octal entry arrays (E, k, m) -> tap row values (E, nu+k), first row = MSB of j."""
    rows = []
    for p, nu_p in enumerate(memories):
        for t in range(nu_p + 1):
            shift = nu_p - t
            v = np.zeros(entries.shape[0], dtype=np.int64)
            for l in range(m):
                v = (v << 1) | ((entries[:, p, l] >> shift) & 1)
            rows.append(v)
    return np.stack(rows, axis=1)


def outputs_of_j(taps: np.ndarray) -> np.ndarray:
    """(E, n) tap rows -> (E, 2^n) output word for each packed j."""
    E, n = taps.shape
    out = np.zeros((E, 1), dtype=np.int64)
    for r in range(n - 1, -1, -1):
        out = np.concatenate([out, out ^ taps[:, r:r + 1]], axis=1)
    return out


def full_rank_mask(out_j: np.ndarray, m: int) -> np.ndarray:
    """Rank m <=> the linear map j -> u reaches all 2^m words."""
    E = out_j.shape[0]
    hit = np.zeros((E, 1 << m), dtype=bool)
    hit[np.arange(E)[:, None], out_j] = True
    return hit.all(axis=1)


def noncatastrophic_mask(out: np.ndarray, st: SplitStructure) -> np.ndarray:
    """Zero-output subgraph (minus the zero self-loop) must be nilpotent, i.e. acyclic."""
    E = out.shape[0]
    if E == 0:
        return np.zeros(0, dtype=bool)
    S, A = st.ntab.shape
    adj = np.zeros((E, S, S), dtype=np.float64)
    zero = out == 0
    zero[:, 0, 0] = False
    for a in range(A):
        src = np.arange(S)
        dst = st.ntab[:, a]
        adj[:, src, dst] += zero[:, :, a]
    adj = (adj > 0).astype(np.float64)
    power = adj
    steps = 1
    while steps < S:
        power = (power @ power > 0).astype(np.float64)
        steps *= 2
    return ~power.reshape(E, -1).any(axis=1)


def branch_outputs(out_j: np.ndarray, st: SplitStructure) -> np.ndarray:
    """(E, 2^(nu+k)) -> (E, S, A)."""
    return out_j[:, st.jtab]


def min_distances(out: np.ndarray, st: SplitStructure, label_sed: np.ndarray) -> np.ndarray:
    """Minimum event SED for every (labeling, encoder): result shape (L, E).

    ``out`` is (E, S, A) branch outputs; ``label_sed`` is (L, M, M) with the
    SED between the points carrying labels u and u'.
    """
    E = out.shape[0]
    L, M, _ = label_sed.shape
    S = st.num_states
    flat_out = out.reshape(E, -1)
    u = flat_out[:, st.in_a]  # (E, P, J)
    v = flat_out[:, st.in_b]
    pair_code = u * M + v
    sed_flat = label_sed.reshape(L, M * M)
    W = sed_flat[:, pair_code]  # (L, E, P, J)
    diag_mask = np.zeros(S * S, dtype=bool)
    diag_mask[st.diag] = True
    div = ~diag_mask
    W_div = W[:, :, div, :]
    src_div = st.in_src[div]
    W_merge = W[:, :, st.diag, :].copy()
    W_merge[:, :, st.same_branch] = np.inf
    src_merge = st.in_src[st.diag]

    dist = np.full((L, E, S * S), np.inf)
    dist[:, :, st.diag] = 0.0
    for _ in range(S * S + 1):
        cand = (dist[:, :, src_div] + W_div).min(axis=3)
        if np.array_equal(cand, dist[:, :, div]):
            break
        dist[:, :, div] = cand
    return (dist[:, :, src_merge] + W_merge).min(axis=(2, 3))
