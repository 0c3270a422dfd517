"""Feedforward rate k/m convolutional encoders, their trellis, and the encoder universe.

Conventions
-----------
* Input word ``a`` packs ``i_1..i_k`` with ``i_1`` as the most significant bit;
  output word ``u`` packs ``u_1..u_m`` the same way, so ``u`` is directly the
  integer label fed to the mapper.
* The state packs the shift registers of inputs 1..k in that order, register
  ``p`` taking ``nu_p`` bits with its newest bit first (most significant).
* ``taps`` is the (nu+k) x m binary matrix ``G``; block ``p`` holds the rows
  ``g_{p,1} .. g_{p,nu_p+1}`` where ``g_{p,1}`` multiplies the current input.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from .gf2 import BitMatrix, GF2Error, multiply, rank


class EncoderError(ValueError):
    pass


@dataclass(frozen=True)
class TrellisSection:
    """Branch table: ``next_state[s, a]`` and ``output[s, a]``."""

    k: int
    m: int
    nu: int
    next_state: np.ndarray
    output: np.ndarray

    @property
    def num_states(self) -> int:
        return 1 << self.nu

    @property
    def num_inputs(self) -> int:
        return 1 << self.k

    def predecessors(self) -> np.ndarray:
        """``pred[s', j] = (s, a)`` packed as ``s * 2^k + a``, ascending in ``s``."""
        S, A = self.num_states, self.num_inputs
        pred = np.empty((S, A), dtype=np.int64)
        fill = np.zeros(S, dtype=np.int64)
        for s in range(S):
            for a in range(A):
                t = self.next_state[s, a]
                pred[t, fill[t]] = s * A + a
                fill[t] += 1
        return pred


@dataclass(frozen=True)
class EncoderSpec:
    k: int
    m: int
    memories: tuple[int, ...]
    taps: BitMatrix

    def __post_init__(self):
        if len(self.memories) != self.k:
            raise EncoderError(f"{self.k} inputs need {self.k} memories, got {self.memories}")
        if any(v < 0 for v in self.memories):
            raise EncoderError("memories must be non-negative")
        if self.taps.rows != self.nu + self.k or self.taps.cols != self.m:
            raise EncoderError(
                f"taps must be {(self.nu + self.k)}x{self.m} for memories {self.memories}, "
                f"got {self.taps.rows}x{self.taps.cols}"
            )

    @property
    def nu(self) -> int:
        return sum(self.memories)

    @property
    def num_states(self) -> int:
        return 1 << self.nu

    # -- octal notation ---------------------------------------------------
    @classmethod
    def from_octal(cls, entries: Sequence[Sequence[int]], memories: Sequence[int] | None = None) -> "EncoderSpec":
        """Build from ``entries[p][l] = g_p^(l)`` as integers (MSB = newest tap)."""
        k = len(entries)
        m = len(entries[0])
        if any(len(row) != m for row in entries):
            raise EncoderError("ragged encoder matrix")
        if memories is None:
            memories = [max(1, max(row).bit_length()) - 1 for row in entries]
        memories = tuple(int(v) for v in memories)
        if len(memories) != k:
            raise EncoderError("one memory per input row required")
        data = []
        for p, row in enumerate(entries):
            width = memories[p] + 1
            if any(not 0 <= g < (1 << width) for g in row):
                raise EncoderError(f"row {p + 1} entries do not fit memory {memories[p]}")
            for t in range(width):
                shift = width - 1 - t
                v = 0
                for g in row:
                    v = (v << 1) | ((g >> shift) & 1)
                data.append(v)
        return cls(k, m, memories, BitMatrix(len(data), m, tuple(data)))

    @classmethod
    def parse(cls, text: str, memories: Sequence[int] | None = None) -> "EncoderSpec":
        """Parse ``"[13,4]"`` or ``"[1,1,1;2,31,0]"`` (octal; rows are inputs)."""
        body = text.strip()
        if not re.fullmatch(r"\[?\s*[0-7]+(\s*[, ]\s*[0-7]+)*(\s*;\s*[0-7]+(\s*[, ]\s*[0-7]+)*)*\s*\]?", body):
            raise EncoderError(f"cannot parse encoder {text!r}")
        body = body.strip("[] ")
        rows = [[int(tok, 8) for tok in re.split(r"[,\s]+", part.strip()) if tok] for part in body.split(";")]
        return cls.from_octal(rows, memories)

    def octal_entries(self) -> tuple[tuple[int, ...], ...]:
        out = []
        row = 0
        for nu_p in self.memories:
            block = self.taps.data[row:row + nu_p + 1]
            row += nu_p + 1
            entries = []
            for l in range(self.m):
                shift = self.m - 1 - l
                v = 0
                for r in block:
                    v = (v << 1) | ((r >> shift) & 1)
                entries.append(v)
            out.append(tuple(entries))
        return tuple(out)

    def octal(self) -> str:
        return "[" + ";".join(",".join(format(g, "o") for g in row) for row in self.octal_entries()) + "]"

    def __str__(self) -> str:
        return self.octal()

    def transformed(self, t: BitMatrix) -> "EncoderSpec":
        """Encoder with taps ``G @ T`` (same memories)."""
        return EncoderSpec(self.k, self.m, self.memories, multiply(self.taps, t))

    # -- state machine ----------------------------------------------------
    @cached_property
    def _j_tables(self) -> tuple[np.ndarray, np.ndarray]:
        return _state_tables(self.memories)

    @cached_property
    def output_of_j(self) -> np.ndarray:
        """``u = j G`` for every (nu+k)-bit vector ``j`` (first row of G = MSB of j)."""
        return _linear_outputs(self.taps.data)

    def trellis(self) -> TrellisSection:
        jtab, ntab = self._j_tables
        out = self.output_of_j[jtab]
        ns = ntab.copy()
        out.setflags(write=False)
        ns.setflags(write=False)
        return TrellisSection(self.k, self.m, self.nu, ns, out)


def _state_tables(memories: tuple[int, ...]) -> tuple[np.ndarray, np.ndarray]:
    """``j[s, a]`` (as packed int) and ``next_state[s, a]`` for a memory split."""
    k = len(memories)
    nu = sum(memories)
    S, A = 1 << nu, 1 << k
    jtab = np.zeros((S, A), dtype=np.int64)
    ntab = np.zeros((S, A), dtype=np.int64)
    for s in range(S):
        # split state into registers
        regs = []
        rest = nu
        for nu_p in memories:
            rest -= nu_p
            regs.append((s >> rest) & ((1 << nu_p) - 1))
        for a in range(A):
            j = 0
            nxt = 0
            for p, nu_p in enumerate(memories):
                bit = (a >> (k - 1 - p)) & 1
                j = (j << (nu_p + 1)) | (bit << nu_p) | regs[p]
                if nu_p:
                    nxt = (nxt << nu_p) | (bit << (nu_p - 1)) | (regs[p] >> 1)
            jtab[s, a] = j
            ntab[s, a] = nxt
    return jtab, ntab


def _linear_outputs(rows: Sequence[int]) -> np.ndarray:
    # doubling: the last row pairs with the least significant bit of j
    out = np.zeros(1, dtype=np.int64)
    for r in reversed(rows):
        out = np.concatenate([out, out ^ r])
    return out


def _as_word(w, width: int) -> int:
    if isinstance(w, (tuple, list, np.ndarray)):
        if len(w) != width:
            raise EncoderError(f"word {w!r} does not have {width} bits")
        v = 0
        for b in w:
            v = (v << 1) | (int(b) & 1)
        return v
    v = int(w)
    if not 0 <= v < (1 << width):
        raise EncoderError(f"word {w!r} does not fit in {width} bits")
    return v


def word_bits(w: int, width: int) -> tuple[int, ...]:
    return tuple((w >> (width - 1 - i)) & 1 for i in range(width))


def encode(spec: EncoderSpec, words: Iterable) -> list[int]:
    """Encode a stream of k-bit input words from the all-zero state."""
    tr = spec.trellis()
    s = 0
    out = []
    for w in words:
        a = _as_word(w, spec.k)
        out.append(int(tr.output[s, a]))
        s = int(tr.next_state[s, a])
    return out


def encode_array(tr: TrellisSection, inputs: np.ndarray, state: int = 0) -> tuple[np.ndarray, int]:
    """Vector form for simulation: ``inputs`` shape (..., n) of input words."""
    out = np.empty_like(inputs)
    s = np.full(inputs.shape[:-1], state, dtype=np.int64)
    for n in range(inputs.shape[-1]):
        a = inputs[..., n]
        out[..., n] = tr.output[s, a]
        s = tr.next_state[s, a]
    return out, s


def _has_zero_output_cycle(tr: TrellisSection) -> bool:
    S, A = tr.num_states, tr.num_inputs
    succ: list[list[int]] = [[] for _ in range(S)]
    indeg = [0] * S
    for s in range(S):
        for a in range(A):
            if tr.output[s, a] == 0 and not (s == 0 and a == 0):
                t = int(tr.next_state[s, a])
                succ[s].append(t)
                indeg[t] += 1
    # Kahn: anything left after peeling sources sits on (or behind) a cycle
    stack = [s for s in range(S) if indeg[s] == 0]
    seen = 0
    while stack:
        s = stack.pop()
        seen += 1
        for t in succ[s]:
            indeg[t] -= 1
            if indeg[t] == 0:
                stack.append(t)
    return seen != S


def is_noncatastrophic(spec: EncoderSpec) -> bool:
    """No zero-output cycle other than the zero-state/zero-input self-loop."""
    return not _has_zero_output_cycle(spec.trellis())


def has_equally_likely_symbols(spec: EncoderSpec) -> bool:
    return rank(spec.taps) == spec.m


def memory_splits(k: int, nu: int) -> list[tuple[int, ...]]:
    """All (nu_1..nu_k) summing to nu, lexicographic."""
    return [c for c in itertools.product(range(nu + 1), repeat=k) if sum(c) == nu]


def _block_is_canonical(entries: Sequence[int], nu_p: int) -> bool:
    newest = any(g >> nu_p for g in entries)
    oldest = any(g & 1 for g in entries)
    return newest and oldest


def iter_tap_matrices(k: int, m: int, memories: tuple[int, ...]) -> Iterator[tuple[tuple[int, ...], ...]]:
    """Canonical octal entry matrices of a split in lexicographic order (no filters beyond canonical form)."""
    blocks = []
    for nu_p in memories:
        width = nu_p + 1
        rows = [row for row in itertools.product(range(1 << width), repeat=m) if _block_is_canonical(row, nu_p)]
        blocks.append(rows)
    yield from itertools.product(*blocks)


def enumerate_encoders(
    k: int, m: int, nu: int, memory_split: Sequence[int] | None = None
) -> Iterator[EncoderSpec]:
    """Stream the encoder universe: noncatastrophic, full-rank, canonical-memory tap matrices.

    Without ``memory_split`` every split is streamed, splits in lexicographic
    order and encoders within a split in lexicographic order of their octal
    entries (row-major).
    """
    if memory_split is not None:
        split = tuple(int(v) for v in memory_split)
        if len(split) != k or sum(split) != nu or any(v < 0 for v in split):
            raise EncoderError(f"memory split {split} inconsistent with k={k}, nu={nu}")
        splits = [split]
    else:
        splits = memory_splits(k, nu)
    for split in splits:
        for entries in iter_tap_matrices(k, m, split):
            spec = EncoderSpec.from_octal(entries, split)
            if has_equally_likely_symbols(spec) and is_noncatastrophic(spec):
                yield spec
