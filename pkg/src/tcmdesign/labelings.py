"""Binary labelings: NBC/BRGC, class representatives and the MFLSA enumeration."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Literal, Sequence

from .gf2 import BitMatrix, GF2Error, is_reduced_column_echelon, multiply, rce_factorize

Mode = Literal["full", "pam", "psk"]
MAX_ORDER = 6
MAX_MATERIALIZED_ORDER = 3


class LabelingError(ValueError):
    pass


@dataclass(frozen=True)
class Labeling:
    """An M x m binary matrix whose row q is the label of constellation point q."""

    matrix: BitMatrix

    def __post_init__(self):
        m = self.matrix.cols
        if self.matrix.rows != 1 << m:
            raise LabelingError(f"labeling of order {m} needs {1 << m} rows, got {self.matrix.rows}")
        if len(set(self.matrix.data)) != self.matrix.rows:
            raise LabelingError("labels are not distinct")

    @classmethod
    def from_integers(cls, values: Sequence[int], m: int | None = None) -> "Labeling":
        values = [int(v) for v in values]
        if m is None:
            m = max(1, (len(values) - 1).bit_length())
        try:
            return cls(BitMatrix.from_rows(values, m))
        except GF2Error as exc:
            raise LabelingError(str(exc)) from exc

    @classmethod
    def parse(cls, text: str) -> "Labeling":
        """Parse integer notation: ``"0 1 2 4 7 6 5 3"`` (brackets and commas tolerated)."""
        cleaned = text.replace("[", " ").replace("]", " ").replace(",", " ")
        try:
            values = [int(t) for t in cleaned.split()]
        except ValueError as exc:
            raise LabelingError(f"cannot parse labeling {text!r}") from exc
        if len(values) < 2 or len(values) & (len(values) - 1):
            raise LabelingError(f"labeling length {len(values)} is not a power of two >= 2")
        return cls.from_integers(values)

    @property
    def m(self) -> int:
        return self.matrix.cols

    @property
    def size(self) -> int:
        return self.matrix.rows

    @property
    def integer_view(self) -> tuple[int, ...]:
        return self.matrix.data

    def symbol_of_label(self) -> tuple[int, ...]:
        """Inverse map: entry ``u`` is the (0-based) index of the point labeled ``u``."""
        inv = [0] * self.size
        for q, u in enumerate(self.matrix.data):
            inv[u] = q
        return tuple(inv)

    def transformed(self, t: BitMatrix) -> "Labeling":
        return Labeling(multiply(self.matrix, t))

    def reversed(self) -> "Labeling":
        return Labeling(BitMatrix(self.size, self.m, tuple(reversed(self.matrix.data))))

    def rotated(self, shift: int = 1) -> "Labeling":
        """Circularly move each label ``shift`` positions forward."""
        d = self.matrix.data
        shift %= self.size
        return Labeling(BitMatrix(self.size, self.m, d[-shift:] + d[:-shift] if shift else d))

    def __str__(self) -> str:
        return " ".join(str(v) for v in self.integer_view)


def _check_order(m: int) -> None:
    if not 1 <= m <= MAX_ORDER:
        raise LabelingError(f"order m must be in 1..{MAX_ORDER}, got {m}")


def gray_transform(m: int) -> BitMatrix:
    """Bidiagonal transform taking the NBC to the BRGC."""
    return BitMatrix(m, m, tuple((0b11 << (m - 2 - i)) & ((1 << m) - 1) if i < m - 1 else 1 for i in range(m)))


def nbc(m: int) -> Labeling:
    _check_order(m)
    return Labeling(BitMatrix(1 << m, m, tuple(range(1 << m))))


def brgc(m: int) -> Labeling:
    _check_order(m)
    return nbc(m).transformed(gray_transform(m))


def labeling_class_count(m: int) -> int:
    """Number of modified Hadamard classes, (2^m)! / |invertible m x m matrices|."""
    from math import factorial

    from .gf2 import invertible_count

    return factorial(1 << m) // invertible_count(m)


def _is_power_of_two(x: int) -> bool:
    return x > 0 and x & (x - 1) == 0


def _mflsa_rows(m: int, mode: Mode) -> Iterator[tuple[int, ...]]:
    M = 1 << m
    r = list(range(M))  # r[0] holds r_1 of the algorithm
    start_index = 3 if mode == "psk" else 0

    def end(index: int) -> int:
        if mode == "pam" and index == 0:
            return M // 2
        return M

    while True:
        yield tuple(r)
        index = start_index
        while r[end(index) - 1] == index:
            e = end(index)
            # [r_{index+1} .. r_e] <- [r_e, r_{index+1} .. r_{e-1}]
            r[index:e] = [r[e - 1]] + r[index:e - 1]
            index += 1
            while _is_power_of_two(index):
                index += 1
            # '>=' rather than '==' so that m = 1 (where index jumps past M-1) terminates too
            if index >= M - 1:
                return
        pointer = r.index(index)
        r[pointer], r[pointer + 1] = r[pointer + 1], r[pointer]


class LabelingClassIter:
    """Stream of one reduced column echelon labeling per (symmetry-reduced) class.

    ``limit`` caps the number of labelings yielded; it is mandatory for m = 4,
    whose full stream has about 10^9 entries.
    """

    def __init__(self, m: int, mode: Mode = "full", limit: int | None = None):
        if mode not in ("full", "pam", "psk"):
            raise LabelingError(f"unknown mode {mode!r}")
        if not 1 <= m <= 4:
            raise LabelingError(f"MFLSA supports 1 <= m <= 4, got {m}")
        if mode == "psk" and m == 1:
            raise LabelingError("psk mode needs m >= 2")
        if m > MAX_MATERIALIZED_ORDER and limit is None:
            raise LabelingError(f"m = {m} is stream-only: pass an explicit limit")
        self.m = m
        self.mode = mode
        self.limit = limit

    def expected_count(self) -> int:
        total = labeling_class_count(self.m)
        if self.mode == "pam":
            return total // 2
        if self.mode == "psk":
            return total // (1 << self.m)
        return total

    def __iter__(self) -> Iterator[Labeling]:
        if self.mode == "psk" and self.m == 2:
            # a single class survives the rotation reduction for M = 4
            source: Iterator[tuple[int, ...]] = iter([tuple(range(4))])
        else:
            source = _mflsa_rows(self.m, self.mode)
        for n, row in enumerate(source):
            if self.limit is not None and n >= self.limit:
                return
            yield Labeling(BitMatrix(1 << self.m, self.m, row))


def mflsa(m: int, mode: Mode = "full", limit: int | None = None) -> LabelingClassIter:
    return LabelingClassIter(m, mode, limit)


def class_representative(l: Labeling) -> Labeling:
    return Labeling(rce_factorize(l.matrix).echelon)


def is_class_representative(l: Labeling) -> bool:
    return is_reduced_column_echelon(l.matrix)


def is_set_partitioning(x, l: Labeling) -> bool:
    """Strictly increasing minimum intra-subset distances (equal neighbours fail)."""
    from .constellations import intra_distances

    deltas = intra_distances(x, l)
    return all(a < b for a, b in zip(deltas, deltas[1:]))
