"""Dense GF(2) matrices with bit-packed rows.

Each row is stored as a Python int whose most significant of ``cols`` bits is
column 1.  For an M x m labeling this makes the row value equal to the
integer notation of the label.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence


class GF2Error(ValueError):
    """Rejected input to a GF(2) operation."""


@dataclass(frozen=True)
class BitMatrix:
    rows: int
    cols: int
    data: tuple[int, ...]

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise GF2Error(f"empty matrix {self.rows}x{self.cols}")
        if len(self.data) != self.rows:
            raise GF2Error("row count does not match data")
        limit = 1 << self.cols
        for r in self.data:
            if not 0 <= r < limit:
                raise GF2Error(f"row value {r} does not fit in {self.cols} columns")

    # -- construction -----------------------------------------------------
    @classmethod
    def from_rows(cls, rows: Sequence[int], cols: int) -> "BitMatrix":
        return cls(len(rows), cols, tuple(int(r) for r in rows))

    @classmethod
    def from_lists(cls, bits: Sequence[Sequence[int]]) -> "BitMatrix":
        if not bits:
            raise GF2Error("empty matrix")
        cols = len(bits[0])
        data = []
        for row in bits:
            if len(row) != cols:
                raise GF2Error("ragged rows")
            v = 0
            for b in row:
                if b not in (0, 1):
                    raise GF2Error(f"entry {b!r} is not a bit")
                v = (v << 1) | b
            data.append(v)
        return cls(len(data), cols, tuple(data))

    @classmethod
    def parse(cls, text: str) -> "BitMatrix":
        """Parse binary rows separated by ``/``, ``;``, commas or whitespace, e.g. ``"110/011/001"``."""
        tokens = [t for t in text.replace("/", " ").replace(";", " ").replace(",", " ").split() if t]
        if not tokens:
            raise GF2Error("empty matrix text")
        return cls.from_lists([[int(ch) for ch in t] for t in tokens])

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls(n, n, tuple(1 << (n - 1 - i) for i in range(n)))

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BitMatrix":
        return cls(rows, cols, (0,) * rows)

    # -- access -----------------------------------------------------------
    def __getitem__(self, ij: tuple[int, int]) -> int:
        i, j = ij
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(ij)
        return (self.data[i] >> (self.cols - 1 - j)) & 1

    def column(self, j: int) -> int:
        """Column ``j`` (0-based) packed with row 0 as the most significant bit."""
        shift = self.cols - 1 - j
        v = 0
        for r in self.data:
            v = (v << 1) | ((r >> shift) & 1)
        return v

    def to_lists(self) -> list[list[int]]:
        return [[(r >> (self.cols - 1 - j)) & 1 for j in range(self.cols)] for r in self.data]

    def transpose(self) -> "BitMatrix":
        return BitMatrix(self.cols, self.rows, tuple(self.column(j) for j in range(self.cols)))

    def __matmul__(self, other: "BitMatrix") -> "BitMatrix":
        return multiply(self, other)

    def __str__(self) -> str:
        return "/".join(format(r, f"0{self.cols}b") for r in self.data)


def multiply(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    if a.cols != b.rows:
        raise GF2Error(f"dimension mismatch: {a.rows}x{a.cols} times {b.rows}x{b.cols}")
    out = []
    for r in a.data:
        acc = 0
        t = 0
        while r:
            # walk set bits from the least significant (last column) upwards
            if r & 1:
                acc ^= b.data[a.cols - 1 - t]
            r >>= 1
            t += 1
        out.append(acc)
    return BitMatrix(a.rows, b.cols, tuple(out))


def rank(a: BitMatrix) -> int:
    rows = list(a.data)
    rk = 0
    for bit in reversed(range(a.cols)):
        mask = 1 << bit
        pivot = next((i for i in range(rk, len(rows)) if rows[i] & mask), None)
        if pivot is None:
            continue
        rows[rk], rows[pivot] = rows[pivot], rows[rk]
        for i in range(len(rows)):
            if i != rk and rows[i] & mask:
                rows[i] ^= rows[rk]
        rk += 1
    return rk


def invert(a: BitMatrix) -> BitMatrix:
    if a.rows != a.cols:
        raise GF2Error("only square matrices can be inverted")
    n = a.rows
    # augmented rows: [a | I] packed as (a << n) | e_i
    rows = [(r << n) | (1 << (n - 1 - i)) for i, r in enumerate(a.data)]
    for c in range(n):
        mask = 1 << (2 * n - 1 - c)
        pivot = next((i for i in range(c, n) if rows[i] & mask), None)
        if pivot is None:
            raise GF2Error("singular matrix")
        rows[c], rows[pivot] = rows[pivot], rows[c]
        for i in range(n):
            if i != c and rows[i] & mask:
                rows[i] ^= rows[c]
    low = (1 << n) - 1
    return BitMatrix(n, n, tuple(r & low for r in rows))


def invertible_count(m: int) -> int:
    """Number of invertible m x m binary matrices."""
    count = 1
    for l in range(1, m + 1):
        count *= (1 << m) - (1 << (l - 1))
    return count


MAX_ENUMERATION_ORDER = 4


def enumerate_invertible(m: int) -> Iterator[BitMatrix]:
    """All invertible m x m matrices in lexicographic order of their row-major bit strings."""
    if not 1 <= m <= MAX_ENUMERATION_ORDER:
        raise GF2Error(f"enumeration supported for 1 <= m <= {MAX_ENUMERATION_ORDER}, got {m}")
    row_mask = (1 << m) - 1
    for code in range(1 << (m * m)):
        data = tuple((code >> (m * (m - 1 - i))) & row_mask for i in range(m))
        # quick reject of zero / repeated rows before the rank test
        if 0 in data or len(set(data)) != m:
            continue
        mat = BitMatrix(m, m, data)
        if rank(mat) == m:
            yield mat


@dataclass(frozen=True)
class RceFactorization:
    echelon: BitMatrix
    transform: BitMatrix


def pivots(a: BitMatrix) -> list[int | None]:
    """Row index of the first nonzero entry of each column (None for a zero column)."""
    out: list[int | None] = []
    for j in range(a.cols):
        shift = a.cols - 1 - j
        out.append(next((i for i, r in enumerate(a.data) if (r >> shift) & 1), None))
    return out


def is_reduced_column_echelon(a: BitMatrix) -> bool:
    piv = pivots(a)
    if any(p is None for p in piv):
        return False
    for j, p in enumerate(piv):
        if a.data[p] != 1 << (a.cols - 1 - j):
            return False
    # pivot of column l lies below the pivot of column l+1
    return all(piv[j] > piv[j + 1] for j in range(a.cols - 1))


def rce_factorize(l: BitMatrix) -> RceFactorization:
    """Factor a labeling as ``echelon @ transform`` with a reduced column echelon left factor.

    Column reduction is applied to ``l`` while the same column operations are
    accumulated into ``transform^-1``.
    """
    m = l.cols
    if len(set(l.data)) != l.rows:
        raise GF2Error("labeling has duplicate rows")
    if any(l.column(j) == 0 for j in range(m)):
        raise GF2Error("labeling has a zero column")

    cols = [l.column(j) for j in range(m)]  # packed columns, row 0 = MSB
    tinv = [1 << (m - 1 - j) for j in range(m)]  # columns of T^-1, packed likewise (row 0 = MSB)
    nrows = l.rows
    assigned: list[int] = []  # column indices in the order their pivots were found
    for q in range(nrows):
        bit = 1 << (nrows - 1 - q)
        free = [j for j in range(m) if j not in assigned and cols[j] & bit]
        if not free:
            continue
        c = free[0]
        for j in range(m):
            if j != c and cols[j] & bit:
                cols[j] ^= cols[c]
                tinv[j] ^= tinv[c]
        assigned.append(c)
        if len(assigned) == m:
            break
    if len(assigned) != m:
        raise GF2Error("labeling columns are linearly dependent")
    # topmost pivot goes to the last column
    order = list(reversed(assigned))
    cols = [cols[j] for j in order]
    tinv = [tinv[j] for j in order]

    def from_columns(columns: list[int], nr: int) -> BitMatrix:
        data = []
        for i in range(nr):
            shift = nr - 1 - i
            v = 0
            for cval in columns:
                v = (v << 1) | ((cval >> shift) & 1)
            data.append(v)
        return BitMatrix(nr, len(columns), tuple(data))

    echelon = from_columns(cols, nrows)
    transform = invert(from_columns(tinv, m))
    return RceFactorization(echelon, transform)
