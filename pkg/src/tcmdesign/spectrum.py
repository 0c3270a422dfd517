"""Exact truncated distance spectra of TCM encoders.

Error events are pairs of trellis paths that leave a common state, stay in
different states, and remerge.  They are enumerated on the pair-state graph in
order of accumulated squared Euclidean distance (SED).  Path masses are kept as
integers scaled by ``2**E`` with ``E = nu + k*max_event_length`` so the
multiplicities come out as exact dyadic rationals.
"""

from __future__ import annotations

import bisect
import heapq
import json
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Sequence

import numpy as np

from .constellations import Constellation
from .encoder import EncoderSpec, TrellisSection
from .labelings import Labeling

MERGE_RTOL = 1e-9
DISPLAY_TOL = 0.005
DEFAULT_MAX_EVENT_LENGTH = 64


class SpectrumError(ValueError):
    pass


class DegenerateEncoderError(SpectrumError):
    """Two distinct input sequences produce the same symbol sequence."""


def same_distance(a: float, b: float) -> bool:
    return abs(a - b) <= MERGE_RTOL * max(1.0, abs(a), abs(b))


def display_round(x: float | Fraction, ndigits: int = 2) -> float:
    """Half-up rounding as used in printed tables (1.125 -> 1.13)."""
    if isinstance(x, Fraction):
        dec = Decimal(x.numerator) / Decimal(x.denominator)
    else:
        # drop float noise such as 1.12499999999 before rounding
        dec = Decimal(repr(round(float(x), 9)))
    return float(dec.quantize(Decimal(1).scaleb(-ndigits), rounding=ROUND_HALF_UP))


@dataclass(frozen=True)
class TcmEncoder:
    spec: EncoderSpec
    labeling: Labeling
    constellation: Constellation

    def __post_init__(self):
        if self.labeling.size != self.constellation.size:
            raise SpectrumError(
                f"labeling has {self.labeling.size} rows but constellation has {self.constellation.size} points"
            )
        if self.spec.m != self.labeling.m:
            raise SpectrumError(f"encoder has {self.spec.m} outputs, labeling order is {self.labeling.m}")

    def symbol_points(self) -> np.ndarray:
        """Point transmitted for each output word ``u``."""
        return self.constellation.points[list(self.labeling.symbol_of_label())]

    def label_sed(self) -> np.ndarray:
        return canonical_sed(self.constellation.sed_matrix())[np.ix_(self.labeling.symbol_of_label(),
                                                                     self.labeling.symbol_of_label())]


def canonical_sed(sed: np.ndarray) -> np.ndarray:
    """Snap numerically equal SED entries to one representative value (exact zeros kept)."""
    flat = np.sort(np.unique(sed.ravel()))
    reps: list[float] = []
    for v in flat:
        if reps and same_distance(v, reps[-1]):
            continue
        reps.append(float(v))
    out = np.empty_like(sed)
    for idx, v in np.ndenumerate(sed):
        pos = min(range(len(reps)), key=lambda i: abs(reps[i] - v))
        out[idx] = reps[pos]
    out[np.abs(out) < 1e-14] = 0.0
    return out


@dataclass(frozen=True)
class SpectrumLine:
    d2: float
    A: Fraction
    B: Fraction

    def rounded(self, ndigits: int = 2) -> tuple[float, float, float]:
        return (display_round(self.d2, ndigits), display_round(self.A, ndigits), display_round(self.B, ndigits))

    def __str__(self) -> str:
        return "{%.2f, %.2f, %.2f}" % self.rounded()


@dataclass(frozen=True)
class DistanceSpectrum:
    terms: tuple[SpectrumLine, ...]
    K: int
    converged: bool = True
    residual: float = 0.0

    def __post_init__(self):
        d = [t.d2 for t in self.terms]
        if any(b <= a for a, b in zip(d, d[1:])):
            raise SpectrumError("spectrum distances must increase strictly")

    def __len__(self) -> int:
        return len(self.terms)

    def __getitem__(self, i: int) -> SpectrumLine:
        return self.terms[i]

    @property
    def d2_min(self) -> float:
        return self.terms[0].d2 if self.terms else float("inf")

    def truncated(self, K: int) -> "DistanceSpectrum":
        return DistanceSpectrum(self.terms[:K], min(K, self.K), self.converged, self.residual)

    def same_as(self, other: "DistanceSpectrum") -> bool:
        if len(self.terms) != len(other.terms):
            return False
        return all(
            same_distance(a.d2, b.d2) and a.A == b.A and a.B == b.B for a, b in zip(self.terms, other.terms)
        )

    def to_json(self) -> list[dict]:
        return [
            {
                "d2": t.d2,
                "A": float(t.A),
                "B": float(t.B),
                "A_exact": f"{t.A.numerator}/{t.A.denominator}",
                "B_exact": f"{t.B.numerator}/{t.B.denominator}",
                "d2_2dp": display_round(t.d2),
                "A_2dp": display_round(t.A),
                "B_2dp": display_round(t.B),
            }
            for t in self.terms
        ]

    def dumps(self) -> str:
        return json.dumps(
            {"K": self.K, "converged": self.converged, "residual": self.residual, "terms": self.to_json()}, indent=2
        )

    @classmethod
    def from_json(cls, obj: dict) -> "DistanceSpectrum":
        terms = tuple(
            SpectrumLine(float(t["d2"]), Fraction(t["A_exact"]), Fraction(t["B_exact"])) for t in obj["terms"]
        )
        return cls(terms, int(obj["K"]), bool(obj.get("converged", True)), float(obj.get("residual", 0.0)))

    def __str__(self) -> str:
        return ", ".join(str(t) for t in self.terms)


class _DistanceRegistry:
    """Keeps one float per cluster of numerically equal accumulated distances."""

    def __init__(self):
        self.values: list[float] = []

    def snap(self, d: float) -> float:
        vals = self.values
        i = bisect.bisect_left(vals, d)
        for j in (i - 1, i):
            if 0 <= j < len(vals) and same_distance(vals[j], d):
                return vals[j]
        vals.insert(i, d)
        return d


@dataclass
class PairGraph:
    """Pair-state transition tables of one TCM encoder."""

    k: int
    nu: int
    num_states: int
    # per diverged pair-state: list of (dst_pair or -1 for remerge, sed, input weight)
    out_edges: list[list[tuple[int, float, int]]]
    # seeds: (dst_pair or -1, sed, input weight) for every start state and ordered pair of inputs
    seeds: list[tuple[int, float, int]]
    rank: list[int] | None = field(default=None)  # topological rank along zero-SED edges


def build_pair_graph(enc: TcmEncoder, trellis: TrellisSection | None = None) -> PairGraph:
    tr = trellis if trellis is not None else enc.spec.trellis()
    S, A = tr.num_states, tr.num_inputs
    sed = enc.label_sed()
    ns = tr.next_state
    out = tr.output
    wt = [bin(x).count("1") for x in range(A)]

    a_idx, b_idx = np.meshgrid(np.arange(A), np.arange(A), indexing="ij")
    a_idx = a_idx.ravel()
    b_idx = b_idx.ravel()
    wflat = [wt[int(a) ^ int(b)] for a, b in zip(a_idx, b_idx)]

    def pair_index(s: int, t: int) -> int:
        return s * S + t

    out_edges: list[list[tuple[int, float, int]]] = [[] for _ in range(S * S)]
    for s in range(S):
        for t in range(S):
            if s == t:
                continue
            dst_s = ns[s, a_idx]
            dst_t = ns[t, b_idx]
            d = sed[out[s, a_idx], out[t, b_idx]]
            edges = []
            for i in range(len(a_idx)):
                ds, dt = int(dst_s[i]), int(dst_t[i])
                edges.append((-1 if ds == dt else pair_index(ds, dt), float(d[i]), wflat[i]))
            out_edges[pair_index(s, t)] = edges

    seeds = []
    for s in range(S):
        for a in range(A):
            for b in range(A):
                if a == b:
                    continue
                ds, dt = int(ns[s, a]), int(ns[s, b])
                seeds.append((-1 if ds == dt else pair_index(ds, dt), float(sed[out[s, a], out[s, b]]), wt[a ^ b]))

    graph = PairGraph(tr.k, tr.nu, S, out_edges, seeds)
    graph.rank = _zero_edge_topological_rank(graph)
    return graph


def _zero_edge_topological_rank(g: PairGraph) -> list[int] | None:
    n = len(g.out_edges)
    indeg = [0] * n
    for edges in g.out_edges:
        for dst, d, _ in edges:
            if dst >= 0 and d == 0.0:
                indeg[dst] += 1
    order = []
    stack = [p for p in range(n) if indeg[p] == 0]
    while stack:
        p = stack.pop()
        order.append(p)
        for dst, d, _ in g.out_edges[p]:
            if dst >= 0 and d == 0.0:
                indeg[dst] -= 1
                if indeg[dst] == 0:
                    stack.append(dst)
    if len(order) != n:
        return None
    rank = [0] * n
    for r, p in enumerate(order):
        rank[p] = r
    return rank


def distance_spectrum(
    enc: TcmEncoder,
    K: int = 5,
    max_event_length: int = DEFAULT_MAX_EVENT_LENGTH,
    graph: PairGraph | None = None,
) -> DistanceSpectrum:
    """First ``K`` distinct event distances with their distance and bit multiplicities."""
    if K < 1:
        raise SpectrumError("K must be >= 1")
    g = graph if graph is not None else build_pair_graph(enc)
    k = g.k
    E = g.nu + k * max_event_length
    low_mask = (1 << k) - 1
    inexact = False

    reg = _DistanceRegistry()
    levels: dict[float, dict[int, list[int]]] = {}
    heap: list[float] = []
    deposits: dict[float, list[int]] = {}
    kth = float("inf")

    def deposit(d: float, mass: int, wmass: int) -> None:
        nonlocal kth
        if d <= MERGE_RTOL:
            raise DegenerateEncoderError("zero-distance error event: encoder is degenerate")
        d = reg.snap(d)
        slot = deposits.get(d)
        if slot is None:
            deposits[d] = [mass, wmass]
            if len(deposits) >= K:
                kth = sorted(deposits)[K - 1]
        else:
            slot[0] += mass
            slot[1] += wmass

    def push(d: float, ps: int, mass: int, wmass: int) -> dict[int, list[int]]:
        d = reg.snap(d)
        lvl = levels.get(d)
        if lvl is None:
            lvl = levels[d] = {}
            heapq.heappush(heap, d)
        slot = lvl.get(ps)
        if slot is None:
            lvl[ps] = [mass, wmass]
        else:
            slot[0] += mass
            slot[1] += wmass
        return lvl

    seed_mass = 1 << (E - g.nu - k)
    for dst, d, w in g.seeds:
        if dst < 0:
            deposit(d, seed_mass, seed_mass * w)
        else:
            push(d, dst, seed_mass, seed_mass * w)

    rank = g.rank
    dropped = 0
    while heap:
        d = heapq.heappop(heap)
        if kth < float("inf") and d > kth and not same_distance(d, kth):
            break
        nodes = levels.pop(d)
        if rank is not None:
            order = [(rank[p], p) for p in nodes]
            heapq.heapify(order)
            while order:
                _, ps = heapq.heappop(order)
                mass, wmass = nodes.pop(ps)
                if (mass | wmass) & low_mask:
                    inexact = True
                for dst, s, w in g.out_edges[ps]:
                    nm = mass >> k
                    nw = (wmass + mass * w) >> k
                    nd = d + s
                    if dst < 0:
                        deposit(nd, nm, nw)
                    elif s == 0.0:
                        slot = nodes.get(dst)
                        if slot is None:
                            nodes[dst] = [nm, nw]
                            heapq.heappush(order, (rank[dst], dst))
                        else:
                            slot[0] += nm
                            slot[1] += nw
                    elif nd <= kth or same_distance(nd, kth):
                        push(nd, dst, nm, nw)
        else:
            # zero-SED cycles: propagate within the level in waves, capped by the event length
            wave = nodes
            for _ in range(max_event_length):
                nxt: dict[int, list[int]] = {}
                for ps, (mass, wmass) in wave.items():
                    if (mass | wmass) & low_mask:
                        inexact = True
                    for dst, s, w in g.out_edges[ps]:
                        nm = mass >> k
                        nw = (wmass + mass * w) >> k
                        nd = d + s
                        if dst < 0:
                            deposit(nd, nm, nw)
                        elif s == 0.0:
                            slot = nxt.setdefault(dst, [0, 0])
                            slot[0] += nm
                            slot[1] += nw
                        elif nd <= kth or same_distance(nd, kth):
                            push(nd, dst, nm, nw)
                wave = {p: v for p, v in nxt.items() if v[0] or v[1]}
                if not wave:
                    break
            else:
                inexact = True
                dropped += sum(v[0] for v in wave.values())

    scale = 1 << E
    terms = []
    for d in sorted(deposits)[:K]:
        mass, wmass = deposits[d]
        terms.append(SpectrumLine(d, Fraction(mass, scale), Fraction(wmass, k * scale)))
    converged = not inexact
    residual = 0.0
    if not converged:
        residual = max(dropped / scale, 2.0 ** (-k * max_event_length) * len(g.out_edges))
    return DistanceSpectrum(tuple(terms), K, converged, residual)


def free_distance(enc: TcmEncoder, graph: PairGraph | None = None) -> float:
    return distance_spectrum(enc, K=1, graph=graph).d2_min


def is_superior(a: DistanceSpectrum, b: DistanceSpectrum) -> bool:
    """Partial order on spectra: the first differing line decides, needing a larger distance
    or a strictly smaller A *and* B at equal distance."""
    n = min(len(a.terms), len(b.terms))
    for i in range(n):
        x, y = a.terms[i], b.terms[i]
        if not same_distance(x.d2, y.d2):
            return x.d2 > y.d2
        if x.A == y.A and x.B == y.B:
            continue
        return x.A < y.A and x.B < y.B
    return False


def spectrum_key(ds: DistanceSpectrum, which: str) -> tuple:
    """Lexicographic key (smaller is better) on distances and one multiplicity ('A' or 'B')."""
    key = []
    for t in ds.terms:
        key.append(-round(t.d2, 9))
        key.append(t.A if which == "A" else t.B)
    return tuple(key)


def spectra_match(ds: DistanceSpectrum, reference: Sequence[Sequence[float]], tol: float = DISPLAY_TOL) -> list[str]:
    """Differences (as messages) between a spectrum and printed (d2, A, B) triples."""
    issues = []
    if len(ds.terms) < len(reference):
        issues.append(f"only {len(ds.terms)} terms computed, {len(reference)} expected")
    for i, (ref, line) in enumerate(zip(reference, ds.terms)):
        got = (line.d2, float(line.A), float(line.B))
        for name, g_, r_ in zip(("d2", "A", "B"), got, ref):
            if abs(g_ - r_) > tol + 1e-12:
                issues.append(f"term {i + 1} {name}: computed {g_:.4f}, reference {r_:.2f}")
    return issues
