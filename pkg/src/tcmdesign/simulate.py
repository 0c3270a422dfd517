"""Monte-Carlo BER/FER over AWGN with an exact ML (Viterbi) decoder.

Frames carry ``N_s`` information words followed by ``nu`` all-zero flush
words, so every frame starts and ends in state 0 and the decoder is exactly
ML for the terminated trellis.  Each frame draws its bits and noise from its
own counter-based stream keyed by ``(seed, frame)``, so results do not depend
on batch size or on how frames are spread across workers.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Iterable, Sequence

import numpy as np

from .bounds import ChannelConfig, ber_bound, fer_bound
from .encoder import TrellisSection, encode_array
from .spectrum import DistanceSpectrum, TcmEncoder

CONFIDENCE_Z = 3.0
CSV_COLUMNS = ("esn0_db", "ber_bound", "fer_bound", "ber_sim", "ber_ci", "fer_sim", "fer_ci", "frames")


@dataclass(frozen=True)
class ErrorRates:
    ber: float
    ber_ci: float  # half-width at CONFIDENCE_Z sigma
    fer: float
    fer_ci: float
    frames: int
    bit_errors: int
    frame_errors: int
    bits: int


def _branch_tables(tr: TrellisSection):
    pred = tr.predecessors()
    A = tr.num_inputs
    pred_s = pred // A
    pred_a = pred % A
    pred_u = tr.output[pred_s, pred_a]
    return pred_s, pred_a, pred_u


def viterbi_decode(enc: TcmEncoder, received, tail: int = 0, trellis: TrellisSection | None = None) -> np.ndarray:
    """Input words of the minimum squared-distance path from state 0.

    ``received`` has shape (n, N) or (F, n, N) for F frames decoded together.
    The last ``tail`` words are known to be zero (flush); the path must use
    input 0 there.  Ties go to the lowest-index predecessor state.
    """
    tr = trellis if trellis is not None else enc.spec.trellis()
    y = np.asarray(received, dtype=float)
    single = y.ndim == 2
    if single:
        y = y[None]
    F, n, _ = y.shape
    pts = enc.symbol_points()
    # branch metric for every output word: (F, n, M)
    bm = ((y[:, :, None, :] - pts[None, None, :, :]) ** 2).sum(axis=3)
    pred_s, pred_a, pred_u = _branch_tables(tr)
    S = tr.num_states
    zero_in = pred_a == 0

    metric = np.full((F, S), np.inf)
    metric[:, 0] = 0.0
    survivors = np.empty((n, F, S), dtype=np.int8 if pred_s.shape[1] <= 127 else np.int16)
    rows = np.arange(F)[:, None]
    for t in range(n):
        cand = metric[:, pred_s] + bm[:, t, :][:, pred_u]  # (F, S, A)
        if t >= n - tail:
            cand = np.where(zero_in[None], cand, np.inf)
        j = cand.argmin(axis=2)
        survivors[t] = j
        metric = np.take_along_axis(cand, j[:, :, None], axis=2)[:, :, 0]

    state = metric.argmin(axis=1)
    words = np.empty((F, n), dtype=np.int64)
    for t in range(n - 1, -1, -1):
        j = survivors[t][rows[:, 0], state]
        words[:, t] = pred_a[state, j]
        state = pred_s[state, j]
    return words[0] if single else words


def _frame_streams(seed: int, frames: Sequence[int]) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(f,)))) for f in frames]


def _draw(enc: TcmEncoder, ch: ChannelConfig, seed: int, first: int, count: int):
    """Information words (F, N_s) and noise (F, N_s + nu, N) for frames first..first+count-1."""
    k = enc.spec.k
    n = ch.block_length + enc.spec.nu
    dim = enc.constellation.dim
    words = np.empty((count, ch.block_length), dtype=np.int64)
    noise = np.empty((count, n, dim))
    for i, rng in enumerate(_frame_streams(seed, range(first, first + count))):
        words[i] = rng.integers(0, 1 << k, size=ch.block_length)
        noise[i] = rng.standard_normal((n, dim))
    return words, noise * ch.noise_std


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.int64)
    c = np.zeros_like(x)
    while x.any():
        c += x & 1
        x >>= 1
    return c


def simulate_frames(enc: TcmEncoder, ch: ChannelConfig, seed: int, first: int, count: int) -> np.ndarray:
    """Bit errors of each frame in first..first+count-1."""
    tr = enc.spec.trellis()
    nu = enc.spec.nu
    words, noise = _draw(enc, ch, seed, first, count)
    padded = np.concatenate([words, np.zeros((count, nu), dtype=np.int64)], axis=1)
    labels, _ = encode_array(tr, padded)
    tx = enc.symbol_points()[labels]
    decoded = viterbi_decode(enc, tx + noise, tail=nu, trellis=tr)
    return _popcount(decoded[:, : ch.block_length] ^ words).sum(axis=1)


def _batch_star(args):
    return simulate_frames(*args)


def _summarize(per_frame: np.ndarray, bits_per_frame: int) -> ErrorRates:
    n = len(per_frame)
    bit_errors = int(per_frame.sum())
    frame_errors = int((per_frame > 0).sum())
    if n == 0:
        return ErrorRates(0.0, 0.0, 0.0, 0.0, 0, 0, 0, 0)
    fer = frame_errors / n
    ber = bit_errors / (n * bits_per_frame)
    fer_ci = CONFIDENCE_Z * math.sqrt(fer * (1 - fer) / n)
    # errors cluster within frames, so the spread is estimated per frame
    var = float(per_frame.var(ddof=1)) if n > 1 else 0.0
    ber_ci = CONFIDENCE_Z * math.sqrt(var / n) / bits_per_frame
    return ErrorRates(ber, ber_ci, fer, fer_ci, n, bit_errors, frame_errors, n * bits_per_frame)


def simulate(
    enc: TcmEncoder,
    ch: ChannelConfig,
    target_frame_errors: int = 100,
    seed: int = 0,
    max_frames: int = 1_000_000,
    batch: int = 500,
    workers: int = 1,
) -> ErrorRates:
    """Simulate frames in order until ``target_frame_errors`` errors or ``max_frames`` frames.

    The stop happens exactly at the frame that reaches the target, so the
    result is independent of ``batch`` and ``workers``.
    """
    if target_frame_errors < 1 or max_frames < 1:
        raise ValueError("target_frame_errors and max_frames must be >= 1")
    bits_per_frame = ch.block_length * enc.spec.k
    chunks: list[np.ndarray] = []
    errors = 0
    starts = range(0, max_frames, batch)

    def consume(per_frame: np.ndarray) -> bool:
        nonlocal errors
        hits = np.cumsum(per_frame > 0) + errors
        if hits.size and hits[-1] >= target_frame_errors:
            stop = int(np.searchsorted(hits, target_frame_errors)) + 1
            chunks.append(per_frame[:stop])
            return True
        errors = int(hits[-1]) if hits.size else errors
        chunks.append(per_frame)
        return False

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for w0 in range(0, len(starts), workers):
                jobs = [(enc, ch, seed, s, min(batch, max_frames - s)) for s in starts[w0:w0 + workers]]
                if any(consume(r) for r in pool.map(_batch_star, jobs)):
                    break
    else:
        for s in starts:
            if consume(simulate_frames(enc, ch, seed, s, min(batch, max_frames - s))):
                break
    return _summarize(np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64), bits_per_frame)


def sweep(
    enc: TcmEncoder,
    spectrum: DistanceSpectrum,
    esn0_db: Iterable[float],
    block_length: int,
    run_simulation: bool = False,
    target_frame_errors: int = 100,
    seed: int = 0,
    max_frames: int = 1_000_000,
    workers: int = 1,
) -> list[dict]:
    rows = []
    for db in esn0_db:
        ch = ChannelConfig.from_db(db, block_length)
        row = {"esn0_db": db, "ber_bound": ber_bound(spectrum, ch), "fer_bound": fer_bound(spectrum, ch),
               "ber_sim": "", "ber_ci": "", "fer_sim": "", "fer_ci": "", "frames": ""}
        if run_simulation:
            r = simulate(enc, ch, target_frame_errors, seed, max_frames, workers=workers)
            row.update(ber_sim=r.ber, ber_ci=r.ber_ci, fer_sim=r.fer, fer_ci=r.fer_ci, frames=r.frames)
        rows.append(row)
    return rows


def rows_to_csv(rows: Sequence[dict], comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: (repr(float(r[c])) if isinstance(r[c], float) else r[c]) for c in CSV_COLUMNS})
    return buf.getvalue()


def error_rates_dict(r: ErrorRates) -> dict:
    return asdict(r)
