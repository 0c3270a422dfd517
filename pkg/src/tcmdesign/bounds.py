"""Union bounds on error-event, bit and frame error probability over AWGN.

Symbol energy is normalized to 1, so with ``es_over_n0 = E_s/N_0`` the noise
variance per real dimension is ``1 / (2 * es_over_n0)`` and an error event at
squared distance d2 has pairwise probability ``Q(sqrt(d2 * E_s / (2 N_0)))``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .spectrum import DistanceSpectrum

ES = 1.0  # constellations are unit-energy


class NonConvergedSpectrumWarning(UserWarning):
    """A bound was evaluated from a spectrum whose tail was truncated."""


def q_function(x):
    """Gaussian tail probability via erfc; accepts scalars or arrays."""
    if np.ndim(x) == 0:
        return 0.5 * math.erfc(float(x) / math.sqrt(2.0))
    return 0.5 * np.vectorize(math.erfc, otypes=[float])(np.asarray(x, dtype=float) / math.sqrt(2.0))


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class ChannelConfig:
    es_over_n0: float  # linear
    block_length: int = 1  # N_s information-carrying symbols per frame

    def __post_init__(self):
        if not self.es_over_n0 > 0:
            raise ValueError(f"E_s/N_0 must be positive, got {self.es_over_n0}")
        if self.block_length < 1:
            raise ValueError(f"block length must be >= 1, got {self.block_length}")

    @classmethod
    def from_db(cls, esn0_db: float, block_length: int = 1) -> "ChannelConfig":
        return cls(db_to_linear(esn0_db), block_length)

    @property
    def esn0_db(self) -> float:
        return linear_to_db(self.es_over_n0)

    @property
    def n0(self) -> float:
        return ES / self.es_over_n0

    @property
    def noise_std(self) -> float:
        return math.sqrt(self.n0 / 2.0)


def _check(ds: DistanceSpectrum) -> None:
    if not ds.converged:
        warnings.warn(
            f"spectrum not converged (residual {ds.residual:.3g}); the bound is approximate",
            NonConvergedSpectrumWarning,
            stacklevel=3,
        )


def _pep(d2: float, ch: ChannelConfig) -> float:
    return q_function(math.sqrt(d2 * ES * ch.es_over_n0 / 2.0))


def event_bound(ds: DistanceSpectrum, ch: ChannelConfig) -> float:
    _check(ds)
    return sum(float(t.A) * _pep(t.d2, ch) for t in ds.terms)


def ber_bound(ds: DistanceSpectrum, ch: ChannelConfig) -> float:
    _check(ds)
    return sum(float(t.B) * _pep(t.d2, ch) for t in ds.terms)


def fer_bound(ds: DistanceSpectrum, ch: ChannelConfig) -> float:
    """N_s times the event bound; not clamped, it may exceed 1."""
    return ch.block_length * event_bound(ds, ch)
