"""Unit-energy PAM/PSK constellations and intra-subset distances."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np

Family = Literal["pam", "psk", "custom"]
ENERGY_TOL = 1e-12


class ConstellationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Constellation:
    points: np.ndarray  # shape (M, N)
    family: Family = "custom"
    scale: float = 1.0  # factor applied to the raw input to reach unit energy
    name: str = field(default="")

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] == 1 and np.asarray(self.points).ndim == 1:
            pts = pts.T
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if len(np.unique(pts.round(12), axis=0)) != len(pts):
            raise ConstellationError("constellation points are not distinct")

    @property
    def size(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def m(self) -> int:
        return self.size.bit_length() - 1

    def energy(self) -> float:
        return float(np.mean(np.sum(self.points**2, axis=1)))

    def sed_matrix(self) -> np.ndarray:
        """Squared Euclidean distances between all point pairs."""
        diff = self.points[:, None, :] - self.points[None, :, :]
        return np.sum(diff**2, axis=2)

    def scaled(self, alpha: float) -> "Constellation":
        """Scaled copy, deliberately not renormalized."""
        return Constellation(self.points * alpha, self.family, self.scale * alpha, self.name)

    def __repr__(self) -> str:
        return f"Constellation({self.name or self.family}, M={self.size})"


def _check_size(M: int, allowed: tuple[int, ...]) -> None:
    if M not in allowed:
        raise ConstellationError(f"M must be one of {allowed}, got {M}")


def mpam(M: int) -> Constellation:
    _check_size(M, (2, 4, 8, 16))
    delta = np.sqrt(3.0 / (M * M - 1))
    q = np.arange(1, M + 1)
    return Constellation((-(M + 1 - 2 * q) * delta)[:, None], "pam", name=f"{M}PAM")


def mpsk(M: int) -> Constellation:
    _check_size(M, (4, 8, 16))
    phase = 2 * np.pi * np.arange(M) / M
    pts = np.stack([np.cos(phase), np.sin(phase)], axis=1)
    # exact zeros for the axis points keep 4PSK/8PSK distances clean
    pts[np.abs(pts) < 1e-15] = 0.0
    return Constellation(pts, "psk", name=f"{M}PSK")


def by_name(name: str) -> Constellation:
    """``"4pam"``, ``"8psk"`` and so on."""
    key = name.strip().lower()
    for fam, ctor in (("pam", mpam), ("psk", mpsk)):
        if key.endswith(fam):
            try:
                M = int(key[: -len(fam)])
            except ValueError as exc:
                raise ConstellationError(f"bad constellation name {name!r}") from exc
            return ctor(M)
    raise ConstellationError(f"unknown constellation {name!r}")


def load(path: str | Path) -> Constellation:
    """One point per line, whitespace-separated coordinates; renormalized to unit energy."""
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append([float(v) for v in line.split()])
    if not rows or len({len(r) for r in rows}) != 1:
        raise ConstellationError(f"{path}: expected a non-empty table of equal-length rows")
    pts = np.array(rows)
    M = len(pts)
    if M < 2 or M & (M - 1):
        raise ConstellationError(f"{path}: {M} points is not a power of two")
    energy = float(np.mean(np.sum(pts**2, axis=1)))
    scale = 1.0 / np.sqrt(energy)
    return Constellation(pts * scale, "custom", scale=scale, name=Path(path).stem)


def intra_distances(x: Constellation, l) -> tuple[float, ...]:
    """Minimum (unsquared) distances delta_0..delta_{m-1}.

    ``delta_0`` is the constellation MED; ``delta_l`` is the smallest distance
    between two points whose labels agree in their last ``l`` bits.
    """
    if x.size != l.size:
        raise ConstellationError(f"constellation has {x.size} points, labeling {l.size}")
    sed = x.sed_matrix()
    labels = np.asarray(l.integer_view)
    out = []
    for level in range(l.m):
        mask = (1 << level) - 1
        same = (labels[:, None] & mask) == (labels[None, :] & mask)
        np.fill_diagonal(same, False)
        out.append(float(np.sqrt(sed[same].min())))
    return tuple(out)
