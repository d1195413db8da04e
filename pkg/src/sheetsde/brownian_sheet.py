"""Sampling of the d-dimensional Brownian sheet on a grid partition.

A sheet sample stores one Gaussian increment per cell and component; the
increment of cell (i, j) has variance equal to the cell area, increments of
distinct cells are independent, and the sheet value at a grid point is the
inclusion-exclusion sum of all increments below-left of it.  Values on the
axes are identically zero.

Randomness is counter based: a Philox stream keyed by the seed fills the
whole increment array in one fixed C-ordered draw, so the draw attached to
(row, col, component) does not depend on any iteration order.  Replications
use derived keys seed XOR replication-index.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from .plane_geometry import Cell, GridPartition

_UINT64 = np.uint64
_MASK64 = (1 << 64) - 1

#: significant digits used for all CSV exports
CSV_FLOAT_FORMAT = "%.17g"


def derive_seed(seed: int, index: int) -> int:
    """Replication seed contract: seed XOR index, reduced to 64 bits."""
    return (int(seed) ^ int(index)) & _MASK64


def keyed_generator(seed: int) -> np.random.Generator:
    """Counter-based generator for a 64-bit key."""
    return np.random.Generator(np.random.Philox(key=_UINT64(int(seed) & _MASK64)))


@dataclass(frozen=True)
class SheetSample:
    """Per-cell increments of one sheet realization.

    increments[i-1, j-1, c] is the rectangle increment of component c over
    cell (i, j).
    """

    grid: GridPartition
    dim: int
    increments: np.ndarray
    seed: int

    def __post_init__(self) -> None:
        expected = (self.grid.n_s, self.grid.n_t, self.dim)
        if self.increments.shape != expected:
            raise ValueError(
                f"increments shape {self.increments.shape} != grid shape {expected}"
            )


def _cell_std(grid: GridPartition) -> np.ndarray:
    areas = np.outer(grid.s_gaps(), grid.t_gaps())
    return np.sqrt(areas)[:, :, None]


def sample(grid: GridPartition, dim: int = 1, seed: int = 0) -> SheetSample:
    """One sheet realization; increments are sqrt(area) times standard normals."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    rng = keyed_generator(seed)
    z = rng.standard_normal((grid.n_s, grid.n_t, dim))
    return SheetSample(grid, dim, z * _cell_std(grid), seed)


def sample_batch(grid: GridPartition, dim: int, seed: int, n: int) -> np.ndarray:
    """Increments for n independent replications, shape (n, n_s, n_t, dim).

    Replication r uses the derived key seed XOR r, so any contiguous sub-batch
    can be regenerated independently.
    """
    out = np.empty((n, grid.n_s, grid.n_t, dim))
    std = _cell_std(grid)
    for r in range(n):
        rng = keyed_generator(derive_seed(seed, r))
        out[r] = rng.standard_normal((grid.n_s, grid.n_t, dim)) * std
    return out


def cumulative_values(increments: np.ndarray) -> np.ndarray:
    """Grid-point sheet values with zero axes.

    Accepts (..., n_s, n_t, dim) increments and returns (..., n_s+1, n_t+1, dim):
    out[..., i, j, :] = sum of increments over rows <= i, cols <= j.
    """
    c = np.cumsum(np.cumsum(increments, axis=-3), axis=-2)
    shape = list(c.shape)
    shape[-3] += 1
    shape[-2] += 1
    out = np.zeros(shape, dtype=c.dtype)
    out[..., 1:, 1:, :] = c
    return out


def values(sheet: SheetSample) -> np.ndarray:
    """All grid-point values of the sample, shape (n_s+1, n_t+1, dim)."""
    return cumulative_values(sheet.increments)


def value_at(sheet: SheetSample, i: int, j: int) -> np.ndarray:
    """Sheet value at grid point (i, j); zero whenever i == 0 or j == 0."""
    if not (0 <= i <= sheet.grid.n_s and 0 <= j <= sheet.grid.n_t):
        raise ValueError(f"grid point ({i}, {j}) outside grid")
    if i == 0 or j == 0:
        return np.zeros(sheet.dim)
    return sheet.increments[:i, :j].sum(axis=(0, 1))


def rectangle_increment(sheet: SheetSample, lower: tuple[int, int], upper: tuple[int, int]) -> np.ndarray:
    """Inclusion-exclusion increment over the grid rectangle (lower, upper]."""
    (i1, j1), (i2, j2) = lower, upper
    if not (i1 <= i2 and j1 <= j2):
        raise ValueError("lower corner must precede upper corner")
    return sheet.increments[i1:i2, j1:j2].sum(axis=(0, 1))


def coarsen(sheet: SheetSample, factor_s: int, factor_t: Optional[int] = None) -> SheetSample:
    """Aggregate cell increments in blocks onto the subsampled knot grid.

    The same underlying sheet restricted to every factor-th knot; used for
    coupled mesh-refinement studies.  Requires the cell counts to divide.
    """
    if factor_t is None:
        factor_t = factor_s
    grid = sheet.grid
    if factor_s < 1 or factor_t < 1:
        raise ValueError("coarsening factors must be >= 1")
    if grid.n_s % factor_s != 0 or grid.n_t % factor_t != 0:
        raise ValueError(
            f"factors ({factor_s}, {factor_t}) do not divide cell counts ({grid.n_s}, {grid.n_t})"
        )
    ns, nt = grid.n_s // factor_s, grid.n_t // factor_t
    inc = sheet.increments.reshape(ns, factor_s, nt, factor_t, sheet.dim).sum(axis=(1, 3))
    coarse = GridPartition(grid.s_knots[::factor_s], grid.t_knots[::factor_t])
    return SheetSample(coarse, sheet.dim, inc, sheet.seed)


HdotLike = Union[np.ndarray, Callable[[Cell], np.ndarray]]


def cameron_martin_shift(sheet: SheetSample, hdot: HdotLike, eps: float) -> SheetSample:
    """Shift each cell increment by eps * hdot(cell) * area.

    hdot may be an (n_s, n_t, dim) array of densities or a callable on cells.
    The shifted sample keeps the seed token of its parent.
    """
    grid = sheet.grid
    if callable(hdot):
        dens = np.empty_like(sheet.increments)
        for i in range(1, grid.n_s + 1):
            for j in range(1, grid.n_t + 1):
                dens[i - 1, j - 1] = np.asarray(hdot(Cell(i, j)), dtype=float)
    else:
        dens = np.asarray(hdot, dtype=float)
        if dens.shape != sheet.increments.shape:
            raise ValueError(f"hdot shape {dens.shape} != {sheet.increments.shape}")
    areas = np.outer(grid.s_gaps(), grid.t_gaps())[:, :, None]
    return SheetSample(grid, sheet.dim, sheet.increments + eps * dens * areas, sheet.seed)


def export_csv(sheet: SheetSample, path: str) -> None:
    """Write one row (i, j, component, z) per increment, 1-based indices."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "component", "z"])
        for i in range(1, sheet.grid.n_s + 1):
            for j in range(1, sheet.grid.n_t + 1):
                for c in range(sheet.dim):
                    writer.writerow([i, j, c + 1, CSV_FLOAT_FORMAT % sheet.increments[i - 1, j - 1, c]])


def import_csv(grid: GridPartition, dim: int, path: str, seed: int = 0) -> SheetSample:
    """Inverse of export_csv for a known grid shape."""
    z = np.zeros((grid.n_s, grid.n_t, dim))
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            z[int(row["i"]) - 1, int(row["j"]) - 1, int(row["component"]) - 1] = float(row["z"])
    return SheetSample(grid, dim, z, seed)
