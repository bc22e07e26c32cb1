"""Belief-simplex grids, cooperation regions, the sharing flag and the CGT policy."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from math import comb
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.spatial import cKDTree

from .errors import GridMismatch, ResolutionTooLarge
from .model import as_belief

DEFAULT_POINT_CAP = 5_000_000
TIE_TOL = 1e-12


def _compositions(total: int, parts: int):
    """Compositions of ``total`` into ``parts`` nonnegative integers, lexicographic order."""
    if parts == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


@dataclass(frozen=True, eq=False)
class SimplexGrid:
    """All beliefs with coordinates in {0, 1/R, ..., 1}, in lexicographic order of the integer lattice."""

    num_states: int
    resolution: int
    lattice: np.ndarray = field(repr=False)

    @property
    def points(self) -> np.ndarray:
        return self.lattice / self.resolution

    @property
    def size(self) -> int:
        return self.lattice.shape[0]

    def __len__(self):
        return self.size

    def __eq__(self, other):
        if not isinstance(other, SimplexGrid):
            return NotImplemented
        return (self.num_states, self.resolution) == (other.num_states, other.resolution)

    def __hash__(self):
        return hash((self.num_states, self.resolution))

    @cached_property
    def _index(self) -> dict:
        return {tuple(int(v) for v in row): i for i, row in enumerate(self.lattice)}

    @cached_property
    def _tree(self) -> cKDTree:
        return cKDTree(self.points)

    def index_of(self, lattice_point) -> int:
        return self._index[tuple(int(v) for v in lattice_point)]

    def nearest(self, beliefs) -> np.ndarray:
        """Index of the nearest grid point (Euclidean) for each belief; ties go to the smaller index."""
        beliefs = np.atleast_2d(np.asarray(beliefs, dtype=float))
        if beliefs.shape[1] != self.num_states:
            raise GridMismatch(
                f"belief dimension {beliefs.shape[1]} does not match grid over {self.num_states} states"
            )
        if self.num_states == 2:
            # index k sits at first coordinate k/R; exact halves round down
            pos = beliefs[:, 0] * self.resolution
            idx = np.ceil(pos - 0.5 - TIE_TOL)
            return np.clip(idx, 0, self.resolution).astype(int)
        k = min(self.size, 2 * self.num_states + 2)
        dist, idx = self._tree.query(beliefs, k=k)
        dist = np.atleast_2d(dist)
        idx = np.atleast_2d(idx)
        tied = dist <= dist[:, :1] + TIE_TOL
        return np.where(tied, idx, np.iinfo(np.int64).max).min(axis=1)

    def check_same(self, other: "SimplexGrid") -> None:
        if self != other:
            raise GridMismatch(
                f"grid ({self.num_states}, R={self.resolution}) vs ({other.num_states}, R={other.resolution})"
            )


def grid_size(num_states: int, resolution: int) -> int:
    return comb(resolution + num_states - 1, num_states - 1)


@lru_cache(maxsize=32)
def build_grid(num_states: int, resolution: int, cap: int = DEFAULT_POINT_CAP) -> SimplexGrid:
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    if num_states < 1:
        raise ValueError("num_states must be >= 1")
    n = grid_size(num_states, resolution)
    if n > cap:
        raise ResolutionTooLarge(f"{n} grid points exceeds cap {cap}")
    lattice = np.array(list(_compositions(resolution, num_states)), dtype=np.int64)
    lattice.setflags(write=False)
    return SimplexGrid(num_states, resolution, lattice)


@dataclass(frozen=True, eq=False)
class Region:
    """A set of grid points, stored as a read-only boolean mask over the grid."""

    grid: SimplexGrid
    mask: np.ndarray = field(repr=False)

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)
        if mask.shape != (self.grid.size,):
            raise GridMismatch(f"mask of shape {mask.shape} for grid of {self.grid.size} points")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def empty(cls, grid: SimplexGrid) -> "Region":
        return cls(grid, np.zeros(grid.size, dtype=bool))

    @classmethod
    def full(cls, grid: SimplexGrid) -> "Region":
        return cls(grid, np.ones(grid.size, dtype=bool))

    @classmethod
    def from_indices(cls, grid: SimplexGrid, indices: Iterable[int]) -> "Region":
        mask = np.zeros(grid.size, dtype=bool)
        mask[list(indices)] = True
        return cls(grid, mask)

    @classmethod
    def band(cls, grid: SimplexGrid, lo: float, hi: float, coord: int = 0) -> "Region":
        """Grid points whose ``coord``-th coordinate lies in [lo, hi]."""
        x = grid.points[:, coord]
        return cls(grid, (x >= lo - TIE_TOL) & (x <= hi + TIE_TOL))

    @property
    def members(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def __len__(self):
        return int(self.mask.sum())

    def __bool__(self):
        return bool(self.mask.any())

    def contains(self, belief) -> bool:
        idx = self.grid.nearest(as_belief(belief, self.grid.num_states))[0]
        return bool(self.mask[idx])

    def contains_batch(self, beliefs) -> np.ndarray:
        return self.mask[self.grid.nearest(beliefs)]

    def _other(self, other: "Region") -> np.ndarray:
        if not isinstance(other, Region):
            raise TypeError(f"expected Region, got {type(other).__name__}")
        self.grid.check_same(other.grid)
        return other.mask

    def __or__(self, other):
        return Region(self.grid, self.mask | self._other(other))

    def __and__(self, other):
        return Region(self.grid, self.mask & self._other(other))

    def __sub__(self, other):
        return Region(self.grid, self.mask & ~self._other(other))

    def __le__(self, other):
        return bool(np.all(~self.mask | self._other(other)))

    def __ge__(self, other):
        return other <= self

    def __eq__(self, other):
        if not isinstance(other, Region):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash((self.grid, self.mask.tobytes()))

    union = __or__
    intersection = __and__
    difference = __sub__
    issubset = __le__

    def violations_of_subset(self, other: "Region") -> np.ndarray:
        """Indices in ``self`` missing from ``other``."""
        return np.flatnonzero(self.mask & ~self._other(other))

    def runs(self, coord: int = 0) -> list:
        """Contiguous member runs along the grid order, as (lo, hi) coordinate pairs."""
        out = []
        pts = self.grid.points[:, coord]
        start = None
        for i, m in enumerate(self.mask):
            if m and start is None:
                start = i
            if not m and start is not None:
                out.append((float(pts[start]), float(pts[i - 1])))
                start = None
        if start is not None:
            out.append((float(pts[start]), float(pts[-1])))
        return out

    def to_csv(self, label: str | None = None) -> str:
        buf = io.StringIO()
        write_region_rows(csv.writer(buf, lineterminator="\n"), self, label, header=True)
        return buf.getvalue()


def _coord_header(num_states: int) -> list:
    return [f"x{i}" for i in range(num_states)]


def write_region_rows(writer, region: Region, label=None, header=False) -> None:
    if header:
        writer.writerow((["label"] if label is not None else []) + _coord_header(region.grid.num_states) + ["member"])
    pts = region.grid.points
    for i in range(region.grid.size):
        row = [repr(float(v)) for v in pts[i]] + [int(region.mask[i])]
        writer.writerow(([label] if label is not None else []) + row)


def _grid_from_rows(coords: np.ndarray) -> SimplexGrid:
    num_states = coords.shape[1]
    n = coords.shape[0]
    resolution = 1
    while grid_size(num_states, resolution) < n:
        resolution += 1
    if grid_size(num_states, resolution) != n:
        raise GridMismatch(f"{n} rows is not a simplex grid over {num_states} states")
    grid = build_grid(num_states, resolution)
    if not np.allclose(grid.points, coords, atol=1e-12, rtol=0):
        raise GridMismatch("CSV coordinates do not match the canonical grid order")
    return grid


def read_regions_csv(text: str) -> dict:
    """Parse region CSV text into {label: Region}; an unlabelled file maps under key None."""
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], [r for r in rows[1:] if r]
    labelled = header[0] == "label"
    groups: dict = {}
    for r in body:
        key = r[0] if labelled else None
        groups.setdefault(key, []).append(r[1:] if labelled else r)
    out = {}
    for key, rs in groups.items():
        coords = np.array([[float(v) for v in r[:-1]] for r in rs])
        member = np.array([int(r[-1]) for r in rs], dtype=bool)
        out[key] = Region(_grid_from_rows(coords), member)
    return out


def read_region_csv(path) -> Region:
    regions = read_regions_csv(Path(path).read_text())
    if len(regions) != 1:
        raise ValueError(f"{path} holds {len(regions)} regions, expected one")
    return next(iter(regions.values()))


def flag_update(s: int, a1: int, a2: int) -> int:
    """Sharing status after a step: stays 1 only while both agents keep sharing."""
    return int(s == 1 and a1 == 1 and a2 == 1)


def cgt_action(s: int, belief, own_region: Region) -> int:
    """Constrained grim trigger: share iff no deviation so far and the belief is in the region."""
    if s != 1:
        return 0
    return int(own_region.contains(belief))


def cgt_actions_batch(s: np.ndarray, beliefs: np.ndarray, own_region: Region) -> np.ndarray:
    return ((np.asarray(s) == 1) & own_region.contains_batch(beliefs)).astype(int)


def random_region(grid: SimplexGrid, rng: np.random.Generator, density: float = 0.5) -> Region:
    return Region(grid, rng.random(grid.size) < density)

