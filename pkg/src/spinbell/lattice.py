"""Lattice geometry, regions and distances.

Sites of a chain are numbered left to right; sites of a ``w x h`` grid are
numbered row by row, ``id = y * w + x``.  Distances are computed per axis so
that periodic boundaries use the minimum image.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionCapExceeded, InvalidGeometry, InvalidRegion

METRICS = ("graph", "euclidean", "chebyshev")
BOUNDARIES = ("open", "periodic")

# local_dim ** n_sites limits; dense density matrices vs. pure-state-only work
DENSE_CAP = 2**14
PURE_CAP = 2**20


@dataclass(frozen=True)
class Region:
    """A nonempty set of site ids, stored sorted."""

    sites: tuple[int, ...]

    def __init__(self, sites: Iterable[int]):
        s = tuple(sorted(int(i) for i in sites))
        if not s:
            raise InvalidRegion("region must be nonempty")
        if len(set(s)) != len(s):
            raise InvalidRegion(f"duplicate site ids in region {s}")
        if s[0] < 0:
            raise InvalidRegion(f"negative site id in region {s}")
        object.__setattr__(self, "sites", s)

    @property
    def size(self) -> int:
        return len(self.sites)

    def __len__(self):
        return len(self.sites)

    def __iter__(self):
        return iter(self.sites)

    def __contains__(self, site):
        return site in self.sites

    def union(self, other: "Region") -> "Region":
        return Region(set(self.sites) | set(other.sites))

    def isdisjoint(self, other: "Region") -> bool:
        return set(self.sites).isdisjoint(other.sites)

    def __repr__(self):
        return f"Region({list(self.sites)})"


def as_region(x) -> Region:
    if isinstance(x, Region):
        return x
    if isinstance(x, (int, np.integer)):
        return Region([int(x)])
    return Region(x)


@dataclass(frozen=True, eq=False)
class Lattice:
    """Finite chain or grid with a precomputed distance matrix."""

    shape: tuple[int, ...]
    boundary: str = "open"
    metric: str = "graph"
    local_dim: int = 2
    coords: np.ndarray = field(repr=False, default=None)
    distances: np.ndarray = field(repr=False, default=None)

    @property
    def n_sites(self) -> int:
        return len(self.coords)

    @property
    def dim(self) -> int:
        return self.local_dim**self.n_sites

    @property
    def sites(self) -> range:
        return range(self.n_sites)

    def distance(self, i: int, j: int) -> float:
        return float(self.distances[i, j])

    def check_region(self, region) -> Region:
        region = as_region(region)
        if region.sites[-1] >= self.n_sites:
            raise InvalidRegion(f"{region} has site ids outside 0..{self.n_sites - 1}")
        return region

    def diameter(self, region) -> float:
        region = self.check_region(region)
        idx = list(region.sites)
        return float(self.distances[np.ix_(idx, idx)].max())

    def neighbor_pairs(self) -> list[tuple[int, int]]:
        """Site pairs at graph distance one (nearest-neighbour bonds)."""
        g = _pairwise(self.coords, self.shape, self.boundary, "graph")
        return [(i, j) for i, j in itertools.combinations(range(self.n_sites), 2) if g[i, j] == 1]

    def to_dict(self) -> dict:
        if len(self.shape) == 1:
            geometry = {"geometry": "chain", "length": self.shape[0]}
        else:
            geometry = {"geometry": "grid", "width": self.shape[0], "height": self.shape[1]}
        return {**geometry, "boundary": self.boundary, "metric": self.metric,
                "local_dim": self.local_dim}


def _pairwise(coords, shape, boundary, metric):
    delta = np.abs(coords[:, None, :] - coords[None, :, :]).astype(float)
    if boundary == "periodic":
        extent = np.asarray(shape, dtype=float)
        delta = np.minimum(delta, extent - delta)
    if metric == "graph":
        return delta.sum(axis=-1)
    if metric == "euclidean":
        return np.sqrt((delta**2).sum(axis=-1))
    return delta.max(axis=-1)


def build_lattice(geometry, boundary="open", metric="graph", local_dim=2,
                  max_dim=PURE_CAP) -> Lattice:
    """Build a chain (``geometry=L``) or grid (``geometry=(w, h)``).

    >>> build_lattice(4).distance(0, 3)
    3.0
    """
    if isinstance(geometry, (int, np.integer)):
        shape = (int(geometry),)
    else:
        shape = tuple(int(s) for s in geometry)
    if len(shape) not in (1, 2) or min(shape) < 1:
        raise InvalidGeometry(f"expected chain length or (w, h) grid, got {geometry!r}")
    if boundary not in BOUNDARIES:
        raise InvalidGeometry(f"unknown boundary {boundary!r}")
    if metric not in METRICS:
        raise InvalidGeometry(f"unknown metric {metric!r}")
    if int(local_dim) < 2:
        raise InvalidGeometry("local_dim must be >= 2")
    local_dim = int(local_dim)
    n = int(np.prod(shape))
    if local_dim**n > max_dim:
        raise DimensionCapExceeded(f"{local_dim}^{n} exceeds dimension cap {max_dim}")

    if len(shape) == 1:
        coords = np.arange(n)[:, None]
    else:
        w, h = shape
        coords = np.array([(x, y) for y in range(h) for x in range(w)])
    dist = _pairwise(coords, shape, boundary, metric)
    dist.setflags(write=False)
    coords.setflags(write=False)
    return Lattice(shape, boundary, metric, local_dim, coords, dist)


def region_distance(lattice: Lattice, X, Y) -> float:
    """Minimum site-to-site distance between two regions."""
    X = lattice.check_region(X)
    Y = lattice.check_region(Y)
    return float(lattice.distances[np.ix_(list(X.sites), list(Y.sites))].min())


def validate_disjoint(regions: Sequence) -> bool:
    seen: set[int] = set()
    for reg in regions:
        s = set(as_region(reg).sites)
        if seen & s:
            return False
        seen |= s
    return True


def min_pairwise_distance(lattice: Lattice, regions: Sequence) -> float:
    return min(region_distance(lattice, a, b) for a, b in itertools.combinations(regions, 2))
