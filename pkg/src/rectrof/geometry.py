"""Rectilinear polytopes, grids, partitions, fibers and faces.

All predicates compare input coordinates exactly. Grids only ever hold
coordinates copied from input data (or produced by :func:`refine`-style
helpers that keep the originals), so no epsilon tests are needed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np


@dataclass(frozen=True)
class Interval:
    """Proper open interval ``(lo, hi)``."""

    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError(f"interval bounds must be finite, got ({lo}, {hi})")
        if not lo < hi:
            raise ValueError(
                f"interval ({lo}, {hi}) is not proper: hyperrectangle sides "
                "must be neither empty nor a singleton"
            )
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def __contains__(self, x) -> bool:
        return self.lo < x < self.hi


@dataclass(frozen=True)
class HyperRect:
    """Axis-aligned box, the Cartesian product of ``sides``."""

    sides: tuple[Interval, ...]

    def __post_init__(self):
        sides = tuple(s if isinstance(s, Interval) else Interval(*s) for s in self.sides)
        if len(sides) < 1:
            raise ValueError("a hyperrectangle needs at least one side")
        object.__setattr__(self, "sides", sides)

    @classmethod
    def from_bounds(cls, lo: Sequence[float], hi: Sequence[float]) -> "HyperRect":
        if len(lo) != len(hi):
            raise ValueError("lower and upper corners differ in dimension")
        return cls(tuple(Interval(a, b) for a, b in zip(lo, hi)))

    @property
    def dim(self) -> int:
        return len(self.sides)

    @property
    def lo(self) -> np.ndarray:
        return np.array([s.lo for s in self.sides])

    @property
    def hi(self) -> np.ndarray:
        return np.array([s.hi for s in self.sides])

    @property
    def volume(self) -> float:
        return float(np.prod([s.length for s in self.sides]))

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def as_pairs(self) -> list[list[float]]:
        return [[s.lo, s.hi] for s in self.sides]


def box(*pairs) -> HyperRect:
    """Shorthand: ``box((0, 1), (0, 2))`` is ``[0,1] x [0,2]``."""
    return HyperRect(tuple(Interval(*p) for p in pairs))


class _Raster:
    """Occupancy of a polytope on a per-axis coordinate refinement.

    ``mask[k_0, ..., k_{n-1}]`` is true iff the open elementary box
    ``prod_i (coords[i][k_i], coords[i][k_i + 1])`` lies in the polytope.
    """

    def __init__(self, coords: tuple[np.ndarray, ...], mask: np.ndarray):
        self.coords = coords
        self.mask = mask

    @property
    def dim(self) -> int:
        return len(self.coords)

    def cell_volumes(self) -> np.ndarray:
        vol = np.ones(())
        for c in self.coords:
            vol = np.multiply.outer(vol, np.diff(c))
        return vol

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Membership in the open polytope (interior of the union of closed boxes).

        A point lying on one or more grid planes is inside iff every
        elementary box whose closure contains it is occupied.
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        m = pts.shape[0]
        left, right = [], []
        for i, c in enumerate(self.coords):
            x = pts[:, i]
            left.append(np.searchsorted(c, x, side="left") - 1)
            right.append(np.searchsorted(c, x, side="right") - 1)
        inside = np.ones(m, dtype=bool)
        shape = self.mask.shape
        for choice in itertools.product((0, 1), repeat=self.dim):
            idx = []
            ok = np.ones(m, dtype=bool)
            for i, side in enumerate(choice):
                k = left[i] if side == 0 else right[i]
                ok &= (k >= 0) & (k < shape[i])
                idx.append(np.clip(k, 0, shape[i] - 1))
            inside &= ok & self.mask[tuple(idx)]
        return inside


class RectPolytope:
    """Finite union of axis-aligned hyperrectangles of a common dimension.

    The stored ``pieces`` are the input boxes. :meth:`canonical` returns an
    equivalent polytope whose pieces have pairwise disjoint interiors: the
    elementary boxes of the sweep subdivision along all piece planes.
    """

    def __init__(self, pieces: Iterable[HyperRect]):
        pieces = tuple(p if isinstance(p, HyperRect) else HyperRect(p) for p in pieces)
        if not pieces:
            raise ValueError("a rectilinear polytope needs at least one box")
        dims = {p.dim for p in pieces}
        if len(dims) != 1:
            raise ValueError(f"boxes of mixed dimension {sorted(dims)}")
        self.pieces = pieces
        self.dim = dims.pop()

    @classmethod
    def from_boxes(cls, boxes) -> "RectPolytope":
        """Build from nested lists ``[[[lo, hi], ...], ...]``."""
        return cls(box(*b) for b in boxes)

    def __repr__(self):
        return f"RectPolytope(dim={self.dim}, pieces={len(self.pieces)})"

    @cached_property
    def _raster(self) -> _Raster:
        coords = tuple(
            np.unique(np.concatenate([[p.sides[i].lo, p.sides[i].hi] for p in self.pieces]))
            for i in range(self.dim)
        )
        return self._raster_on(coords)

    def _raster_on(self, coords: tuple[np.ndarray, ...]) -> _Raster:
        # coords must contain every piece bound
        mask = np.zeros(tuple(len(c) - 1 for c in coords), dtype=bool)
        for p in self.pieces:
            sl = []
            for i, s in enumerate(p.sides):
                a = int(np.searchsorted(coords[i], s.lo))
                b = int(np.searchsorted(coords[i], s.hi))
                sl.append(slice(a, b))
            mask[tuple(sl)] = True
        return _Raster(coords, mask)

    def canonical(self) -> "RectPolytope":
        r = self._raster
        boxes = []
        for k in zip(*np.nonzero(r.mask)):
            boxes.append(HyperRect.from_bounds(
                [r.coords[i][k[i]] for i in range(self.dim)],
                [r.coords[i][k[i] + 1] for i in range(self.dim)],
            ))
        out = RectPolytope(boxes)
        out.__dict__["_raster"] = r
        return out

    @property
    def volume(self) -> float:
        r = self._raster
        return float(np.sum(r.cell_volumes()[r.mask]))

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        r = self._raster
        return np.array([c[0] for c in r.coords]), np.array([c[-1] for c in r.coords])

    def contains(self, points) -> np.ndarray:
        """Vectorized membership test for the open polytope."""
        return self._raster.contains(points)

    def same_set(self, other: "RectPolytope") -> bool:
        if self.dim != other.dim:
            return False
        coords = tuple(
            np.union1d(a, b) for a, b in zip(self._raster.coords, other._raster.coords)
        )
        return bool(np.array_equal(self._raster_on(coords).mask, other._raster_on(coords).mask))

    def is_subset_of(self, other: "RectPolytope") -> bool:
        coords = tuple(
            np.union1d(a, b) for a, b in zip(self._raster.coords, other._raster.coords)
        )
        mine = self._raster_on(coords).mask
        return bool(np.all(other._raster_on(coords).mask[mine]))


@dataclass(frozen=True)
class Grid:
    """Per-axis sorted, duplicate-free hyperplane coordinates."""

    planes: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        planes = tuple(tuple(float(x) for x in axis) for axis in self.planes)
        for i, axis in enumerate(planes):
            if any(not np.isfinite(x) for x in axis):
                raise ValueError(f"non-finite plane on axis {i}")
            if any(b <= a for a, b in zip(axis, axis[1:])):
                raise ValueError(f"planes on axis {i} must be strictly increasing: {axis}")
        object.__setattr__(self, "planes", planes)

    @classmethod
    def from_iterables(cls, planes) -> "Grid":
        return cls(tuple(tuple(sorted(set(float(x) for x in axis))) for axis in planes))

    @property
    def dim(self) -> int:
        return len(self.planes)

    def arrays(self) -> tuple[np.ndarray, ...]:
        return tuple(np.array(p, dtype=float) for p in self.planes)

    def contains(self, other: "Grid") -> bool:
        """True iff every plane of ``other`` is a plane of this grid."""
        if other.dim != self.dim:
            return False
        return all(set(b) <= set(a) for a, b in zip(self.planes, other.planes))

    def __repr__(self):
        return f"Grid({self.planes})"


def boundary_grid(P: RectPolytope) -> Grid:
    """The smallest grid whose planes cover the boundary of ``P``.

    A plane ``x_i = c`` is kept iff occupancy changes across it somewhere,
    i.e. iff it carries a boundary facet of positive measure.
    """
    r = P._raster
    planes = []
    for i in range(P.dim):
        pad = [(0, 0)] * P.dim
        pad[i] = (1, 1)
        m = np.pad(r.mask, pad, constant_values=False).astype(np.int8)
        change = np.diff(m, axis=i) != 0
        other = tuple(j for j in range(P.dim) if j != i)
        hit = np.any(change, axis=other) if other else change
        planes.append(tuple(float(x) for x in r.coords[i][np.nonzero(hit)[0]]))
    return Grid(tuple(planes))


def union_grids(a: Grid, b: Grid) -> Grid:
    if a.dim != b.dim:
        raise ValueError(f"grid dimensions differ: {a.dim} != {b.dim}")
    return Grid(tuple(tuple(sorted(set(x) | set(y))) for x, y in zip(a.planes, b.planes)))


class Face(NamedTuple):
    cell_a: int
    cell_b: int
    axis: int
    measure: float


class Partition:
    """Cells of a domain cut out by a grid containing the domain's boundary grid.

    Cells are the open grid boxes whose midpoints lie in the domain, indexed
    in lexicographic order of their lower corners.

    Attributes:
        domain: the partitioned polytope.
        grid: the cutting grid.
        lookup: int array over all grid boxes, cell index or -1 outside.
        index: ``(N, n)`` grid-box multi-index of each cell.
        lo, hi: ``(N, n)`` cell corners.
        volumes: ``(N,)`` cell volumes.
    """

    def __init__(self, domain: RectPolytope, grid: Grid, lookup: np.ndarray):
        self.domain = domain
        self.grid = grid
        self.lookup = lookup
        self.index = np.argwhere(lookup >= 0)
        coords = grid.arrays()
        self.lo = np.stack([coords[i][self.index[:, i]] for i in range(grid.dim)], axis=1)
        self.hi = np.stack([coords[i][self.index[:, i] + 1] for i in range(grid.dim)], axis=1)
        self.volumes = np.prod(self.hi - self.lo, axis=1)

    def __len__(self):
        return len(self.index)

    def __repr__(self):
        return f"Partition(cells={len(self)}, grid={self.grid})"

    @property
    def dim(self) -> int:
        return self.grid.dim

    @property
    def cells(self) -> list[HyperRect]:
        return [HyperRect.from_bounds(a, b) for a, b in zip(self.lo, self.hi)]

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def locate(self, points) -> np.ndarray:
        """Cell index of each point (-1 outside or on a grid plane)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        coords = self.grid.arrays()
        idx = []
        ok = np.ones(len(pts), dtype=bool)
        for i, c in enumerate(coords):
            k = np.searchsorted(c, pts[:, i], side="right") - 1
            on_plane = np.isin(pts[:, i], c)
            ok &= (k >= 0) & (k < len(c) - 1) & ~on_plane
            idx.append(np.clip(k, 0, max(len(c) - 2, 0)))
        out = np.where(ok, self.lookup[tuple(idx)], -1)
        return out

    @cached_property
    def face_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Faces as parallel arrays ``(cell_a, cell_b, axis, measure)``, sorted by (a, b)."""
        a_all, b_all, ax_all = [], [], []
        for i in range(self.dim):
            L = self.lookup
            lower = np.take(L, np.arange(L.shape[i] - 1), axis=i)
            upper = np.take(L, np.arange(1, L.shape[i]), axis=i)
            both = (lower >= 0) & (upper >= 0)
            a_all.append(lower[both])
            b_all.append(upper[both])
            ax_all.append(np.full(int(both.sum()), i))
        a = np.concatenate(a_all).astype(int)
        b = np.concatenate(b_all).astype(int)
        axis = np.concatenate(ax_all).astype(int)
        lengths = self.hi - self.lo
        measure = self.volumes[a] / lengths[a, axis]
        order = np.lexsort((b, a))
        return a[order], b[order], axis[order], measure[order]


def make_partition(domain: RectPolytope, grid: Grid) -> Partition:
    """Partition ``domain`` by ``grid``; the grid must contain ``G(domain)``."""
    if grid.dim != domain.dim:
        raise ValueError(f"grid dimension {grid.dim} != domain dimension {domain.dim}")
    need = boundary_grid(domain)
    for i, (have, want) in enumerate(zip(grid.planes, need.planes)):
        missing = sorted(set(want) - set(have))
        if missing:
            raise ValueError(
                f"grid misses domain boundary plane(s) on axis {i} at {missing}"
            )
    coords = grid.arrays()
    shape = tuple(len(c) - 1 for c in coords)
    mids = np.meshgrid(*[0.5 * (c[:-1] + c[1:]) for c in coords], indexing="ij")
    pts = np.stack([m.ravel() for m in mids], axis=1)
    inside = domain.contains(pts).reshape(shape)
    lookup = np.full(shape, -1, dtype=np.int64)
    lookup[inside] = np.arange(int(inside.sum()))
    return Partition(domain, grid, lookup)


def fibers(domain: RectPolytope, axis: int, base: Sequence[float]) -> list[Interval]:
    """Maximal open intervals of the axis-``axis`` line through ``base`` inside ``domain``.

    ``base`` holds the other ``n - 1`` coordinates in axis order. Points on
    planes are classified exactly (a point is inside iff all elementary
    boxes around it are occupied).
    """
    n = domain.dim
    base = [float(x) for x in base]
    if len(base) != n - 1:
        raise ValueError(f"base needs {n - 1} coordinates, got {len(base)}")
    r = domain._raster
    c = r.coords[axis]
    # classify each open segment (c[k], c[k+1]) by its midpoint
    mids = 0.5 * (c[:-1] + c[1:])
    pts = np.empty((len(mids), n))
    pts[:, axis] = mids
    others = [j for j in range(n) if j != axis]
    for j, x in zip(others, base):
        pts[:, j] = x
    inside = r.contains(pts)
    out: list[Interval] = []
    k = 0
    while k < len(inside):
        if not inside[k]:
            k += 1
            continue
        start = k
        # junction c[k+1] is inside iff both neighbouring segments are
        while k + 1 < len(inside) and inside[k + 1]:
            k += 1
        out.append(Interval(c[start], c[k + 1]))
        k += 1
    return out


def face_adjacency(p: Partition) -> list[Face]:
    a, b, axis, measure = p.face_arrays
    return [Face(int(i), int(j), int(k), float(m)) for i, j, k, m in zip(a, b, axis, measure)]
