"""Piecewise constant functions on rectilinear grids.

A :class:`PcrPieces` is the level-set description ``f = sum_i c_i 1_{P_i}``;
a :class:`PcrFunction` holds one value per cell of a grid partition. The
averaging operator :func:`average` maps either a PCR function or a sampled
field to cell means.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .geometry import (
    Grid,
    Partition,
    RectPolytope,
    _Raster,
    boundary_grid,
    make_partition,
    union_grids,
)

DEFAULT_QUADRATURE_DEPTH = 6


class PcrPieces:
    """Level-set representation of a PCR function on ``domain``.

    Args:
        pieces: ``(polytope, value)`` pairs. Overlaps are allowed only where
            values agree; together the polytopes must cover the domain.
        domain: the open domain.

    ``normalized()`` merges equal values and splits overlaps so that the
    level sets are pairwise disjoint with pairwise distinct values.
    """

    def __init__(self, pieces: Sequence[tuple[RectPolytope, float]], domain: RectPolytope):
        if not pieces:
            raise ValueError("a PCR function needs at least one piece")
        for P, c in pieces:
            if P.dim != domain.dim:
                raise ValueError("piece and domain dimensions differ")
            if not np.isfinite(c):
                raise ValueError(f"non-finite piece value {c}")
        self.pieces = [(P, float(c)) for P, c in pieces]
        self.domain = domain
        self._raster_values = self._rasterize()

    def _rasterize(self) -> tuple[tuple[np.ndarray, ...], np.ndarray]:
        n = self.domain.dim
        coords = tuple(
            np.unique(np.concatenate(
                [self.domain._raster.coords[i]] + [P._raster.coords[i] for P, _ in self.pieces]
            ))
            for i in range(n)
        )
        dom = self.domain._raster_on(coords).mask
        values = np.full(dom.shape, np.nan)
        for P, c in self.pieces:
            m = P._raster_on(coords).mask
            if np.any(m & ~dom):
                raise ValueError(f"piece with value {c} extends outside the domain")
            clash = m & ~np.isnan(values) & (values != c)
            if np.any(clash):
                k = tuple(int(x[0]) for x in np.nonzero(clash))
                at = [float(coords[i][k[i]]) for i in range(n)]
                raise ValueError(
                    f"overlapping pieces with conflicting values {values[k]} and {c} "
                    f"near lower corner {at}"
                )
            values[m] = c
        if np.any(dom & np.isnan(values)):
            k = tuple(int(x[0]) for x in np.nonzero(dom & np.isnan(values)))
            at = [float(coords[i][k[i]]) for i in range(n)]
            raise ValueError(f"pieces do not cover the domain near lower corner {at}")
        return coords, values

    @property
    def dim(self) -> int:
        return self.domain.dim

    def level_sets(self) -> list[tuple[RectPolytope, float]]:
        coords, values = self._raster_values
        out = []
        for c in np.unique(values[~np.isnan(values)]):
            mask = values == c
            P = _polytope_from_mask(coords, mask)
            out.append((P, float(c)))
        return out

    def normalized(self) -> "PcrPieces":
        return PcrPieces(self.level_sets(), self.domain)

    def evaluate(self, points, strict: bool = True) -> np.ndarray:
        """Values at points (NaN outside the domain).

        With ``strict`` a point on any raster plane also gives NaN; otherwise
        it takes the value of the elementary box on its upper side, which is
        correct for interior points of cells that lie in one level set.
        """
        coords, values = self._raster_values
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        idx, ok = [], np.ones(len(pts), dtype=bool)
        for i, c in enumerate(coords):
            k = np.searchsorted(c, pts[:, i], side="right") - 1
            ok &= (k >= 0) & (k < len(c) - 1)
            if strict:
                ok &= ~np.isin(pts[:, i], c)
            idx.append(np.clip(k, 0, len(c) - 2))
        v = values[tuple(idx)]
        return np.where(ok, v, np.nan)


def _polytope_from_mask(coords, mask) -> RectPolytope:
    from .geometry import HyperRect

    boxes = [
        HyperRect.from_bounds(
            [coords[i][k[i]] for i in range(len(coords))],
            [coords[i][k[i] + 1] for i in range(len(coords))],
        )
        for k in zip(*np.nonzero(mask))
    ]
    P = RectPolytope(boxes)
    P.__dict__["_raster"] = _Raster(tuple(coords), mask.copy())
    return P


class PcrFunction:
    """One finite value per cell of ``partition``."""

    def __init__(self, partition: Partition, values):
        values = np.asarray(values, dtype=float).ravel()
        if values.shape != (len(partition),):
            raise ValueError(
                f"expected {len(partition)} cell values, got {values.shape[0]}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("PCR function values must be finite")
        self.partition = partition
        self.values = values

    @classmethod
    def constant(cls, partition: Partition, c: float) -> "PcrFunction":
        return cls(partition, np.full(len(partition), float(c)))

    @property
    def grid(self) -> Grid:
        return self.partition.grid

    @property
    def domain(self) -> RectPolytope:
        return self.partition.domain

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return f"PcrFunction(cells={len(self)})"

    def with_values(self, values) -> "PcrFunction":
        return PcrFunction(self.partition, values)

    def _check_same(self, other: "PcrFunction"):
        if other.partition is not self.partition and other.grid != self.grid:
            raise ValueError("PCR functions live on different grids")

    def __add__(self, other):
        if isinstance(other, PcrFunction):
            self._check_same(other)
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, PcrFunction):
            self._check_same(other)
            return self.with_values(self.values - other.values)
        return self.with_values(self.values - other)

    def __mul__(self, s):
        return self.with_values(self.values * float(s))

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)

    def evaluate(self, points) -> np.ndarray:
        k = self.partition.locate(points)
        return np.where(k >= 0, self.values[np.maximum(k, 0)], np.nan)


@dataclass
class SampledField:
    """A pointwise-evaluable function on the domain.

    ``evaluator`` takes an ``(m, n)`` array of points and returns ``(m,)``
    values. With ``rule="midpoint"`` cell means use the tensor midpoint rule
    with ``2**quadrature_depth`` nodes per axis per cell. With
    ``rule="gauss"`` each cell is first split at ``breakpoints`` (per-axis
    coordinates where the field is not smooth) and every piece gets a tensor
    Gauss-Legendre rule of ``gauss_order`` nodes per axis; this is exact for
    fields that are polynomial of degree ``< 2 * gauss_order`` per axis
    between breakpoints.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    quadrature_depth: int = DEFAULT_QUADRATURE_DEPTH
    rule: str = "midpoint"
    breakpoints: Sequence[Sequence[float]] | None = None
    gauss_order: int = 4

    def __post_init__(self):
        if int(self.quadrature_depth) < 0:
            raise ValueError("quadrature_depth must be non-negative")
        if self.rule not in ("midpoint", "gauss"):
            raise ValueError(f"unknown quadrature rule {self.rule!r}")


def minimal_grid(f: PcrPieces) -> Grid:
    """Union of the boundary grids of the level sets of ``f``."""
    grids = [boundary_grid(P) for P, _ in f.level_sets()]
    out = grids[0]
    for g in grids[1:]:
        out = union_grids(out, g)
    return out


def resample(f: PcrPieces, grid: Grid) -> PcrFunction:
    """Represent ``f`` on the cells of ``grid`` (which must contain ``G_f``)."""
    need = minimal_grid(f)
    for i, (have, want) in enumerate(zip(grid.planes, need.planes)):
        missing = sorted(set(want) - set(have))
        if missing:
            raise ValueError(
                f"grid too coarse for the PCR function: axis {i} lacks level-set planes {missing}"
            )
    part = make_partition(f.domain, grid)
    return PcrFunction(part, f.evaluate(part.midpoints, strict=False))


def _refines(fine: Partition, coarse: Partition) -> np.ndarray:
    """Coarse cell index of each fine cell; raises unless fine refines coarse."""
    k = coarse.locate(fine.midpoints)
    if np.any(k < 0):
        raise ValueError("fine partition has cells outside the coarse domain")
    lo_ok = np.all(fine.lo >= coarse.lo[k], axis=1)
    hi_ok = np.all(fine.hi <= coarse.hi[k], axis=1)
    if not np.all(lo_ok & hi_ok):
        bad = int(np.nonzero(~(lo_ok & hi_ok))[0][0])
        raise ValueError(
            f"input grid does not refine the target grid (fine cell {bad} "
            f"[{fine.lo[bad]}, {fine.hi[bad]}] straddles a target plane)"
        )
    return k


def average(
    u: Union[SampledField, PcrFunction],
    grid: Grid,
    domain: RectPolytope | None = None,
) -> PcrFunction:
    """Averaging operator: cell means of ``u`` on the partition of ``domain`` by ``grid``.

    PCR inputs are averaged exactly by volume-weighted sub-cell means and
    must live on a refinement of ``grid``. Sampled fields use their own
    quadrature rule.
    """
    if domain is None:
        if not isinstance(u, PcrFunction):
            raise ValueError("a domain is required to average a sampled field")
        domain = u.domain
    if isinstance(u, PcrFunction):
        if u.grid == grid and u.domain is domain:
            return u.with_values(u.values.copy())
        target = make_partition(domain, grid)
        if u.grid == grid and u.domain.same_set(domain):
            return PcrFunction(target, u.values.copy())
        if not u.domain.same_set(domain):
            raise ValueError("PCR input lives on a different domain")
        k = _refines(u.partition, target)
        fine = u.partition
        mass = np.bincount(k, weights=fine.volumes * u.values, minlength=len(target))
        vol = np.bincount(k, weights=fine.volumes, minlength=len(target))
        return PcrFunction(target, mass / vol)
    if isinstance(u, SampledField):
        target = make_partition(domain, grid)
        means = _gauss_means(u, target) if u.rule == "gauss" else _midpoint_means(u, target)
        return PcrFunction(target, means)
    raise TypeError(f"cannot average {type(u).__name__}")


def _midpoint_means(u: SampledField, part: Partition, max_points: int = 1 << 21) -> np.ndarray:
    m = 1 << int(u.quadrature_depth)
    n = part.dim
    t = (np.arange(m) + 0.5) / m
    nodes = np.stack(np.meshgrid(*([t] * n), indexing="ij"), axis=-1).reshape(-1, n)
    per_cell = len(nodes)
    batch = max(1, max_points // per_cell)
    out = np.empty(len(part))
    for s in range(0, len(part), batch):
        lo = part.lo[s:s + batch]
        ext = part.hi[s:s + batch] - lo
        pts = lo[:, None, :] + nodes[None, :, :] * ext[:, None, :]
        vals = np.asarray(u.evaluator(pts.reshape(-1, n)), dtype=float).reshape(len(lo), per_cell)
        if not np.all(np.isfinite(vals)):
            raise ValueError("quadrature produced non-finite samples")
        out[s:s + batch] = vals.mean(axis=1)
    return out


def _gauss_means(u: SampledField, part: Partition) -> np.ndarray:
    n = part.dim
    x, w = np.polynomial.legendre.leggauss(int(u.gauss_order))
    x, w = 0.5 * (x + 1.0), 0.5 * w
    bps = u.breakpoints if u.breakpoints is not None else [()] * n
    bps = [np.unique(np.asarray(b, dtype=float)) for b in bps]
    out = np.empty(len(part))
    for c in range(len(part)):
        nodes, weights = [], []
        for i in range(n):
            a, b = part.lo[c, i], part.hi[c, i]
            cuts = bps[i][(bps[i] > a) & (bps[i] < b)]
            ends = np.concatenate([[a], cuts, [b]])
            h = np.diff(ends)
            nodes.append((ends[:-1, None] + h[:, None] * x[None, :]).ravel())
            weights.append((h[:, None] * w[None, :]).ravel())
        pts = np.stack(np.meshgrid(*nodes, indexing="ij"), axis=-1).reshape(-1, n)
        wt = weights[0]
        for wi in weights[1:]:
            wt = np.multiply.outer(wt, wi)
        vals = np.asarray(u.evaluator(pts), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError("quadrature produced non-finite samples")
        out[c] = np.dot(wt.ravel(), vals) / part.volumes[c]
    return out


def tv_pcr(u: PcrFunction) -> float:
    """Anisotropic total variation: sum over faces of measure times |jump|."""
    a, b, _, measure = u.partition.face_arrays
    if len(a) == 0:
        return 0.0
    return float(np.sum(measure * np.abs(u.values[a] - u.values[b])))


def lp_norm(u: PcrFunction, p) -> float:
    """Volume-weighted L^p norm for p in {1, 2, inf}."""
    v = np.abs(u.values)
    if p == np.inf or p == "inf":
        return float(v.max()) if len(v) else 0.0
    p = float(p)
    if p < 1:
        raise ValueError("p must be >= 1")
    return float(np.sum(u.partition.volumes * v**p) ** (1.0 / p))
