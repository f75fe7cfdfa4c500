"""Seeded generators of random domains, PCR data, grids and bump fields.

Domains use small integer coordinates so every plane is exactly
representable. Non-convex shapes (L-shapes, holes, 3-D brackets) are part
of the default mix.
"""

from __future__ import annotations

import itertools

import numpy as np

from .geometry import Grid, HyperRect, RectPolytope, boundary_grid, make_partition, union_grids
from .pcr import PcrFunction, PcrPieces
from .subgradient import PolynomialBump, SmoothFieldSpec

DOMAIN_KINDS = {1: ("box", "gap"), 2: ("box", "L", "hole"), 3: ("box", "L", "hole", "bracket")}


def _coords(rng: np.random.Generator, k: int, span: int = 12) -> np.ndarray:
    """``k`` sorted distinct integer coordinates in ``[0, span]``."""
    return np.sort(rng.choice(np.arange(span + 1), size=k, replace=False)).astype(float)


def random_cells(rng: np.random.Generator, n: int, kind: str, max_cells: int):
    """Grid coordinates and a boolean occupancy mask for a domain of the given kind."""
    per_axis = {1: max_cells, 2: int(np.floor(np.sqrt(max_cells))), 3: 3}[n]
    if n == 3 and max_cells < 27:
        kind = "box"
    if n == 2 and max_cells < 9:
        kind = "box"
    while True:
        sizes = rng.integers(3 if kind != "box" else 1, max(per_axis, 3) + 1, size=n)
        if n == 2 and kind != "box":
            sizes = np.maximum(sizes, 3)
        if n == 3:
            sizes = np.full(n, 3) if kind != "box" else rng.integers(1, 4, size=n)
        if np.prod(sizes) <= max_cells:
            break
    coords = [_coords(rng, int(s) + 1, span=max(12, 2 * int(s))) for s in sizes]
    mask = np.ones(tuple(int(s) for s in sizes), dtype=bool)
    if kind == "gap":
        mask[rng.integers(1, sizes[0] - 1)] = False
    elif kind == "L":
        cut = tuple(slice(int(rng.integers(1, s)), None) for s in sizes[:2])
        mask[cut] = False
    elif kind == "hole":
        ctr = tuple(slice(1, int(s) - 1) for s in sizes)
        if n == 3:
            # tunnel through axis 2 so fibers along axes 0 and 1 split
            ctr = (slice(1, 2), slice(1, 2), slice(None))
        mask[ctr] = False
    elif kind == "bracket":
        mask[1:, 1:, :] = False
        mask[1:, 0, 2:] = False
    return coords, mask


def boxes_from_mask(coords, mask) -> list[HyperRect]:
    return [
        HyperRect.from_bounds(
            [coords[i][k[i]] for i in range(len(coords))],
            [coords[i][k[i] + 1] for i in range(len(coords))],
        )
        for k in zip(*np.nonzero(mask))
    ]


def random_pcr(
    rng: np.random.Generator,
    n: int,
    kind: str | None = None,
    max_cells: int = 40,
    levels: int | None = None,
) -> PcrPieces:
    """A PCR function with a few shared levels on a random domain."""
    if kind is None:
        kind = str(rng.choice(DOMAIN_KINDS[n]))
    coords, mask = random_cells(rng, n, kind, max_cells)
    cells = boxes_from_mask(coords, mask)
    if levels is None:
        levels = int(rng.integers(2, max(3, len(cells)) + 1))
    values = np.round(rng.uniform(0.0, 10.0, size=levels), 3)
    labels = rng.integers(0, levels, size=len(cells))
    domain = RectPolytope(cells)
    pieces = [(RectPolytope([c]), float(values[l])) for c, l in zip(cells, labels)]
    return PcrPieces(pieces, domain)


def random_domain(rng: np.random.Generator, n: int, kind: str | None = None, max_cells: int = 40):
    if kind is None:
        kind = str(rng.choice(DOMAIN_KINDS[n]))
    coords, mask = random_cells(rng, n, kind, max_cells)
    return RectPolytope(boxes_from_mask(coords, mask)), coords, mask


def random_refining_grid(rng: np.random.Generator, domain: RectPolytope, extra: int = 3) -> Grid:
    """``G(domain)`` plus up to ``extra`` random planes per axis inside the bounding box."""
    base = boundary_grid(domain)
    lo, hi = domain.bounds
    planes = []
    for i in range(domain.dim):
        k = int(rng.integers(0, extra + 1))
        pts = np.round(rng.uniform(lo[i], hi[i], size=k), 4)
        pts = [float(x) for x in pts if lo[i] < x < hi[i]]
        planes.append(tuple(sorted(set(base.planes[i]) | set(pts))))
    return Grid(tuple(planes))


def random_fine_function(rng: np.random.Generator, n: int, max_cells: int = 30):
    """A random PCR function on a fine grid and a coarser grid it refines."""
    domain, _, _ = random_domain(rng, n, max_cells=max_cells)
    coarse = random_refining_grid(rng, domain, extra=2)
    fine = coarse
    for _ in range(2):
        fine = union_grids(fine, random_refining_grid(rng, domain, extra=2))
    part = make_partition(domain, fine)
    u = PcrFunction(part, rng.normal(0.0, 1.0, size=len(part)))
    return u, coarse


def random_bump_field(rng: np.random.Generator, domain: RectPolytope, bound: float) -> SmoothFieldSpec:
    """One tensor polynomial bump per axis, coefficient ``+-bound``, supported in a domain box."""
    bumps = []
    supports = []
    r = domain._raster
    for _ in range(domain.dim):
        lo, hi = _random_block(rng, r.coords, r.mask)
        u = np.sort(rng.uniform(0.0, 1.0, size=(domain.dim, 2)), axis=1)
        u[:, 0] *= 0.4
        u[:, 1] = 0.6 + 0.4 * u[:, 1]
        a = lo + u[:, 0] * (hi - lo)
        b = lo + u[:, 1] * (hi - lo)
        coef = bound if rng.random() < 0.5 else -bound
        bumps.append([PolynomialBump(a, b, coef)])
        supports.append(HyperRect.from_bounds(a, b))
    return SmoothFieldSpec.from_bumps(bumps, bound, RectPolytope(supports))


def _random_block(rng, coords, mask, tries: int = 50):
    """Corners of a random box made of occupied raster cells."""
    shape = mask.shape
    for _ in range(tries):
        a = [int(rng.integers(0, s)) for s in shape]
        b = [int(rng.integers(i + 1, s + 1)) for i, s in zip(a, shape)]
        if mask[tuple(slice(i, j) for i, j in zip(a, b))].all():
            break
    else:
        k = tuple(int(x[0]) for x in np.nonzero(mask))
        a, b = list(k), [x + 1 for x in k]
    lo = np.array([coords[i][a[i]] for i in range(len(shape))])
    hi = np.array([coords[i][b[i]] for i in range(len(shape))])
    return lo, hi


def random_chain(rng: np.random.Generator, N: int):
    v = rng.uniform(0.2, 2.0, size=N)
    f = rng.uniform(-5.0, 5.0, size=N)
    a = rng.uniform(0.2, 2.0, size=N - 1)
    return v, f, a


def random_small_graph(rng: np.random.Generator, N: int):
    """Random connected-or-not graph on ``N`` nodes from the complete edge set."""
    from .solver import CellGraph

    pairs = list(itertools.combinations(range(N), 2))
    keep = [p for p in pairs if rng.random() < 0.7] or pairs[:1]
    return CellGraph(
        rng.uniform(0.3, 2.0, size=N),
        rng.uniform(-3.0, 3.0, size=N),
        np.array(keep),
        rng.uniform(0.2, 1.5, size=len(keep)),
    )


def alpha_scale(f: PcrPieces) -> float:
    """Natural unit for alpha: value range times typical cell size."""
    from .pcr import minimal_grid, resample

    u = resample(f, minimal_grid(f))
    h = (u.partition.volumes.sum() / len(u)) ** (1.0 / f.dim)
    rng_vals = float(np.ptp(u.values))
    return max(rng_vals, 1.0) * h
