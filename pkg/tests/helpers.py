"""Shared fixtures: the notched, holed planar domain and a five-level PCR function on a 9x7 box."""

import numpy as np

from rectrof.geometry import RectPolytope, box
from rectrof.pcr import PcrPieces

NOTCHED_BOXES = [
    [[0, 6], [0, 1]],
    [[0, 2], [1, 2]],
    [[4, 6], [1, 2]],
    [[0, 6], [2, 3]],
    [[3, 6], [3, 4]],
]


def notched_domain() -> RectPolytope:
    return RectPolytope.from_boxes(NOTCHED_BOXES)


def five_level_function() -> PcrPieces:
    """Level sets painted in order, later ones on top, then made disjoint by hand."""
    dom = RectPolytope([box((0, 9), (0, 7))])
    l1 = RectPolytope([box((0, 2), (0, 3)), box((4, 5.5), (0, 3)), box((2, 4), (0, 2.5))])
    l2 = RectPolytope([box((6, 9), (0, 3)), box((7.5, 9), (3, 6))])
    l3 = RectPolytope([
        box((0, 2), (3, 7)), box((2, 4), (5, 7)), box((4, 5.5), (3, 7)),
        box((5.5, 6), (4, 7)), box((6, 7.5), (3, 7)), box((7.5, 9), (6, 7)),
    ])
    l4 = RectPolytope([box((2, 4), (2.5, 5))])
    l5 = RectPolytope([box((5.5, 6), (0, 4))])
    return PcrPieces([(l1, 1.0), (l2, 2.0), (l3, 3.0), (l4, 4.0), (l5, 5.0)], dom)


def voxel_tv(u, h: float) -> float:
    """Anisotropic TV by forward differences on a uniform voxel grid of spacing ``h``.

    The voxel grid must refine the partition; voxels outside the domain are
    excluded and no difference is taken across them.
    """
    lo, hi = u.domain.bounds
    n = u.partition.dim
    axes = [np.arange(a + h / 2, b, h) for a, b in zip(lo, hi)]
    mids = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    shape = tuple(len(a) for a in axes)
    k = u.partition.locate(mids).reshape(shape)
    vals = np.where(k >= 0, u.values[np.maximum(k, 0)], np.nan).reshape(shape)
    total = 0.0
    for i in range(n):
        d = np.abs(np.diff(vals, axis=i))
        total += float(np.nansum(d)) * h ** (n - 1)
    return total
