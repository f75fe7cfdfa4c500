"""Membership in the sets of PCR subgradients and the dual fields behind them.

An axis component ``g_i`` (PCR on a grid containing ``G(domain)``) belongs to
the axis-i set when, along every fiber interval ``(a, b)`` of every line
parallel to axis i, the running integral ``int_a^s g_i`` stays within
``[-bound, bound]`` and the full integral vanishes. Because ``g_i`` is
constant on cells, running integrals are piecewise affine in ``s``; checking
them at cell breakpoints is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import Grid, Partition, RectPolytope
from .pcr import DEFAULT_QUADRATURE_DEPTH, PcrFunction, SampledField, average


@dataclass
class AxisComponent:
    axis: int
    g: PcrFunction

    def __post_init__(self):
        if not 0 <= self.axis < self.g.partition.dim:
            raise ValueError(f"axis {self.axis} out of range for dimension {self.g.partition.dim}")


@dataclass
class GammaElement:
    """A sum of per-axis components with a common grid and bound ``alpha``."""

    components: list[AxisComponent]
    bound: float = 1.0

    def __post_init__(self):
        if self.bound <= 0:
            raise ValueError("bound must be positive")
        grids = {c.g.grid for c in self.components}
        if len(grids) > 1:
            raise ValueError("all components must share one grid")

    @classmethod
    def zero(cls, partition: Partition, bound: float = 1.0) -> "GammaElement":
        return cls(
            [AxisComponent(i, PcrFunction.constant(partition, 0.0)) for i in range(partition.dim)],
            bound,
        )

    @property
    def partition(self) -> Partition:
        return self.components[0].g.partition

    def total(self) -> PcrFunction:
        vals = np.zeros(len(self.partition))
        for c in self.components:
            vals = vals + c.g.values
        return PcrFunction(self.partition, vals)

    def scale(self, lam: float) -> "GammaElement":
        return GammaElement(
            [AxisComponent(c.axis, c.g * lam) for c in self.components], self.bound * lam
        )


@dataclass
class AxisReport:
    axis: int
    passed: bool
    worst_partial: float
    worst_endpoint: float
    bound: float
    tol: float
    worst_cell: int = -1


@dataclass
class GammaReport:
    passed: bool
    components: list[AxisReport] = field(default_factory=list)
    failing_axis: int | None = None

    @property
    def worst_partial(self) -> float:
        return max((r.worst_partial for r in self.components), default=0.0)

    @property
    def worst_endpoint(self) -> float:
        return max((r.worst_endpoint for r in self.components), default=0.0)


def fiber_runs(partition: Partition, axis: int) -> list[np.ndarray]:
    """Cell indices of every fiber parallel to ``axis``, ordered along the axis.

    One run per maximal chain of consecutive occupied grid boxes in a grid
    column; this enumerates one representative per transverse cell shadow.
    """
    L = np.moveaxis(partition.lookup, axis, -1)
    rows = L.reshape(-1, L.shape[-1])
    runs = []
    for row in rows:
        occ = row >= 0
        if not occ.any():
            continue
        edges = np.diff(np.concatenate([[0], occ.astype(np.int8), [0]]))
        starts = np.nonzero(edges == 1)[0]
        stops = np.nonzero(edges == -1)[0]
        for a, b in zip(starts, stops):
            runs.append(row[a:b])
    return runs


def _running_integrals(c: AxisComponent) -> tuple[list[np.ndarray], list[np.ndarray]]:
    part = c.g.partition
    length = part.hi[:, c.axis] - part.lo[:, c.axis]
    runs = fiber_runs(part, c.axis)
    return runs, [np.cumsum(c.g.values[r] * length[r]) for r in runs]


def check_axis_membership(
    c: AxisComponent, domain: RectPolytope, bound: float, tol: float = 0.0
) -> AxisReport:
    """Exact breakpoint check of the running-integral conditions on every fiber."""
    if tol < 0:
        raise ValueError("tol must be non-negative")
    if not c.g.domain.same_set(domain):
        raise ValueError("component is defined on a different domain")
    runs, sums = _running_integrals(c)
    worst_p, worst_e, worst_cell = 0.0, 0.0, -1
    for r, s in zip(runs, sums):
        k = int(np.argmax(np.abs(s)))
        if abs(s[k]) > worst_p:
            worst_p, worst_cell = float(abs(s[k])), int(r[k])
        worst_e = max(worst_e, float(abs(s[-1])))
    passed = worst_p <= bound + tol and worst_e <= tol
    return AxisReport(c.axis, passed, worst_p, worst_e, float(bound), float(tol), worst_cell)


def check_gamma(e: GammaElement, domain: RectPolytope, tol: float = 0.0) -> GammaReport:
    reports = [check_axis_membership(c, domain, e.bound, tol) for c in e.components]
    failing = next((r.axis for r in reports if not r.passed), None)
    return GammaReport(failing is None, reports, failing)


class DualField:
    """Piecewise affine vector field built from the running integrals of a Gamma element.

    On each cell, ``H_i(x) = start_i + slope_i * (x_i - lo_i)`` where
    ``slope_i`` is the axis-i component value and ``start_i`` is the running
    integral up to the cell's lower axis-i face.
    """

    def __init__(self, partition: Partition, starts: np.ndarray, slopes: np.ndarray, bound: float):
        self.partition = partition
        self.starts = starts  # (n, N)
        self.slopes = slopes  # (n, N)
        self.bound = bound

    @property
    def dim(self) -> int:
        return self.partition.dim

    def evaluate(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        k = self.partition.locate(pts)
        inside = k >= 0
        k = np.maximum(k, 0)
        lo = self.partition.lo[k]
        H = self.starts[:, k].T + self.slopes[:, k].T * (pts - lo)
        H[~inside] = 0.0
        return H

    def corner_values(self) -> tuple[np.ndarray, np.ndarray]:
        """``H_i`` at the lower and upper axis-i face of every cell, shape ``(n, N)``."""
        length = (self.partition.hi - self.partition.lo).T
        return self.starts, self.starts + self.slopes * length

    def max_abs(self) -> float:
        lo, hi = self.corner_values()
        return float(max(np.abs(lo).max(initial=0.0), np.abs(hi).max(initial=0.0)))

    def derivative(self, axis: int) -> PcrFunction:
        """Cellwise ``dH_axis / dx_axis``."""
        return PcrFunction(self.partition, self.slopes[axis].copy())


def build_dual_field(e: GammaElement, domain: RectPolytope, tol: float = 0.0) -> DualField:
    report = check_gamma(e, domain, tol)
    if not report.passed:
        raise ValueError(
            f"element fails membership on axis {report.failing_axis} "
            f"(worst partial {report.worst_partial:.3g}, endpoint {report.worst_endpoint:.3g})"
        )
    part = e.partition
    n, N = part.dim, len(part)
    starts = np.zeros((n, N))
    slopes = np.zeros((n, N))
    for c in e.components:
        runs, sums = _running_integrals(c)
        for r, s in zip(runs, sums):
            starts[c.axis, r] += np.concatenate([[0.0], s[:-1]])
        slopes[c.axis] += c.g.values
    return DualField(part, starts, slopes, e.bound)


@dataclass
class PolynomialBump:
    """``coef * prod_j phi_j(x_j)`` with ``phi(t) = ((t-a)(b-t))^2 / ((b-a)/2)^4`` on ``[a, b]``."""

    lo: np.ndarray
    hi: np.ndarray
    coef: float = 1.0

    def __post_init__(self):
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        if np.any(self.hi <= self.lo):
            raise ValueError("bump support must be a proper box")

    def _factors(self, pts):
        a, b = self.lo, self.hi
        half4 = ((b - a) / 2.0) ** 4
        t = pts
        inside = (t > a) & (t < b)
        p = (t - a) * (b - t)
        phi = np.where(inside, p * p / half4, 0.0)
        dphi = np.where(inside, 2.0 * p * (a + b - 2.0 * t) / half4, 0.0)
        return phi, dphi

    def value(self, pts: np.ndarray) -> np.ndarray:
        phi, _ = self._factors(pts)
        return self.coef * np.prod(phi, axis=1)

    def partial(self, pts: np.ndarray, axis: int) -> np.ndarray:
        phi, dphi = self._factors(pts)
        phi = phi.copy()
        phi[:, axis] = dphi[:, axis]
        return self.coef * np.prod(phi, axis=1)


@dataclass
class SmoothFieldSpec:
    """Vector field with per-axis components and their axis derivatives.

    ``components[i]`` and ``derivatives[i]`` map ``(m, n)`` points to ``(m,)``
    values of ``H_i`` and ``dH_i/dx_i``.
    """

    components: Sequence[Callable[[np.ndarray], np.ndarray]]
    derivatives: Sequence[Callable[[np.ndarray], np.ndarray]]
    support: RectPolytope | None
    bound: float
    breakpoints: Sequence[Sequence[float]] | None = None

    @classmethod
    def from_bumps(
        cls, bumps: Sequence[Sequence[PolynomialBump]], bound: float, support: RectPolytope | None = None
    ) -> "SmoothFieldSpec":
        """Component ``i`` is the sum of ``bumps[i]``."""

        def comp(bs):
            return lambda x: sum((b.value(x) for b in bs), np.zeros(len(x)))

        def deriv(bs, i):
            return lambda x: sum((b.partial(x, i) for b in bs), np.zeros(len(x)))

        n = len(bumps)
        bps = [sorted({float(x) for bs in bumps for b in bs for x in (b.lo[i], b.hi[i])}) for i in range(n)]
        return cls(
            [comp(bs) for bs in bumps],
            [deriv(bs, i) for i, bs in enumerate(bumps)],
            support,
            float(bound),
            bps,
        )

    @property
    def dim(self) -> int:
        return len(self.components)

    def sup_norm(self, points: np.ndarray) -> float:
        return float(max(np.abs(h(points)).max(initial=0.0) for h in self.components))

    def check_bound(self, points: np.ndarray, tol: float = 1e-9) -> bool:
        return self.sup_norm(points) <= self.bound + tol


def averaged_divergence(
    H: SmoothFieldSpec,
    grid: Grid,
    domain: RectPolytope,
    quadrature_depth: int = DEFAULT_QUADRATURE_DEPTH,
    rule: str | None = None,
) -> GammaElement:
    """Components ``g_i = A_G(dH_i/dx_i)`` with the field's bound.

    ``rule=None`` picks breakpoint-aligned Gauss quadrature when the field
    declares its breakpoints and the midpoint rule otherwise.
    """
    if rule is None:
        rule = "gauss" if H.breakpoints is not None else "midpoint"
    comps = []
    part = None
    for i, d in enumerate(H.derivatives):
        field_ = SampledField(d, quadrature_depth, rule=rule, breakpoints=H.breakpoints)
        g = average(field_, grid, domain)
        part = part or g.partition
        comps.append(AxisComponent(i, PcrFunction(part, g.values)))
    return GammaElement(comps, H.bound)
