"""Refinement-invariance harness and seeded property suites.

If ``f`` is piecewise constant on its minimal grid ``G_f``, the ROF
minimizer is too. Solving on ``G_f`` and on any refinement of it must then
give the same function: the refined minimizer is constant on every coarse
cell and its cell means equal the coarse minimizer.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import instances
from .geometry import Grid, RectPolytope, union_grids
from .pcr import PcrPieces, average, lp_norm, minimal_grid, resample, tv_pcr
from .solver import (
    CellGraph,
    RofSolution,
    SolverConfig,
    build_graph,
    check_kkt,
    solve,
    solve_1d_taut_string,
    solve_brute_force,
)
from .subgradient import averaged_divergence, build_dual_field, check_gamma


@dataclass
class RefinementSpec:
    splits_per_axis: int | tuple[int, ...] = 2
    extra_planes: tuple[tuple[float, ...], ...] | None = None

    def splits(self, n: int) -> tuple[int, ...]:
        s = self.splits_per_axis
        s = (s,) * n if isinstance(s, int) else tuple(s)
        if len(s) != n or any(int(k) < 1 for k in s):
            raise ValueError("splits_per_axis must be positive, one per axis")
        return tuple(int(k) for k in s)


def refine(grid: Grid, spec: RefinementSpec, domain: RectPolytope | None = None) -> Grid:
    """Split each gap between consecutive planes into equal parts and merge extras.

    Original planes are kept verbatim; only the inserted ones are computed.
    """
    planes = []
    for axis, k in zip(grid.planes, spec.splits(grid.dim)):
        pts = set(axis)
        for a, b in zip(axis, axis[1:]):
            pts.update(a + (b - a) * j / k for j in range(1, k))
        planes.append(pts)
    if spec.extra_planes is not None:
        for i, extra in enumerate(spec.extra_planes):
            planes[i].update(float(x) for x in extra)
    return Grid(tuple(tuple(sorted(p)) for p in planes))


@dataclass
class TheoremReport:
    instance_id: str
    coarse: RofSolution
    refined: RofSolution
    constancy_residual: float
    agreement_residual: float
    tol: float
    coarse_cells: int
    refined_cells: int
    passed: bool
    inconclusive: bool
    averaged_norm: float = np.nan
    refined_norm: float = np.nan
    refined_dual_stationarity: float = np.nan
    error_bound: float = np.nan

    def to_record(self) -> dict:
        return {
            "instance": self.instance_id,
            "status": "INCONCLUSIVE" if self.inconclusive else ("PASS" if self.passed else "FAIL"),
            "coarse_cells": self.coarse_cells,
            "refined_cells": self.refined_cells,
            "constancy_residual": self.constancy_residual,
            "agreement_residual": self.agreement_residual,
            "tol": self.tol,
            "coarse_gap": self.coarse.gap,
            "refined_gap": self.refined.gap,
            "coarse_iterations": self.coarse.iterations,
            "refined_iterations": self.refined.iterations,
            "averaged_norm": self.averaged_norm,
            "refined_norm": self.refined_norm,
            "refined_dual_stationarity": self.refined_dual_stationarity,
            "error_bound": self.error_bound,
        }


def verify_theorem(
    f: PcrPieces,
    alpha: float,
    spec: RefinementSpec | None = None,
    tol: float = 1e-5,
    instance_id: str = "instance",
    **solver_kw,
) -> TheoremReport:
    """Solve on ``G_f`` and on its refinement and compare the minimizers."""
    spec = spec or RefinementSpec()
    gf = minimal_grid(f)
    coarse_u = resample(f, gf)
    fine_u = resample(f, refine(gf, spec, f.domain))
    cfg = SolverConfig(alpha=alpha, **solver_kw)
    g_c, g_r = build_graph(coarse_u), build_graph(fine_u)
    sol_c, sol_r = solve(g_c, cfg), solve(g_r, cfg)

    u_ref = fine_u.with_values(sol_r.u)
    k = coarse_u.partition.locate(fine_u.partition.midpoints)
    hi = np.full(len(coarse_u), -np.inf)
    lo = np.full(len(coarse_u), np.inf)
    np.maximum.at(hi, k, sol_r.u)
    np.minimum.at(lo, k, sol_r.u)
    constancy = float(np.max(hi - lo))
    avg = average(u_ref, gf, f.domain)
    agreement = float(np.max(np.abs(avg.values - sol_c.u)))

    kkt = check_kkt(g_r, sol_r, alpha, tol=np.inf)
    bound = max(sol_c.error_bound(g_c), sol_r.error_bound(g_r))
    inconclusive = not (sol_c.certified and sol_r.certified)
    passed = (not inconclusive) and constancy <= tol and agreement <= tol
    return TheoremReport(
        instance_id, sol_c, sol_r, constancy, agreement, tol, len(coarse_u), len(fine_u),
        passed, inconclusive,
        averaged_norm=lp_norm(avg, 2),
        refined_norm=lp_norm(u_ref, 2),
        refined_dual_stationarity=kkt.stationarity,
        error_bound=bound,
    )


def random_theorem_instances(seed: int, count: int):
    """Deterministic mix of 2-D and 3-D instances with alpha in {0.1, 1, 10} x scale."""
    rng = np.random.default_rng(seed)
    out = []
    for c in range(count):
        n = 2 if c % 2 == 0 else 3
        kinds = instances.DOMAIN_KINDS[n]
        kind = kinds[(c // 2) % len(kinds)]
        f = instances.random_pcr(rng, n, kind=kind, max_cells=40 if n == 2 else 27)
        factor = (0.1, 1.0, 10.0)[c % 3]
        alpha = factor * instances.alpha_scale(f)
        out.append((f"seed{seed}-{c:03d}-n{n}-{kind}-a{factor:g}", f, alpha))
    return out


# --- property suites ---------------------------------------------------------

DEFAULT_COUNTS = {
    "jensen": 50,
    "contraction": 50,
    "subgradient": 30,
    "dual_field": 10,
    "solver_brute_force": 10,
    "taut_string": 10,
    "kkt": 10,
    "monotone_alpha": 5,
}


@dataclass
class SuiteResult:
    name: str
    cases: int = 0
    failures: list = field(default_factory=list)
    worst: float = 0.0

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_record(self) -> dict:
        return {
            "suite": self.name,
            "cases": self.cases,
            "status": "PASS" if self.passed else "FAIL",
            "worst": self.worst,
            "failures": self.failures[:10],
        }


@dataclass
class PropertyReport:
    seed: int
    suites: list[SuiteResult]

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)

    def to_record(self) -> dict:
        return {
            "seed": self.seed,
            "status": "PASS" if self.passed else "FAIL",
            "suites": [s.to_record() for s in self.suites],
        }


PHIS = {"square": np.square, "abs": np.abs, "exp": np.exp}


def _suite_jensen(rng, count, res: SuiteResult, tol=1e-10):
    for c in range(count):
        u, G = instances.random_fine_function(rng, int(rng.integers(1, 4)))
        Au = average(u, G)
        for name, phi in PHIS.items():
            lhs = float(np.sum(Au.partition.volumes * phi(Au.values)))
            rhs = float(np.sum(u.partition.volumes * phi(u.values)))
            res.worst = max(res.worst, lhs - rhs)
            if lhs > rhs + tol:
                res.failures.append({"case": c, "phi": name, "excess": lhs - rhs})
        res.cases += 1


def _suite_contraction(rng, count, res: SuiteResult, tol=1e-10):
    for c in range(count):
        u, G = instances.random_fine_function(rng, int(rng.integers(1, 4)))
        Au = average(u, G)
        for p in (1, 2):
            excess = lp_norm(Au, p) - lp_norm(u, p)
            res.worst = max(res.worst, excess)
            if excess > tol:
                res.failures.append({"case": c, "p": p, "excess": excess})
        res.cases += 1


def random_gamma_case(rng, n: int, bound: float = 1.0):
    domain, _, _ = instances.random_domain(rng, n, max_cells={1: 8, 2: 25, 3: 27}[n])
    grid = instances.random_refining_grid(rng, domain, extra=3)
    H = instances.random_bump_field(rng, domain, bound)
    return domain, grid, H


def _divergence(H, grid, domain, depth):
    if depth is None:
        return averaged_divergence(H, grid, domain)
    return averaged_divergence(H, grid, domain, depth, rule="midpoint")


def _suite_subgradient(rng, count, res: SuiteResult, tol=1e-4, inject=False, depth=None):
    for c in range(count):
        n = 1 + c % 3
        domain, grid, H = random_gamma_case(rng, n, bound=float(rng.uniform(0.5, 2.0)))
        e = _divergence(H, grid, domain, depth)
        if inject:
            worst = check_gamma(e, domain).worst_partial
            if worst > 0:
                lam = 1.5 * e.bound / worst
                e = type(e)([type(x)(x.axis, x.g * lam) for x in e.components], e.bound)
        rep = check_gamma(e, domain, tol)
        res.worst = max(res.worst, rep.worst_partial / e.bound, rep.worst_endpoint)
        if not rep.passed:
            res.failures.append({
                "case": c, "n": n, "axis": rep.failing_axis,
                "worst_partial": rep.worst_partial, "bound": e.bound,
                "worst_endpoint": rep.worst_endpoint,
            })
        res.cases += 1


def _suite_dual_field(rng, count, res: SuiteResult, tol=1e-4, depth=None):
    for c in range(count):
        n = 1 + c % 3
        domain, grid, H = random_gamma_case(rng, n)
        e = _divergence(H, grid, domain, depth)
        try:
            field_ = build_dual_field(e, domain, tol)
        except ValueError as exc:
            res.failures.append({"case": c, "error": str(exc)})
            res.cases += 1
            continue
        slope_err = max(
            float(np.max(np.abs(field_.derivative(x.axis).values - x.g.values)))
            for x in e.components
        )
        over = field_.max_abs() - e.bound
        res.worst = max(res.worst, slope_err, over)
        if slope_err != 0.0 or over > tol:
            res.failures.append({"case": c, "slope_error": slope_err, "sup_excess": over})
        res.cases += 1


def _suite_brute_force(rng, count, res: SuiteResult, tol=1e-6):
    for c in range(count):
        g = instances.random_small_graph(rng, int(rng.integers(2, 5)))
        alpha = float(rng.uniform(0.05, 2.0))
        sol = solve(g, SolverConfig(alpha=alpha))
        ref = solve_brute_force(g, alpha)
        err = float(np.max(np.abs(sol.u - ref)))
        res.worst = max(res.worst, err)
        if err > tol or not sol.certified:
            res.failures.append({"case": c, "error": err, "certified": sol.certified})
        res.cases += 1


def _suite_taut_string(rng, count, res: SuiteResult, tol=1e-7):
    for c in range(count):
        v, f, a = instances.random_chain(rng, 10)
        alpha = float(rng.uniform(0.05, 3.0))
        sol = solve(CellGraph.chain(v, f, a), SolverConfig(alpha=alpha))
        ref = solve_1d_taut_string(v, f, a, alpha)
        err = float(np.max(np.abs(sol.u - ref)))
        res.worst = max(res.worst, err)
        if err > tol or not sol.certified:
            res.failures.append({"case": c, "error": err, "certified": sol.certified})
        res.cases += 1


def _suite_kkt(rng, count, res: SuiteResult, tol=1e-6):
    for c in range(count):
        f = instances.random_pcr(rng, int(rng.integers(1, 4)), max_cells=20)
        u = resample(f, minimal_grid(f))
        g = build_graph(u)
        alpha = float(rng.uniform(0.1, 3.0)) * instances.alpha_scale(f)
        sol = solve(g, SolverConfig(alpha=alpha))
        rep = check_kkt(g, sol, alpha, tol)
        res.worst = max(res.worst, rep.stationarity, rep.feasibility, rep.alignment)
        if not (rep.passed and sol.certified and sol.gap <= sol.tol_gap):
            res.failures.append({"case": c, "kkt": rep.__dict__, "gap": sol.gap})
        res.cases += 1


def _suite_monotone_alpha(rng, count, res: SuiteResult, tol=1e-7):
    for c in range(count):
        f = instances.random_pcr(rng, 2, max_cells=25)
        u = resample(f, minimal_grid(f))
        g = build_graph(u)
        s = instances.alpha_scale(f)
        tvs = []
        for alpha in sorted(rng.uniform(0.05, 5.0, size=3) * s):
            tvs.append(tv_pcr(u.with_values(solve(g, SolverConfig(alpha=alpha)).u)))
        worst = max(b - a for a, b in zip(tvs, tvs[1:]))
        res.worst = max(res.worst, worst)
        if worst > tol * (1 + tvs[0]):
            res.failures.append({"case": c, "tv": tvs})
        res.cases += 1


SUITES = {
    "jensen": _suite_jensen,
    "contraction": _suite_contraction,
    "subgradient": _suite_subgradient,
    "dual_field": _suite_dual_field,
    "solver_brute_force": _suite_brute_force,
    "taut_string": _suite_taut_string,
    "kkt": _suite_kkt,
    "monotone_alpha": _suite_monotone_alpha,
}


def run_property_suites(
    seed: int = 42,
    counts: dict | int | None = None,
    inject_violation: bool = False,
    quadrature_depth: int | None = None,
) -> PropertyReport:
    """Run the seeded property suites.

    ``counts`` maps suite name to case count; an int applies to every suite.
    ``inject_violation`` rescales each subgradient case to 1.5 times its
    bound, which the subgradient suite must report as failures.
    ``quadrature_depth`` switches the bump-field suites from breakpoint-aligned
    Gauss quadrature to the midpoint rule at that depth.
    """
    if counts is None:
        counts = dict(DEFAULT_COUNTS)
    elif isinstance(counts, int):
        counts = {k: counts for k in SUITES}
    unknown = set(counts) - set(SUITES)
    if unknown:
        raise ValueError(f"unknown suites {sorted(unknown)}")
    results = []
    for name, fn in SUITES.items():
        k = int(counts.get(name, 0))
        if k <= 0:
            continue
        # one independent stream per suite keeps suites reproducible in isolation
        rng = np.random.default_rng([seed, list(SUITES).index(name)])
        res = SuiteResult(name)
        if name == "subgradient":
            fn(rng, k, res, inject=inject_violation, depth=quadrature_depth)
        elif name == "dual_field":
            fn(rng, k, res, depth=quadrature_depth)
        else:
            fn(rng, k, res)
        results.append(res)
    return PropertyReport(seed, results)


def timed(fn, *args, **kw):
    t0 = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t0
