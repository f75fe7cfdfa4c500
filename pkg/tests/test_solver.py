import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from helpers import notched_domain
from rectrof import instances
from rectrof.geometry import Grid, RectPolytope, box, boundary_grid, make_partition
from rectrof.pcr import PcrFunction, lp_norm, minimal_grid, resample, tv_pcr
from rectrof.solver import (
    CellGraph,
    SolverConfig,
    build_graph,
    check_kkt,
    clip_flows,
    divergence,
    dual_energy,
    dual_projected_descent,
    energy,
    solve,
    solve_1d_taut_string,
    solve_brute_force,
    solve_two_node,
)

TWO = CellGraph(np.ones(2), np.array([0.0, 4.0]), np.array([[0, 1]]), np.ones(1))


def slsqp_oracle(g: CellGraph, alpha: float) -> np.ndarray:
    """Smooth reformulation with slack t_e >= |u_i - u_j|, solved by SLSQP."""
    N, M = g.n_nodes, g.n_edges
    i, j = g.edges[:, 0], g.edges[:, 1]

    def obj(z):
        u, t = z[:N], z[N:]
        return 0.5 * np.sum(g.node_volume * (u - g.node_datum) ** 2) + alpha * np.sum(g.edge_weight * t)

    def jac(z):
        u = z[:N]
        return np.concatenate([g.node_volume * (u - g.node_datum), alpha * g.edge_weight])

    A = np.zeros((2 * M, N + M))
    for e in range(M):
        A[e, N + e] = A[M + e, N + e] = 1.0
        A[e, i[e]], A[e, j[e]] = -1.0, 1.0
        A[M + e, i[e]], A[M + e, j[e]] = 1.0, -1.0
    cons = {"type": "ineq", "fun": lambda z: A @ z, "jac": lambda z: A}
    z0 = np.concatenate([g.node_datum, np.abs(g.node_datum[i] - g.node_datum[j])])
    res = minimize(obj, z0, jac=jac, constraints=[cons], method="SLSQP",
                   options={"ftol": 1e-15, "maxiter": 1000})
    return res.x[:N]


# --- graph construction --------------------------------------------------------

def test_single_cell_graph():
    dom = RectPolytope([box((0, 1), (0, 1))])
    g = build_graph(PcrFunction.constant(make_partition(dom, Grid(((0, 1), (0, 1)))), 2.0))
    assert g.n_nodes == 1 and g.n_edges == 0


def test_two_cell_graph():
    dom = RectPolytope([box((0, 2), (0, 1))])
    g = build_graph(PcrFunction(make_partition(dom, Grid(((0, 1, 2), (0, 1)))), [0, 4]))
    np.testing.assert_array_equal(g.node_volume, [1, 1])
    np.testing.assert_array_equal(g.edges, [[0, 1]])
    np.testing.assert_array_equal(g.edge_weight, [1])


def test_notched_graph_matches_overlap_oracle():
    dom = notched_domain()
    p = make_partition(dom, boundary_grid(dom))
    g = build_graph(PcrFunction.constant(p, 0.0))
    assert g.n_nodes == 12
    expect = {}
    for a, b in itertools.combinations(range(len(p)), 2):
        for ax in range(2):
            o = 1 - ax
            touch = p.hi[a, ax] == p.lo[b, ax] or p.hi[b, ax] == p.lo[a, ax]
            ov = min(p.hi[a, o], p.hi[b, o]) - max(p.lo[a, o], p.lo[b, o])
            if touch and ov > 0:
                expect[(a, b)] = ov
    assert {(int(a), int(b)): w for (a, b), w in zip(g.edges, g.edge_weight)} == expect


def test_graph_validation():
    with pytest.raises(ValueError):
        CellGraph(np.ones(2), np.zeros(2), np.array([[0, 0]]), np.ones(1))
    with pytest.raises(ValueError):
        CellGraph(np.array([1.0, -1.0]), np.zeros(2), np.array([[0, 1]]), np.ones(1))
    g = CellGraph(np.ones(2), np.zeros(2), np.array([[1, 0]]), np.ones(1))
    np.testing.assert_array_equal(g.edges, [[0, 1]])


# --- energies --------------------------------------------------------------------

def test_energy_examples():
    assert energy(TWO, [0, 4], 1.0) == 4.0
    assert energy(TWO, [1, 3], 1.0) == 3.0


def test_energy_matches_function_norms():
    rng = np.random.default_rng(0)
    f = instances.random_pcr(rng, 2, max_cells=30)
    fu = resample(f, minimal_grid(f))
    g = build_graph(fu)
    u = fu.with_values(rng.normal(size=len(fu)))
    expect = 0.5 * lp_norm(u - fu, 2) ** 2 + 0.7 * tv_pcr(u)
    assert energy(g, u.values, 0.7) == pytest.approx(expect, rel=1e-12)
    assert energy(g, fu.values, 0.7) == pytest.approx(0.7 * tv_pcr(fu), rel=1e-12)


def test_dual_energy_examples():
    assert dual_energy(TWO, [0.0], 1.0) == 0.0
    # the optimal flow on edge (0, 1) with u_0 < u_1 is -alpha * a
    q = np.array([-1.0])
    assert dual_energy(TWO, q, 1.0) == pytest.approx(3.0, abs=1e-15)
    np.testing.assert_array_equal(TWO.node_datum - divergence(TWO, q) / TWO.node_volume, [1, 3])


def test_clip_flows_reports_magnitude():
    q, mag = clip_flows(TWO, [2.5], 1.0)
    assert q[0] == 1.0 and mag == 1.5


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_weak_duality(seed):
    rng = np.random.default_rng(seed)
    g = instances.random_small_graph(rng, int(rng.integers(2, 7)))
    alpha = float(rng.uniform(0.05, 3.0))
    q = rng.uniform(-1, 1, g.n_edges) * alpha * g.edge_weight
    u = rng.normal(size=g.n_nodes) * 3
    assert dual_energy(g, q, alpha) <= energy(g, u, alpha) + 1e-12


# --- solvers -----------------------------------------------------------------------

def test_solve_two_cells():
    s1 = solve(TWO, SolverConfig(alpha=1.0))
    assert s1.certified and s1.gap <= 1e-9
    np.testing.assert_allclose(s1.u, [1, 3], atol=1e-9)
    s3 = solve(TWO, SolverConfig(alpha=3.0))
    np.testing.assert_allclose(s3.u, [2, 2], atol=1e-9)


def test_solve_vanishing_alpha_and_constant_data():
    rng = np.random.default_rng(1)
    g = instances.random_small_graph(rng, 5)
    np.testing.assert_allclose(solve(g, SolverConfig(alpha=1e-12)).u, g.node_datum, atol=1e-6)
    const = CellGraph(g.node_volume, np.full(5, 2.5), g.edges, g.edge_weight)
    for alpha in (0.1, 1.0, 100.0):
        np.testing.assert_allclose(solve(const, SolverConfig(alpha=alpha)).u, 2.5, atol=1e-12)


def test_uncertified_solve_is_reported():
    rng = np.random.default_rng(2)
    f = instances.random_pcr(rng, 2, max_cells=40)
    g = build_graph(resample(f, minimal_grid(f)))
    sol = solve(g, SolverConfig(alpha=instances.alpha_scale(f), max_iters=50,
                                tol_gap=1e-14, polish_every=10**9))
    assert not sol.certified and sol.gap > sol.tol_gap


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(alpha=0.0)
    with pytest.raises(ValueError):
        SolverConfig(alpha=1.0, tol_gap=-1.0)


def test_heterogeneous_cells_converge():
    # sliver cells next to large ones
    dom = RectPolytope([box((0, 100), (0, 1))])
    grid = Grid(((0, 1e-3, 2e-3, 50, 50.001, 100), (0, 1e-3, 1)))
    p = make_partition(dom, grid)
    rng = np.random.default_rng(4)
    g = build_graph(PcrFunction(p, rng.uniform(0, 10, len(p))))
    sol = solve(g, SolverConfig(alpha=0.5))
    assert sol.certified
    np.testing.assert_allclose(sol.u, solve_brute_force(g, 0.5) if len(p) <= 6 else slsqp_oracle(g, 0.5), atol=1e-5)


def test_taut_string_trivial_cases():
    np.testing.assert_array_equal(solve_1d_taut_string([2.0], [3.5], [], 1.0), [3.5])
    for alpha in (0.3, 1.0, 5.0):
        np.testing.assert_allclose(
            solve_1d_taut_string([1.0, 2.0], [0.0, 4.0], [0.5], alpha),
            solve_two_node(1.0, 2.0, 0.0, 4.0, 0.5, alpha), atol=1e-14,
        )


@pytest.mark.parametrize("seed", range(10))
def test_brute_force_matches_slsqp(seed):
    rng = np.random.default_rng(seed)
    g = instances.random_small_graph(rng, int(rng.integers(2, 5)))
    alpha = float(rng.uniform(0.05, 2.0))
    np.testing.assert_allclose(solve_brute_force(g, alpha), slsqp_oracle(g, alpha), atol=1e-6)


def test_brute_force_size_limit():
    g = CellGraph(np.ones(7), np.zeros(7), np.array([[0, 1]]), np.ones(1))
    with pytest.raises(ValueError, match="6 nodes"):
        solve_brute_force(g, 1.0)


def test_check_kkt_examples():
    from rectrof.solver import RofSolution

    opt = RofSolution(np.array([1.0, 3.0]), np.array([-1.0]), 0.0, 0, True, 1e-9)
    rep = check_kkt(TWO, opt, 1.0, 1e-12)
    assert rep.passed and rep.stationarity == 0.0 and rep.alignment == 0.0
    naive = RofSolution(TWO.node_datum.copy(), np.zeros(1), 0.0, 0, True, 1e-9)
    assert not check_kkt(TWO, naive, 1.0, 1e-6).passed
    assert check_kkt(TWO, naive, 1e-12, 1e-6).passed


# --- randomized properties -----------------------------------------------------------

seeds = st.integers(0, 2**32 - 1)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_random_solves_certified_and_principled(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    f = instances.random_pcr(rng, n, max_cells=30)
    fu = resample(f, minimal_grid(f))
    g = build_graph(fu)
    alpha = float(rng.uniform(0.05, 5.0)) * instances.alpha_scale(f)
    sol = solve(g, SolverConfig(alpha=alpha))
    assert sol.certified and sol.gap <= sol.tol_gap
    assert check_kkt(g, sol, alpha, 1e-6).passed
    # maximum principle
    assert sol.u.min() >= fu.values.min() - 1e-9 and sol.u.max() <= fu.values.max() + 1e-9
    # weak duality along the whole run
    scale = 1e-12 * (1 + energy(g, fu.values, alpha))
    assert all(gap >= -scale for _, gap in sol.history)


@settings(max_examples=20, deadline=None)
@given(seeds, st.floats(0.1, 10.0))
def test_scaling_equivariance(seed, lam):
    rng = np.random.default_rng(seed)
    g = instances.random_small_graph(rng, 6)
    alpha = float(rng.uniform(0.1, 2.0))
    base = solve(g, SolverConfig(alpha=alpha))
    gl = CellGraph(g.node_volume, g.node_datum * lam, g.edges, g.edge_weight)
    scaled = solve(gl, SolverConfig(alpha=alpha * lam))
    tol = lam * (base.error_bound(g) + scaled.error_bound(gl) / lam) + 1e-9 * lam
    np.testing.assert_allclose(scaled.u, lam * base.u, atol=tol)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_chain_matches_taut_string(seed):
    rng = np.random.default_rng(seed)
    v, f, a = instances.random_chain(rng, int(rng.integers(2, 15)))
    alpha = float(rng.uniform(0.01, 4.0))
    sol = solve(CellGraph.chain(v, f, a), SolverConfig(alpha=alpha))
    np.testing.assert_allclose(sol.u, solve_1d_taut_string(v, f, a, alpha), atol=1e-7)


@settings(max_examples=20, deadline=None)
@given(seeds)
def test_minimal_norm_dual_view(seed):
    rng = np.random.default_rng(seed)
    g = instances.random_small_graph(rng, int(rng.integers(3, 7)))
    alpha = float(rng.uniform(0.1, 2.0))
    sol = solve(g, SolverConfig(alpha=alpha))
    q_o, u_o = dual_projected_descent(g, alpha, 20000)
    gap_o = max(energy(g, u_o, alpha) - dual_energy(g, q_o, alpha), 0.0)
    n_s = np.sqrt(np.sum(g.node_volume * sol.u**2))
    n_o = np.sqrt(np.sum(g.node_volume * u_o**2))
    eps = 4 * np.finfo(float).eps * (1 + abs(sol.primal))
    tol = (n_s + n_o) * (np.sqrt(2 * max(sol.gap, eps)) + np.sqrt(2 * max(gap_o, eps)))
    assert abs(n_s**2 - n_o**2) <= tol
    assert tol < 1e-4 * (1 + n_s**2)
