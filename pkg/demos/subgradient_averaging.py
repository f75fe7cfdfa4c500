"""
Averaged divergences stay in the constraint set
===============================================

Take a smooth vector field bounded by one that vanishes on the boundary.
Average each partial derivative over the cells of a grid.  The result is a
piecewise-constant field whose running integrals along every fiber stay
within the bound and return to zero at the far end.
"""

from rectrof import (
    GammaElement, PolynomialBump, RectPolytope, RefinementSpec, SmoothFieldSpec,
    averaged_divergence, boundary_grid, build_dual_field, check_gamma, refine,
)

domain = RectPolytope.from_boxes([[[0, 3], [0, 1]], [[0, 1], [1, 3]]])

# one bump per axis, each supported inside the L
field = SmoothFieldSpec.from_bumps(
    [
        [PolynomialBump([0.2, 0.1], [2.8, 0.9], 1.0)],
        [PolynomialBump([0.1, 0.3], [0.9, 2.7], -0.8)],
    ],
    bound=1.0,
)

grid = refine(boundary_grid(domain), RefinementSpec(3))
g = averaged_divergence(field, grid, domain)
report = check_gamma(g, domain, tol=1e-9)
print("cells:", len(g.partition))
print("member:", report.passed)
print("largest running integral:", round(report.worst_partial, 6))
print("largest endpoint value:", f"{report.worst_endpoint:.1e}")

# integrating back gives a piecewise affine field within the same bound
H = build_dual_field(g, domain, tol=1e-9)
print("sup of rebuilt field:", round(H.max_abs(), 6))

# scaling past the bound breaks membership
louder = GammaElement(g.scale(1.5).components, bound=1.0)
print("member after x1.5:", check_gamma(louder, domain).passed)
