"""
A notched domain with a hole
============================

Five boxes glue into an L-shaped region with a unit square missing.
We look at its minimal grid, its cells, and the fibers a line cuts out.
"""

from rectrof import RectPolytope, boundary_grid, fibers, make_partition

boxes = [
    [[0, 6], [0, 1]],
    [[0, 2], [1, 2]],
    [[4, 6], [1, 2]],
    [[0, 6], [2, 3]],
    [[3, 6], [3, 4]],
]
domain = RectPolytope.from_boxes(boxes)
print("area:", domain.volume)

# the coarsest grid whose planes hold every facet
grid = boundary_grid(domain)
print("planes:", grid.planes)

part = make_partition(domain, grid)
print("cells:", len(part))

# horizontal lines: the hole splits rows with 1 < y < 2
for y in (0.5, 1.5, 3.5):
    print(f"y = {y}:", [(iv.lo, iv.hi) for iv in fibers(domain, 0, [y])])

# vertical lines: the notch and the hole both show up
for x in (1.0, 2.5, 3.5, 5.0):
    print(f"x = {x}:", [(iv.lo, iv.hi) for iv in fibers(domain, 1, [x])])
