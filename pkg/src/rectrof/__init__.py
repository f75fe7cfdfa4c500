"""Exact anisotropic ROF denoising of piecewise-constant functions on rectilinear domains."""

from .geometry import (
    Grid,
    HyperRect,
    Interval,
    Partition,
    RectPolytope,
    boundary_grid,
    box,
    face_adjacency,
    fibers,
    make_partition,
    union_grids,
)
from .pcr import (
    PcrFunction,
    PcrPieces,
    SampledField,
    average,
    lp_norm,
    minimal_grid,
    resample,
    tv_pcr,
)
from .solver import (
    CellGraph,
    RofSolution,
    SolverConfig,
    build_graph,
    check_kkt,
    divergence,
    dual_energy,
    energy,
    solve,
)
from .subgradient import (
    AxisComponent,
    DualField,
    GammaElement,
    PolynomialBump,
    SmoothFieldSpec,
    averaged_divergence,
    build_dual_field,
    check_gamma,
)
from .verify import RefinementSpec, refine, run_property_suites, verify_theorem
from .documents import DocumentError, InstanceDocument, parse_instance, serialize_instance

__version__ = "0.1.0"
