"""Numerical experiments with isometry-invariant geodesics on flat tori, round spheres and their products."""

from .errors import (
    ArgumentError,
    ClosureError,
    InvGeoError,
    MissingHomotopyError,
    NonUniqueGeodesicError,
    NotInSubspaceError,
    PreconditionError,
    ResolutionError,
    UnsupportedError,
)
from .manifold import (
    FlatTorus,
    ManifoldPoint,
    ProductManifold,
    Sphere,
    TangentVector,
    injectivity_radius_bound,
    manifold_from_config,
    metric_eval,
    shortest_geodesic,
)
from .isometry import (
    FixedPointSet,
    Isometry,
    apply_isometry,
    differential,
    evaluate_homotopy,
    fixed_point_set,
    isometry_from_config,
)
from .pathspace import (
    AverageIndexEstimate,
    DiscretePath,
    IndexReport,
    average_index,
    embed_periodic_subspace,
    energy,
    gradient,
    gradient_norm,
    h1_inner,
    hessian_report,
    iterate,
    rescale,
    restrict_to_fixed_set,
)
from .optimizer import (
    GeodesicRecord,
    SearchConfig,
    SearchOutcome,
    dedup_orbits,
    detect_period,
    find_critical,
    seed_library,
)
from .bangert import (
    BangertResult,
    LoopPath,
    bangert_path,
    bangert_path_continuous,
    connecting_homotopy,
    verify_estimate,
)
from .homotopy_maps import ProductSceneConfig, ev, iota, sigma_m, winding_markers

__version__ = "0.1.0"
