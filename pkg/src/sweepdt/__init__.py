"""Out-of-core 3D Delaunay tessellation and Voronoi partitioning.

Sorted insertion along the first principal axis simulates a sweeping
plane; tetrahedra the sweep has provably passed are evicted from memory
and streamed out, keeping residency proportional to a cross-section of
the data rather than its total size.  Downstream consumers turn the
stream of finalized sites into the Delaunay edge graph and Voronoi cell
volumes.
"""

from .geometry import (
    NEGATIVE,
    POSITIVE,
    ZERO,
    Circumsphere,
    DegenerateSimplexError,
    Point3,
    circumsphere,
    insphere,
    orient3d,
    perturbed_insphere,
    tet_volume,
)
from .kernel import (
    FinalizedSite,
    Frontier,
    FrontierInvariantError,
    UnsortedInputError,
    ghost_vertices,
    naive_threshold,
    offline_threshold,
)
from .pca import BoundingBox, Rotation3, bounding_box, principal_axes, transform, trim_interval
from .pipeline import RunConfig, RunReport, run_pipeline, verify

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "Circumsphere",
    "DegenerateSimplexError",
    "FinalizedSite",
    "Frontier",
    "FrontierInvariantError",
    "NEGATIVE",
    "POSITIVE",
    "Point3",
    "Rotation3",
    "RunConfig",
    "RunReport",
    "UnsortedInputError",
    "ZERO",
    "bounding_box",
    "circumsphere",
    "ghost_vertices",
    "insphere",
    "naive_threshold",
    "offline_threshold",
    "orient3d",
    "perturbed_insphere",
    "principal_axes",
    "run_pipeline",
    "tet_volume",
    "transform",
    "trim_interval",
    "verify",
]
