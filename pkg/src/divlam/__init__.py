"""Multi-scale laminates and rigidity oracles for divergence-free matrix
fields with values in a finite set."""

from .exceptions import DivlamError
from .fieldlab import (
    Cylinder,
    MetricsReport,
    analyze,
    coarse_average,
    conjugate_field,
    convergence_table,
    cylinder_flux,
    default_eps,
    dist_to_K,
    divergence_spectral,
    hminus1_norm,
    leray_project,
)
from .laminator import (
    Field,
    FractionReport,
    LaminateSchedule,
    constant_field,
    fraction_report,
    hierarchical_laminate,
    raster_field,
    rasterize,
    simple_laminate,
)
from .matkit import (
    AffineReduction,
    InstanceParams,
    LaminationInstance,
    build_instance,
    eigen_lambda,
    find_rank_preserving_F,
    invariant_block_rotation,
    is_pairwise_rank_n,
    kernel_direction,
    normalize_triple,
    rank_of_difference,
    verify_conditions,
)
from .rigidity import (
    DiscreteInclusion,
    discrete_divergence_fd,
    enumerate_exact,
    gradient_equivalence_2d,
    verify_hyperplane_hypothesis,
)

__version__ = "0.1.0"
