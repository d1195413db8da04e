"""Numerics for SDEs on the plane driven by a Brownian sheet.

The package samples the sheet on rectangular grids, solves the
two-parameter SDE by corner Euler and Picard schemes, propagates
directional (Malliavin-type) derivatives, reweights by the Girsanov
factor, and, centrally, builds and numerically verifies the
rectangle-selection integration-by-parts expansion together with its
product bound, shuffle-partition combinatorics, and singular simplex
integrals.
"""

__version__ = "0.1.0"

from .plane_geometry import (
    Cell,
    DegenerateGridError,
    GridPartition,
    PlanePoint,
    cell_area,
    geometric_grid,
    grid_from_json,
    grid_to_json,
    precedes,
    uniform_grid,
)
from .brownian_sheet import (
    SheetSample,
    cameron_martin_shift,
    coarsen,
    cumulative_values,
    derive_seed,
    export_csv,
    import_csv,
    keyed_generator,
    rectangle_increment,
    sample,
    sample_batch,
    value_at,
    values,
)
from .kernels import (
    DEFAULT_C0,
    KernelCell,
    abs_gradient_l1,
    density,
    gradient_component,
    hermite_weight,
    log_density,
)
from .integrators import (
    DEFAULT_C1,
    GammaBound,
    McEstimate,
    TimeWindow,
    corollary_rhs,
    gamma_fn,
    gauss_hermite,
    log_gamma,
    merge_estimates,
    monte_carlo,
    simplex_dirichlet_oracle,
    simplex_singular_integral,
)
from .ibp_engine import (
    CrossingSet,
    EmptySelectionError,
    GammaTauAssignment,
    IbpTerm,
    PermutationSpec,
    all_permutation_specs,
    assert_shift_lemmas,
    crossing_set,
    expand,
    gamma_tau,
    orientation_points,
    span,
    spec_variances,
    term_to_dict,
    uniform_spec,
)
from .shuffle_combinatorics import (
    BlockIncreasingFamily,
    DegenerateTiesError,
    NotInProductError,
    PartitionReport,
    RegionDescriptor,
    SplitIndexFamily,
    enumerate_block_increasing,
    enumerate_split_family,
    locate_cell,
    locate_cell_split,
    membership,
    partition_report,
    product_identity_check,
    sample_region,
)
from .estimate_lab import (
    CorollaryReport,
    DriftScalarFactor,
    IdentityReport,
    bump_factor,
    corollary_check,
    corollary_scaling_slope,
    davie_bound,
    direct_expectation,
    ibp_expectation,
    verify_identity,
)
from .sde_plane import (
    DoleansFactor,
    DriftField,
    MalliavinField,
    MissingJacobianError,
    NonConvergenceError,
    SolutionField,
    constant_drift,
    doleans_exponential,
    euler_weak_expectation,
    flow_derivative,
    girsanov_weak_expectation,
    malliavin_series,
    malliavin_solve,
    sign_drift,
    solve_euler,
    solve_picard,
    tanh_drift,
    zero_drift,
)

__all__ = [name for name in dir() if not name.startswith("_")]
