"""Genealogical skeletons of critical branching random walks.

Six pieces: tree generation under survival conditioning (treegen), branch
time matrices and labelled shapes (skeleton), graph spatial trees with
their comparison metric (gst), exact enumeration of small lattice trees
(latticeoracle), closed-form limit laws (limitlaw), and the Monte Carlo
harness behind the ``gwskel`` command (harness).
"""

from .errors import (
    AcceptanceFloor,
    BudgetExceeded,
    ConfigError,
    EmptySample,
    EnumerationTooLarge,
    InadmissibleBond,
    InvalidMatrix,
    InvalidShapeTimes,
    KTooLarge,
    OutOfRange,
    RangeError,
    ShapeMismatch,
    UnknownVertex,
)
from .gst import (
    GST,
    InterpolatedPath,
    PiecewiseLinearPath,
    big_D,
    d1,
    d2,
    gst_of_paths,
    interpolate_kappa,
    pl_branch_time,
    rescale,
    rescale_path,
    serialize_gst,
    upsilon,
)
from .latticeoracle import (
    LatticeTree,
    displacement_count,
    enumerate_trees,
    lattice_tree,
    partition_by_counts,
    trees_from_text,
    trees_to_text,
    truncated_generation_mean,
    truncated_partition,
    truncated_uniform_vertex_law,
    weight,
)
from .limitlaw import (
    MetricShapeTimes,
    TreeIndexedBM,
    branch_time_limit_measure,
    exact_survival_geometric,
    lifetime_tail_limit,
    pair_mrca_expectation,
    sample_tree_indexed_bm,
    survival_tail_gw,
)
from .skeleton import (
    BranchMatrix,
    EmptyK,
    Shape,
    branch_matrix,
    branch_matrix_from_entries,
    branch_time,
    build_shape,
    check_nondegenerate,
    class_representatives,
    count_shapes,
    enumerate_shapes,
    genealogical_branch_matrix,
    minimal_subtree,
    perturbation_radius,
    serialize_shape,
    shape_distance,
    skeleton_projection,
    tree_metric,
)
from .treegen import (
    DiscretePath,
    GenTree,
    SpatialTree,
    attach_displacements,
    grow_conditioned,
    grow_tree,
    mrca_generation,
    offspring_law,
    path_to_root,
    population_profile,
    survival_time,
    tree_from_offspring,
    uniform_vertices,
)

__version__ = "0.1.0"
