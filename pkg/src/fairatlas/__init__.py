"""fairatlas: map, interpret, and navigate the fairness-sensitivity landscape
of a network topology under a tunable sigmoid SLA model.

The pipeline is: build or load a topology, reduce it to its all-pairs
shortest-path cost histogram, then evaluate the entropy-based QoE-Imbalance
and mean satisfaction (and their derivatives) anywhere on the (strictness,
threshold) plane -- pointwise, as asymptotic laws, or as dense scans with
operating-region risk metrics.
"""
from ._version import __version__
from .asymptotics import (
    Plateau,
    SmallAReport,
    StaircaseProfile,
    default_fit_thresholds,
    default_small_a_samples,
    fit_small_a_slope,
    small_a_coefficient,
    small_a_coefficient_alt,
    staircase,
    transition_width,
)
from .errors import (
    ConnectivityError,
    DegenerateGraphError,
    DomainError,
    EmptyCoreError,
    FairAtlasError,
    ParameterError,
    ParseError,
)
from .landscape import (
    AxisSpec,
    GridSpec,
    OperatingRegion,
    ScanGrid,
    curvature_asymmetry,
    default_grid_spec,
    detect_ridges,
    operating_region,
    read_grid_csv,
    scan,
    write_grid_csv,
)
from .qoe import (
    Decomposition,
    QoeSnapshot,
    ReferenceIndices,
    ShareVector,
    SlaPoint,
    affine_transform,
    decompose,
    evaluate,
    find_decomposability_violation,
    find_scale_dependence_violation,
    imbalance_of_shares,
    reference_indices,
    satisfaction_weight,
    shares_from_scores,
)
from .report import (
    ComparisonRow,
    compare,
    format_comparison_table,
    validate,
    validate_axioms,
    validate_gradient,
    validate_large_a,
    validate_small_a,
    write_pgm_heatmap,
)
from .sensitivity import (
    DiagnosticRow,
    GradientPair,
    HessianI,
    diagnose,
    gradient,
    gradient_fd,
    hessian,
)
from .topology import (
    CostHistogram,
    Moments,
    Topology,
    TopologySpec,
    cumulative_count,
    generate,
    hop_histogram,
    k_core,
    largest_component,
    load_caida,
    load_edge_list,
    moments,
    write_edge_list,
)

__all__ = [name for name in dir() if not name.startswith("_")]
