"""Node-differentially-private estimation for random-graph models.

Labeled graphs under the vertex-rewiring metric, step-graphon samplers, the
private block-model estimator, improved edge-density estimators built on a
homogeneity set plus a generic DP extension operator, and an audit harness
that certifies privacy exhaustively at tiny scale.
"""

from .errors import ResourceLimitError
from .graphs import (
    LabeledGraph,
    adjacent_graphs,
    all_graphs,
    boundary_edge_count,
    degree_cap,
    edge_density,
    graph_from_index,
    node_distance,
)
from .graphons import (
    BlockMatrix,
    Equipartition,
    StepGraphon,
    WRandomSample,
    agnostic_error,
    block_average,
    block_average_grid,
    delta2_hat_blocks,
    delta2_hat_fit,
    enumerate_equipartitions,
    equipartition_count,
    normalized_l2,
    rewired_model_pmf,
    sample_gnm,
    sample_gnm_rewired,
    sample_gnm_rewired_coupled,
    sample_gnp,
    sample_w_random,
    sampling_error,
    step_l2_distance,
    two_clique_graphon,
)
from .mechanisms import (
    FiniteMechanism,
    LaplaceDensity,
    MetricSpaceOracle,
    PiecewiseExpDensity,
    PiecewiseLinear,
    dp_audit_densities,
    exponential_mechanism,
    exponential_mechanism_distribution,
    extend_mechanism,
    piecewise_min,
    sample_laplace,
    truncated_laplace_density,
    truncation_rate,
    unit_laplace_density,
)
from .block_estimator import (
    BlockEstimate,
    EstimatorConfig,
    best_score,
    block_mechanism,
    estimate_blocks,
    lipschitz_score,
    private_density,
    score,
)
from .density import (
    DensityEstimate,
    HomogeneityConfig,
    extended_density_estimator,
    extended_density_mechanism,
    graph_space_oracle,
    homogeneity_membership,
    homogeneity_worst_margin,
    laplace_density_estimator,
    laplace_density_mechanism,
    predicted_baseline_mse,
    predicted_restricted_mse,
    restricted_density_estimator,
    restricted_density_mechanism,
)
from .audits import (
    AuditReport,
    audit_bitstring_reduction,
    audit_block_mechanism,
    audit_density_mechanism,
    audit_finite_mechanism,
    audit_score_sensitivity,
    bernoulli_reduction_graph,
)
from .experiments import (
    CouplingReport,
    ExperimentConfig,
    ExperimentRecord,
    homogeneity_probability,
    run_distinguishability_experiment,
    run_mse_experiment,
    slope_fit,
    write_records_csv,
)
from .rng import substream

__version__ = "0.1.0"
