"""Falsification of causal discovery outputs via leave-one-variable-out
prediction: decide pair status from two marginal graphs, predict the unseen
correlation, and score the prediction against held-out data."""

from .edge_rules import (
    AbstentionError,
    AdjustmentSet,
    AmbiguousReconstruction,
    EdgeDecision,
    InconsistentMarginals,
    MarginalPair,
    PreconditionError,
    Verdict,
    classify_edge_admg_no_confounded_links,
    classify_edge_dag,
    exclude_link_admg,
    exclude_link_directed,
    reconstruct_joint_directed,
    to_no_confounded_links,
    union_of_parents,
)
from .graph import (
    Admg,
    CycleError,
    GraphError,
    GraphGenConfig,
    UndirectedGraph,
    d_separated,
    generate_er_admg,
    generate_er_dag,
    graph_from_json,
    graph_to_json,
    latent_project,
    m_separated,
    moral_graph,
    project_out,
    read_graph,
    shd,
    write_graph,
)
from .harness import (
    AccuracyMetrics,
    AdapterError,
    CrossValConfig,
    CrossValReport,
    OracleProvider,
    StudySummary,
    correlate_error_with_accuracy,
    perturb_graph,
    provider_accuracy,
    run_crossval,
    spearman,
    split_three_ways,
)
from .predictors import (
    Abstained,
    Moments,
    PredictionRecord,
    StochasticMatrix,
    TrivariateStats,
    check_necessary_conditions,
    lingam_lovo,
    lingam_rho,
    maxent_baseline,
    random_adjustment_baseline,
    three_step_parent_adjustment,
    three_step_rho,
    trivariate_linear,
    trivariate_stochastic,
    write_records_jsonl,
)
from .scm import (
    Dataset,
    DegenerateStructureError,
    LinearScm,
    NoiseSpec,
    ScmError,
    ScmGenConfig,
    ambiguity_witness,
    analytic_correlation,
    analytic_covariance,
    sample_structure,
    simulate,
    total_effects,
)

__version__ = "0.1.0"
