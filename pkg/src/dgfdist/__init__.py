"""Distance-metric laboratory for directed grey-box fuzzing."""

from .analysis import (
    AnalysisArtifacts,
    DecreaseSample,
    DecreaseSummary,
    LineageRecord,
    StatsSummary,
    a12,
    analyze_logs,
    compare_runs,
    decrease_distribution,
    factor,
    first_poc,
    lineage,
    mann_whitney_u,
    tte,
)
from .campaign import (
    CampaignConfig,
    CampaignLog,
    LogEvent,
    Seed,
    assign_energy,
    choose_next,
    is_interesting,
    mutate,
    run_campaign,
)
from .distances import (
    AggregationMethod,
    DistanceConfig,
    DistanceMap,
    Granularity,
    block_distances,
    call_edge_weight,
    compute_distance_map,
    distance_map_csv,
    function_distances,
    seed_distance,
)
from .experiment import (
    ExperimentManifest,
    ExperimentResult,
    parse_manifest,
    run_experiment,
)
from .graph import (
    ControlFlowGraph,
    ProgramGraph,
    TargetSpec,
    parse_program_graph,
    parse_targets,
    reachable_targets,
    serialize_program_graph,
    validate,
)
from .subject import ExecutionResult, SubjectSpec, execute, is_poc, load_subject

__version__ = "0.1.0"
