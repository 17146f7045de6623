"""Neighborhood search for job shop scheduling with pluggable step policies."""

from .dispatch import fdd, fdd_mwkr_schedule, mwkr
from .engine import (
    ActionSet,
    ActRequest,
    EngineConfig,
    EpisodeAbortError,
    EpisodeInfo,
    SearchEnv,
    SearchState,
    decode_action,
    rtg_prior,
    run_episode,
)
from .instances import (
    Instance,
    ParseError,
    generate_instance,
    instance_from_json,
    instance_to_json,
    load_instance_text,
    lower_bound,
    parse_taillard,
    render_taillard,
    taillard_instance,
)
from .neighborhoods import (
    Move,
    MoveKind,
    OperatorId,
    apply_move,
    best_neighbor,
    cei_moves,
    cet_moves,
    ct_moves,
    ecet_moves,
    moves_for,
    perturb,
)
from .policies import GreedyPolicy, RandomPolicy, action_frequencies, sweep_factors
from .reports import (
    BenchmarkInstance,
    BenchmarkReport,
    SolveRow,
    benchmark_15x15,
    format_gap,
    gap_percent,
    read_report,
    solve_instances,
    write_report,
)
from .schedule import (
    CriticalBlock,
    InfeasibleSequenceError,
    Solution,
    critical_blocks,
    critical_path,
    evaluate,
    is_feasible,
)
from .trajectories import (
    ContextWindow,
    DatasetFormatError,
    DatasetMeta,
    FeatureVector,
    TrajectoryRecord,
    context_window,
    finalize,
    read_dataset,
    returns_to_go,
    write_dataset,
)
from .wire import ExternalPolicy, ProtocolError

__version__ = "0.1.0"

__all__ = [
    "ActionSet", "ActRequest", "BenchmarkInstance", "BenchmarkReport",
    "ContextWindow", "CriticalBlock",
    "DatasetFormatError", "DatasetMeta", "EngineConfig", "EpisodeAbortError",
    "EpisodeInfo", "ExternalPolicy", "FeatureVector", "GreedyPolicy",
    "InfeasibleSequenceError", "Instance", "Move", "MoveKind", "OperatorId",
    "ParseError", "ProtocolError", "RandomPolicy", "SearchEnv", "SearchState",
    "Solution", "SolveRow", "TrajectoryRecord", "action_frequencies", "apply_move",
    "benchmark_15x15", "best_neighbor", "cei_moves", "cet_moves", "context_window",
    "critical_blocks", "critical_path", "ct_moves", "decode_action", "ecet_moves",
    "evaluate", "fdd", "fdd_mwkr_schedule", "finalize", "format_gap", "gap_percent",
    "generate_instance", "instance_from_json", "instance_to_json", "is_feasible",
    "load_instance_text", "lower_bound", "moves_for", "mwkr", "parse_taillard",
    "perturb", "read_dataset", "read_report", "render_taillard", "returns_to_go",
    "rtg_prior", "run_episode", "solve_instances", "sweep_factors",
    "taillard_instance", "write_dataset", "write_report",
]
