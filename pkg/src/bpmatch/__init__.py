"""Min-sum message passing for minimum-weight b-matchings, with an exact
verification stack: exhaustive search, rational-simplex LP relaxation and
duals, complementary slackness, tightness detection, computation-tree
reference semantics, and asynchronous schedules."""

from .graph import (Graph, Matching, Reduction, Violation, GraphError,
                    GraphParseError, ValidationError, PERFECT, NONPERFECT,
                    edge_key, parse_graph, serialize_graph, validate,
                    require_valid, reduce_trivial)
from .engine import (MessageInit, MessageState, Estimate, StopPolicy, RunResult,
                     init_messages, sync_round_perfect, sync_round_nonperfect,
                     extract_estimate_perfect, extract_estimate_nonperfect,
                     extract_estimate, run_sync, EngineError, TrivialVertexError)
from .schedule import (Schedule, ScheduleViolation, CoverageStats, ScheduleError,
                       RedundantScheduleError, ScheduleExhausted, make_schedule,
                       parse_schedule, serialize_schedule, validate_schedule,
                       coverage, async_round, run_async)
from .ctree import (LabeledTree, TreeNode, BranchValue, TreeDPResult, TreeError,
                    TreeSizeError, DegenerateTreeError, build_tree,
                    build_gct_branch, build_gct, tree_bmatching_dp, tree_depth,
                    tree_size, dump_tree)
from .oracle import (LPSolution, DualCertificate, CSReport, TightnessReport,
                     OracleError, InfeasibleError, GuardExceeded, CertificateError,
                     brute_force, lp_solve, dual_solve, solve_relaxation,
                     build_certificate, dual_objective, check_cs, is_tight,
                     tightness_by_enumeration, iteration_bound, coverage_threshold,
                     parse_certificate, serialize_certificate)

__version__ = "0.1.0"


def fixture_path(name: str):
    """Path to a shipped example graph (c4, k4-appendix, tri-neg, tri-half, p4)."""
    from importlib.resources import files
    name = name if name.endswith(".graph") else f"{name}.graph"
    return files(__package__).joinpath("fixtures", name)
