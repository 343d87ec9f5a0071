"""Transfer-policy optimization toolkit.

Turns per-image transfer-evaluation records into normalized task
affinities (pairwise tournaments + principal-eigenvector centrality) and
selects a globally optimal, budget-constrained transfer policy with an
exact binary integer program. Ships a CLI, an HTTP service, and a
synthetic-data generator with planted ground truth.
"""

from .ahp import (
    AffinityMatrix,
    DistanceConfig,
    RatioMatrix,
    TournamentMatrix,
    build_tournament,
    clip_smooth,
    load_affinity,
    normalize_store,
    principal_eigenvector,
    ratio_matrix,
    save_affinity,
    to_distance,
)
from .bip import (
    BIPInstance,
    BIPSolution,
    SolverConfig,
    brute_force,
    build_instance,
    extract_taxonomy,
    solve,
)
from .cluster import Dendrogram, average_linkage, similarity_tree
from .domain import (
    EvaluationRecord,
    RecordStore,
    TaskDictionary,
    TransferEdge,
    dictionary_with_novel_target,
    load_dictionary,
    load_records,
    parse_edge,
    save_dictionary,
    save_records,
    validate_dictionary,
)
from .engine import (
    SignificanceReport,
    candidate_affinity,
    localize_novel_task,
    sample_random_policy,
    significance_test,
    solve_from_affinity,
    solve_policy,
    spearman_rho,
    taxonomy_family,
    win_rate,
)
from .errors import (
    ConvergenceError,
    ImageSetError,
    InfeasibleError,
    SchemaError,
    TransferOptError,
    UnknownTaskError,
)
from .sampler import SamplerConfig, first_order_edges, higher_order_edges, rank_sources
from .synthetic import SyntheticSpec, gen_synthetic, generate
from .taxonomy import Taxonomy, load_taxonomy, save_taxonomy

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
