from .analytics import connectivity, degree_stats
from .builder import build_generalized, build_mrng, compute_conflicts, knn_pools
from .engine import MrngEngine
from .geometry import (
    angle_at,
    distance,
    f_theta,
    g_theta,
    generate_uniform_dataset,
    generate_uniform_queries,
    h_theta,
    in_lune,
    s_theta,
)
from .search import best_first, closer_and_go, conflict_search, pick_entry, search_with_escape
from .verify import (
    brute_force_knn,
    check_angle_separation,
    check_edge_minimality,
    check_lemma4_sampling,
    check_mrng_definition,
    is_monotonic,
)

__all__ = [
    "MrngEngine",
    "angle_at",
    "best_first",
    "brute_force_knn",
    "build_generalized",
    "build_mrng",
    "check_angle_separation",
    "check_edge_minimality",
    "check_lemma4_sampling",
    "check_mrng_definition",
    "closer_and_go",
    "compute_conflicts",
    "conflict_search",
    "connectivity",
    "degree_stats",
    "distance",
    "f_theta",
    "g_theta",
    "generate_uniform_dataset",
    "generate_uniform_queries",
    "h_theta",
    "in_lune",
    "is_monotonic",
    "knn_pools",
    "pick_entry",
    "s_theta",
    "search_with_escape",
]
