from .dataset import Dataset, as_point, dataset_checksum
from .enums import ExperimentKind, OutputFormat, PoolKind, TraceAction
from .experiment import (
    AccuracyRow,
    AccuracyTable,
    BuildParams,
    BuildReport,
    DegreeCell,
    EscapeRow,
    ExperimentConfig,
    MultiplicityCell,
)
from .graph import ConflictMap, DegreeStats, GraphMeta, PoolSpec, ProximityGraph
from .search import Candidate, SearchResult, TraceEvent
from .verification import CheckReport

__all__ = [
    "AccuracyRow",
    "AccuracyTable",
    "BuildParams",
    "BuildReport",
    "Candidate",
    "CheckReport",
    "ConflictMap",
    "Dataset",
    "DegreeCell",
    "DegreeStats",
    "EscapeRow",
    "ExperimentConfig",
    "ExperimentKind",
    "GraphMeta",
    "MultiplicityCell",
    "OutputFormat",
    "PoolKind",
    "PoolSpec",
    "ProximityGraph",
    "SearchResult",
    "TraceAction",
    "TraceEvent",
    "as_point",
    "dataset_checksum",
]
