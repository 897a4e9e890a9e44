from enum import StrEnum


class PoolKind(StrEnum):
    FULL = "full"
    KNN = "knn"


class TraceAction(StrEnum):
    EXPAND = "expand"
    VISIT = "visit"
    ESCAPE = "escape"


class ExperimentKind(StrEnum):
    DEGREE = "degree"
    DEGREE_SWEEP = "degree-sweep"
    TRUNCATION = "truncation"
    CONFLICT_MULTIPLICITY = "conflict-multiplicity"
    ESCAPE = "escape"


class OutputFormat(StrEnum):
    CSV = "csv"
    JSON = "json"
