"""
Defines the construction-parameter and experiment domain models.

Records are flat so that the harness can emit them as CSV rows or JSON objects without
further shaping; every record carries the seed and the dataset shape it was measured on.
"""

from typing import Self

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.core.constants import ERR_POSITIVE
from src.domain_models.enums import ExperimentKind, OutputFormat
from src.domain_models.graph import DegreeStats, GraphMeta, PoolSpec

UNBOUNDED_LABEL = "unbounded"


def bound_label(m: int | None) -> str:
    return UNBOUNDED_LABEL if m is None else str(m)


class BuildParams(BaseModel):
    """Parameters of one run of the edge-selection procedure."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    degree_bound: int | None = Field(default=None, ge=1, description="m; None means unbounded")
    pool: PoolSpec = Field(default_factory=PoolSpec)
    record_conflicts: bool = False
    seed: int = Field(default=0, ge=0, lt=2**64)

    def meta(self, dataset_checksum: int) -> GraphMeta:
        return GraphMeta(
            degree_bound=self.degree_bound,
            pool=self.pool,
            seed=self.seed,
            dataset_checksum=dataset_checksum,
        )


class BuildReport(BaseModel):
    """Cost and shape summary of a build, printed as JSON by `mrng build`."""

    model_config = ConfigDict(extra="forbid")

    params: BuildParams
    n: int = Field(..., ge=1)
    d: int = Field(..., ge=1)
    distance_evals: int = Field(..., ge=0, description="Node-to-candidate distances used for sorting")
    lune_evals: int = Field(default=0, ge=0, description="Blocker distances for the acceptance test")
    pool_distance_evals: int = Field(default=0, ge=0, description="kNN pool generation cost")
    conflict_entries: int | None = Field(default=None, ge=0)
    wall_time_s: float = Field(default=0.0, ge=0.0)
    threads: int = Field(default=1, ge=1)
    degrees: DegreeStats


class ExperimentConfig(BaseModel):
    """Parameter grid of one experiment invocation."""

    model_config = ConfigDict(extra="forbid")

    kind: ExperimentKind
    ns: list[int] = Field(..., min_length=1)
    dims: list[int] = Field(..., min_length=1)
    seeds: list[int] = Field(default_factory=lambda: [0], min_length=1)
    degree_bounds: list[int | None] = Field(default_factory=lambda: [None], min_length=1)
    budgets: list[int] = Field(default_factory=lambda: [500], min_length=1)
    phase1_budgets: list[int | None] = Field(default_factory=lambda: [None], min_length=1)
    queries: int = Field(default=200)
    k: int = Field(default=1)
    output: str | None = None
    format: OutputFormat = OutputFormat.CSV
    threads: int = Field(default=1)
    force: bool = False

    @field_validator("ns", "dims", "budgets")
    @classmethod
    def validate_positive_list(cls, v: list[int]) -> list[int]:
        for x in v:
            if x < 1:
                raise ValueError(ERR_POSITIVE.format(name="grid value", value=x))
        return v

    @field_validator("degree_bounds", "phase1_budgets")
    @classmethod
    def validate_optional_list(cls, v: list[int | None]) -> list[int | None]:
        for x in v:
            if x is not None and x < 1:
                raise ValueError(ERR_POSITIVE.format(name="grid value", value=x))
        return v

    @field_validator("seeds")
    @classmethod
    def validate_seeds(cls, v: list[int]) -> list[int]:
        for s in v:
            if not (0 <= s < 2**64):
                msg = f"Seed {s} is not a 64-bit unsigned integer."
                raise ValueError(msg)
        return v

    @field_validator("queries", "k", "threads")
    @classmethod
    def validate_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError(ERR_POSITIVE.format(name="setting", value=v))
        return v


class ExperimentRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int
    n: int
    d: int


class DegreeCell(ExperimentRecord):
    """Degree distribution of the exact graph on one (seed, n, d) cell."""

    stats: DegreeStats
    edges: int = Field(..., ge=0)


class AccuracyRow(ExperimentRecord):
    degree_bound: int | None
    budget: int = Field(..., ge=1)
    queries: int = Field(..., ge=1)
    accuracy: float = Field(..., ge=0.0, le=1.0)
    mean_distance_evals: float = Field(..., ge=0.0)
    strong_components: int = Field(..., ge=1)
    weak_components: int = Field(..., ge=1)


class AccuracyTable(BaseModel):
    """Mean top-1 accuracy per (degree bound, budget)."""

    model_config = ConfigDict(extra="forbid")

    rows: list[AccuracyRow] = Field(default_factory=list)

    def lookup(self, degree_bound: int | None, budget: int, seed: int | None = None) -> list[AccuracyRow]:
        return [
            r
            for r in self.rows
            if r.degree_bound == degree_bound and r.budget == budget and (seed is None or r.seed == seed)
        ]

    def mean_accuracy(self, degree_bound: int | None, budget: int) -> float:
        rows = self.lookup(degree_bound, budget)
        if not rows:
            msg = f"No accuracy cell for bound={bound_label(degree_bound)}, budget={budget}."
            raise KeyError(msg)
        return sum(r.accuracy for r in rows) / len(rows)


class MultiplicityCell(ExperimentRecord):
    """Histogram of k_v(w) over all (v, w) with w conflicting to at least one edge of v."""

    histogram: dict[int, int] = Field(default_factory=dict)

    @property
    def pairs(self) -> int:
        return sum(self.histogram.values())

    @property
    def mean(self) -> float:
        total = self.pairs
        if total == 0:
            return 0.0
        return sum(k * c for k, c in self.histogram.items()) / total


class EscapeRow(ExperimentRecord):
    degree_bound: int | None
    budget: int = Field(..., ge=1)
    phase1_budget: int | None
    queries: int = Field(..., ge=1)
    best_first_accuracy: float = Field(..., ge=0.0, le=1.0)
    escape_accuracy: float = Field(..., ge=0.0, le=1.0)
    best_first_evals: float = Field(..., ge=0.0)
    escape_evals: float = Field(..., ge=0.0)
    mean_escapes: float = Field(..., ge=0.0)

    @model_validator(mode="after")
    def validate_phase1(self) -> Self:
        if self.phase1_budget is not None and self.phase1_budget > self.budget:
            msg = "phase1_budget cannot exceed the total budget."
            raise ValueError(msg)
        return self
