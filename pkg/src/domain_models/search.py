from typing import Self

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.domain_models.enums import TraceAction


class Candidate(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    node: int = Field(..., ge=0)
    distance: float = Field(..., ge=0.0)


class TraceEvent(BaseModel):
    """One step of a search trace, emitted as a JSON line by the CLI."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    step: int = Field(..., ge=0)
    node: int = Field(..., ge=0)
    distance: float = Field(..., ge=0.0)
    action: TraceAction


class SearchResult(BaseModel):
    """
    Outcome of a single query.

    `candidates` is ascending by (distance, id). `distance_evals` counts query-to-node
    evaluations; `path` lists nodes in the order they were expanded (or walked, for greedy).
    """

    model_config = ConfigDict(extra="forbid")

    candidates: list[Candidate] = Field(default_factory=list)
    distance_evals: int = Field(default=0, ge=0)
    path: list[int] = Field(default_factory=list)
    terminated_at_local_min: bool = False
    escapes: int = Field(default=0, ge=0, description="Conflict scans that found a closer node")
    trace: list[TraceEvent] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_order(self) -> Self:
        keys = [(c.distance, c.node) for c in self.candidates]
        if keys != sorted(keys):
            msg = "Candidates must be sorted by (distance, id)."
            raise ValueError(msg)
        if len({c.node for c in self.candidates}) != len(self.candidates):
            msg = "Candidates must be distinct nodes."
            raise ValueError(msg)
        return self

    @property
    def top(self) -> Candidate | None:
        return self.candidates[0] if self.candidates else None

    @property
    def ids(self) -> list[int]:
        return [c.node for c in self.candidates]
