from typing import Any, Self

from pydantic import BaseModel, ConfigDict, Field, model_validator


class CheckReport(BaseModel):
    """
    Result of one checker.

    A failed report always carries a counterexample: the ids involved plus the numeric
    witness needed to re-verify it from raw coordinates.
    """

    model_config = ConfigDict(extra="forbid")

    check: str = Field(..., min_length=1)
    passed: bool
    counterexample: dict[str, Any] | None = None
    stats: dict[str, int | float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def validate_counterexample(self) -> Self:
        if not self.passed and not self.counterexample:
            msg = f"Failed check '{self.check}' must carry a counterexample."
            raise ValueError(msg)
        return self

    @classmethod
    def ok(cls, check: str, **stats: int | float) -> "CheckReport":
        return cls(check=check, passed=True, stats=stats)

    @classmethod
    def fail(cls, check: str, counterexample: dict[str, Any], **stats: int | float) -> "CheckReport":
        return cls(check=check, passed=False, counterexample=counterexample, stats=stats)
