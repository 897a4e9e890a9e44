import typing
from functools import lru_cache

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.core.validators import ConfigValidators

_SUBCONFIG = SettingsConfigDict(env_file=".env", extra="ignore", populate_by_name=True)


class GeometryConfig(BaseSettings):
    """Numeric tolerances and sampling resolutions for the geometry kernels."""

    model_config = _SUBCONFIG

    angle_tolerance: float = Field(
        alias="ANGLE_TOLERANCE",
        default=1e-9,
        description="Absolute tolerance (radians) for the 60 degree separation check",
    )
    lemma4_band: float = Field(
        alias="LEMMA4_BAND",
        default=1e-2,
        description="Relative band around the f-threshold where sampling disagreement is tolerated",
    )
    lemma4_boundary_samples: int = Field(
        alias="LEMMA4_BOUNDARY_SAMPLES",
        default=512,
        description="Boundary samples on the plane circle for the f-threshold oracle",
    )
    lemma4_interior_samples: int = Field(
        alias="LEMMA4_INTERIOR_SAMPLES",
        default=512,
        description="Quasi-random interior disk samples for the f-threshold oracle",
    )
    supremum_step: float = Field(
        alias="SUPREMUM_STEP",
        default=1e-4,
        description="Grid step on alpha for the numeric supremum cross-check",
    )

    @field_validator("angle_tolerance", "lemma4_band", "supremum_step")
    @classmethod
    def validate_tolerance(cls, v: float) -> float:
        return ConfigValidators.validate_tolerance(v)

    @field_validator("lemma4_boundary_samples", "lemma4_interior_samples")
    @classmethod
    def validate_samples(cls, v: int) -> int:
        return ConfigValidators.validate_positive_int(v, "sample count")


class BuildConfig(BaseSettings):
    """Configuration for graph construction."""

    model_config = _SUBCONFIG

    threads: int = Field(alias="BUILD_THREADS", default=1, description="Worker threads per build")
    exact_build_cap: int = Field(
        alias="EXACT_BUILD_CAP",
        default=6000,
        description="Largest n accepted for O(n^2) exact builds without --force",
    )
    conflict_cap: int = Field(
        alias="CONFLICT_CAP",
        default=3000,
        description="Largest n accepted for conflict-map computation without --force",
    )

    @field_validator("threads", "exact_build_cap", "conflict_cap")
    @classmethod
    def validate_positive(cls, v: int) -> int:
        return ConfigValidators.validate_positive_int(v, "build setting")


class SearchConfig(BaseSettings):
    """Defaults for query-time search."""

    model_config = _SUBCONFIG

    budget: int = Field(alias="SEARCH_BUDGET", default=500, description="Distance evaluations")
    k: int = Field(alias="SEARCH_K", default=1, description="Number of results returned")

    @field_validator("budget", "k")
    @classmethod
    def validate_positive(cls, v: int) -> int:
        return ConfigValidators.validate_positive_int(v, "search setting")


class ExperimentSettings(BaseSettings):
    """Defaults for the experiment harness."""

    model_config = _SUBCONFIG

    queries: int = Field(
        alias="EXPERIMENT_QUERIES", default=200, description="Uniform queries per accuracy cell"
    )
    output_dir: str = Field(
        alias="EXPERIMENT_OUTPUT_DIR", default="results", description="Default output directory"
    )
    prefix_check_nodes: int = Field(
        alias="PREFIX_CHECK_NODES",
        default=64,
        description="Nodes rebuilt independently to cross-check truncation (0 = all nodes)",
    )
    csv_schema_version: int = Field(
        alias="CSV_SCHEMA_VERSION", default=1, description="Version stamped into every CSV row"
    )

    @field_validator("queries")
    @classmethod
    def validate_queries(cls, v: int) -> int:
        return ConfigValidators.validate_positive_int(v, "queries")


class FileConfig(BaseSettings):
    """Configuration for FileService operations."""

    model_config = _SUBCONFIG

    retry_max: int = Field(alias="FILE_RETRY_MAX", default=3, description="Write attempts")
    retry_backoff: float = Field(
        alias="FILE_RETRY_BACKOFF", default=0.1, description="Initial backoff in seconds"
    )

    @field_validator("retry_max")
    @classmethod
    def validate_retry(cls, v: int) -> int:
        return ConfigValidators.validate_positive_int(v, "retry_max")


class Settings(BaseSettings):
    """Configuration settings for the application."""

    model_config = _SUBCONFIG

    log_level: str = Field(alias="LOG_LEVEL", default="INFO", description="Logging level")

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        return ConfigValidators.validate_log_level(v)

    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    build: BuildConfig = Field(default_factory=BuildConfig)
    search: SearchConfig = Field(default_factory=SearchConfig)
    experiment: ExperimentSettings = Field(default_factory=ExperimentSettings)
    file_service: FileConfig = Field(default_factory=FileConfig)


# Global settings state override
_settings_override_state: dict[str, "typing.Any"] = {"override": None}


def set_settings_override(settings: Settings | None) -> None:
    _settings_override_state["override"] = settings


@lru_cache
def get_settings() -> Settings:
    """
    Load and cache settings.
    Invalid environment values produce a readable summary instead of a traceback.
    """
    if _settings_override_state["override"]:
        return _settings_override_state["override"]  # type: ignore[no-any-return]

    import sys

    from pydantic import ValidationError

    try:
        return Settings()
    except ValidationError as e:
        # Logging may not be configured yet
        print("\n" + "=" * 60, file=sys.stderr)  # noqa: T201
        print("CONFIGURATION ERROR: Invalid Environment Variables", file=sys.stderr)  # noqa: T201
        print("=" * 60, file=sys.stderr)  # noqa: T201
        for err in e.errors():
            field_path = ".".join([str(loc) for loc in err["loc"]])
            print(f"- {field_path}: {err['msg']}", file=sys.stderr)  # noqa: T201
        print("=" * 60 + "\n", file=sys.stderr)  # noqa: T201

        import os

        if "PYTEST_CURRENT_TEST" in os.environ or "pytest" in sys.modules:
            raise

        sys.exit(2)
