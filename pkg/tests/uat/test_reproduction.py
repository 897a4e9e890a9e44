"""
Statistical reproductions on n=5000 uniform data.

Each test runs O(n^2) builds and takes minutes; they are deselected by default.
Run with `pytest -m slow tests/uat/test_reproduction.py`.
"""

import pytest

from src.core.experiments import (
    run_conflict_multiplicity_experiment,
    run_degree_experiment,
    run_truncation_experiment,
)
from src.domain_models.enums import ExperimentKind
from src.domain_models.experiment import ExperimentConfig

SEEDS = [0, 1, 2]

pytestmark = pytest.mark.slow


def grid(kind: ExperimentKind, **values: object) -> ExperimentConfig:
    return ExperimentConfig.model_validate({"kind": kind, "seeds": SEEDS, "threads": 4, **values})


@pytest.mark.parametrize(
    ("d", "mean_range", "max_floor", "max_ceiling"),
    [(10, (9.0, 13.0), 22.0, 40.0), (100, (32.0, 42.0), 120.0, None)],
)
def test_degree_distribution(
    d: int, mean_range: tuple[float, float], max_floor: float, max_ceiling: float | None
) -> None:
    cells = run_degree_experiment(grid(ExperimentKind.DEGREE, ns=[5000], dims=[d]))
    mean = sum(c.stats.mean for c in cells) / len(cells)
    top = sum(c.stats.max for c in cells) / len(cells)
    assert mean_range[0] <= mean <= mean_range[1]
    assert top >= max_floor
    if max_ceiling is not None:
        assert top <= max_ceiling


def test_degree_regime_at_d25() -> None:
    cells = run_degree_experiment(grid(ExperimentKind.DEGREE, ns=[5000], dims=[25]))
    mean = sum(c.stats.mean for c in cells) / len(cells)
    top = sum(c.stats.max for c in cells) / len(cells)
    assert 18.0 <= mean <= 24.0
    assert 70.0 <= top <= 110.0


def test_truncated_accuracy_d25() -> None:
    cfg = grid(
        ExperimentKind.TRUNCATION,
        ns=[5000],
        dims=[25],
        degree_bounds=[10, None],
        budgets=[500, 5000],
        queries=200,
    )
    table = run_truncation_experiment(cfg)
    assert table.mean_accuracy(10, 500) >= 0.90
    assert table.mean_accuracy(None, 5000) == 1.0


def test_truncated_accuracy_d100() -> None:
    cfg = grid(
        ExperimentKind.TRUNCATION,
        ns=[5000],
        dims=[100],
        degree_bounds=[18],
        budgets=[1200],
        queries=200,
    )
    assert run_truncation_experiment(cfg).mean_accuracy(18, 1200) >= 0.85


def test_conflict_multiplicity_grows_with_dimension() -> None:
    cells = run_conflict_multiplicity_experiment(
        grid(ExperimentKind.CONFLICT_MULTIPLICITY, ns=[3000], dims=[25, 100])
    )
    by_dim: dict[int, list[float]] = {25: [], 100: []}
    for cell in cells:
        by_dim[cell.d].append(cell.mean)
    assert sum(by_dim[100]) / len(SEEDS) > sum(by_dim[25]) / len(SEEDS)
