"""
Experiment harness.

Each experiment walks its (seed, n, d) grid in a fixed order, generates the uniform dataset
for the cell, builds the exact MRNG once and derives everything else from it. Per-query work
may run on several threads; outcomes are aggregated in query order, so the emitted CSV/JSON
is byte-identical for any thread count. Wall times are logged, never emitted.
"""

import csv
import io
import json
import logging
from collections.abc import Callable, Iterator, Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, TypeVar

import numpy as np
import numpy.typing as npt

from src.core.config import Settings, get_settings
from src.core.constants import ARTIFACT_VERSION
from src.core.exceptions import CalculationError, ValidationError
from src.core.mrng import analytics, builder, search
from src.core.mrng.engine import MrngEngine
from src.core.mrng.geometry import generate_uniform_dataset, generate_uniform_queries, philox_generator
from src.core.mrng.verify import nearest_ids
from src.core.services.file_service import FileService
from src.domain_models.dataset import Dataset
from src.domain_models.enums import ExperimentKind, OutputFormat
from src.domain_models.experiment import (
    AccuracyRow,
    AccuracyTable,
    BuildParams,
    DegreeCell,
    EscapeRow,
    ExperimentConfig,
    ExperimentRecord,
    MultiplicityCell,
    bound_label,
)
from src.domain_models.graph import ConflictMap, ProximityGraph

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")

# Philox stream for the nodes rebuilt by the truncation cross-check.
_PREFIX_STREAM = 4


def _cells(cfg: ExperimentConfig) -> Iterator[tuple[int, int, int]]:
    for seed in cfg.seeds:
        for n in cfg.ns:
            for d in cfg.dims:
                yield seed, n, d


def _map_queries(fn: Callable[[T], R], items: Sequence[T], threads: int) -> list[R]:
    """Apply `fn` per item; results keep the order of `items`."""
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(fn, items))


def _engine(cfg: ExperimentConfig, engine: MrngEngine | None) -> MrngEngine:
    return engine or MrngEngine(threads=cfg.threads)


def _exact_graph(
    engine: MrngEngine, dataset: Dataset, seed: int, force: bool, *, conflicts: bool = False
) -> tuple[ProximityGraph, ConflictMap | None]:
    params = BuildParams(seed=seed, record_conflicts=conflicts)
    graph, _, conflict_map = engine.build(dataset, params, force=force)
    return graph, conflict_map


def run_degree_experiment(cfg: ExperimentConfig, engine: MrngEngine | None = None) -> list[DegreeCell]:
    """Degree distribution of the exact MRNG for every (seed, n, d) cell."""
    eng = _engine(cfg, engine)
    cells: list[DegreeCell] = []
    for seed, n, d in _cells(cfg):
        dataset = generate_uniform_dataset(n, d, seed)
        graph, _ = _exact_graph(eng, dataset, seed, cfg.force)
        stats = eng.degree_stats(graph)
        logger.info(
            "Degree cell seed=%d n=%d d=%d: min=%d mean=%.3f max=%d",
            seed,
            n,
            d,
            stats.min,
            stats.mean,
            stats.max,
        )
        cells.append(DegreeCell(seed=seed, n=n, d=d, stats=stats, edges=graph.num_edges))
    return cells


def check_prefix_property(
    dataset: Dataset, exact: ProximityGraph, m: int, nodes: npt.NDArray[np.int64]
) -> None:
    """Rebuild `nodes` with degree bound m and require the lists to equal the exact m-prefixes."""
    points = dataset.points
    for v in nodes.tolist():
        sel = builder.select_neighbors(points, v, None, m)
        if not np.array_equal(sel.ids, exact.neighbors[v][:m]):
            msg = (
                f"Degree-{m} list of node {v} is not a prefix of its exact list: "
                f"{sel.ids.tolist()} vs {exact.neighbors[v][:m].tolist()}"
            )
            raise CalculationError(msg)


def _prefix_sample(n: int, seed: int, settings: Settings) -> npt.NDArray[np.int64]:
    size = settings.experiment.prefix_check_nodes
    if size == 0 or size >= n:
        return np.arange(n, dtype=np.int64)
    chosen = philox_generator(seed, _PREFIX_STREAM).choice(n, size=size, replace=False)
    return np.sort(chosen).astype(np.int64)


def _accuracy_rows(
    cfg: ExperimentConfig,
    graph: ProximityGraph,
    dataset: Dataset,
    queries: npt.NDArray[np.float64],
    truth: npt.NDArray[np.int64],
    cell: tuple[int, int, int],
    m: int | None,
) -> list[AccuracyRow]:
    entry = search.pick_entry(dataset)
    budgets = sorted(set(cfg.budgets))

    def one(i: int) -> dict[int, tuple[int, int]]:
        return search.best_first_checkpoints(graph, dataset, entry, queries[i], budgets)

    outcomes = _map_queries(one, list(range(len(queries))), cfg.threads)
    strong, weak = analytics.connectivity(graph)
    seed, n, d = cell
    rows: list[AccuracyRow] = []
    for b in cfg.budgets:
        hits = sum(int(res[b][0] == truth[i]) for i, res in enumerate(outcomes))
        evals = sum(res[b][1] for res in outcomes)
        rows.append(
            AccuracyRow(
                seed=seed,
                n=n,
                d=d,
                degree_bound=m,
                budget=b,
                queries=len(outcomes),
                accuracy=hits / len(outcomes),
                mean_distance_evals=evals / len(outcomes),
                strong_components=strong,
                weak_components=weak,
            )
        )
    return rows


def run_truncation_experiment(cfg: ExperimentConfig, engine: MrngEngine | None = None) -> AccuracyTable:
    """
    Mean top-1 best-first accuracy of degree-bounded MRNGs.

    Every bounded graph is the exact graph with each list cut to its first m entries; a sample
    of nodes is rebuilt with bound m to confirm this before any accuracy is measured.
    """
    eng = _engine(cfg, engine)
    table = AccuracyTable()
    for seed, n, d in _cells(cfg):
        dataset = generate_uniform_dataset(n, d, seed)
        exact, _ = _exact_graph(eng, dataset, seed, cfg.force)
        queries = generate_uniform_queries(cfg.queries, d, seed)
        truth = nearest_ids(dataset, queries)
        sample = _prefix_sample(n, seed, eng.settings)
        for m in cfg.degree_bounds:
            if m is not None:
                check_prefix_property(dataset, exact, m, sample)
            rows = _accuracy_rows(cfg, exact.truncated(m), dataset, queries, truth, (seed, n, d), m)
            for row in rows:
                logger.info(
                    "Truncation seed=%d n=%d d=%d m=%s budget=%d: accuracy=%.4f",
                    seed,
                    n,
                    d,
                    bound_label(m),
                    row.budget,
                    row.accuracy,
                )
            table.rows.extend(rows)
    return table


def run_conflict_multiplicity_experiment(
    cfg: ExperimentConfig, engine: MrngEngine | None = None
) -> list[MultiplicityCell]:
    """Histogram of k_v(w) on the exact MRNG of every cell; the conflict map is never materialised."""
    eng = _engine(cfg, engine)
    cells: list[MultiplicityCell] = []
    for seed, n, d in _cells(cfg):
        eng.check_cap(n, conflicts=True, force=cfg.force)
        dataset = generate_uniform_dataset(n, d, seed)
        graph, _ = _exact_graph(eng, dataset, seed, cfg.force)
        hist = analytics.stream_conflict_multiplicity(dataset, graph, eng.threads)
        cell = MultiplicityCell(seed=seed, n=n, d=d, histogram=hist)
        logger.info("Multiplicity seed=%d n=%d d=%d: %d pairs, mean k=%.4f", seed, n, d, cell.pairs, cell.mean)
        cells.append(cell)
    return cells


def _escape_stats(
    cfg: ExperimentConfig,
    dataset: Dataset,
    graph: ProximityGraph,
    conflicts: ConflictMap,
    queries: npt.NDArray[np.float64],
    truth: npt.NDArray[np.int64],
    setting: tuple[int | None, int, int | None],
) -> dict[str, float]:
    m, budget, phase1 = setting
    entry = search.pick_entry(dataset)

    def one(i: int) -> tuple[int, int, int, int, int]:
        plain = search.best_first(graph, dataset, entry, queries[i], budget)
        esc = search.search_with_escape(
            graph, dataset, conflicts, entry, queries[i], budget, phase1_budget=phase1
        )
        plain_top = plain.top.node if plain.top else -1
        esc_top = esc.top.node if esc.top else -1
        return (
            int(plain_top == truth[i]),
            int(esc_top == truth[i]),
            plain.distance_evals,
            esc.distance_evals,
            esc.escapes,
        )

    outcomes = np.array(_map_queries(one, list(range(len(queries))), cfg.threads), dtype=np.int64)
    means = outcomes.sum(axis=0) / len(queries)
    logger.debug("Escape setting m=%s budget=%d phase1=%s done", bound_label(m), budget, phase1)
    return {
        "best_first_accuracy": float(means[0]),
        "escape_accuracy": float(means[1]),
        "best_first_evals": float(means[2]),
        "escape_evals": float(means[3]),
        "mean_escapes": float(means[4]),
    }


def run_escape_experiment(cfg: ExperimentConfig, engine: MrngEngine | None = None) -> list[EscapeRow]:
    """
    Best-first against escape-enabled search on truncated MRNGs with full conflict maps.

    Settings whose phase-one allowance exceeds the budget are skipped.
    """
    eng = _engine(cfg, engine)
    rows: list[EscapeRow] = []
    for seed, n, d in _cells(cfg):
        dataset = generate_uniform_dataset(n, d, seed)
        exact, conflicts = _exact_graph(eng, dataset, seed, cfg.force, conflicts=True)
        if conflicts is None:
            msg = "Exact build did not produce a conflict map."
            raise CalculationError(msg)
        queries = generate_uniform_queries(cfg.queries, d, seed)
        truth = nearest_ids(dataset, queries)
        for m in cfg.degree_bounds:
            graph, cmap = exact.truncated(m), conflicts.truncated(m)
            for budget in cfg.budgets:
                for phase1 in cfg.phase1_budgets:
                    if phase1 is not None and phase1 > budget:
                        logger.warning("Skipping phase1_budget=%d above budget=%d", phase1, budget)
                        continue
                    stats = _escape_stats(cfg, dataset, graph, cmap, queries, truth, (m, budget, phase1))
                    rows.append(
                        EscapeRow(
                            seed=seed,
                            n=n,
                            d=d,
                            degree_bound=m,
                            budget=budget,
                            phase1_budget=phase1,
                            queries=len(queries),
                            **stats,
                        )
                    )
                    logger.info(
                        "Escape seed=%d n=%d d=%d m=%s budget=%d: best-first %.4f, escape %.4f",
                        seed,
                        n,
                        d,
                        bound_label(m),
                        budget,
                        stats["best_first_accuracy"],
                        stats["escape_accuracy"],
                    )
    return rows


def run_experiment(cfg: ExperimentConfig, engine: MrngEngine | None = None) -> list[ExperimentRecord]:
    """Dispatch on `cfg.kind`."""
    if cfg.kind in (ExperimentKind.DEGREE, ExperimentKind.DEGREE_SWEEP):
        return list(run_degree_experiment(cfg, engine))
    if cfg.kind == ExperimentKind.TRUNCATION:
        return list(run_truncation_experiment(cfg, engine).rows)
    if cfg.kind == ExperimentKind.CONFLICT_MULTIPLICITY:
        return list(run_conflict_multiplicity_experiment(cfg, engine))
    if cfg.kind == ExperimentKind.ESCAPE:
        return list(run_escape_experiment(cfg, engine))
    msg = f"Unknown experiment kind: {cfg.kind}"
    raise ValidationError(msg)


# --- Output ---


def _stamp(settings: Settings) -> dict[str, Any]:
    return {
        "schema_version": settings.experiment.csv_schema_version,
        "artifact_version": ARTIFACT_VERSION,
    }


def _degree_rows(kind: ExperimentKind, cell: DegreeCell) -> list[dict[str, Any]]:
    s = cell.stats
    base = {"seed": cell.seed, "n": cell.n, "d": cell.d}
    summary = {"min": s.min, "mean": s.mean, "max": s.max}
    if kind == ExperimentKind.DEGREE_SWEEP:
        return [{**base, "edges": cell.edges, **summary}]
    return [{**base, "degree": k, "count": c, **summary} for k, c in sorted(s.histogram.items())]


def _flat_rows(kind: ExperimentKind, record: ExperimentRecord) -> list[dict[str, Any]]:
    if isinstance(record, DegreeCell):
        return _degree_rows(kind, record)
    if isinstance(record, MultiplicityCell):
        base = {"seed": record.seed, "n": record.n, "d": record.d}
        return [{**base, "k": k, "pairs": c} for k, c in sorted(record.histogram.items())]
    row = record.model_dump(mode="json")
    row["degree_bound"] = bound_label(row["degree_bound"])
    if "phase1_budget" in row and row["phase1_budget"] is None:
        row["phase1_budget"] = ""
    return [row]


_HEADERS: dict[ExperimentKind, list[str]] = {
    ExperimentKind.DEGREE: ["seed", "n", "d", "degree", "count", "min", "mean", "max"],
    ExperimentKind.DEGREE_SWEEP: ["seed", "n", "d", "edges", "min", "mean", "max"],
    ExperimentKind.TRUNCATION: list(AccuracyRow.model_fields),
    ExperimentKind.CONFLICT_MULTIPLICITY: ["seed", "n", "d", "k", "pairs"],
    ExperimentKind.ESCAPE: list(EscapeRow.model_fields),
}


def render_csv(kind: ExperimentKind, records: Sequence[ExperimentRecord], settings: Settings | None = None) -> str:
    """Header plus one row per record (per histogram bucket for histograms); UTF-8 text, LF endings."""
    stamp = _stamp(settings or get_settings())
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=[*stamp, *_HEADERS[kind]], lineterminator="\n")
    writer.writeheader()
    for record in records:
        for row in _flat_rows(kind, record):
            writer.writerow({**stamp, **row})
    return buf.getvalue()


def render_json(cfg: ExperimentConfig, records: Sequence[ExperimentRecord], settings: Settings | None = None) -> str:
    document = {
        **_stamp(settings or get_settings()),
        "experiment": str(cfg.kind),
        "config": cfg.model_dump(mode="json", exclude={"output", "format", "threads", "force"}),
        "records": [r.model_dump(mode="json") for r in records],
    }
    return json.dumps(document, indent=2) + "\n"


def render_results(cfg: ExperimentConfig, records: Sequence[ExperimentRecord]) -> str:
    if cfg.format == OutputFormat.JSON:
        return render_json(cfg, records)
    return render_csv(cfg.kind, records)


def write_results(
    cfg: ExperimentConfig, records: Sequence[ExperimentRecord], files: FileService | None = None
) -> Path | None:
    """Write rendered results to `cfg.output`; returns None when no output path is set."""
    if cfg.output is None:
        return None
    return (files or FileService()).write_text(render_results(cfg, records), cfg.output)
