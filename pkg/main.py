import argparse
import json
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import ValidationError as PydanticValidationError

# Add src to path if running from root
sys.path.append(".")

from src.core.config import get_settings
from src.core.constants import (
    ERR_GEN_SPEC,
    EXIT_CHECK_FAILED,
    EXIT_IO,
    EXIT_OK,
    EXIT_USAGE,
)
from src.core.exceptions import (
    CalculationError,
    ChecksumMismatchError,
    ConfigurationError,
    GraphFormatError,
    PreconditionError,
    ValidationError,
)
from src.core.experiments import render_results, run_experiment, write_results
from src.core.mrng.engine import ALL_CHECKS, MrngEngine
from src.core.mrng.geometry import generate_uniform_dataset, generate_uniform_queries
from src.core.services.graph_io import load_conflicts, load_graph, save_conflicts, save_graph
from src.core.services.vector_io import VectorStore
from src.domain_models.dataset import Dataset
from src.domain_models.enums import ExperimentKind, OutputFormat
from src.domain_models.experiment import UNBOUNDED_LABEL, BuildParams, ExperimentConfig
from src.domain_models.graph import PoolSpec

logger = logging.getLogger(__name__)

STDOUT = "-"

# Grids used when an experiment is run without --n/--d/--degree-bound/--budget.
_DEFAULT_GRIDS: dict[ExperimentKind, dict[str, list[Any]]] = {
    ExperimentKind.DEGREE: {"ns": [5000], "dims": [10, 100]},
    ExperimentKind.DEGREE_SWEEP: {"ns": [1000, 2000, 3000, 4000, 5000], "dims": [10, 25, 50, 100]},
    ExperimentKind.TRUNCATION: {
        "ns": [5000],
        "dims": [25],
        "degree_bounds": [4, 6, 8, 10, 12, 14, 16, 18, 20, None],
        "budgets": [100, 200, 300, 500, 800, 1200],
    },
    ExperimentKind.CONFLICT_MULTIPLICITY: {"ns": [3000], "dims": [25, 100]},
    ExperimentKind.ESCAPE: {
        "ns": [2000],
        "dims": [25],
        "degree_bounds": [6, 10, None],
        "budgets": [200, 500],
    },
}


def echo(msg: str) -> None:
    """Print message to stdout."""
    print(msg)  # noqa: T201


def echo_json(payload: Any) -> None:
    echo(json.dumps(payload))


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        msg = f"expected a positive integer, got '{text}'"
        raise argparse.ArgumentTypeError(msg) from None
    if value < 1:
        msg = f"expected a positive integer, got {value}"
        raise argparse.ArgumentTypeError(msg)
    return value


def seed_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        msg = f"expected an unsigned 64-bit seed, got '{text}'"
        raise argparse.ArgumentTypeError(msg) from None
    if not (0 <= value < 2**64):
        msg = f"seed {value} is outside [0, 2^64)"
        raise argparse.ArgumentTypeError(msg)
    return value


def degree_bound(text: str) -> int | None:
    """A positive bound, or 'unbounded'."""
    if text.strip().lower() == UNBOUNDED_LABEL:
        return None
    return positive_int(text)


def parse_gen_spec(spec: str) -> tuple[int, int, int]:
    """Parse 'n=..,d=..,seed=..' (seed optional, default 0)."""
    fields: dict[str, int] = {}
    for part in spec.split(","):
        key, sep, value = part.strip().partition("=")
        if not sep or key not in {"n", "d", "seed"} or key in fields:
            raise ValidationError(ERR_GEN_SPEC.format(spec=spec))
        try:
            fields[key] = int(value)
        except ValueError as e:
            raise ValidationError(ERR_GEN_SPEC.format(spec=spec)) from e
    if "n" not in fields or "d" not in fields:
        raise ValidationError(ERR_GEN_SPEC.format(spec=spec))
    return fields["n"], fields["d"], fields.get("seed", 0)


def parse_query(text: str) -> np.ndarray:
    try:
        return np.array([float(x) for x in text.split(",")], dtype=np.float64)
    except ValueError as e:
        msg = f"Invalid query '{text}'; expected comma-separated coordinates."
        raise ValidationError(msg) from e


# --- Commands ---


def cmd_gen(args: argparse.Namespace) -> int:
    """Write a uniform dataset (and optionally a query set) to vecbin or fvecs files."""
    store = VectorStore()
    dataset = generate_uniform_dataset(args.n, args.d, args.seed)
    target = store.save(dataset.points, args.output)
    summary: dict[str, Any] = {
        "n": dataset.n,
        "d": dataset.dim,
        "seed": args.seed,
        "checksum": f"{dataset.checksum:#018x}",
        "path": str(target),
    }
    if args.queries:
        if not args.query_output:
            msg = "--queries requires --query-output."
            raise ConfigurationError(msg)
        queries = generate_uniform_queries(args.queries, args.d, args.seed)
        summary["queries"] = args.queries
        summary["query_path"] = str(store.save(queries, args.query_output))
    echo_json(summary)
    return EXIT_OK


def _dataset_from_args(args: argparse.Namespace) -> tuple[Dataset, int]:
    if args.gen:
        n, d, seed = parse_gen_spec(args.gen)
        return generate_uniform_dataset(n, d, seed), seed
    return VectorStore().load_dataset(args.dataset), args.seed


def cmd_build(args: argparse.Namespace) -> int:
    """Build an exact or generalized MRNG and write the graph (and conflict) files."""
    if args.exact and (args.degree_bound is not None or args.pool != "full"):
        msg = "--exact cannot be combined with --degree-bound or a non-full --pool."
        raise ConfigurationError(msg)
    dataset, seed = _dataset_from_args(args)
    params = BuildParams(
        degree_bound=args.degree_bound,
        pool=PoolSpec.parse(args.pool),
        record_conflicts=args.conflicts is not None,
        seed=seed,
    )
    engine = MrngEngine(threads=args.threads)
    graph, report, conflicts = engine.build(dataset, params, force=args.force)
    save_graph(graph, args.output)
    if conflicts is not None:
        save_conflicts(conflicts, args.conflicts)
    echo(report.model_dump_json())
    return EXIT_OK


def _queries_from_args(args: argparse.Namespace) -> np.ndarray:
    if args.query_file:
        return VectorStore().load(args.query_file)
    if args.query:
        rows = [parse_query(q) for q in args.query]
        if len({r.size for r in rows}) > 1:
            msg = "All --query values must have the same dimension."
            raise ValidationError(msg)
        return np.stack(rows)
    msg = "Provide --query-file or at least one --query."
    raise ConfigurationError(msg)


def cmd_search(args: argparse.Namespace) -> int:
    """One JSON line per query; with --trace, its trace events precede it as JSON lines."""
    dataset = VectorStore().load_dataset(args.dataset)
    graph = load_graph(args.graph, dataset)
    conflicts = load_conflicts(args.conflicts, graph) if args.conflicts else None
    engine = MrngEngine()
    queries = _queries_from_args(args)
    for i, q in enumerate(queries):
        result = engine.search(
            graph,
            dataset,
            q,
            budget=args.budget,
            k=args.k,
            entry=args.entry,
            conflicts=conflicts,
            escape=args.escape,
            phase1_budget=args.phase1_budget,
            trace=args.trace,
        )
        for event in result.trace:
            echo_json({"query": i, "event": event.model_dump(mode="json")})
        payload = result.model_dump(mode="json", exclude={"trace"})
        echo_json({"query": i, **payload})
    return EXIT_OK


def cmd_verify(args: argparse.Namespace) -> int:
    """Run structural checks; exit 1 if any fails."""
    dataset = VectorStore().load_dataset(args.dataset)
    graph = load_graph(args.graph, dataset)
    checks = args.check or list(ALL_CHECKS)
    reports = MrngEngine().verify(graph, dataset, checks, args.sample, args.seed)
    passed = all(r.passed for r in reports)
    echo_json({"passed": passed, "reports": [r.model_dump(mode="json") for r in reports]})
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def experiment_config(args: argparse.Namespace) -> ExperimentConfig:
    kind = ExperimentKind(args.kind)
    settings = get_settings()
    grid = _DEFAULT_GRIDS[kind]
    output = args.output
    if output is None:
        output = str(Path(settings.experiment.output_dir) / f"{kind}.{args.format}")
    return ExperimentConfig(
        kind=kind,
        ns=args.n or grid["ns"],
        dims=args.d or grid["dims"],
        seeds=args.seed or [0],
        degree_bounds=args.degree_bound or grid.get("degree_bounds", [None]),
        budgets=args.budget or grid.get("budgets", [settings.search.budget]),
        phase1_budgets=args.phase1_budget or [None],
        queries=args.queries or settings.experiment.queries,
        k=args.k,
        output=None if output == STDOUT else output,
        format=OutputFormat(args.format),
        threads=args.threads or settings.build.threads,
        force=args.force,
    )


def cmd_experiment(args: argparse.Namespace) -> int:
    cfg = experiment_config(args)
    records = run_experiment(cfg)
    target = write_results(cfg, records)
    if target is None:
        sys.stdout.write(render_results(cfg, records))
    else:
        logger.info("Wrote %d %s records to %s", len(records), cfg.kind, target)
        echo_json({"experiment": str(cfg.kind), "records": len(records), "path": str(target)})
    return EXIT_OK


# --- Parser ---


def _add_build_args(p: argparse.ArgumentParser) -> None:
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--gen", help="Generate the dataset: 'n=..,d=..,seed=..'")
    source.add_argument("--dataset", help="vecbin or fvecs dataset file")
    p.add_argument("--seed", type=seed_int, default=0, help="Seed recorded with a loaded dataset")
    p.add_argument("--exact", action="store_true", help="Exact MRNG (full pools, no degree bound)")
    p.add_argument("--degree-bound", type=degree_bound, default=None, help="Out-degree bound m")
    p.add_argument("--pool", default="full", help="'full' or 'knn:L'")
    p.add_argument("--conflicts", default=None, help="Also write the conflict map to this path")
    p.add_argument("-o", "--output", required=True, help="Graph file to write")
    p.add_argument("--threads", type=positive_int, default=None)
    p.add_argument("--force", action="store_true", help="Override the desk-scale size caps")


def _add_search_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("graph", help="Graph file")
    p.add_argument("--dataset", required=True, help="Dataset the graph was built over")
    p.add_argument("--query-file", help="vecbin or fvecs query file")
    p.add_argument("--query", action="append", help="Comma-separated query coordinates")
    p.add_argument("--budget", type=positive_int, default=None, help="Distance evaluations")
    p.add_argument("--k", type=positive_int, default=None)
    p.add_argument("--entry", type=int, default=None, help="Entry node (default: medoid)")
    p.add_argument("--escape", action="store_true", help="Escape local minima via conflict sets")
    p.add_argument("--conflicts", default=None, help="Conflict file (required with --escape)")
    p.add_argument("--phase1-budget", type=positive_int, default=None)
    p.add_argument("--trace", action="store_true", help="Emit trace events as JSON lines")


def _add_experiment_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("kind", choices=[k.value for k in ExperimentKind])
    p.add_argument("--n", type=positive_int, nargs="+")
    p.add_argument("--d", type=positive_int, nargs="+")
    p.add_argument("--seed", type=seed_int, nargs="+")
    p.add_argument("--degree-bound", type=degree_bound, nargs="+", help="Bounds; 'unbounded' allowed")
    p.add_argument("--budget", type=positive_int, nargs="+")
    p.add_argument("--phase1-budget", type=positive_int, nargs="+")
    p.add_argument("--queries", type=positive_int, default=None)
    p.add_argument("--k", type=positive_int, default=1)
    p.add_argument("--output", default=None, help=f"Result file, or '{STDOUT}' for stdout")
    p.add_argument("--format", choices=[f.value for f in OutputFormat], default=OutputFormat.CSV.value)
    p.add_argument("--threads", type=positive_int, default=None)
    p.add_argument("--force", action="store_true", help="Override the desk-scale size caps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrng", description="MRNG construction, search and verification")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="Generate a uniform dataset")
    gen.add_argument("--n", type=positive_int, required=True)
    gen.add_argument("--d", type=positive_int, required=True)
    gen.add_argument("--seed", type=seed_int, default=0)
    gen.add_argument("-o", "--output", required=True, help="Dataset file (.fvecs for fvecs)")
    gen.add_argument("--queries", type=positive_int, default=None, help="Also generate this many queries")
    gen.add_argument("--query-output", default=None)
    gen.set_defaults(handler=cmd_gen)

    build = sub.add_parser("build", help="Build a graph file")
    _add_build_args(build)
    build.set_defaults(handler=cmd_build)

    search = sub.add_parser("search", help="Query a graph")
    _add_search_args(search)
    search.set_defaults(handler=cmd_search)

    verify = sub.add_parser("verify", help="Check structural properties of a graph")
    verify.add_argument("graph")
    verify.add_argument("--dataset", required=True)
    verify.add_argument("--check", action="append", choices=list(ALL_CHECKS), help="Repeatable; default all")
    verify.add_argument("--sample", type=positive_int, default=None, help="Edges sampled for minimality")
    verify.add_argument("--seed", type=seed_int, default=0)
    verify.set_defaults(handler=cmd_verify)

    experiment = sub.add_parser("experiment", help="Run a measurement over a parameter grid")
    _add_experiment_args(experiment)
    experiment.set_defaults(handler=cmd_experiment)
    return parser


def _exit_code(e: Exception) -> int:
    if isinstance(e, (GraphFormatError, ChecksumMismatchError, OSError)):
        return EXIT_IO
    if isinstance(e, CalculationError):
        return EXIT_CHECK_FAILED
    return EXIT_USAGE


def main(argv: Sequence[str] | None = None) -> int:
    """CLI Entry Point."""
    parser = build_parser()
    args = parser.parse_args(argv)
    settings = get_settings()
    logging.basicConfig(level=settings.log_level, stream=sys.stderr)

    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except (
        ValidationError,
        ConfigurationError,
        PreconditionError,
        PydanticValidationError,
        GraphFormatError,
        ChecksumMismatchError,
        CalculationError,
        OSError,
    ) as e:
        logger.error("%s failed: %s", args.command, e)  # noqa: TRY400
        return _exit_code(e)


if __name__ == "__main__":
    sys.exit(main())
