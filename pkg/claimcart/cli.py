"""
claimcart command line

    claimcart simulate --scenario 1 --out runs/s1
    claimcart fit --data runs/s1/train.csv --schema runs/s1/schema.json --grid 3:0.99:20,4:0.99:15 --out runs/s1
    claimcart select --data runs/s1/train.csv --out runs/s1
    claimcart evaluate --data runs/s1/test.csv --out runs/s1

Every failure the library reports ends the process with status 2 and one
JSON line on stderr.
"""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from claimcart.config import RunConfig, load_config, write_json, write_manifest
from claimcart.core.params import GammaPriorPair
from claimcart.core.schema import CovariateSchema
from claimcart.core.tree import Tree
from claimcart.data.dataset import Dataset, load_csv, save_csv, stratified_split
from claimcart.data.simulate import simulate_scenario
from claimcart.errors import ClaimCartError, ConfigError
from claimcart.evaluation.metrics import evaluate_many, report_frame
from claimcart.evaluation.stability import stability_assess
from claimcart.models import NodeModel, make_family
from claimcart.search.prior import SplitCandidateSet
from claimcart.search.trace import CsvTraceWriter, TraceBuffer, acceptance_table
from claimcart.selection.calibrate import calibrate_grid
from claimcart.selection.select import (
    GridPoint,
    SelectionGrid,
    derive_seed,
    expected_counts,
    run_grid,
    three_step_select,
)

logger = logging.getLogger("claimcart")

FLOAT_FORMAT = "%.10g"


# Helpers


def _out(config: RunConfig, name: str) -> Path:
    path = Path(config.out) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


TREE_KEYS = ("family", "hyper", "kappa_max", "schema", "tree")
ARCHIVE_KEYS = ("family", "hyper", "kappa_max", "schema", "points")


def _read_payload(path: Path, required: Sequence[str]) -> Dict[str, Any]:
    """A tree or archive file written by this package, with its required keys checked."""
    if not path.exists():
        raise ConfigError(f"file not found: {path}")
    try:
        with open(path, encoding="utf-8") as handle:
            payload = json.load(handle)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    missing = [key for key in required if key not in payload]
    if missing:
        raise ConfigError(f"{path} is missing {missing}")
    return payload


def _require_data(config: RunConfig) -> str:
    if config.data is None:
        raise ConfigError(f"{config.command} needs --data")
    return config.data


def _write_csv(frame: pd.DataFrame, path: Path) -> None:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    logger.info("Wrote %s", path)


def _model(payload: Dict[str, Any]) -> NodeModel:
    try:
        hyper = GammaPriorPair(**payload["hyper"])
    except TypeError as exc:
        raise ConfigError(f"malformed prior {payload['hyper']!r}: {exc}") from exc
    return make_family(payload["family"], hyper, float(payload["kappa_max"]))


def _decoded(path: Path, build: Callable[[], Any]) -> Any:
    """Run ``build`` over a loaded payload, reporting malformed nested content as a ConfigError."""
    try:
        return build()
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"{path} is malformed: missing or invalid {exc}") from exc


def _grid(config: RunConfig, train: Dataset, candidates: SplitCandidateSet, hyper: GammaPriorPair) -> SelectionGrid:
    grid = config.selection_grid()
    if grid is not None:
        return grid
    if config.leaf_range is None:
        raise ConfigError(f"{config.command} needs --grid or --leaf-range")
    m_s, m_e = config.leaf_range
    return calibrate_grid(
        m_s,
        m_e,
        train,
        config.chain_config(hyper),
        gamma=config.gamma,
        pilot_iterations=config.pilot_iterations,
        candidates=candidates,
    )


def _load_tree(path: Path) -> Tuple[Tree, NodeModel, CovariateSchema, Dict[str, Any]]:
    payload = _read_payload(path, TREE_KEYS)
    schema = _decoded(path, lambda: CovariateSchema.from_dict(payload["schema"]))
    tree = _decoded(path, lambda: Tree.from_dict(payload["tree"], schema))
    return tree, _model(payload), schema, payload


def _tree_paths(config: RunConfig) -> List[Path]:
    return [Path(p) for p in config.trees] or [Path(config.out) / "optimal_tree.json"]


# Commands


def simulate(config: RunConfig) -> None:
    data = simulate_scenario(config.scenario_config())
    train, test = stratified_split(data, config.train_fraction, config.seed)
    save_csv(data, _out(config, "data.csv"))
    save_csv(train, _out(config, "train.csv"))
    save_csv(test, _out(config, "test.csv"))
    write_json(data.schema.to_dict(), _out(config, "schema.json"))
    logger.info("Wrote scenario %d data (%d train, %d test rows) to %s", config.scenario, train.n, test.n, config.out)


def fit(config: RunConfig) -> None:
    train = load_csv(_require_data(config), config.covariate_schema())
    hyper = config.hyper(train.claim_rate())
    assert hyper is not None
    chain = config.chain_config(hyper)
    candidates = SplitCandidateSet.from_data(train, chain.prior)
    grid = _grid(config, train, candidates, hyper)

    def trace_for(point: GridPoint) -> TraceBuffer:
        buffer = TraceBuffer()
        buffer.subscribe(CsvTraceWriter(_out(config, f"trace_j{point.j}.csv"), train.schema.names))
        return buffer

    results = run_grid(grid, chain, train, candidates, trace_for)
    tables = []
    for j, result in results.items():
        table = acceptance_table(result.acceptance.proposed, result.acceptance.accepted)
        table.insert(0, "j", j)
        tables.append(table)
    _write_csv(pd.concat(tables, ignore_index=True), _out(config, "acceptance.csv"))
    payload = {
        "family": config.family,
        "hyper": hyper.to_dict(),
        "kappa_max": config.kappa_max,
        "schema": train.schema.to_dict(),
        "points": grid.archive_dict(),
    }
    write_json(payload, _out(config, "archive.json"))
    logger.info("Archived %d trees over %d grid points", sum(len(p.archive) for p in grid.points), len(grid.points))


def select(config: RunConfig) -> None:
    path = Path(config.archive) if config.archive else Path(config.out) / "archive.json"
    payload = _read_payload(path, ARCHIVE_KEYS)
    schema = _decoded(path, lambda: CovariateSchema.from_dict(payload["schema"]))
    train = load_csv(_require_data(config), schema)
    model = _model(payload)
    grid = _decoded(path, lambda: SelectionGrid.from_archive_dict(payload["points"], schema))
    result = three_step_select(grid, train, model)
    _write_csv(result.table, _out(config, "dic_table.csv"))

    best = result.best
    write_json(
        {
            "family": payload["family"],
            "hyper": payload["hyper"],
            "kappa_max": payload["kappa_max"],
            "schema": payload["schema"],
            "j": result.j,
            "restart": best.restart,
            "iteration": best.iteration,
            "dic": result.reports[result.j].dic,
            "tree": best.tree.to_dict(),
        },
        _out(config, "optimal_tree.json"),
    )

    archived = np.zeros(schema.p, dtype=np.int64)
    selected_run = np.zeros(schema.p, dtype=np.int64)
    for point in grid.points:
        for entry in point.archive:
            archived += np.asarray(entry.usage, dtype=np.int64)
            if point.j == result.j:
                selected_run += np.asarray(entry.usage, dtype=np.int64)
    usage = pd.DataFrame(
        {
            "variable": schema.names,
            "archive": archived,
            "selected_run": selected_run,
            "selected_tree": best.tree.variable_usage(),
        }
    )
    _write_csv(usage, _out(config, "variable_usage.csv"))
    logger.info("Optimal tree (j=%d):\n%s", result.j, best.tree.describe())


def predict(config: RunConfig) -> None:
    tree, model, schema, _ = _load_tree(_tree_paths(config)[0])
    data = load_csv(_require_data(config), schema)
    counts, ids, frequency = expected_counts(tree, model, data)
    frame = pd.DataFrame(
        {"row_id": np.arange(1, data.n + 1), "expected_count": counts, "node_id": ids, "node_frequency": frequency}
    )
    _write_csv(frame, _out(config, "predictions.csv"))


def evaluate(config: RunConfig) -> None:
    loaded = [_load_tree(path) for path in _tree_paths(config)]
    schema = loaded[0][2]
    if any(other.to_dict() != schema.to_dict() for _, _, other, _ in loaded[1:]):
        raise ConfigError("trees compared in one evaluation must share a schema")
    test = load_csv(_require_data(config), schema)
    trees: Dict[str, Tuple[Tree, NodeModel]] = {}
    for path, (tree, model, _, payload) in zip(_tree_paths(config), loaded):
        name = payload["family"] if payload["family"] not in trees else path.stem
        trees[name] = (tree, model)
    reports = evaluate_many(trees, test)
    _write_csv(report_frame(reports), _out(config, "metrics.csv"))
    leaves = pd.concat([report.leaves.assign(model=report.model) for report in reports], ignore_index=True)
    _write_csv(leaves[["model"] + [c for c in leaves.columns if c != "model"]], _out(config, "leaves.csv"))


def stability(config: RunConfig) -> None:
    data = load_csv(_require_data(config), config.covariate_schema())
    grid = config.selection_grid()
    if grid is None:
        hyper = config.hyper(data.claim_rate())
        assert hyper is not None
        grid = _grid(config, data, SplitCandidateSet.from_data(data, config.prior_config()), hyper)
    points = [(point.j, point.gamma, point.rho) for point in grid.points]

    def fit_subset(train: Dataset, repeat: int) -> Callable[[Dataset], np.ndarray]:
        hyper = config.hyper(train.claim_rate())
        assert hyper is not None
        chain = replace(config.chain_config(hyper), seed=derive_seed(config.seed, repeat))
        subset_grid = SelectionGrid([GridPoint(j, gamma, rho) for j, gamma, rho in points])
        run_grid(subset_grid, chain, train)
        model = make_family(config.family_kind(), hyper, config.kappa_max)
        tree = three_step_select(subset_grid, train, model).best.tree
        return lambda test: expected_counts(tree, model, test)[2]

    value = stability_assess(fit_subset, data, config.repeats, config.subsample, config.seed, config.train_fraction)
    frame = pd.DataFrame(
        [(config.family, config.repeats, config.subsample, value)],
        columns=["model", "repeats", "subsample", "mean_variance"],
    )
    _write_csv(frame, _out(config, "stability.csv"))


COMMANDS: Dict[str, Callable[[RunConfig], None]] = {
    "simulate": simulate,
    "fit": fit,
    "select": select,
    "predict": predict,
    "evaluate": evaluate,
    "stability": stability,
}


def execute(config: RunConfig) -> None:
    """Run one command and write its manifest."""
    COMMANDS[config.command](config)
    write_manifest(config, config.out)


# Argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--data", help="CSV data file")
    common.add_argument("--schema", help="Schema JSON file or preset name (datacar, scenario1..3)")
    common.add_argument("--family", choices=["poisson", "nb1", "nb2", "zip1", "zip2"])
    common.add_argument("--grid", help="Selection grid as j:gamma:rho triples, comma separated")
    common.add_argument("--leaf-range", dest="leaf_range", type=int, nargs=2, metavar=("M_S", "M_E"))
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="Output directory")
    common.add_argument("--archive", help="Tree archive written by fit")
    common.add_argument("--tree", dest="trees", action="append", help="Tree file written by select; repeatable")
    common.add_argument("--iterations", type=int)
    common.add_argument("--burn-in", dest="burn_in", type=int)
    common.add_argument("--restarts", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--proposal-mix", dest="proposal_mix", help="uniform, E1, E2, E3 or E4")
    common.add_argument("--progress", action="store_true", default=None)
    common.add_argument("--log-level", dest="log_level", default="INFO")

    parser = argparse.ArgumentParser(prog="claimcart", description="Bayesian CART for claims frequency")
    commands = parser.add_subparsers(dest="command", required=True)
    sim = commands.add_parser("simulate", parents=[common], help="Write a simulated portfolio")
    sim.add_argument("--scenario", type=int, choices=[1, 2, 3])
    sim.add_argument("--n", type=int)
    sim.add_argument("--p0", type=float)
    sim.add_argument("--tau", type=float)
    commands.add_parser("fit", parents=[common], help="Run the tree search over a selection grid")
    commands.add_parser("select", parents=[common], help="Pick the optimal archived tree by DIC")
    commands.add_parser("predict", parents=[common], help="Predict expected claim counts")
    commands.add_parser("evaluate", parents=[common], help="Score trees on test data")
    commands.add_parser("stability", parents=[common], help="Prediction variance across training subsamples")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    overrides = {k: v for k, v in vars(args).items() if k not in ("config", "log_level")}
    try:
        config = load_config(args.config, overrides)
        execute(config)
    except (ClaimCartError, ValueError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
