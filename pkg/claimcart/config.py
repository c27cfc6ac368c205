"""
Run configuration for the claimcart command line

A RunConfig is read from a JSON file, overridden by command-line flags and
written back next to the run's artifacts as a manifest.
"""

import json
import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from claimcart.core.params import GammaPriorPair
from claimcart.core.schema import CovariateSchema, resolve_schema
from claimcart.data.simulate import ScenarioConfig
from claimcart.errors import ConfigError
from claimcart.models.base import FamilyKind
from claimcart.search.chain import ChainConfig
from claimcart.search.moves import ProposalMix
from claimcart.search.prior import TreePriorConfig
from claimcart.selection.select import SelectionGrid

logger = logging.getLogger(__name__)

COMMANDS = ("simulate", "fit", "select", "predict", "evaluate", "stability")


@dataclass
class RunConfig:
    """
    Everything a command needs, with defaults for a full-size run.

    Example:
        >>> config = RunConfig.quick(command="fit", data="train.csv")
        >>> config.chain_config().iterations
        400
    """

    command: str = "fit"
    seed: int = 0
    out: str = "out"

    # Data
    data: Optional[str] = None
    schema: Optional[Union[str, Dict[str, Any]]] = None
    archive: Optional[str] = None
    trees: List[str] = field(default_factory=list)

    # Family and node-parameter prior; alpha/beta default to the portfolio rate rule
    family: str = "poisson"
    alpha: Optional[float] = None
    beta: float = 0.8
    alpha1: float = 1.0
    beta1: float = 1.0
    kappa_max: float = 1e6

    # Tree prior and split space
    gamma: float = 0.99
    rho: float = 15.0
    min_node_size: int = 10
    numeric_grid_size: int = 100

    # Chain
    iterations: int = 10_000
    burn_in: int = 2_000
    restarts: int = 3
    proposal_mix: Union[str, Dict[str, float]] = "uniform"
    workers: int = 1
    progress: bool = False

    # Selection: explicit grid or a leaf-count range to calibrate
    grid: Optional[Union[str, List[Any]]] = None
    leaf_range: Optional[List[int]] = None
    pilot_iterations: int = 1000

    # Simulation
    scenario: int = 1
    n: int = 5000
    p0: Optional[float] = None
    tau: Optional[float] = None
    train_fraction: float = 0.8

    # Stability
    repeats: int = 20
    subsample: float = 0.9

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ConfigError(f"unknown command {self.command!r}; expected one of {list(COMMANDS)}")
        try:
            FamilyKind(self.family)
        except ValueError:
            raise ConfigError(
                f"unknown family {self.family!r}; expected one of {[kind.value for kind in FamilyKind]}"
            ) from None
        if self.leaf_range is not None and (
            len(self.leaf_range) != 2 or not 1 <= self.leaf_range[0] <= self.leaf_range[1]
        ):
            raise ConfigError(f"leaf_range must be [m_s, m_e] with 1 <= m_s <= m_e, got {self.leaf_range}")

    @classmethod
    def quick(cls, **overrides: Any) -> "RunConfig":
        """Short chains for smoke runs and examples"""
        values: Dict[str, Any] = dict(iterations=400, burn_in=100, restarts=1, pilot_iterations=200, repeats=3)
        values.update(overrides)
        return cls(**values)

    # Derived settings

    def family_kind(self) -> FamilyKind:
        return FamilyKind(self.family)

    def mix(self) -> ProposalMix:
        if isinstance(self.proposal_mix, str):
            return ProposalMix.preset(self.proposal_mix)
        return ProposalMix(**self.proposal_mix)

    def hyper(self, claim_rate: Optional[float] = None) -> Optional[GammaPriorPair]:
        """Explicit prior, the rate rule when a claims frequency is given, else ``None``."""
        if self.alpha is not None:
            return GammaPriorPair(self.alpha, self.beta, self.alpha1, self.beta1)
        if claim_rate is not None:
            return GammaPriorPair.from_rate(claim_rate, self.beta, self.alpha1, self.beta1)
        return None

    def prior_config(self) -> TreePriorConfig:
        return TreePriorConfig(self.gamma, self.rho, self.numeric_grid_size, self.min_node_size)

    def chain_config(self, hyper: Optional[GammaPriorPair] = None) -> ChainConfig:
        return ChainConfig(
            iterations=self.iterations,
            burn_in=self.burn_in,
            restarts=self.restarts,
            proposal_mix=self.mix(),
            prior=self.prior_config(),
            family=self.family_kind(),
            seed=self.seed,
            hyper=hyper or self.hyper(),
            prior_beta=self.beta,
            kappa_max=self.kappa_max,
            workers=self.workers,
            progress=self.progress,
        )

    def scenario_config(self) -> ScenarioConfig:
        return ScenarioConfig(self.scenario, self.n, self.seed, self.p0, self.tau)

    def selection_grid(self) -> Optional[SelectionGrid]:
        if self.grid is None:
            return None
        if isinstance(self.grid, str):
            return SelectionGrid.parse(self.grid)
        return SelectionGrid.from_list(self.grid)

    def covariate_schema(self) -> CovariateSchema:
        """
        The declared schema: a preset name, a JSON file or an inline declaration.

        Raises:
            ConfigError: If no schema is declared
        """
        declared = self.schema
        if declared is None:
            raise ConfigError("no schema declared; pass --schema")
        if isinstance(declared, str):
            path = Path(declared)
            if path.suffix == ".json" or path.exists():
                declared = _read_json(path)
            else:
                declared = {"preset": declared}
        schema = resolve_schema(declared)
        assert schema is not None
        return schema

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, values: Dict[str, Any]) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys {unknown}")
        try:
            return cls(**values)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _read_json(path: Path) -> Any:
    if not path.exists():
        raise ConfigError(f"file not found: {path}")
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def load_config(path: Optional[Union[str, Path]], overrides: Dict[str, Any]) -> RunConfig:
    """
    Resolve a configuration: flags over file values over defaults.

    ``overrides`` holds only the flags actually given on the command line.
    A manifest written by ``write_manifest`` is accepted as the file, so a
    run can be replayed from its own output.
    """
    values: Dict[str, Any] = {}
    if path is not None:
        payload = _read_json(Path(path))
        if not isinstance(payload, dict):
            raise ConfigError(f"{path} must hold a JSON object")
        if "config" in payload and "version" in payload:
            payload = payload["config"]
            logger.debug("Replaying the manifest %s", path)
        values.update(payload)
        logger.debug("Loaded configuration from %s", path)
    values.update({key: value for key, value in overrides.items() if value is not None})
    return RunConfig.from_dict(values)


def write_manifest(config: RunConfig, out_dir: Union[str, Path]) -> Path:
    """Write the resolved configuration, seed and package version."""
    from claimcart import __version__

    path = Path(out_dir) / "manifest.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    manifest = {"version": __version__, "seed": config.seed, "config": config.to_dict()}
    write_json(manifest, path)
    return path


def write_json(payload: Any, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
