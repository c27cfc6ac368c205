"""
Covariate schema for claimcart

Declares which columns are rating variables, which of them are categorical,
and where the claim counts and exposures live.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

from claimcart.errors import RoutingError, SchemaError


class VariableKind(Enum):
    """Kind of a rating variable"""

    NUMERIC = "numeric"
    CATEGORICAL = "categorical"


def _natural_key(level: str) -> Tuple[int, Any]:
    try:
        return (0, float(level))
    except ValueError:
        return (1, level)


@dataclass(frozen=True)
class Variable:
    """A single rating variable; categorical levels keep declaration order"""

    name: str
    kind: VariableKind = VariableKind.NUMERIC
    levels: Tuple[str, ...] = ()

    @property
    def is_categorical(self) -> bool:
        return self.kind is VariableKind.CATEGORICAL

    def code(self, level: Any) -> int:
        """
        Integer code of a categorical level.

        Raises:
            RoutingError: If the level was never declared
        """
        label = str(level)
        try:
            return self.levels.index(label)
        except ValueError:
            raise RoutingError(self.name, label) from None


@dataclass(frozen=True)
class CovariateSchema:
    """
    Ordered rating variables plus the response and exposure columns.

    Example:
        >>> schema = CovariateSchema(
        ...     variables=(Variable("x1", VariableKind.CATEGORICAL, ("A", "B")),
        ...                Variable("x2")),
        ... )
        >>> schema.index("x2")
        1
    """

    variables: Tuple[Variable, ...]
    response_column: str = "N"
    exposure_column: str = "v"
    _positions: Dict[str, int] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        names = [variable.name for variable in self.variables]
        if len(set(names)) != len(names):
            raise SchemaError(f"variable names must be unique, got {names}")
        if not names:
            raise SchemaError("schema declares no rating variables")
        for reserved in (self.response_column, self.exposure_column):
            if reserved in names:
                raise SchemaError(f"column {reserved!r} is both a covariate and a reserved column")
        self._positions.update({name: i for i, name in enumerate(names)})

    @property
    def names(self) -> List[str]:
        return [variable.name for variable in self.variables]

    @property
    def p(self) -> int:
        return len(self.variables)

    def index(self, name: str) -> int:
        try:
            return self._positions[name]
        except KeyError:
            raise SchemaError(f"unknown variable {name!r}") from None

    def __getitem__(self, index: int) -> Variable:
        return self.variables[index]

    def require_levels(self) -> None:
        """Check that every categorical variable has a non-empty level set."""
        for variable in self.variables:
            if variable.is_categorical and not variable.levels:
                raise SchemaError(f"categorical variable {variable.name!r} has no levels")

    def with_levels(self, observed: Dict[str, Iterable[Any]]) -> "CovariateSchema":
        """
        Fill in undeclared categorical level sets from observed values.

        Declared level sets are kept as they are. Collected levels are sorted
        numerically when every label parses as a number, otherwise lexically.
        """
        variables = []
        for variable in self.variables:
            if variable.is_categorical and not variable.levels and variable.name in observed:
                labels = sorted({str(value) for value in observed[variable.name]}, key=_natural_key)
                variable = Variable(variable.name, variable.kind, tuple(labels))
            variables.append(variable)
        return CovariateSchema(tuple(variables), self.response_column, self.exposure_column)

    def encode(self, x: Sequence[Any]) -> List[float]:
        """Map a raw covariate vector to numeric values and level codes."""
        if len(x) != self.p:
            raise SchemaError(f"expected {self.p} covariates, got {len(x)}")
        return [
            float(variable.code(value)) if variable.is_categorical else float(value)
            for variable, value in zip(self.variables, x)
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "response_column": self.response_column,
            "exposure_column": self.exposure_column,
            "variables": [
                {"name": v.name, "kind": v.kind.value, **({"levels": list(v.levels)} if v.is_categorical else {})}
                for v in self.variables
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CovariateSchema":
        try:
            variables = tuple(
                Variable(
                    name=str(entry["name"]),
                    kind=VariableKind(entry.get("kind", "numeric")),
                    levels=tuple(str(level) for level in entry.get("levels", ())),
                )
                for entry in data["variables"]
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise SchemaError(f"malformed schema declaration: {exc}") from exc
        return cls(
            variables=variables,
            response_column=str(data.get("response_column", "N")),
            exposure_column=str(data.get("exposure_column", "v")),
        )

    @classmethod
    def datacar(cls) -> "CovariateSchema":
        """Rating variables of the public dataCar motor portfolio."""
        numeric = VariableKind.NUMERIC
        categorical = VariableKind.CATEGORICAL
        return cls(
            variables=(
                Variable("veh_value", numeric),
                Variable("veh_body", categorical),
                Variable("veh_age", numeric),
                Variable("gender", categorical),
                Variable("area", categorical),
                Variable("agecat", numeric),
            ),
            response_column="numclaims",
            exposure_column="exposure",
        )

    @classmethod
    def scenario(cls, number: int) -> "CovariateSchema":
        """Schema of the simulated portfolios."""
        numeric = VariableKind.NUMERIC
        if number == 1:
            signed = tuple(str(k) for k in (-3, -2, -1, 1, 2, 3))
            kinds = {1: signed, 7: signed, 8: signed}
            variables = tuple(
                Variable(f"x{i}", VariableKind.CATEGORICAL, kinds[i]) if i in kinds else Variable(f"x{i}", numeric)
                for i in range(1, 9)
            )
        elif number in (2, 3):
            variables = (Variable("x1", numeric), Variable("x2", numeric))
        else:
            raise SchemaError(f"unknown scenario {number}")
        return cls(variables=variables)


def resolve_schema(declared: Optional[Dict[str, Any]]) -> Optional[CovariateSchema]:
    """Build a schema from a JSON declaration or a preset name."""
    if declared is None:
        return None
    preset = declared.get("preset")
    if preset == "datacar":
        return CovariateSchema.datacar()
    if isinstance(preset, str) and preset.startswith("scenario"):
        return CovariateSchema.scenario(int(preset[len("scenario"):]))
    if preset is not None:
        raise SchemaError(f"unknown schema preset {preset!r}")
    return CovariateSchema.from_dict(declared)
