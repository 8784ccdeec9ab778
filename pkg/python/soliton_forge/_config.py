# This file is part of soliton_forge.
#
# See the COPYRIGHT file at the top-level directory of this distribution
# for details of code ownership.
#
# This program is free software: you can redistribute it and/or modify
# it under the terms of the GNU General Public License as published by
# the Free Software Foundation, either version 3 of the License, or
# (at your option) any later version.
#
# This program is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
# GNU General Public License for more details.
#
# You should have received a copy of the GNU General Public License
# along with this program.  If not, see <https://www.gnu.org/licenses/>.

from __future__ import annotations

__all__ = (
    "COMMANDS",
    "CONFIG_SCHEMA",
    "ConfigError",
    "RunConfig",
    "config_hash",
)

import dataclasses
import hashlib
import json
import functools
import math
import os
from typing import Any, Mapping

from jsonschema import Draft202012Validator, validators
from jsonschema.exceptions import best_match

from ._grid import GridSpec
from ._settings import DEFAULT_TOLERANCES, Tolerances

COMMANDS = ("sge", "gsge", "dress", "isothermic", "surface", "check")

_SEEDS = ("plane", "cylinder", "sphere")
_METHODS = ("algebraic", "ode", "linear")
_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")

# Default nodes per axis, by command and grid dimension; 101 otherwise.
_DEFAULT_NODES = {"gsge": {2: 101, 3: 41, 4: 21}, "dress": {2: 41, 3: 21, 4: 11}}


class ConfigError(ValueError):
    """Exception raised for an invalid run configuration."""

    def __init__(self, problem: str) -> None:
        super().__init__(f"Invalid configuration: {problem}")


def _nullable(schema: dict[str, Any]) -> dict[str, Any]:
    return {"anyOf": [{"type": "null"}, schema]}


_NONZERO = {"type": "number", "not": {"const": 0}}

CONFIG_SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "soliton_forge run configuration",
    "type": "object",
    "required": ["command"],
    "additionalProperties": False,
    "properties": {
        "command": {"enum": list(COMMANDS)},
        "grid": _nullable({"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 3}}),
        "bounds": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "number"}},
        "output": {"type": "string", "minLength": 1},
        "tolerances": {
            "type": "object",
            "propertyNames": {"enum": [field.name for field in dataclasses.fields(Tolerances)]},
            "additionalProperties": {"type": "number", "exclusiveMinimum": 0},
        },
        "log_level": {"type": "string", "pattern": f"^(?i:{'|'.join(_LOG_LEVELS)})$"},
        "substeps": {"type": "integer", "minimum": 1},
        "mu": {"type": "array", "items": _NONZERO},
        "permute": {"type": "boolean"},
        "qstar0": {"type": "number"},
        "lie_r": _nullable(_NONZERO),
        "n": {"type": "integer", "minimum": 2, "maximum": 4},
        "theta": {"type": "array", "maxItems": 2, "items": {"type": "number"}},
        "linear": {"type": "boolean"},
        "s": _nullable(_NONZERO),
        "alpha": _nullable(
            {
                "type": "array",
                "minItems": 2,
                "maxItems": 2,
                "prefixItems": [{"type": "number"}, _NONZERO],
            }
        ),
        "direction": _nullable(
            {"type": "array", "minItems": 1, "items": {"type": "number"}, "contains": _NONZERO}
        ),
        "method": {"enum": list(_METHODS)},
        "seed": {"enum": list(_SEEDS)},
        "source": {"const": "sge"},
        "sym_r": _NONZERO,
        "isothermic_seed": _nullable({"enum": list(_SEEDS)}),
        "dress_s": _nullable(_NONZERO),
        "path": _nullable({"type": "string"}),
    },
}
"""JSON schema of a configuration mapping (draft 2020-12)."""

# Tuples and read-only mappings validate like JSON arrays and objects.
_TYPE_CHECKER = Draft202012Validator.TYPE_CHECKER.redefine_many(
    {
        "array": lambda checker, instance: isinstance(instance, (list, tuple)),
        "object": lambda checker, instance: isinstance(instance, Mapping),
    }
)
_VALIDATOR = validators.extend(Draft202012Validator, type_checker=_TYPE_CHECKER)(CONFIG_SCHEMA)

# Numeric fields that must also be finite.
_FINITE_FIELDS = ("bounds", "mu", "qstar0", "lie_r", "theta", "s", "alpha", "direction", "sym_r", "dress_s")


def _validate(data: Mapping[str, Any]) -> None:
    error = best_match(_VALIDATOR.iter_errors(data))
    if error is not None:
        where = ".".join(str(part) for part in error.absolute_path) or "configuration"
        raise ConfigError(f"{where}: {error.message}")


def _tuple(values: Any, kind: type) -> tuple | None:
    return None if values is None else tuple(kind(v) for v in values)


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """Everything a command-line run depends on.

    Field values are checked against `CONFIG_SCHEMA` on construction; the
    rules that relate several fields are checked afterwards.

    Notes
    -----
    Two runs with equal configurations write identical outputs; the
    `config_hash` of a configuration is recorded in each report.
    """

    def __post_init__(self) -> None:
        _validate({field.name: getattr(self, field.name) for field in dataclasses.fields(self)})
        for name in _FINITE_FIELDS:
            value = getattr(self, name)
            values = value if isinstance(value, (list, tuple)) else () if value is None else (value,)
            if not all(math.isfinite(v) for v in values):
                raise ConfigError(f"{name} must be finite; got {value!r}.")
        assign = functools.partial(object.__setattr__, self)
        assign("grid", _tuple(self.grid, int))
        assign("bounds", _tuple(self.bounds, float))
        assign("tolerances", {str(k): float(v) for k, v in sorted(self.tolerances.items())})
        assign("log_level", self.log_level.upper())
        assign("substeps", int(self.substeps))
        assign("n", int(self.n))
        assign("mu", _tuple(self.mu, float))
        assign("theta", _tuple(self.theta, float))
        assign("alpha", _tuple(self.alpha, float))
        assign("direction", _tuple(self.direction, float))

        if not self.bounds[0] < self.bounds[1]:
            raise ConfigError(f"bounds must be 'lo:hi' with lo < hi; got {self.bounds}.")
        if self.command == "gsge" and not self.theta:
            raise ConfigError("the gsge command needs at least one --theta.")
        if self.s is not None and self.alpha is not None:
            raise ConfigError("give at most one of s and alpha.")
        if self.command == "check" and not self.path:
            raise ConfigError("the check command needs a sidecar path.")
        if self.grid is not None and len(self.grid) not in (1, self.ndim):
            raise ConfigError(f"grid {self.grid} does not match a {self.ndim}-d run.")
        try:
            self.resolved_tolerances()
        except ValueError as err:
            raise ConfigError(str(err)) from err

    command: str
    """Subcommand name."""

    grid: tuple[int, ...] | None = None
    """Node counts per axis, one count for every axis, or `None` for the
    command's default.
    """

    bounds: tuple[float, float] = (-1.0, 1.0)
    """Coordinate range of every axis."""

    output: str = "soliton_forge_output"
    """Output directory."""

    tolerances: Mapping[str, float] = dataclasses.field(default_factory=dict)
    """Overrides of `Tolerances` fields."""

    log_level: str = "INFO"
    """Logging level name."""

    substeps: int = 1
    """RK4 steps per grid cell."""

    mu: tuple[float, ...] = (1.0,)
    """Sine-Gordon Bäcklund parameters."""

    permute: bool = False
    """Build sine-Gordon multi-solitons by permutability instead of
    integrating successive transforms.
    """

    qstar0: float = math.pi / 2
    """Basepoint value of every integrated sine-Gordon transform."""

    lie_r: float | None = None
    """Lie transform applied to the final sine-Gordon solution."""

    n: int = 2
    """Matrix size for ``gsge`` and ``dress``."""

    theta: tuple[float, ...] = ()
    """GSGE Bäcklund angles."""

    linear: bool = False
    """Use the linear GSGE transform."""

    s: float | None = None
    """Imaginary dressing pole ``is``."""

    alpha: tuple[float, float] | None = None
    """General dressing pole as ``(re, im)``."""

    direction: tuple[float, ...] | None = None
    """Spanning vector of the dressing projection image."""

    method: str = "algebraic"
    """Dressing method."""

    seed: str = "cylinder"
    """Isothermic seed for the ``isothermic`` command."""

    source: str = "sge"
    """Source of the ``surface`` command."""

    sym_r: float = 0.5
    """Spectral parameter of the Sym formula."""

    isothermic_seed: str | None = None
    """Build a Christoffel pair surface from this seed instead."""

    dress_s: float | None = None
    """Apply the dressing-induced Bäcklund transform with this ``s``."""

    path: str | None = None
    """Sidecar checked by the ``check`` command."""

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> RunConfig:
        """Construct from a JSON-like mapping.

        Raises
        ------
        ConfigError
            Raised if the mapping does not match `CONFIG_SCHEMA` or breaks a
            rule relating several fields.
        """
        _validate(data)
        return cls(**data)

    @staticmethod
    def load(path: str | os.PathLike) -> dict[str, Any]:
        """Read a JSON configuration file as a mapping.

        Raises
        ------
        ConfigError
            Raised if the file is unreadable or not a JSON object.
        """
        try:
            with open(path) as stream:
                data = json.load(stream)
        except (OSError, ValueError) as err:
            raise ConfigError(f"cannot read {os.fspath(path)!r}: {err}") from err
        if not isinstance(data, dict):
            raise ConfigError(f"{os.fspath(path)!r} does not hold a JSON object.")
        return data

    @property
    def ndim(self) -> int:
        """Grid dimension of the run."""
        return self.n if self.command in ("gsge", "dress") else 2

    def grid_spec(self) -> GridSpec:
        """Return the grid of the run."""
        if self.grid is None:
            dims = (_DEFAULT_NODES.get(self.command, {}).get(self.ndim, 101),) * self.ndim
        elif len(self.grid) == 1:
            dims = self.grid * self.ndim
        else:
            dims = self.grid
        return GridSpec.from_bounds([self.bounds] * self.ndim, dims=dims)

    def resolved_tolerances(self) -> Tolerances:
        """Return the default tolerances with the overrides applied."""
        return DEFAULT_TOLERANCES.replace(**self.tolerances)

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-compatible description with sorted keys."""
        result = {}
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if isinstance(value, tuple):
                value = list(value)
            elif isinstance(value, Mapping):
                value = dict(value)
            result[field.name] = value
        return dict(sorted(result.items()))


def config_hash(config: RunConfig) -> str:
    """Return the SHA-256 hex digest of the canonical JSON form of a
    configuration.
    """
    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
