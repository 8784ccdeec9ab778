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
    "SOLUTION_KINDS",
    "SolutionFormatError",
    "read_field",
    "read_solution",
    "write_field",
    "write_solution",
)

import json
import logging
import os
from typing import Any

import numpy as np

from ._dressing import UnSolution
from ._grid import Field, GridSpec
from ._gsge import GsgeState
from ._isothermic import IsothermicData
from ._settings import DEFAULT_TOLERANCES, Tolerances
from ._sge import SgeSolution
from ._solution import Solution

_LOG = logging.getLogger(__name__)

SOLUTION_KINDS: dict[str, type[Solution]] = {
    cls.kind: cls for cls in (SgeSolution, GsgeState, UnSolution, IsothermicData)
}
"""Solution classes keyed by the ``kind`` written to sidecars."""


class SolutionFormatError(ValueError):
    """Exception raised when a field file or solution sidecar cannot be
    parsed.
    """

    def __init__(self, path: str | os.PathLike, problem: str) -> None:
        super().__init__(f"Cannot read {os.fspath(path)!r}: {problem}.")


def write_field(field: Field, path: str | os.PathLike) -> None:
    """Write a field as CSV.

    Parameters
    ----------
    field : `Field`
        Field to write.
    path : `str` or `os.PathLike`
        Output file.

    Notes
    -----
    The first line is ``#`` followed by a JSON description of the grid,
    value shape and complexness.  Each further line is one node: its index
    tuple, then the values in row-major order, complex entries as
    ``re,im`` pairs, all formatted with ``%.17g``.
    """
    grid = field.grid
    header = json.dumps(
        {"grid": grid.to_dict(), "value_shape": list(field.value_shape), "complex": field.is_complex},
        sort_keys=True,
    )
    values = field.values.reshape(grid.size, -1)
    if field.is_complex:
        values = np.stack([values.real, values.imag], axis=-1).reshape(grid.size, -1)
    index = np.indices(grid.dims).reshape(grid.ndim, -1).T
    table = np.column_stack([index, values])
    fmt = ["%d"] * grid.ndim + ["%.17g"] * values.shape[1]
    np.savetxt(path, table, fmt=fmt, delimiter=",", header=header, comments="#")


def read_field(path: str | os.PathLike) -> Field:
    """Read a field written by `write_field`.

    Raises
    ------
    SolutionFormatError
        Raised if the header or table is malformed.
    """
    try:
        with open(path) as stream:
            header = json.loads(stream.readline().lstrip("#"))
        grid = GridSpec.from_dict(header["grid"])
        value_shape = tuple(int(k) for k in header["value_shape"])
        is_complex = bool(header["complex"])
        table = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except (OSError, KeyError, TypeError, ValueError) as err:
        raise SolutionFormatError(path, str(err)) from err
    count = int(np.prod(value_shape, dtype=int)) * (2 if is_complex else 1)
    if table.shape != (grid.size, grid.ndim + count):
        raise SolutionFormatError(path, f"table has shape {table.shape}")
    index = table[:, : grid.ndim].astype(int)
    values = np.empty((grid.size, count))
    values[np.ravel_multi_index(tuple(index.T), grid.dims)] = table[:, grid.ndim :]
    if is_complex:
        pairs = values.reshape(grid.size, -1, 2)
        values = pairs[..., 0] + 1j * pairs[..., 1]
    return Field(grid, values.reshape(grid.dims + value_shape), copy=False)


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    return value


def write_solution(solution: Solution, directory: str | os.PathLike, name: str | None = None) -> str:
    """Write a solution as one CSV per field plus a JSON sidecar.

    Parameters
    ----------
    solution : `Solution`
        Solution to write.
    directory : `str` or `os.PathLike`
        Output directory; created if missing.
    name : `str`, optional
        File stem; the solution's kind if not given.

    Returns
    -------
    sidecar : `str`
        Path of the sidecar, for `read_solution`.
    """
    name = solution.kind if name is None else name
    os.makedirs(directory, exist_ok=True)
    files = {}
    for field_name, field in solution.fields().items():
        filename = f"{name}_{field_name}.csv"
        write_field(field, os.path.join(directory, filename))
        files[field_name] = filename
    sidecar = {
        "kind": solution.kind,
        "grid": solution.grid.to_dict(),
        "fields": files,
        "metadata": _jsonable(solution.metadata()),
        "residuals": _jsonable(solution.residuals),
        "verified": solution.verified,
        "tolerances": solution.tolerances.to_dict(),
    }
    path = os.path.join(directory, f"{name}.json")
    with open(path, "w") as stream:
        json.dump(sidecar, stream, indent=2, sort_keys=True)
        stream.write("\n")
    _LOG.debug("Wrote %s solution to %s.", solution.kind, path)
    return path


def read_solution(path: str | os.PathLike, tolerances: Tolerances | None = None) -> Solution:
    """Rebuild a solution from a sidecar written by `write_solution`.

    Parameters
    ----------
    path : `str` or `os.PathLike`
        Sidecar file.
    tolerances : `Tolerances`, optional
        Thresholds for the rebuilt solution; those recorded in the sidecar
        (or the defaults) if not given.

    Returns
    -------
    solution : `Solution`
        Solution of the recorded kind; residuals are recomputed.

    Raises
    ------
    SolutionFormatError
        Raised if the sidecar or a field file is malformed, or the kind is
        unknown.
    """
    try:
        with open(path) as stream:
            sidecar = json.load(stream)
        kind = sidecar["kind"]
        files = dict(sidecar["fields"])
        metadata = sidecar.get("metadata", {})
    except (OSError, KeyError, TypeError, ValueError) as err:
        raise SolutionFormatError(path, str(err)) from err
    cls = SOLUTION_KINDS.get(kind)
    if cls is None:
        raise SolutionFormatError(path, f"unknown solution kind {kind!r}")
    if tolerances is None:
        recorded = sidecar.get("tolerances")
        tolerances = DEFAULT_TOLERANCES if recorded is None else Tolerances(**recorded)
    directory = os.path.dirname(os.fspath(path))
    fields = {name: read_field(os.path.join(directory, filename)) for name, filename in files.items()}
    grid = GridSpec.from_dict(sidecar["grid"]) if "grid" in sidecar else None
    if grid is not None and any(field.grid != grid for field in fields.values()):
        raise SolutionFormatError(path, "field grids differ from the sidecar grid")
    try:
        return cls.from_fields(fields, metadata, tolerances)
    except (KeyError, ValueError) as err:
        raise SolutionFormatError(path, str(err)) from err
