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
    "Field",
    "GridError",
    "GridSpec",
    "partial_derivative",
)

import dataclasses
from typing import Any, Iterable, Sequence

import numpy as np
from numpy.typing import ArrayLike


class GridError(ValueError):
    """Exception raised when a grid is malformed or a field does not match the
    grid it is attached to.
    """


@dataclasses.dataclass(frozen=True)
class GridSpec:
    """A uniform rectangular sampling of ℝⁿ.

    Notes
    -----
    Node ``(i₁, …, iₙ)`` sits at ``origin[k] + i_k * spacing[k]`` along each
    axis ``k``.  Every axis needs at least three nodes so that central
    differences have an interior to work with.
    """

    def __post_init__(self) -> None:
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "origin", tuple(float(x) for x in self.origin))
        object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))
        if not (len(self.dims) == len(self.origin) == len(self.spacing)):
            raise GridError(
                f"Grid dims {self.dims}, origin {self.origin} and spacing {self.spacing} "
                "have inconsistent lengths."
            )
        if not self.dims:
            raise GridError("A grid needs at least one axis.")
        if any(d < 3 for d in self.dims):
            raise GridError(f"Every grid axis needs at least 3 nodes; got dims {self.dims}.")
        if not all(np.isfinite(h) and h > 0.0 for h in self.spacing):
            raise GridError(f"Grid spacings must be positive and finite; got {self.spacing}.")
        if not all(np.isfinite(x) for x in self.origin):
            raise GridError(f"Grid origin must be finite; got {self.origin}.")

    dims: tuple[int, ...]
    """Number of nodes along each axis (`tuple` [`int`, ...])."""

    origin: tuple[float, ...]
    """Coordinates of node ``(0, …, 0)`` (`tuple` [`float`, ...])."""

    spacing: tuple[float, ...]
    """Distance between neighbouring nodes along each axis
    (`tuple` [`float`, ...]).
    """

    @classmethod
    def from_bounds(
        cls,
        bounds: Sequence[tuple[float, float]],
        *,
        dims: Sequence[int] | None = None,
        spacing: float | Sequence[float] | None = None,
    ) -> GridSpec:
        """Construct a grid that spans a box.

        Parameters
        ----------
        bounds : `~collections.abc.Sequence` [`tuple` [`float`, `float`]]
            ``(lower, upper)`` coordinates for each axis.
        dims : `~collections.abc.Sequence` [`int`], optional
            Number of nodes per axis (including both endpoints).
        spacing : `float` or `~collections.abc.Sequence` [`float`], optional
            Target node spacing; the actual spacing is adjusted so that both
            endpoints are nodes.  Exactly one of ``dims`` and ``spacing``
            must be given.

        Returns
        -------
        grid : `GridSpec`
            The new grid.
        """
        if (dims is None) == (spacing is None):
            raise GridError("Exactly one of 'dims' and 'spacing' must be provided.")
        lower = [float(lo) for lo, _ in bounds]
        upper = [float(hi) for _, hi in bounds]
        if any(hi <= lo for lo, hi in zip(lower, upper)):
            raise GridError(f"Bounds {list(bounds)} must have upper > lower on every axis.")
        if dims is None:
            assert spacing is not None
            steps = [float(spacing)] * len(lower) if np.isscalar(spacing) else list(spacing)  # type: ignore
            dims = [int(round((hi - lo) / h)) + 1 for lo, hi, h in zip(lower, upper, steps)]
        if len(dims) != len(lower):
            raise GridError(f"Got {len(dims)} axis sizes for {len(lower)} axes.")
        return cls(
            dims=tuple(dims),
            origin=tuple(lower),
            spacing=tuple((hi - lo) / (d - 1) for lo, hi, d in zip(lower, upper, dims)),
        )

    @property
    def ndim(self) -> int:
        """Number of axes (`int`)."""
        return len(self.dims)

    @property
    def size(self) -> int:
        """Total number of nodes (`int`)."""
        return int(np.prod(self.dims))

    @property
    def upper(self) -> tuple[float, ...]:
        """Coordinates of the last node along each axis."""
        return tuple(x + h * (d - 1) for x, h, d in zip(self.origin, self.spacing, self.dims))

    def axis_coordinates(self, axis: int) -> np.ndarray:
        """Return the 1-d coordinate array for one axis."""
        axis = self.check_axis(axis)
        return self.origin[axis] + self.spacing[axis] * np.arange(self.dims[axis])

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Return dense coordinate arrays (``indexing="ij"``), one per axis."""
        return tuple(np.meshgrid(*[self.axis_coordinates(k) for k in range(self.ndim)], indexing="ij"))

    def check_axis(self, axis: int) -> int:
        """Validate an axis index, returning it as a non-negative `int`."""
        if not -self.ndim <= axis < self.ndim:
            raise GridError(f"Axis {axis} is out of range for a {self.ndim}-d grid.")
        return axis % self.ndim

    def check_index(self, index: Iterable[int]) -> tuple[int, ...]:
        """Validate a node index, returning it as a `tuple`."""
        result = tuple(int(i) for i in index)
        if len(result) != self.ndim or not all(0 <= i < d for i, d in zip(result, self.dims)):
            raise GridError(f"Node index {result} is not on a grid with dims {self.dims}.")
        return result

    def nearest_index(self, point: Sequence[float]) -> tuple[int, ...]:
        """Return the index of the node closest to a point, clipped to the
        grid.
        """
        if len(point) != self.ndim:
            raise GridError(f"Point {tuple(point)} does not have {self.ndim} coordinates.")
        return tuple(
            int(np.clip(round((p - x) / h), 0, d - 1))
            for p, x, h, d in zip(point, self.origin, self.spacing, self.dims)
        )

    def default_basepoint(self) -> tuple[int, ...]:
        """Return the node nearest the coordinate origin; frames and
        transforms are normalized there unless told otherwise.
        """
        return self.nearest_index([0.0] * self.ndim)

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-compatible description of the grid."""
        return {"dims": list(self.dims), "origin": list(self.origin), "spacing": list(self.spacing)}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> GridSpec:
        """Reconstruct a grid from the output of `to_dict`."""
        try:
            return cls(dims=data["dims"], origin=data["origin"], spacing=data["spacing"])
        except (KeyError, TypeError) as err:
            raise GridError(f"Malformed grid description {data!r}.") from err


class Field:
    """Values sampled at every node of a `GridSpec`.

    Parameters
    ----------
    grid : `GridSpec`
        Grid the values are attached to.
    values : `numpy.typing.ArrayLike`
        Array whose leading ``grid.ndim`` dimensions match ``grid.dims``;
        any trailing dimensions form the per-node value (empty for scalars,
        ``(m,)`` for vectors, ``(m, m)`` for matrices).
    copy : `bool`, optional
        If `True` (default), copy ``values``; otherwise a read-only view is
        taken, and the caller must not modify the original array.

    Notes
    -----
    Fields are immutable: the array returned by `values` is not writeable.
    """

    def __init__(self, grid: GridSpec, values: ArrayLike, *, copy: bool = True):
        array = np.array(values, copy=True) if copy else np.asarray(values)
        if array.shape[: grid.ndim] != grid.dims:
            raise GridError(f"Array with shape {array.shape} is inconsistent with grid dims {grid.dims}.")
        if copy or not array.flags.writeable:
            array.flags.writeable = False
        else:
            array = array.view()
            array.flags.writeable = False
        self._grid = grid
        self._values = array

    @property
    def grid(self) -> GridSpec:
        """The grid these values are attached to (`GridSpec`)."""
        return self._grid

    @property
    def values(self) -> np.ndarray:
        """The (read-only) value array (`numpy.ndarray`)."""
        return self._values

    @property
    def value_shape(self) -> tuple[int, ...]:
        """Shape of the per-node value (`tuple` [`int`, ...])."""
        return self._values.shape[self._grid.ndim :]  # noqa: E203

    @property
    def is_complex(self) -> bool:
        """Whether values are stored as complex numbers (`bool`)."""
        return np.iscomplexobj(self._values)

    def __repr__(self) -> str:
        return f"Field(dims={self._grid.dims}, value_shape={self.value_shape}, dtype={self._values.dtype})"

    def copy(self) -> Field:
        """Return a deep copy."""
        return Field(self._grid, self._values)

    def with_new_values(self, values: ArrayLike) -> Field:
        """Return a field on the same grid with different values.

        Parameters
        ----------
        values : `numpy.typing.ArrayLike`
            New values; must be consistent with ``self.grid``.

        Returns
        -------
        field : `Field`
            New field.

        Raises
        ------
        GridError
            Raised if the array shape does not match the grid.
        """
        return Field(self._grid, values)

    def node_norms(self) -> np.ndarray:
        """Return the per-node norm of the values.

        Scalars use the absolute value, vectors the Euclidean norm and
        square matrices the operator (spectral) norm.
        """
        shape = self.value_shape
        if not shape:
            return np.abs(self._values)
        if len(shape) == 1:
            return np.linalg.norm(self._values, axis=-1)
        if len(shape) == 2 and shape[0] == shape[1]:
            return np.linalg.norm(self._values, ord=2, axis=(-2, -1))
        value_axes = tuple(range(self._grid.ndim, self._values.ndim))
        return np.sqrt(np.sum(np.abs(self._values) ** 2, axis=value_axes))

    def max_norm(self, mask: np.ndarray | None = None) -> float:
        """Return the largest per-node norm.

        Parameters
        ----------
        mask : `numpy.ndarray`, optional
            Boolean array with the grid's shape; only `True` nodes are
            considered.

        Returns
        -------
        norm : `float`
            Maximum norm (0 if the mask selects no nodes).  NaN values
            propagate.
        """
        norms = self.node_norms()
        if mask is not None:
            norms = norms[mask]
        if norms.size == 0:
            return 0.0
        return float(np.max(norms))

    def is_real(self, tolerance: float) -> bool:
        """Return `True` if every imaginary part is at most ``tolerance``."""
        if not self.is_complex:
            return True
        return bool(np.max(np.abs(self._values.imag), initial=0.0) <= tolerance)


# Five-point one-sided fourth-order stencils for the first two boundary
# nodes; the last two use the mirrored stencils with opposite sign.
_FOURTH_ORDER_EDGE = np.array(
    [
        [-25.0, 48.0, -36.0, 16.0, -3.0],
        [-3.0, -10.0, 18.0, -6.0, 1.0],
    ]
)


def _highest_accuracy(grid: GridSpec) -> int:
    """Return the highest `partial_derivative` accuracy every axis of
    ``grid`` supports.
    """
    return 4 if min(grid.dims) >= 5 else 2


def partial_derivative(f: Field, axis: int, accuracy: int = 2) -> Field:
    """Differentiate a field along one grid axis by finite differences.

    Parameters
    ----------
    f : `Field`
        Field to differentiate; any value shape is supported.
    axis : `int`
        Grid axis to differentiate along.
    accuracy : `int`, optional
        Order of accuracy, 2 (default) or 4.  Interior nodes use central
        differences and boundary nodes one-sided stencils of the same order.

    Returns
    -------
    derivative : `Field`
        Field of the same value shape and grid.

    Raises
    ------
    GridError
        Raised if ``axis`` is out of range or the grid has fewer than
        ``accuracy + 1`` nodes along it.
    ValueError
        Raised if ``accuracy`` is not 2 or 4.
    """
    grid = f.grid
    axis = grid.check_axis(axis)
    if accuracy not in (2, 4):
        raise ValueError(f"Finite-difference accuracy must be 2 or 4, not {accuracy}.")
    n = grid.dims[axis]
    if n < accuracy + 1:
        raise GridError(f"Axis {axis} has {n} nodes; accuracy {accuracy} needs at least {accuracy + 1}.")
    h = grid.spacing[axis]
    values = f.values
    if accuracy == 2:
        return Field(grid, np.gradient(values, h, axis=axis, edge_order=2), copy=False)
    moved = np.moveaxis(values, axis, 0)
    out = np.empty(moved.shape, dtype=np.result_type(moved, float))
    out[2:-2] = (moved[:-4] - 8.0 * moved[1:-3] + 8.0 * moved[3:-1] - moved[4:]) / (12.0 * h)
    head = moved[:5]
    tail = moved[-5:][::-1]
    for k, weights in enumerate(_FOURTH_ORDER_EDGE):
        out[k] = np.tensordot(weights, head, axes=(0, 0)) / (12.0 * h)
        out[n - 1 - k] = -np.tensordot(weights, tail, axes=(0, 0)) / (12.0 * h)
    return Field(grid, np.moveaxis(out, 0, axis), copy=False)
