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
    "CompatibilityError",
    "LineRhs",
    "Midpoint",
    "PathPolicy",
    "integrate_lines",
    "integrate_both_policies",
)

import enum
import logging
from typing import Callable, Sequence

import numpy as np

from ._grid import GridError, GridSpec

_LOG = logging.getLogger(__name__)

LineRhs = Callable[[int, np.ndarray, np.ndarray], np.ndarray]
"""Signature of the right-hand side of a system of first-order equations
``∂ₖ state = rhs(k, coefficient, state)``, vectorized over leading
dimensions.
"""


class CompatibilityError(RuntimeError):
    """Exception raised when a first-order system integrated along grid lines
    depends on the order in which the axes are swept by more than the
    tolerance, which means its integrability condition does not hold.
    """

    def __init__(self, what: str, defect: float, tolerance: float) -> None:
        super().__init__(
            f"{what} is not path independent: the two sweep orders differ by {defect:.3g}, "
            f"more than the tolerance {tolerance:.3g}.  The seed probably does not solve its equation."
        )
        self.defect = defect
        self.tolerance = tolerance


class PathPolicy(enum.Enum):
    """Order in which grid axes are swept when integrating from a basepoint."""

    AXIS_ORDERED = "axis_ordered"
    """Integrate along axis 0 through the basepoint, then along axis 1 from
    every node already filled, and so on.
    """

    REVERSE_ORDERED = "reverse_ordered"
    """Sweep the axes in the opposite order (last axis first)."""

    def axis_order(self, ndim: int) -> list[int]:
        """Return the axes in sweep order for a grid with ``ndim`` axes."""
        order = list(range(ndim))
        if self is PathPolicy.REVERSE_ORDERED:
            order.reverse()
        return order


class Midpoint(enum.Enum):
    """How coefficients are evaluated between grid nodes."""

    LINEAR = "linear"
    """Linear interpolation between the two neighbouring nodes."""

    CUBIC = "cubic"
    """Four-point Lagrange interpolation, with the window shifted inward at
    the ends of a line.  Lines shorter than four nodes fall back to linear.
    """


def _interpolate(line: np.ndarray, position: float, midpoint: Midpoint) -> np.ndarray:
    """Evaluate coefficients stored along axis 0 of ``line`` at a fractional
    node position.
    """
    n = line.shape[0]
    i0 = min(int(np.floor(position)), n - 2)
    i0 = max(i0, 0)
    t = position - i0
    if t == 0.0:
        return line[i0]
    if t == 1.0:
        return line[i0 + 1]
    if midpoint is Midpoint.LINEAR or n < 4:
        return (1.0 - t) * line[i0] + t * line[i0 + 1]
    start = min(max(i0 - 1, 0), n - 4)
    nodes = np.arange(start, start + 4, dtype=float)
    result = 0.0
    for k in range(4):
        others = np.delete(nodes, k)
        weight = np.prod((position - others) / (nodes[k] - others))
        result = result + weight * line[start + k]
    return result


def _march(
    rhs: LineRhs,
    axis: int,
    coefficients: np.ndarray,
    states: np.ndarray,
    start: int,
    step: float,
    midpoint: Midpoint,
    substeps: int,
) -> None:
    """Fill ``states[j]`` for every ``j`` on both sides of ``start`` by RK4,
    in place, given ``states[start]``.

    Axis 0 of ``coefficients`` and ``states`` runs along the line; any other
    leading dimensions are independent lines swept together.
    """
    n = states.shape[0]
    for direction in (1, -1):
        stop = n if direction > 0 else -1
        h = direction * step / substeps
        for j in range(start, stop - direction, direction):
            y = states[j]
            for m in range(substeps):
                p0 = j + direction * (m / substeps)
                ph = j + direction * ((m + 0.5) / substeps)
                p1 = j + direction * ((m + 1) / substeps)
                c0 = _interpolate(coefficients, p0, midpoint)
                ch = _interpolate(coefficients, ph, midpoint)
                c1 = _interpolate(coefficients, p1, midpoint)
                k1 = rhs(axis, c0, y)
                k2 = rhs(axis, ch, y + 0.5 * h * k1)
                k3 = rhs(axis, ch, y + 0.5 * h * k2)
                k4 = rhs(axis, c1, y + h * k3)
                y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            states[j + direction] = y


def integrate_lines(
    grid: GridSpec,
    coefficients: Sequence[np.ndarray],
    rhs: LineRhs,
    initial: np.ndarray,
    *,
    basepoint: Sequence[int] | None = None,
    policy: PathPolicy = PathPolicy.AXIS_ORDERED,
    midpoint: Midpoint = Midpoint.LINEAR,
    substeps: int = 1,
    dtype: type | np.dtype | None = None,
) -> np.ndarray:
    """Integrate a first-order system over a whole grid by sweeping grid
    lines out of a basepoint.

    Parameters
    ----------
    grid : `GridSpec`
        Grid to integrate over.
    coefficients : `~collections.abc.Sequence` [`numpy.ndarray`]
        One array per axis, each with leading shape ``grid.dims``; entry
        ``k`` is passed (interpolated) to ``rhs`` when stepping along axis
        ``k``.
    rhs : `LineRhs`
        Right-hand side ``∂ₖ state = rhs(k, coefficient, state)``.
    initial : `numpy.ndarray`
        State at the basepoint.
    basepoint : `~collections.abc.Sequence` [`int`], optional
        Starting node; defaults to `GridSpec.default_basepoint`.
    policy : `PathPolicy`, optional
        Axis sweep order.
    midpoint : `Midpoint`, optional
        Coefficient interpolation between nodes.
    substeps : `int`, optional
        Number of RK4 steps per grid cell.
    dtype : `numpy.dtype`, optional
        Dtype of the state; inferred from ``initial`` and the coefficients
        if not given.

    Returns
    -------
    states : `numpy.ndarray`
        Array of shape ``grid.dims + initial.shape``.
    """
    if len(coefficients) != grid.ndim:
        raise GridError(f"Got {len(coefficients)} coefficient arrays for a {grid.ndim}-d grid.")
    if substeps < 1:
        raise ValueError(f"RK4 substeps must be at least 1, not {substeps}.")
    base = grid.check_index(grid.default_basepoint() if basepoint is None else basepoint)
    initial = np.asarray(initial)
    if dtype is None:
        dtype = np.result_type(initial, *coefficients)
    states = np.zeros(grid.dims + initial.shape, dtype=dtype)
    states[base] = initial
    filled: list[int] = []
    for axis in policy.axis_order(grid.ndim):
        index = tuple(
            slice(None) if (k == axis or k in filled) else base[k] for k in range(grid.ndim)
        )
        # Advanced-free indexing keeps these as views, so the sweep fills
        # ``states`` in place.
        line_states = np.moveaxis(states[index], sum(1 for k in filled if k < axis), 0)
        line_coeffs = np.moveaxis(coefficients[axis][index], sum(1 for k in filled if k < axis), 0)
        _march(rhs, axis, line_coeffs, line_states, base[axis], grid.spacing[axis], midpoint, substeps)
        filled.append(axis)
    return states


def integrate_both_policies(
    grid: GridSpec,
    coefficients: Sequence[np.ndarray],
    rhs: LineRhs,
    initial: np.ndarray,
    **kwargs,
) -> tuple[np.ndarray, float]:
    """Integrate with both sweep orders.

    Parameters
    ----------
    grid, coefficients, rhs, initial
        As for `integrate_lines`.
    **kwargs
        Forwarded to `integrate_lines`; ``policy`` must not be given.

    Returns
    -------
    states : `numpy.ndarray`
        Result of the axis-ordered sweep.
    defect : `float`
        Largest absolute difference between the two sweeps (0 on 1-d
        grids).
    """
    forward = integrate_lines(grid, coefficients, rhs, initial, policy=PathPolicy.AXIS_ORDERED, **kwargs)
    if grid.ndim == 1:
        return forward, 0.0
    backward = integrate_lines(
        grid, coefficients, rhs, initial, policy=PathPolicy.REVERSE_ORDERED, **kwargs
    )
    defect = float(np.max(np.abs(forward - backward)))
    _LOG.debug("Sweep-order defect %.3g on grid with dims %s.", defect, grid.dims)
    return forward, defect
