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
    "Connection",
    "CurvatureReport",
    "Frame",
    "FrameFamily",
    "FrameIntegrationError",
    "LaxFrameFamily",
    "curvature_residual",
    "integrate_frame",
    "lambda_derivative_frame",
    "path_discrepancy",
)

import dataclasses
import logging
import threading
from abc import abstractmethod
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Iterator, Sequence

import numpy as np
from numpy.typing import ArrayLike

from ._grid import Field, GridError, GridSpec, partial_derivative
from ._lines import Midpoint, PathPolicy, integrate_lines
from ._settings import DEFAULT_TOLERANCES, Tolerances, kernel_threads

_LOG = logging.getLogger(__name__)


class FrameIntegrationError(RuntimeError):
    """Exception raised when an integrated frame stops being invertible."""

    def __init__(self, min_det: float, tolerance: float) -> None:
        super().__init__(
            f"Integrated frame is singular: min |det E| = {min_det:.3g} is below {tolerance:.3g}."
        )
        self.min_det = min_det


class Connection:
    """A matrix-valued 1-form ``θ = Σₖ Bₖ dxₖ`` sampled on a grid.

    Parameters
    ----------
    coefficients : `~collections.abc.Sequence` [`Field`]
        One square-matrix field per grid axis, all on the same grid.
    spectral_parameter : `complex`, optional
        Value of the spectral parameter this connection was evaluated at,
        if it belongs to a family.

    Raises
    ------
    GridError
        Raised if the fields are on different grids, are not square
        matrices of a common size, or their number is not the grid
        dimension.
    """

    def __init__(self, coefficients: Sequence[Field], spectral_parameter: complex | None = None):
        coefficients = tuple(coefficients)
        if not coefficients:
            raise GridError("A connection needs at least one coefficient field.")
        grid = coefficients[0].grid
        shape = coefficients[0].value_shape
        if len(shape) != 2 or shape[0] != shape[1]:
            raise GridError(f"Connection coefficients must be square matrices, not shape {shape}.")
        for field in coefficients[1:]:
            if field.grid != grid:
                raise GridError("Connection coefficients are defined on different grids.")
            if field.value_shape != shape:
                raise GridError(
                    "Connection coefficients have inconsistent matrix shapes "
                    f"{shape} and {field.value_shape}."
                )
        if len(coefficients) != grid.ndim:
            raise GridError(f"Got {len(coefficients)} coefficients for a {grid.ndim}-d grid.")
        self._coefficients = coefficients
        self._spectral_parameter = spectral_parameter

    @classmethod
    def from_arrays(
        cls, grid: GridSpec, arrays: Sequence[ArrayLike], spectral_parameter: complex | None = None
    ) -> Connection:
        """Construct from raw arrays of shape ``grid.dims + (m, m)``."""
        return cls([Field(grid, a) for a in arrays], spectral_parameter)

    @property
    def grid(self) -> GridSpec:
        """Grid the connection is sampled on (`GridSpec`)."""
        return self._coefficients[0].grid

    @property
    def matrix_size(self) -> int:
        """Size ``m`` of the ``m × m`` coefficient matrices (`int`)."""
        return self._coefficients[0].value_shape[0]

    @property
    def spectral_parameter(self) -> complex | None:
        """Spectral parameter tag, or `None` (`complex`)."""
        return self._spectral_parameter

    @property
    def coefficients(self) -> tuple[Field, ...]:
        """Coefficient fields, one per axis."""
        return self._coefficients

    def __getitem__(self, axis: int) -> Field:
        return self._coefficients[axis]

    def __iter__(self) -> Iterator[Field]:
        return iter(self._coefficients)

    def __len__(self) -> int:
        return len(self._coefficients)

    def metric_defect(self, metric: ArrayLike | None = None, *, conjugate: bool = True) -> float:
        """Return how far the coefficients are from a matrix Lie algebra.

        Parameters
        ----------
        metric : `numpy.typing.ArrayLike`, optional
            Matrix ``M`` defining the algebra ``{B : B*M + MB = 0}``;
            the identity if not given.
        conjugate : `bool`, optional
            If `True` (default) use the conjugate transpose (unitary
            algebras); otherwise the plain transpose (complex orthogonal
            algebras).

        Returns
        -------
        defect : `float`
            Largest norm of ``B*M + MB`` over all nodes and axes.
        """
        m = np.eye(self.matrix_size) if metric is None else np.asarray(metric)
        result = 0.0
        for field in self._coefficients:
            b = field.values
            bt = np.swapaxes(b, -1, -2)
            if conjugate:
                bt = bt.conj()
            result = max(result, Field(self.grid, bt @ m + m @ b, copy=False).max_norm())
        return result


@dataclasses.dataclass(frozen=True)
class CurvatureReport:
    """Finite-difference curvature of a `Connection`."""

    components: dict[tuple[int, int], Field]
    """Curvature ``Fᵢⱼ = ∂ᵢBⱼ - ∂ⱼBᵢ + [Bᵢ, Bⱼ]`` for each axis pair
    ``i < j`` (`dict`).
    """

    @property
    def norms(self) -> dict[tuple[int, int], float]:
        """Maximum operator norm of each curvature component."""
        return {pair: field.max_norm() for pair, field in self.components.items()}

    @property
    def max_norm(self) -> float:
        """Largest norm over all components (0 for 1-d grids)."""
        return max(self.norms.values(), default=0.0)


def curvature_residual(theta: Connection, accuracy: int = 2) -> CurvatureReport:
    """Evaluate the zero-curvature condition of a connection numerically.

    Parameters
    ----------
    theta : `Connection`
        Connection to test.
    accuracy : `int`, optional
        Finite-difference accuracy (2 or 4).

    Returns
    -------
    report : `CurvatureReport`
        Curvature components and their norms.
    """
    components = {}
    n = len(theta)
    for i in range(n):
        for j in range(i + 1, n):
            bi = theta[i].values
            bj = theta[j].values
            values = (
                partial_derivative(theta[j], i, accuracy).values
                - partial_derivative(theta[i], j, accuracy).values
                + bi @ bj
                - bj @ bi
            )
            components[i, j] = Field(theta.grid, values, copy=False)
    return CurvatureReport(components)


class Frame:
    """Fundamental solution of ``E⁻¹dE = θ`` on a grid.

    Parameters
    ----------
    values : `Field`
        Invertible matrix at every node.
    basepoint : `tuple` [`int`, ...]
        Node where the initial value was imposed.
    initial : `numpy.ndarray`
        Value at the basepoint.
    spectral_parameter : `complex`, optional
        Spectral parameter of the connection this frame integrates.
    tolerances : `Tolerances`, optional
        Thresholds; ``determinant`` is used to check invertibility.

    Raises
    ------
    FrameIntegrationError
        Raised if ``|det E|`` drops below ``tolerances.determinant``
        anywhere (or is not finite).
    """

    def __init__(
        self,
        values: Field,
        basepoint: tuple[int, ...],
        initial: np.ndarray,
        spectral_parameter: complex | None = None,
        tolerances: Tolerances = DEFAULT_TOLERANCES,
    ):
        dets = np.abs(np.linalg.det(values.values))
        min_det = float(np.min(dets)) if np.all(np.isfinite(dets)) else float("nan")
        if not min_det >= tolerances.determinant:
            raise FrameIntegrationError(min_det, tolerances.determinant)
        self._values = values
        self._basepoint = values.grid.check_index(basepoint)
        self._initial = np.array(initial)
        self._spectral_parameter = spectral_parameter
        self._inverse: Field | None = None

    @property
    def grid(self) -> GridSpec:
        """Grid the frame is sampled on (`GridSpec`)."""
        return self._values.grid

    @property
    def values(self) -> Field:
        """Frame matrices (`Field`)."""
        return self._values

    @property
    def basepoint(self) -> tuple[int, ...]:
        """Index of the node where the initial value holds."""
        return self._basepoint

    @property
    def initial(self) -> np.ndarray:
        """Value imposed at the basepoint (`numpy.ndarray`)."""
        return self._initial

    @property
    def spectral_parameter(self) -> complex | None:
        """Spectral parameter, if any."""
        return self._spectral_parameter

    @property
    def inverse(self) -> Field:
        """Pointwise matrix inverse, computed on first access (`Field`)."""
        if self._inverse is None:
            self._inverse = Field(self.grid, np.linalg.inv(self._values.values), copy=False)
        return self._inverse

    def determinant_drift(self) -> float:
        """Return ``max |det E - det initial|``."""
        return float(np.max(np.abs(np.linalg.det(self._values.values) - np.linalg.det(self._initial))))


def integrate_frame(
    theta: Connection,
    initial: ArrayLike | None = None,
    basepoint: Sequence[int] | None = None,
    path: PathPolicy = PathPolicy.AXIS_ORDERED,
    *,
    midpoint: Midpoint = Midpoint.LINEAR,
    substeps: int = 1,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> Frame:
    """Integrate ``dE = E θ`` along grid lines.

    Parameters
    ----------
    theta : `Connection`
        Connection to integrate.
    initial : `numpy.typing.ArrayLike`, optional
        Invertible value at the basepoint; the identity if not given.
    basepoint : `~collections.abc.Sequence` [`int`], optional
        Starting node; defaults to `GridSpec.default_basepoint`.
    path : `PathPolicy`, optional
        Axis sweep order.
    midpoint : `Midpoint`, optional
        Coefficient interpolation used at RK4 midpoints.
    substeps : `int`, optional
        Number of RK4 steps per grid cell.
    tolerances : `Tolerances`, optional
        Thresholds; a curvature above ``residual`` is logged as a warning
        and ``determinant`` guards invertibility.

    Returns
    -------
    frame : `Frame`
        The integrated frame.

    Raises
    ------
    ValueError
        Raised if ``initial`` is not an invertible ``m × m`` matrix.
    FrameIntegrationError
        Raised if the result becomes singular.
    """
    grid = theta.grid
    m = theta.matrix_size
    initial = np.eye(m) if initial is None else np.asarray(initial)
    if initial.shape != (m, m):
        raise ValueError(f"Initial frame has shape {initial.shape}; expected {(m, m)}.")
    if not abs(np.linalg.det(initial)) >= tolerances.determinant:
        raise ValueError("Initial frame is singular.")
    base = grid.check_index(grid.default_basepoint() if basepoint is None else basepoint)
    if grid.ndim > 1:
        curvature = curvature_residual(theta).max_norm
        if curvature > tolerances.residual:
            _LOG.warning(
                "Integrating a connection with curvature residual %.3g (> %.3g); "
                "the frame will depend on the integration path.",
                curvature,
                tolerances.residual,
            )
    values = integrate_lines(
        grid,
        [field.values for field in theta],
        lambda axis, b, e: e @ b,
        initial,
        basepoint=base,
        policy=path,
        midpoint=midpoint,
        substeps=substeps,
        dtype=np.result_type(initial, *[field.values for field in theta]),
    )
    return Frame(Field(grid, values, copy=False), base, initial, theta.spectral_parameter, tolerances)


def path_discrepancy(
    theta: Connection,
    initial: ArrayLike | None = None,
    basepoint: Sequence[int] | None = None,
    **kwargs: Any,
) -> float:
    """Integrate a connection with both path policies and compare.

    Parameters
    ----------
    theta, initial, basepoint
        As for `integrate_frame`.
    **kwargs
        Other keyword arguments for `integrate_frame`.

    Returns
    -------
    discrepancy : `float`
        Largest entry-wise difference between the two frames.
    """
    forward = integrate_frame(theta, initial, basepoint, PathPolicy.AXIS_ORDERED, **kwargs)
    backward = integrate_frame(theta, initial, basepoint, PathPolicy.REVERSE_ORDERED, **kwargs)
    discrepancy = float(np.max(np.abs(forward.values.values - backward.values.values)))
    _LOG.debug("Path discrepancy %.3g.", discrepancy)
    return discrepancy


class FrameFamily:
    """A family of frames parametrized by a complex spectral parameter."""

    @property
    @abstractmethod
    def grid(self) -> GridSpec:
        """Grid the frames are sampled on (`GridSpec`)."""
        raise NotImplementedError()

    @abstractmethod
    def __call__(self, lam: complex) -> Frame:
        """Return the frame at a spectral parameter value.

        Parameters
        ----------
        lam : `complex`
            Spectral parameter.

        Returns
        -------
        frame : `Frame`
            Frame at ``lam``.
        """
        raise NotImplementedError()


class LaxFrameFamily(FrameFamily):
    """Frames of a Lax connection family, integrated on demand and cached
    per spectral parameter.

    Parameters
    ----------
    connection : `~collections.abc.Callable`
        Callable mapping a spectral parameter to a `Connection`.
    grid : `GridSpec`
        Grid of the connections.
    initial : `numpy.typing.ArrayLike`, optional
        Initial frame, the same for every spectral parameter.
    basepoint : `~collections.abc.Sequence` [`int`], optional
        Basepoint for all frames.
    **kwargs
        Forwarded to `integrate_frame`.
    """

    def __init__(
        self,
        connection: Callable[[complex], Connection],
        grid: GridSpec,
        initial: ArrayLike | None = None,
        basepoint: Sequence[int] | None = None,
        **kwargs: Any,
    ):
        self._connection = connection
        self._grid = grid
        self._initial = None if initial is None else np.asarray(initial)
        self._basepoint = grid.check_index(grid.default_basepoint() if basepoint is None else basepoint)
        self._kwargs = kwargs
        self._cache: dict[complex, Frame] = {}
        self._lock = threading.Lock()

    @property
    def grid(self) -> GridSpec:
        # Docstring inherited.
        return self._grid

    @property
    def basepoint(self) -> tuple[int, ...]:
        """Basepoint shared by all frames."""
        return self._basepoint

    def __call__(self, lam: complex) -> Frame:
        # Docstring inherited.
        key = complex(lam)
        with self._lock:
            cached = self._cache.get(key)
        if cached is not None:
            return cached
        frame = integrate_frame(self._connection(lam), self._initial, self._basepoint, **self._kwargs)
        with self._lock:
            self._cache.setdefault(key, frame)
        return frame


def _derivative_and_frame(family: FrameFamily, lam0: complex, dlam: float) -> tuple[Field, Frame]:
    """Compute the central-difference λ-derivative ``∂E/∂λ · E⁻¹`` and
    return it with the frame at ``lam0``.
    """
    if dlam == 0:
        raise ValueError("Spectral parameter step must be nonzero.")
    lams = [lam0 + dlam, lam0 - dlam, lam0]
    with ThreadPoolExecutor(max_workers=min(len(lams), kernel_threads())) as pool:
        plus, minus, center = pool.map(family, lams)
    dE = (plus.values.values - minus.values.values) / (2.0 * dlam)
    return Field(family.grid, dE @ center.inverse.values, copy=False), center


def lambda_derivative_frame(family: FrameFamily, lam0: complex, dlam: float) -> Field:
    """Differentiate a frame family in the spectral parameter.

    Parameters
    ----------
    family : `FrameFamily`
        Frames to differentiate.
    lam0 : `complex`
        Spectral parameter at which to differentiate.
    dlam : `float`
        Central-difference step.

    Returns
    -------
    derivative : `Field`
        ``(E(λ₀+dλ) - E(λ₀-dλ)) / (2dλ) · E(λ₀)⁻¹`` at every node.

    Raises
    ------
    ValueError
        Raised if ``dlam`` is zero.

    Notes
    -----
    The three frames are integrated concurrently with at most
    `kernel_threads` workers.
    """
    derivative, _ = _derivative_and_frame(family, lam0, dlam)
    return derivative
