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
    "BtParam",
    "SgeSolution",
    "lie_transform",
    "one_soliton",
    "sge_backlund",
    "sge_backlund_residual",
    "sge_lax",
    "sge_permutability",
    "sge_residual",
    "vacuum",
)

import dataclasses
import logging
import math
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ._connection import Connection
from ._grid import Field, GridError, GridSpec, partial_derivative
from ._lines import CompatibilityError, Midpoint, integrate_both_policies
from ._settings import DEFAULT_TOLERANCES, Tolerances
from ._solution import Solution

_LOG = logging.getLogger(__name__)

# Largest exponent passed to exp() in closed-form solitons.
_EXPONENT_CLAMP = 700.0


def _check_mu(mu: float, name: str = "mu") -> float:
    mu = float(mu)
    if mu == 0.0 or not math.isfinite(mu):
        raise ValueError(f"Bäcklund parameter {name} must be nonzero and finite, not {mu}.")
    return mu


@dataclasses.dataclass(frozen=True)
class BtParam:
    """Parameter of a sine-Gordon Bäcklund transformation."""

    def __post_init__(self) -> None:
        object.__setattr__(self, "mu", _check_mu(self.mu))

    mu: float
    """Nonzero, finite Bäcklund parameter (`float`)."""

    @classmethod
    def from_angle(cls, theta: float) -> BtParam:
        """Construct from the angle between corresponding normals of the two
        surfaces, using ``μ = tan(θ/2)``.
        """
        return cls(math.tan(theta / 2.0))

    @property
    def angle(self) -> float:
        """Angle ``θ = 2 arctan(μ)`` (`float`)."""
        return 2.0 * math.atan(self.mu)


class SgeSolution(Solution):
    """A solution of the sine-Gordon equation ``q_st = sin q cos q`` in
    Tchebyshef asymptotic coordinates ``(s, t)``.

    Parameters
    ----------
    q : `Field`
        Real scalar field on a 2-d grid.
    history : `~collections.abc.Sequence` [`float`], optional
        Bäcklund parameters applied, in order, to reach this solution from
        the vacuum.
    tolerances : `Tolerances`, optional
        Thresholds for `verified`.
    """

    kind = "sge"

    def __init__(
        self, q: Field, history: Sequence[float] = (), tolerances: Tolerances = DEFAULT_TOLERANCES
    ):
        super().__init__(tolerances)
        if q.grid.ndim != 2 or q.value_shape != ():
            raise GridError(f"A sine-Gordon field is a scalar on a 2-d grid; got {q!r}.")
        if q.is_complex:
            raise GridError("A sine-Gordon field must be real.")
        self._q = q
        self._history = tuple(float(mu) for mu in history)

    @property
    def grid(self) -> GridSpec:
        # Docstring inherited.
        return self._q.grid

    @property
    def q(self) -> Field:
        """The angle field (`Field`)."""
        return self._q

    @property
    def history(self) -> tuple[float, ...]:
        """Bäcklund parameters applied from the vacuum (`tuple`)."""
        return self._history

    def fields(self) -> dict[str, Field]:
        # Docstring inherited.
        return {"q": self._q}

    def _compute_residuals(self) -> dict[str, float]:
        return {"sge": sge_residual(self._q).max_norm()}

    def metadata(self) -> dict[str, Any]:
        # Docstring inherited.
        return {"convention": "q_st = sin(q) cos(q)", "mu_history": list(self._history)}

    @classmethod
    def from_fields(
        cls, fields: Mapping[str, Field], metadata: Mapping[str, Any], tolerances: Tolerances
    ) -> SgeSolution:
        # Docstring inherited.
        return cls(fields["q"], metadata.get("mu_history", ()), tolerances)


def _values(q: SgeSolution | Field) -> Field:
    return q.q if isinstance(q, SgeSolution) else q


def sge_residual(q: SgeSolution | Field) -> Field:
    """Evaluate ``q_st - sin q cos q`` by composing two central differences.

    Parameters
    ----------
    q : `SgeSolution` or `Field`
        Field to test.

    Returns
    -------
    residual : `Field`
        Pointwise residual.
    """
    field = _values(q)
    q_st = partial_derivative(partial_derivative(field, 0), 1)
    return field.with_new_values(q_st.values - np.sin(field.values) * np.cos(field.values))


def vacuum(grid: GridSpec, tolerances: Tolerances = DEFAULT_TOLERANCES) -> SgeSolution:
    """Return the vacuum solution ``q ≡ 0``."""
    return SgeSolution(Field(grid, np.zeros(grid.dims)), (), tolerances)


def one_soliton(grid: GridSpec, mu: float, tolerances: Tolerances = DEFAULT_TOLERANCES) -> SgeSolution:
    """Return the closed-form 1-soliton ``2 arctan(exp(μs + t/μ))``.

    Parameters
    ----------
    grid : `GridSpec`
        2-d ``(s, t)`` grid.
    mu : `float`
        Nonzero Bäcklund parameter.
    tolerances : `Tolerances`, optional
        Thresholds for the returned solution.

    Returns
    -------
    solution : `SgeSolution`
        The 1-soliton, with history ``(mu,)``.
    """
    mu = _check_mu(mu)
    s, t = grid.coordinates()
    exponent = np.clip(mu * s + t / mu, -_EXPONENT_CLAMP, _EXPONENT_CLAMP)
    return SgeSolution(Field(grid, 2.0 * np.arctan(np.exp(exponent)), copy=False), (mu,), tolerances)


def sge_backlund(
    q: SgeSolution,
    mu: float,
    qstar0: float,
    *,
    basepoint: Sequence[int] | None = None,
    substeps: int = 1,
    midpoint: Midpoint = Midpoint.CUBIC,
    require_verified: bool = True,
) -> SgeSolution:
    """Apply a Bäcklund transformation by integrating its first-order
    system along grid lines.

    Parameters
    ----------
    q : `SgeSolution`
        Seed solution.
    mu : `float`
        Nonzero Bäcklund parameter.
    qstar0 : `float`
        Value of the new solution at the basepoint.
    basepoint : `~collections.abc.Sequence` [`int`], optional
        Starting node; defaults to the node nearest the origin.
    substeps : `int`, optional
        Number of RK4 steps per grid cell.
    midpoint : `Midpoint`, optional
        Interpolation of the seed between nodes.
    require_verified : `bool`, optional
        If `True` (default), reject unverified seeds.

    Returns
    -------
    transformed : `SgeSolution`
        New solution ``q*`` with ``(q* + q)_s = μ sin(q* - q)`` and
        ``(q* - q)_t = (1/μ) sin(q* + q)``.

    Raises
    ------
    UnverifiedSolutionError
        Raised if the seed is not verified and ``require_verified`` is set.
    CompatibilityError
        Raised if the two sweep orders differ by more than the residual
        tolerance.
    """
    mu = _check_mu(mu)
    if require_verified:
        q.require_verified()
    grid = q.grid
    values = q.q.values
    coefficients = [
        np.stack([values, partial_derivative(q.q, axis, accuracy=4).values], axis=-1) for axis in (0, 1)
    ]

    def rhs(axis: int, c: np.ndarray, qstar: np.ndarray) -> np.ndarray:
        seed, seed_derivative = c[..., 0], c[..., 1]
        if axis == 0:
            return -seed_derivative + mu * np.sin(qstar - seed)
        return seed_derivative + np.sin(qstar + seed) / mu

    result, defect = integrate_both_policies(
        grid,
        coefficients,
        rhs,
        np.array(float(qstar0)),
        basepoint=basepoint,
        midpoint=midpoint,
        substeps=substeps,
        dtype=float,
    )
    if defect > q.tolerances.residual:
        raise CompatibilityError("Sine-Gordon Bäcklund system", defect, q.tolerances.residual)
    _LOG.debug("Bäcklund transform with mu=%g: sweep-order defect %.3g.", mu, defect)
    return SgeSolution(Field(grid, result, copy=False), q.history + (mu,), q.tolerances)


def sge_backlund_residual(
    q: SgeSolution | Field, qstar: SgeSolution | Field, mu: float
) -> tuple[Field, Field]:
    """Evaluate the two equations of the Bäcklund system.

    Parameters
    ----------
    q, qstar : `SgeSolution` or `Field`
        Seed and transformed solutions.
    mu : `float`
        Bäcklund parameter.

    Returns
    -------
    residual_s : `Field`
        ``(q* + q)_s - μ sin(q* - q)``.
    residual_t : `Field`
        ``(q* - q)_t - (1/μ) sin(q* + q)``.
    """
    mu = _check_mu(mu)
    a = _values(q)
    b = _values(qstar)
    total = a.with_new_values(a.values + b.values)
    difference = a.with_new_values(b.values - a.values)
    residual_s = partial_derivative(total, 0).values - mu * np.sin(difference.values)
    residual_t = partial_derivative(difference, 1).values - np.sin(total.values) / mu
    return a.with_new_values(residual_s), a.with_new_values(residual_t)


def _unwrap_from(values: np.ndarray, base: tuple[int, ...]) -> np.ndarray:
    """Add multiples of 2π so that a 2-d array is continuous along the
    basepoint row and then along every column, walking away from the
    basepoint.
    """
    out = np.array(values)
    i0, j0 = base
    row = out[:, j0]
    row[i0:] = np.unwrap(row[i0:])
    row[: i0 + 1] = np.unwrap(row[: i0 + 1][::-1])[::-1]
    out[:, j0:] = np.unwrap(out[:, j0:], axis=1)
    out[:, : j0 + 1] = np.unwrap(out[:, : j0 + 1][:, ::-1], axis=1)[:, ::-1]
    return out


def sge_permutability(
    q0: SgeSolution,
    q1: SgeSolution,
    q2: SgeSolution,
    mu1: float,
    mu2: float,
    *,
    basepoint: Sequence[int] | None = None,
) -> SgeSolution:
    """Close a Bianchi quadrilateral algebraically.

    Parameters
    ----------
    q0 : `SgeSolution`
        Common seed.
    q1, q2 : `SgeSolution`
        Transforms of ``q0`` with parameters ``mu1`` and ``mu2``.
    mu1, mu2 : `float`
        Bäcklund parameters; ``mu1 != ±mu2``.
    basepoint : `~collections.abc.Sequence` [`int`], optional
        Node from which the result is made continuous.

    Returns
    -------
    q3 : `SgeSolution`
        ``q0 + 2 arctan(((μ1+μ2)/(μ2-μ1)) tan((q1-q2)/2))``, which is the
        transform of ``q1`` by ``mu2`` and of ``q2`` by ``mu1``.

    Raises
    ------
    ValueError
        Raised if ``mu1 == ±mu2`` or a parameter is zero.
    GridError
        Raised if the inputs are on different grids.
    """
    mu1 = _check_mu(mu1, "mu1")
    mu2 = _check_mu(mu2, "mu2")
    if abs(mu1) == abs(mu2):
        raise ValueError(f"Permutability needs mu1 != ±mu2; got {mu1} and {mu2}.")
    grid = q0.grid
    if q1.grid != grid or q2.grid != grid:
        raise GridError("Permutability inputs are on different grids.")
    ratio = (mu1 + mu2) / (mu2 - mu1)
    principal = q0.q.values + 2.0 * np.arctan(ratio * np.tan((q1.q.values - q2.q.values) / 2.0))
    base = grid.check_index(grid.default_basepoint() if basepoint is None else basepoint)
    q3 = Field(grid, _unwrap_from(principal, base), copy=False)
    return SgeSolution(q3, q1.history + (mu2,), q0.tolerances)


def lie_transform(q: SgeSolution, r: float, grid: GridSpec | None = None) -> SgeSolution:
    """Apply the Lie (boost) symmetry ``q̃(s, t) = q(rs, t/r)``.

    Parameters
    ----------
    q : `SgeSolution`
        Solution to transform.
    r : `float`
        Nonzero scale.
    grid : `GridSpec`, optional
        Target grid.  If not given, the result lives on the image of
        ``q.grid`` under the map and is exact; otherwise ``q`` is
        bilinearly resampled.

    Returns
    -------
    transformed : `SgeSolution`
        Transformed solution; its history is scaled by ``r``.

    Raises
    ------
    ValueError
        Raised if ``r`` is zero.
    GridError
        Raised if the target grid maps outside ``q.grid``.
    """
    r = float(r)
    if r == 0.0 or not math.isfinite(r):
        raise ValueError(f"Lie transform scale must be nonzero and finite, not {r}.")
    history = tuple(mu * r for mu in q.history)
    source = q.grid
    if grid is None:
        values = q.q.values
        (ds, dt) = source.spacing
        (s0, t0) = source.origin
        (s1, t1) = source.upper
        if r > 0:
            mapped = GridSpec(source.dims, (s0 / r, t0 * r), (ds / r, dt * r))
        else:
            mapped = GridSpec(source.dims, (s1 / r, t1 * r), (-ds / r, -dt * r))
            values = values[::-1, ::-1]
        return SgeSolution(Field(mapped, values), history, q.tolerances)
    s, t = grid.coordinates()
    points = np.stack([r * s, t / r], axis=-1)
    lower = np.array(source.origin)
    upper = np.array(source.upper)
    slack = 1e-9 * np.array(source.spacing)
    if np.any(points < lower - slack) or np.any(points > upper + slack):
        raise GridError("Target grid maps outside the domain of the solution being transformed.")
    points = np.clip(points, lower, upper)
    interpolator = RegularGridInterpolator(
        (source.axis_coordinates(0), source.axis_coordinates(1)), q.q.values, method="linear"
    )
    return SgeSolution(Field(grid, interpolator(points), copy=False), history, q.tolerances)


def sge_lax(q: SgeSolution | Field, lam: complex) -> Connection:
    """Return the sine-Gordon Lax connection at a spectral parameter.

    Parameters
    ----------
    q : `SgeSolution` or `Field`
        Solution (or candidate field).
    lam : `complex`
        Nonzero spectral parameter.

    Returns
    -------
    theta : `Connection`
        ``B_s = [[-iλ, -q_s], [q_s, iλ]]`` and
        ``B_t = (i/4λ)[[cos 2q, -sin 2q], [-sin 2q, -cos 2q]]``.
        The connection is flat for every λ exactly when ``q`` solves the
        equation.

    Raises
    ------
    ValueError
        Raised if ``lam`` is zero.
    """
    if lam == 0:
        raise ValueError("The sine-Gordon Lax pair is singular at lambda = 0.")
    field = _values(q)
    q_s = partial_derivative(field, 0).values
    c = np.cos(2.0 * field.values)
    s = np.sin(2.0 * field.values)
    b_s = np.zeros(field.grid.dims + (2, 2), dtype=complex)
    b_s[..., 0, 0] = -1j * lam
    b_s[..., 0, 1] = -q_s
    b_s[..., 1, 0] = q_s
    b_s[..., 1, 1] = 1j * lam
    factor = 1j / (4.0 * lam)
    b_t = np.empty_like(b_s)
    b_t[..., 0, 0] = factor * c
    b_t[..., 0, 1] = -factor * s
    b_t[..., 1, 0] = -factor * s
    b_t[..., 1, 1] = -factor * c
    return Connection.from_arrays(field.grid, [b_s, b_t], lam)
