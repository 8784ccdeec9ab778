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
    "ChristoffelPair",
    "IsothermicData",
    "PairReport",
    "associated_family",
    "christoffel_dual_data",
    "christoffel_pair_method1",
    "christoffel_pair_method2",
    "cylinder_data",
    "iso_lax",
    "iso_residual",
    "plane_data",
    "sphere_data",
    "verify_pair",
)

import dataclasses
import logging
import math
from typing import Any, Mapping

import numpy as np

from ._connection import Connection, LaxFrameFamily, _derivative_and_frame, integrate_frame
from ._grid import Field, GridError, GridSpec, _highest_accuracy, partial_derivative
from ._lines import Midpoint, integrate_both_policies
from ._settings import DEFAULT_TOLERANCES, Tolerances
from ._solution import Solution
from ._surfaces import ImmersionField, Provenance, fundamental_forms

_LOG = logging.getLogger(__name__)

# Largest |q| accepted; e^{2q} overflows the useful range beyond this.
_Q_LIMIT = 20.0


class IsothermicData(Solution):
    """Structure data ``(q, r₁, r₂)`` of an isothermic surface in ℝ³ with
    first fundamental form ``e^{2q}(dx₁² + dx₂²)`` and second fundamental
    form ``e^q(r₁dx₁² + r₂dx₂²)``.

    Parameters
    ----------
    q, r1, r2 : `Field`
        Real scalar fields on the same 2-d grid.
    tolerances : `Tolerances`, optional
        Thresholds for `verified`.

    Raises
    ------
    ValueError
        Raised if ``|q|`` exceeds 20 anywhere.
    """

    kind = "isothermic"

    def __init__(self, q: Field, r1: Field, r2: Field, tolerances: Tolerances = DEFAULT_TOLERANCES):
        super().__init__(tolerances)
        for name, field in (("q", q), ("r1", r1), ("r2", r2)):
            if field.grid != q.grid or field.grid.ndim != 2 or field.value_shape != () or field.is_complex:
                raise GridError(f"Isothermic field {name} must be a real scalar on the common 2-d grid.")
        if float(np.max(np.abs(q.values))) > _Q_LIMIT:
            raise ValueError(f"Isothermic conformal factor |q| must not exceed {_Q_LIMIT}.")
        self._q = q
        self._r1 = r1
        self._r2 = r2

    @property
    def grid(self) -> GridSpec:
        # Docstring inherited.
        return self._q.grid

    @property
    def q(self) -> Field:
        """Conformal factor (`Field`)."""
        return self._q

    @property
    def r1(self) -> Field:
        """First principal coefficient (`Field`)."""
        return self._r1

    @property
    def r2(self) -> Field:
        """Second principal coefficient (`Field`)."""
        return self._r2

    def fields(self) -> dict[str, Field]:
        # Docstring inherited.
        return {"q": self._q, "r1": self._r1, "r2": self._r2}

    def _compute_residuals(self) -> dict[str, float]:
        gauss, codazzi1, codazzi2 = iso_residual(self)
        return {"gauss": gauss.max_norm(), "codazzi_1": codazzi1.max_norm(), "codazzi_2": codazzi2.max_norm()}

    def metadata(self) -> dict[str, Any]:
        # Docstring inherited.
        return {"convention": "I = e^{2q}(dx1^2 + dx2^2), II = e^q(r1 dx1^2 + r2 dx2^2)"}

    @classmethod
    def from_fields(
        cls, fields: Mapping[str, Field], metadata: Mapping[str, Any], tolerances: Tolerances
    ) -> IsothermicData:
        # Docstring inherited.
        return cls(fields["q"], fields["r1"], fields["r2"], tolerances)

    @classmethod
    def from_arrays(
        cls,
        grid: GridSpec,
        q: np.ndarray,
        r1: np.ndarray,
        r2: np.ndarray,
        tolerances: Tolerances = DEFAULT_TOLERANCES,
    ) -> IsothermicData:
        """Construct from arrays broadcastable to ``grid.dims``."""
        return cls(
            *(Field(grid, np.broadcast_to(np.asarray(a, dtype=float), grid.dims)) for a in (q, r1, r2)),
            tolerances,
        )


def iso_residual(d: IsothermicData) -> tuple[Field, Field, Field]:
    """Evaluate the Gauss-Codazzi equations of isothermic data.

    Returns
    -------
    gauss : `Field`
        ``q₁₁ + q₂₂ + r₁r₂``.
    codazzi1 : `Field`
        ``(r₁)_{x₂} - q_{x₂} r₂``.
    codazzi2 : `Field`
        ``(r₂)_{x₁} - q_{x₁} r₁``.
    """
    accuracy = _highest_accuracy(d.grid)
    q1 = partial_derivative(d.q, 0, accuracy)
    q2 = partial_derivative(d.q, 1, accuracy)
    r1 = d.r1.values
    r2 = d.r2.values
    q11 = partial_derivative(q1, 0, accuracy).values
    q22 = partial_derivative(q2, 1, accuracy).values
    gauss = q11 + q22 + r1 * r2
    codazzi1 = partial_derivative(d.r1, 1, accuracy).values - q2.values * r2
    codazzi2 = partial_derivative(d.r2, 0, accuracy).values - q1.values * r1
    return tuple(d.q.with_new_values(values) for values in (gauss, codazzi1, codazzi2))


def christoffel_dual_data(d: IsothermicData) -> IsothermicData:
    """Return the data ``(-q, r₁, -r₂)`` of the Christoffel dual.

    Applying this twice returns the original data.
    """
    return IsothermicData(
        d.q.with_new_values(-d.q.values), d.r1, d.r2.with_new_values(-d.r2.values), d.tolerances
    )


def associated_family(d: IsothermicData, s: float) -> IsothermicData:
    """Return the member ``(q + ln s, r₁, r₂)`` of the associated family.

    Raises
    ------
    ValueError
        Raised if ``s`` is not positive.
    """
    if not s > 0:
        raise ValueError(f"Associated-family parameter must be positive, not {s}.")
    return IsothermicData(d.q.with_new_values(d.q.values + math.log(s)), d.r1, d.r2, d.tolerances)


def plane_data(grid: GridSpec, tolerances: Tolerances = DEFAULT_TOLERANCES) -> IsothermicData:
    """Return the data ``(0, 0, 0)`` of a plane."""
    return IsothermicData.from_arrays(grid, 0.0, 0.0, 0.0, tolerances)


def cylinder_data(grid: GridSpec, tolerances: Tolerances = DEFAULT_TOLERANCES) -> IsothermicData:
    """Return the data ``(0, 1, 0)`` of the unit cylinder."""
    return IsothermicData.from_arrays(grid, 0.0, 1.0, 0.0, tolerances)


def sphere_data(grid: GridSpec, tolerances: Tolerances = DEFAULT_TOLERANCES) -> IsothermicData:
    """Return the data ``(-ln cosh x₁, sech x₁, sech x₁)`` of the unit
    sphere in Mercator coordinates.
    """
    x1, _ = grid.coordinates()
    sech = 1.0 / np.cosh(x1)
    return IsothermicData.from_arrays(grid, -np.log(np.cosh(x1)), sech, sech, tolerances)


def iso_lax(d: IsothermicData, lam: float) -> Connection:
    """Return the Lax connection of isothermic data.

    Parameters
    ----------
    d : `IsothermicData`
        Structure data.
    lam : `float`
        Real spectral parameter; ``0`` is allowed.

    Returns
    -------
    theta : `Connection`
        ``5 × 5`` coefficients ``Bᵢ = [[wᵢ, λDᵢ], [-λJDᵢᵀ, τᵢ]]`` in
        ``o(3, 2)``, where ``w`` is the Levi-Civita and shape part,
        ``τᵢ = -q_{xᵢ}[[0, 1], [1, 0]]`` and ``J = diag(1, -1)``.  The
        connection is block-diagonal at ``λ = 0``.
    """
    grid = d.grid
    accuracy = _highest_accuracy(grid)
    q1 = partial_derivative(d.q, 0, accuracy).values
    q2 = partial_derivative(d.q, 1, accuracy).values
    r1 = d.r1.values
    r2 = d.r2.values
    j = np.diag([1.0, -1.0])
    b1 = np.zeros(grid.dims + (5, 5))
    b2 = np.zeros(grid.dims + (5, 5))
    b1[..., 0, 1] = q2
    b1[..., 1, 0] = -q2
    b1[..., 0, 2] = r1
    b1[..., 2, 0] = -r1
    b2[..., 0, 1] = -q1
    b2[..., 1, 0] = q1
    b2[..., 1, 2] = r2
    b2[..., 2, 1] = -r2
    for b, dq, k in ((b1, q1, 0), (b2, q2, 1)):
        e = np.zeros((3, 2))
        e[k, k] = 1.0
        b[..., :3, 3:] = lam * e
        b[..., 3:, :3] = -lam * (j @ e.T)
        b[..., 3, 4] = -dq
        b[..., 4, 3] = -dq
    return Connection.from_arrays(grid, [b1, b2], lam)


def _g2(q: np.ndarray) -> np.ndarray:
    result = np.empty(np.shape(q) + (2, 2))
    result[..., 0, 0] = np.cosh(q)
    result[..., 0, 1] = -np.sinh(q)
    result[..., 1, 0] = -np.sinh(q)
    result[..., 1, 1] = np.cosh(q)
    return result


def _g2_inverse(q: np.ndarray) -> np.ndarray:
    return _g2(-q)


def _initial_frame(d: IsothermicData, basepoint: tuple[int, ...]) -> np.ndarray:
    initial = np.eye(5)
    initial[3:, 3:] = _g2(d.q.values[basepoint])
    return initial


_COMBINE = np.array([[1.0, 1.0], [1.0, -1.0]])


@dataclasses.dataclass(frozen=True)
class ChristoffelPair:
    """An isothermic surface and its Christoffel dual."""

    f: ImmersionField
    """The surface with first fundamental form ``e^{2q}(dx₁² + dx₂²)``."""

    f_dual: ImmersionField
    """The dual, with first fundamental form ``e^{-2q}(dx₁² + dx₂²)``."""

    diagnostics: dict[str, float] = dataclasses.field(default_factory=dict)
    """Defects recorded by the construction (closure, path, off-block)."""


def _split(grid: GridSpec, Y: np.ndarray, diagnostic: float) -> tuple[ImmersionField, ImmersionField]:
    pair = Y @ _COMBINE
    return (
        ImmersionField(Field(grid, pair[..., 0], copy=False), Provenance.CHRISTOFFEL, diagnostic),
        ImmersionField(Field(grid, pair[..., 1], copy=False), Provenance.CHRISTOFFEL, diagnostic),
    )


def christoffel_pair_method1(
    d: IsothermicData,
    *,
    midpoint: Midpoint = Midpoint.CUBIC,
    substeps: int = 1,
) -> ChristoffelPair:
    """Build a Christoffel pair by integrating the λ = 0 frame and the
    closed 1-form ``ζ = g₁ [δ; 0] g₂⁻¹``.

    Parameters
    ----------
    d : `IsothermicData`
        Verified structure data.
    midpoint : `Midpoint`, optional
        Coefficient interpolation for the integrations.
    substeps : `int`, optional
        RK4 steps per grid cell.

    Returns
    -------
    pair : `ChristoffelPair`
        ``Y·[[1, 1], [1, -1]]`` where ``dY = ζ`` and ``Y`` vanishes at the
        basepoint.  Diagnostics hold the ``closure`` residual of ``ζ`` and
        the ``path`` defect.
    """
    d.require_verified()
    grid = d.grid
    tolerances = d.tolerances
    theta = iso_lax(d, 0.0)
    g1 = integrate_frame(
        Connection([field.with_new_values(field.values[..., :3, :3]) for field in theta]),
        midpoint=midpoint,
        substeps=substeps,
        tolerances=tolerances,
    )
    g2_inverse = _g2_inverse(d.q.values)
    zeta = []
    for k in range(2):
        e = np.zeros((3, 2))
        e[k, k] = 1.0
        zeta.append(g1.values.values @ e @ g2_inverse)
    accuracy = _highest_accuracy(grid)
    closure = float(
        np.max(
            np.abs(
                partial_derivative(Field(grid, zeta[1], copy=False), 0, accuracy).values
                - partial_derivative(Field(grid, zeta[0], copy=False), 1, accuracy).values
            )
        )
    )
    if closure > tolerances.residual:
        _LOG.warning("Christoffel 1-form is not closed: residual %.3g > %.3g.", closure, tolerances.residual)
    Y, defect = integrate_both_policies(
        grid,
        zeta,
        lambda axis, coefficient, state: coefficient,
        np.zeros((3, 2)),
        basepoint=g1.basepoint,
        midpoint=midpoint,
        substeps=substeps,
        dtype=float,
    )
    f, f_dual = _split(grid, Y, defect)
    return ChristoffelPair(f, f_dual, {"closure": closure, "path": defect})


def christoffel_pair_method2(
    d: IsothermicData,
    dlambda: float = 1e-4,
    *,
    midpoint: Midpoint = Midpoint.CUBIC,
    substeps: int = 1,
) -> ChristoffelPair:
    """Build a Christoffel pair from the λ-derivative of the Lax frame at
    ``λ = 0``.

    Parameters
    ----------
    d : `IsothermicData`
        Verified structure data.
    dlambda : `float`, optional
        Central-difference step in λ.
    midpoint : `Midpoint`, optional
        Coefficient interpolation for the integrations.
    substeps : `int`, optional
        RK4 steps per grid cell.

    Returns
    -------
    pair : `ChristoffelPair`
        ``Z·[[1, 1], [1, -1]]`` where ``Z`` is the upper-right ``3 × 2``
        block of ``∂E/∂λ · E⁻¹`` at ``λ = 0``.  The ``off_block``
        diagnostic is the largest entry of the diagonal blocks, which
        vanish in exact arithmetic.
    """
    d.require_verified()
    grid = d.grid
    base = grid.default_basepoint()
    family = LaxFrameFamily(
        lambda lam: iso_lax(d, lam),
        grid,
        initial=_initial_frame(d, base),
        basepoint=base,
        midpoint=midpoint,
        substeps=substeps,
        tolerances=d.tolerances,
    )
    derivative, _ = _derivative_and_frame(family, 0.0, dlambda)
    values = derivative.values.real
    off_block = float(max(np.max(np.abs(values[..., :3, :3])), np.max(np.abs(values[..., 3:, 3:]))))
    _LOG.debug("Christoffel pair off-block defect %.3g.", off_block)
    f, f_dual = _split(grid, values[..., :3, 3:], off_block)
    return ChristoffelPair(f, f_dual, {"off_block": off_block})


@dataclasses.dataclass(frozen=True)
class PairReport:
    """Result of `verify_pair`; every entry is a largest absolute error."""

    first_form: float
    """Error of ``I = e^{2q}(dx₁² + dx₂²)`` for ``f``."""

    dual_first_form: float
    """Error of ``Ĩ = e^{-2q}(dx₁² + dx₂²)`` for the dual."""

    conformality: float
    """Largest ``|F|`` and ``|E - G|`` of either surface."""

    second_form: float
    """Error of ``II = σe^q(r₁dx₁² + r₂dx₂²)`` for ``f``."""

    dual_second_form: float
    """Error of ``ĨI = σe^{-q}(r₁dx₁² - r₂dx₂²)`` for the dual, measured
    against ``f``'s normal.
    """

    normal_defect: float
    """Largest ``|ν × ν̃|`` of the two unit normals."""

    orientation: int
    """Global orientation sign ``σ`` fitted to the second forms."""

    tolerance: float
    """Threshold each error is compared with."""

    @property
    def passed(self) -> bool:
        """`True` if every error is within `tolerance`."""
        return all(value <= self.tolerance for value in self.errors().values())

    def errors(self) -> dict[str, float]:
        """Return the errors keyed by name."""
        return {
            "first_form": self.first_form,
            "dual_first_form": self.dual_first_form,
            "conformality": self.conformality,
            "second_form": self.second_form,
            "dual_second_form": self.dual_second_form,
            "normal_defect": self.normal_defect,
        }

    def to_dict(self) -> dict[str, Any]:
        """Return a JSON-compatible summary."""
        return {**self.errors(), "orientation": self.orientation, "passed": self.passed}


def verify_pair(p: ChristoffelPair, d: IsothermicData, tolerance: float | None = None) -> PairReport:
    """Check that a Christoffel pair realizes given isothermic data.

    Parameters
    ----------
    p : `ChristoffelPair`
        Candidate pair.
    d : `IsothermicData`
        Structure data the pair should realize.
    tolerance : `float`, optional
        Threshold; ``d.tolerances.residual`` if not given.

    Returns
    -------
    report : `PairReport`
        Errors of both fundamental forms of both surfaces.  The second
        forms use ``f``'s normal for both surfaces, with a single global
        sign fitted to the data.
    """
    if tolerance is None:
        tolerance = d.tolerances.residual
    forms = fundamental_forms(p.f)
    normal = forms.normal
    dual = fundamental_forms(p.f_dual, normal=normal)
    dual_own = fundamental_forms(p.f_dual)
    mask = ~(forms.degenerate | dual.degenerate)

    def worst(values: np.ndarray) -> float:
        selected = np.abs(values)[mask]
        return float(np.max(selected)) if selected.size else 0.0

    scale = np.exp(d.q.values)
    r1 = d.r1.values
    r2 = d.r2.values
    fit = np.sum((forms.L.values * r1 + forms.N.values * r2)[mask] * scale[mask])
    orientation = -1 if fit < 0 else 1
    first = max(worst(forms.E.values - scale**2), worst(forms.G.values - scale**2))
    dual_first = max(worst(dual.E.values - scale**-2), worst(dual.G.values - scale**-2))
    conformality = max(
        worst(forms.F.values),
        worst(dual.F.values),
        worst(forms.E.values - forms.G.values),
        worst(dual.E.values - dual.G.values),
    )
    second = max(
        worst(forms.L.values - orientation * scale * r1),
        worst(forms.N.values - orientation * scale * r2),
        worst(forms.M.values),
    )
    dual_second = max(
        worst(dual.L.values - orientation * r1 / scale),
        worst(dual.N.values + orientation * r2 / scale),
        worst(dual.M.values),
    )
    normal_defect = worst(np.linalg.norm(np.cross(normal.values, dual_own.normal.values), axis=-1))
    return PairReport(
        first_form=first,
        dual_first_form=dual_first,
        conformality=conformality,
        second_form=second,
        dual_second_form=dual_second,
        normal_defect=normal_defect,
        orientation=orientation,
        tolerance=tolerance,
    )
