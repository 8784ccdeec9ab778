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
    "BtDiag",
    "DegenerateDataError",
    "DerivationMethod",
    "FDerivation",
    "GsgeState",
    "d_lambda",
    "f_from_a",
    "gsge_backlund",
    "gsge_backlund_residual",
    "gsge_immersion",
    "gsge_lax",
    "gsge_permutability",
    "gsge_residual",
    "linear_backlund",
    "sge_to_gsge",
)

import dataclasses
import enum
import logging
import math
from typing import Any, Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike
from scipy.interpolate import RegularGridInterpolator
from scipy.ndimage import binary_dilation

from ._connection import Connection, integrate_frame
from ._grid import Field, GridError, GridSpec, _highest_accuracy, partial_derivative
from ._lines import CompatibilityError, Midpoint, integrate_both_policies
from ._settings import DEFAULT_TOLERANCES, Tolerances
from ._sge import SgeSolution
from ._solution import Solution
from ._surfaces import ImmersionField, Provenance

_LOG = logging.getLogger(__name__)


class DegenerateDataError(RuntimeError):
    """Exception raised when too many nodes of a GSGE computation are
    flagged (vanishing ``a_1j``, singular ``Q`` or a singular permutability
    denominator).
    """

    def __init__(self, what: str, fraction: float, limit: float) -> None:
        super().__init__(f"{what}: {fraction:.1%} of nodes are flagged, more than the limit {limit:.1%}.")
        self.fraction = fraction


def d_lambda(lam: float, n: int) -> np.ndarray:
    """Return ``D_λ = (λI + λ⁻¹J)/2`` with ``J = diag(1, -1, …, -1)``."""
    if lam == 0 or not math.isfinite(lam):
        raise ValueError(f"GSGE spectral parameter must be nonzero and finite, not {lam}.")
    j = -np.ones(n)
    j[0] = 1.0
    return np.diag((lam + j / lam) / 2.0)


@dataclasses.dataclass(frozen=True)
class BtDiag:
    """Parameter of a GSGE Bäcklund transformation."""

    def __post_init__(self) -> None:
        lam = float(self.lam)
        if lam == 0.0 or not math.isfinite(lam):
            raise ValueError(f"GSGE Bäcklund parameter must be nonzero and finite, not {lam}.")
        object.__setattr__(self, "lam", lam)

    lam: float
    """Spectral parameter λ (`float`)."""

    @classmethod
    def from_angle(cls, theta: float) -> BtDiag:
        """Construct from the normal angle θ, with ``λ = csc θ + cot θ`` so
        that ``D_λ = diag(csc θ, cot θ, …, cot θ)``.
        """
        sin = math.sin(theta)
        if sin == 0.0:
            raise ValueError(f"Bäcklund angle {theta} must not be a multiple of pi.")
        return cls((1.0 + math.cos(theta)) / sin)

    @property
    def angle(self) -> float:
        """Angle θ with ``λ = csc θ + cot θ`` (`float`)."""
        return 2.0 * math.atan2(1.0, self.lam)

    def matrix(self, n: int) -> np.ndarray:
        """Return ``D_λ`` for ``n × n`` solutions."""
        return d_lambda(self.lam, n)


class DerivationMethod(enum.Enum):
    """How `f_from_a` obtains ``F`` from ``A``."""

    RATIO = "ratio"
    """``f_ij = (a_1i)_{x_j} / a_1j``; nodes with small ``a_1j`` are
    flagged.
    """

    CONNECTION = "connection"
    """``f_ij = (Aᵀ ∂ⱼA)_{ji}``, read off the structure equation
    ``A⁻¹dA = δFᵀ - Fδ``; no node is flagged.
    """


@dataclasses.dataclass(frozen=True)
class FDerivation:
    """Result of `f_from_a`."""

    F: Field
    """Derived ``F`` (zero diagonal; zero at flagged nodes)."""

    valid: np.ndarray
    """Boolean mask of nodes where ``F`` is trustworthy."""

    structure_residual: float
    """Largest norm of ``dA - A(δFᵀ - Fδ)`` over valid nodes."""


def _structure_residual(A: Field, F: np.ndarray, valid: np.ndarray) -> float:
    n = A.value_shape[0]
    result = 0.0
    for j in range(n):
        e = np.zeros((n, n))
        e[j, j] = 1.0
        generator = e @ np.swapaxes(F, -1, -2) - F @ e
        residual = A.with_new_values(partial_derivative(A, j).values - A.values @ generator)
        result = max(result, residual.max_norm(valid))
    return result


def f_from_a(
    A: Field,
    *,
    method: DerivationMethod = DerivationMethod.RATIO,
    threshold: float = 0.05,
    max_flagged: float = 0.25,
) -> FDerivation:
    """Derive the connection coefficients ``F`` of a GSGE solution.

    Parameters
    ----------
    A : `Field`
        ``O(n)``-valued field on an ``n``-d grid.
    method : `DerivationMethod`, optional
        Derivation formula.
    threshold : `float`, optional
        Nodes where some ``|a_1j|`` is below this are flagged (ratio method
        only), together with their neighbours within the stencil width.
    max_flagged : `float`, optional
        Largest admissible fraction of flagged nodes.

    Returns
    -------
    derivation : `FDerivation`
        ``F``, the valid-node mask and the structure-equation residual.

    Raises
    ------
    DegenerateDataError
        Raised if more than ``max_flagged`` of the nodes are flagged.
    """
    grid = A.grid
    n = A.value_shape[0]
    values = A.values
    F = np.zeros(values.shape)
    accuracy = _highest_accuracy(grid)
    derivatives = [partial_derivative(A, j, accuracy).values for j in range(n)]
    if method is DerivationMethod.CONNECTION:
        valid = np.ones(grid.dims, dtype=bool)
        for j in range(n):
            generator = np.swapaxes(values, -1, -2) @ derivatives[j]
            for i in range(n):
                if i != j:
                    F[..., i, j] = generator[..., j, i]
    else:
        first_row = values[..., 0, :]
        flagged = np.any(np.abs(first_row) < threshold, axis=-1)
        flagged = binary_dilation(flagged, iterations=1)
        valid = ~flagged
        safe = np.where(np.abs(first_row) < threshold, 1.0, first_row)
        for i in range(n):
            for j in range(n):
                if i != j:
                    F[..., i, j] = np.where(valid, derivatives[j][..., 0, i] / safe[..., j], 0.0)
    fraction = 1.0 - float(np.mean(valid))
    if fraction > max_flagged:
        raise DegenerateDataError("Deriving F from A", fraction, max_flagged)
    if fraction > 0.0:
        _LOG.warning("%.1f%% of nodes flagged while deriving F from A.", 100.0 * fraction)
    structure = _structure_residual(A, F, valid)
    return FDerivation(Field(grid, F, copy=False), valid, structure)


def gsge_residual(A: Field, F: Field, valid: np.ndarray | None = None) -> dict[str, float]:
    """Evaluate the three equation groups of the GSGE.

    Parameters
    ----------
    A : `Field`
        ``O(n)``-valued field.
    F : `Field`
        Connection coefficients.
    valid : `numpy.ndarray`, optional
        Mask of nodes to include.

    Returns
    -------
    residuals : `dict` [`str`, `float`]
        Max-norms of the ``curvature`` group
        ``(f_ij)_{x_j} + (f_ji)_{x_i} + Σₖ f_ik f_jk - a_1i a_1j``, the
        ``codazzi`` group ``(f_ij)_{x_k} - f_ik f_kj`` (distinct indices)
        and the ``frame`` group ``(a_ki)_{x_j} - a_kj f_ij`` and
        ``(a_ki)_{x_i} + Σⱼ a_kj f_ji``.
    """
    grid = A.grid
    n = A.value_shape[0]
    mask = np.ones(grid.dims, dtype=bool) if valid is None else valid
    a = A.values
    f = F.values
    accuracy = _highest_accuracy(grid)
    dF = [partial_derivative(F, k, accuracy).values for k in range(n)]
    dA = [partial_derivative(A, k, accuracy).values for k in range(n)]

    def worst(values: np.ndarray) -> float:
        selected = np.abs(values)[mask]
        return float(np.max(selected)) if selected.size else 0.0

    curvature = 0.0
    codazzi = 0.0
    frame = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            gauss = dF[j][..., i, j] + dF[i][..., j, i] + np.sum(f[..., i, :] * f[..., j, :], axis=-1)
            curvature = max(curvature, worst(gauss - a[..., 0, i] * a[..., 0, j]))
            for k in range(n):
                if k not in (i, j):
                    codazzi = max(codazzi, worst(dF[k][..., i, j] - f[..., i, k] * f[..., k, j]))
            frame = max(frame, worst(dA[j][..., :, i] - a[..., :, j] * f[..., i, j][..., np.newaxis]))
        diagonal = dA[i][..., :, i] + np.einsum("...kj,...j->...k", a, f[..., :, i])
        frame = max(frame, worst(diagonal))
    return {"curvature": curvature, "codazzi": codazzi, "frame": frame}


class GsgeState(Solution):
    """A solution of the generalized sine-Gordon equation in Tchebyshef
    line-of-curvature coordinates.

    Parameters
    ----------
    A : `Field`
        Real ``O(n)``-valued field on an ``n``-d grid.
    F : `Field`, optional
        Connection coefficients with zero diagonal; derived with `f_from_a`
        if not given.
    valid : `numpy.ndarray`, optional
        Mask of trustworthy nodes; all nodes (or the derivation's mask) if
        not given.
    tolerances : `Tolerances`, optional
        Thresholds for `verified`.
    diagnostics : `~collections.abc.Mapping` [`str`, `float`], optional
        Defects recorded by the producing operation.
    """

    kind = "gsge"

    def __init__(
        self,
        A: Field,
        F: Field | None = None,
        valid: np.ndarray | None = None,
        tolerances: Tolerances = DEFAULT_TOLERANCES,
        diagnostics: Mapping[str, float] | None = None,
    ):
        super().__init__(tolerances)
        shape = A.value_shape
        if len(shape) != 2 or shape[0] != shape[1] or A.grid.ndim != shape[0]:
            raise GridError(f"A GSGE field is n×n on an n-d grid; got {A!r}.")
        if A.is_complex:
            raise GridError("A GSGE field must be real.")
        derived_valid = np.ones(A.grid.dims, dtype=bool)
        if F is None:
            derivation = f_from_a(A)
            F = derivation.F
            derived_valid = derivation.valid
        elif F.grid != A.grid or F.value_shape != shape:
            raise GridError("F must be an n×n field on the same grid as A.")
        self._A = A
        self._F = F
        self._valid = derived_valid if valid is None else np.asarray(valid, dtype=bool) & derived_valid
        self._diagnostics = dict(diagnostics or {})

    @classmethod
    def identity(cls, grid: GridSpec, tolerances: Tolerances = DEFAULT_TOLERANCES) -> GsgeState:
        """Return the constant solution ``A = I``, ``F = 0``."""
        n = grid.ndim
        A = np.broadcast_to(np.eye(n), grid.dims + (n, n))
        return cls(Field(grid, A), Field(grid, np.zeros(grid.dims + (n, n))), None, tolerances)

    @classmethod
    def from_a(
        cls,
        A: Field,
        method: DerivationMethod = DerivationMethod.CONNECTION,
        tolerances: Tolerances = DEFAULT_TOLERANCES,
        diagnostics: Mapping[str, float] | None = None,
    ) -> GsgeState:
        """Construct from ``A`` alone, deriving ``F`` with the given
        method.
        """
        derivation = f_from_a(A, method=method)
        return cls(A, derivation.F, derivation.valid, tolerances, diagnostics)

    @property
    def grid(self) -> GridSpec:
        # Docstring inherited.
        return self._A.grid

    @property
    def n(self) -> int:
        """Matrix size and grid dimension (`int`)."""
        return self._A.value_shape[0]

    @property
    def A(self) -> Field:
        """The ``O(n)``-valued field (`Field`)."""
        return self._A

    @property
    def F(self) -> Field:
        """Connection coefficients (`Field`)."""
        return self._F

    @property
    def valid(self) -> np.ndarray:
        """Mask of trustworthy nodes (`numpy.ndarray`)."""
        return self._valid

    @property
    def diagnostics(self) -> dict[str, float]:
        """Defects recorded by the producing operation."""
        return dict(self._diagnostics)

    def orthogonality_defect(self) -> float:
        """Return ``max |AᵀA - I|`` over valid nodes."""
        a = self._A.values
        gram = np.swapaxes(a, -1, -2) @ a - np.eye(self.n)
        return Field(self.grid, gram, copy=False).max_norm(self._valid)

    def fields(self) -> dict[str, Field]:
        # Docstring inherited.
        return {"A": self._A, "F": self._F, "valid": Field(self.grid, self._valid.astype(float), copy=False)}

    def _compute_residuals(self) -> dict[str, float]:
        residuals = gsge_residual(self._A, self._F, self._valid)
        residuals["orthogonality"] = self.orthogonality_defect()
        return residuals

    def thresholds(self) -> dict[str, float]:
        # Docstring inherited.
        thresholds = super().thresholds()
        thresholds["orthogonality"] = self.tolerances.orthogonality
        return thresholds

    def metadata(self) -> dict[str, Any]:
        # Docstring inherited.
        return {"convention": "J=I_{1,n-1}", "diagnostics": dict(self._diagnostics)}

    @classmethod
    def from_fields(
        cls, fields: Mapping[str, Field], metadata: Mapping[str, Any], tolerances: Tolerances
    ) -> GsgeState:
        # Docstring inherited.
        valid = fields["valid"].values > 0.5 if "valid" in fields else None
        return cls(fields["A"], fields.get("F"), valid, tolerances, metadata.get("diagnostics"))


def _unit(n: int, i: int) -> np.ndarray:
    e = np.zeros((n, n))
    e[i, i] = 1.0
    return e


def gsge_lax(A: GsgeState, lam: complex) -> Connection:
    """Return the GSGE Lax connection at a spectral parameter.

    Parameters
    ----------
    A : `GsgeState`
        Solution (or candidate).
    lam : `complex`
        Nonzero spectral parameter.

    Returns
    -------
    theta : `Connection`
        ``Bᵢ = [[eᵢᵢF - Fᵀeᵢᵢ, eᵢᵢAᵀD_λ], [D_λAeᵢᵢ, 0]]``, which lies in
        ``o(n, n)``.

    Raises
    ------
    ValueError
        Raised if ``lam`` is zero.
    """
    if lam == 0:
        raise ValueError("The GSGE Lax pair is singular at lambda = 0.")
    n = A.n
    j = -np.ones(n)
    j[0] = 1.0
    d = np.diag((lam + j / lam) / 2.0)
    a = A.A.values
    f = A.F.values
    ft = np.swapaxes(f, -1, -2)
    at = np.swapaxes(a, -1, -2)
    dtype = np.result_type(a, d)
    coefficients = []
    for i in range(n):
        e = _unit(n, i)
        b = np.zeros(A.grid.dims + (2 * n, 2 * n), dtype=dtype)
        b[..., :n, :n] = e @ f - ft @ e
        b[..., :n, n:] = e @ at @ d
        b[..., n:, :n] = d @ a @ e
        coefficients.append(b)
    return Connection.from_arrays(A.grid, coefficients, lam)


def _riccati_coefficients(A: GsgeState, d: np.ndarray) -> list[np.ndarray]:
    n = A.n
    a = A.A.values
    f = A.F.values
    at = np.swapaxes(a, -1, -2)
    ft = np.swapaxes(f, -1, -2)
    result = []
    for j in range(n):
        e = _unit(n, j)
        result.append(np.stack([e @ at @ d, e @ f - ft @ e, d @ a @ e], axis=-3))
    return result


def _riccati_rhs(axis: int, c: np.ndarray, X: np.ndarray) -> np.ndarray:
    u, w, v = c[..., 0, :, :], c[..., 1, :, :], c[..., 2, :, :]
    return X @ u @ X + X @ w - v


def _polar(X: np.ndarray) -> np.ndarray:
    u, _, vt = np.linalg.svd(X)
    return u @ vt


def _check_orthogonal(X0: np.ndarray, n: int, tolerance: float) -> np.ndarray:
    X0 = np.asarray(X0, dtype=float)
    if X0.shape != (n, n):
        raise ValueError(f"Initial value has shape {X0.shape}; expected {(n, n)}.")
    if float(np.max(np.abs(X0.T @ X0 - np.eye(n)))) > tolerance:
        raise ValueError("Initial value of a GSGE Bäcklund transform must be orthogonal.")
    return X0


def gsge_backlund(
    A: GsgeState,
    lam: float,
    X0: ArrayLike,
    *,
    reproject: bool = False,
    basepoint: Sequence[int] | None = None,
    midpoint: Midpoint = Midpoint.CUBIC,
    substeps: int = 1,
    require_verified: bool = True,
) -> GsgeState:
    """Apply a GSGE Bäcklund transformation by integrating its matrix
    Riccati system ``dX = XδAᵀD_λX + Xω - D_λAδ``, ``ω = δF - Fᵀδ``.

    Parameters
    ----------
    A : `GsgeState`
        Seed solution.
    lam : `float`
        Nonzero real spectral parameter.
    X0 : `numpy.typing.ArrayLike`
        Orthogonal value at the basepoint.
    reproject : `bool`, optional
        If `True`, replace the result by its orthogonal polar factor.
    basepoint : `~collections.abc.Sequence` [`int`], optional
        Starting node.
    midpoint : `Midpoint`, optional
        Interpolation of the seed between nodes.
    substeps : `int`, optional
        RK4 steps per grid cell.
    require_verified : `bool`, optional
        If `True` (default), reject unverified seeds.

    Returns
    -------
    transformed : `GsgeState`
        New solution; ``F`` is read off the structure equation.  Its
        diagnostics hold the ``path`` defect and the ``orthogonality_drift``
        before any reprojection.

    Raises
    ------
    ValueError
        Raised if ``X0`` is not orthogonal or ``lam`` is zero.
    CompatibilityError
        Raised if the two sweep orders differ by more than the residual
        tolerance.
    """
    tolerances = A.tolerances
    n = A.n
    d = d_lambda(lam, n)
    X0 = _check_orthogonal(X0, n, tolerances.orthogonality)
    if require_verified:
        A.require_verified()
    X, defect = integrate_both_policies(
        A.grid,
        _riccati_coefficients(A, d),
        _riccati_rhs,
        X0,
        basepoint=basepoint,
        midpoint=midpoint,
        substeps=substeps,
        dtype=float,
    )
    if defect > tolerances.residual:
        raise CompatibilityError("GSGE Riccati system", defect, tolerances.residual)
    drift = float(np.max(np.abs(np.swapaxes(X, -1, -2) @ X - np.eye(n))))
    if reproject:
        X = _polar(X)
    _LOG.debug("GSGE Bäcklund transform with lam=%g: path defect %.3g, drift %.3g.", lam, defect, drift)
    return GsgeState.from_a(
        Field(A.grid, X, copy=False),
        tolerances=tolerances,
        diagnostics={"path": defect, "orthogonality_drift": drift},
    )


def gsge_backlund_residual(A: GsgeState, X: GsgeState | Field, lam: float) -> tuple[Field, ...]:
    """Evaluate the Riccati Bäcklund system for a candidate pair.

    Returns
    -------
    residuals : `tuple` [`Field`, ...]
        ``∂ⱼX - (X eⱼⱼAᵀD_λX + X(eⱼⱼF - Fᵀeⱼⱼ) - D_λAeⱼⱼ)`` for each axis.
    """
    field = X.A if isinstance(X, GsgeState) else X
    d = d_lambda(lam, A.n)
    result = []
    for j, c in enumerate(_riccati_coefficients(A, d)):
        expected = _riccati_rhs(j, c, field.values)
        result.append(field.with_new_values(partial_derivative(field, j).values - expected))
    return tuple(result)


def linear_backlund(
    A: GsgeState,
    s: float,
    y0: ArrayLike,
    *,
    max_flagged: float = 0.25,
    midpoint: Midpoint = Midpoint.CUBIC,
    substeps: int = 1,
    require_verified: bool = True,
) -> GsgeState:
    """Apply a GSGE Bäcklund transformation through the linear system of
    the Lax pair.

    Parameters
    ----------
    A : `GsgeState`
        Seed solution.
    s : `float`
        Nonzero real spectral parameter.
    y0 : `numpy.typing.ArrayLike`
        ``n × 2n`` initial value ``(P₀, Q₀)`` with invertible ``Q₀``.
    max_flagged : `float`, optional
        Largest admissible fraction of nodes with a singular ``Q``.
    midpoint : `Midpoint`, optional
        Interpolation of the seed between nodes.
    substeps : `int`, optional
        RK4 steps per grid cell.
    require_verified : `bool`, optional
        If `True` (default), reject unverified seeds.

    Returns
    -------
    transformed : `GsgeState`
        ``X = -Q⁻¹P`` where ``y = (P, Q)`` solves ``dy = y θ_s``; nodes with
        singular ``Q`` are invalid.

    Raises
    ------
    DegenerateDataError
        Raised if too many nodes have a singular ``Q``.
    """
    tolerances = A.tolerances
    n = A.n
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (n, 2 * n):
        raise ValueError(f"Initial value has shape {y0.shape}; expected {(n, 2 * n)}.")
    if require_verified:
        A.require_verified()
    theta = gsge_lax(A, s)
    y, defect = integrate_both_policies(
        A.grid,
        [field.values for field in theta],
        lambda axis, b, state: state @ b,
        y0,
        midpoint=midpoint,
        substeps=substeps,
        dtype=float,
    )
    scale = np.max(np.abs(y), axis=(-2, -1))
    P = y[..., :, :n] / scale[..., np.newaxis, np.newaxis]
    Q = y[..., :, n:] / scale[..., np.newaxis, np.newaxis]
    singular = np.abs(np.linalg.det(Q)) < tolerances.determinant ** 0.5
    fraction = float(np.mean(singular))
    if fraction > max_flagged:
        raise DegenerateDataError("Linear GSGE Bäcklund transform", fraction, max_flagged)
    Q = np.where(singular[..., np.newaxis, np.newaxis], np.eye(n), Q)
    X = -np.linalg.solve(Q, P)
    relative_defect = defect / max(1.0, float(np.max(np.abs(y))))
    derivation = f_from_a(Field(A.grid, X, copy=False), method=DerivationMethod.CONNECTION)
    valid = derivation.valid & ~binary_dilation(singular, iterations=1)
    return GsgeState(
        Field(A.grid, X, copy=False), derivation.F, valid, tolerances, {"path": relative_defect}
    )


def gsge_permutability(
    A0: GsgeState,
    A1: GsgeState,
    A2: GsgeState,
    theta1: float,
    theta2: float,
    *,
    max_flagged: float = 0.25,
) -> GsgeState:
    """Close a GSGE Bianchi quadrilateral algebraically.

    Parameters
    ----------
    A0 : `GsgeState`
        Common seed.
    A1, A2 : `GsgeState`
        Transforms of ``A0`` with angles ``theta1`` and ``theta2``.
    theta1, theta2 : `float`
        Bäcklund angles, with ``sin²θ₁ ≠ sin²θ₂``.
    max_flagged : `float`, optional
        Largest admissible fraction of nodes with a singular denominator.

    Returns
    -------
    A3 : `GsgeState`
        ``(-D₂ + D₁A₂A₁⁻¹)(D₁ - D₂A₂A₁⁻¹)⁻¹A₀`` with
        ``Dᵢ = diag(csc θᵢ, cot θᵢ, …)``; it solves the transform of ``A1``
        with ``θ₂`` and of ``A2`` with ``θ₁``.

    Raises
    ------
    ValueError
        Raised if ``sin²θ₁ = sin²θ₂``.
    DegenerateDataError
        Raised if too many denominators are singular.
    """
    if math.isclose(math.sin(theta1) ** 2, math.sin(theta2) ** 2, rel_tol=0.0, abs_tol=1e-12):
        raise ValueError(f"GSGE permutability needs sin²θ₁ ≠ sin²θ₂; got {theta1} and {theta2}.")
    grid = A0.grid
    if A1.grid != grid or A2.grid != grid:
        raise GridError("Permutability inputs are on different grids.")
    n = A0.n
    d1 = BtDiag.from_angle(theta1).matrix(n)
    d2 = BtDiag.from_angle(theta2).matrix(n)
    ratio = A2.A.values @ np.swapaxes(A1.A.values, -1, -2)
    numerator = -d2 + d1 @ ratio
    denominator = d1 - d2 @ ratio
    singular = np.abs(np.linalg.det(denominator)) < A0.tolerances.determinant ** 0.5
    fraction = float(np.mean(singular))
    if fraction > max_flagged:
        raise DegenerateDataError("GSGE permutability", fraction, max_flagged)
    denominator = np.where(singular[..., np.newaxis, np.newaxis], np.eye(n), denominator)
    A3 = numerator @ np.linalg.inv(denominator) @ A0.A.values
    derivation = f_from_a(Field(grid, A3, copy=False), method=DerivationMethod.CONNECTION)
    valid = derivation.valid & ~binary_dilation(singular, iterations=1)
    return GsgeState(Field(grid, A3, copy=False), derivation.F, valid, A0.tolerances)


def gsge_immersion(
    A: GsgeState,
    *,
    midpoint: Midpoint = Midpoint.CUBIC,
    substeps: int = 1,
) -> ImmersionField:
    """Reconstruct the submanifold of ℝ^{2n-1} with sectional curvature
    -1 that a GSGE solution describes.

    Parameters
    ----------
    A : `GsgeState`
        Verified solution.
    midpoint : `Midpoint`, optional
        Coefficient interpolation for the integrations.
    substeps : `int`, optional
        RK4 steps per grid cell.

    Returns
    -------
    immersion : `ImmersionField`
        Points with ``df = Σᵢ a_1i eᵢ dxᵢ``, where ``eᵢ`` are the first
        ``n`` columns of the real ``SO(2n)`` frame
        ``g = diag(I, iI) E(x, i) diag(I, -iI)`` with its trivial row
        removed.  The diagnostic is the path defect of the integration of
        ``df``.
    """
    A.require_verified()
    n = A.n
    grid = A.grid
    frame = integrate_frame(gsge_lax(A, 1j), midpoint=midpoint, substeps=substeps, tolerances=A.tolerances)
    c = np.diag(np.concatenate([np.ones(n), 1j * np.ones(n)]))
    g = c @ frame.values.values @ np.conj(c)
    imaginary = float(np.max(np.abs(g.imag)))
    if imaginary > A.tolerances.residual:
        _LOG.warning("GSGE immersion frame has imaginary part %.3g.", imaginary)
    rows = [k for k in range(2 * n) if k != n]
    g = g.real[..., rows, :]
    a = A.A.values
    coefficients = [a[..., 0, i][..., np.newaxis] * g[..., :, i] for i in range(n)]
    points, defect = integrate_both_policies(
        grid,
        coefficients,
        lambda axis, coefficient, state: coefficient,
        np.zeros(2 * n - 1),
        basepoint=frame.basepoint,
        midpoint=midpoint,
        substeps=substeps,
        dtype=float,
    )
    return ImmersionField(Field(grid, points, copy=False), Provenance.GSGE, defect)


def sge_to_gsge(q: SgeSolution, grid: GridSpec) -> GsgeState:
    """Convert a sine-Gordon solution to an ``n = 2`` GSGE solution.

    Parameters
    ----------
    q : `SgeSolution`
        Solution in asymptotic coordinates ``(s, t)``.
    grid : `GridSpec`
        Target grid in line-of-curvature coordinates ``x₁ = s + t``,
        ``x₂ = s - t``; it must map inside ``q.grid``.

    Returns
    -------
    state : `GsgeState`
        ``A = [[cos q, sin q], [-sin q, cos q]]`` resampled by cubic
        interpolation.

    Raises
    ------
    GridError
        Raised if the target grid maps outside the source domain.
    """
    if grid.ndim != 2:
        raise GridError("The sine-Gordon dictionary needs a 2-d target grid.")
    x1, x2 = grid.coordinates()
    points = np.stack([(x1 + x2) / 2.0, (x1 - x2) / 2.0], axis=-1)
    source = q.grid
    lower = np.array(source.origin)
    upper = np.array(source.upper)
    slack = 1e-9 * np.array(source.spacing)
    if np.any(points < lower - slack) or np.any(points > upper + slack):
        raise GridError("Target grid maps outside the domain of the sine-Gordon solution.")
    interpolator = RegularGridInterpolator(
        (source.axis_coordinates(0), source.axis_coordinates(1)), q.q.values, method="cubic"
    )
    angle = interpolator(np.clip(points, lower, upper))
    A = np.empty(grid.dims + (2, 2))
    A[..., 0, 0] = np.cos(angle)
    A[..., 0, 1] = np.sin(angle)
    A[..., 1, 0] = -np.sin(angle)
    A[..., 1, 1] = np.cos(angle)
    return GsgeState.from_a(Field(grid, A, copy=False), tolerances=q.tolerances)
