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
    "BigCellError",
    "DressedFrameFamily",
    "UnSolution",
    "curved_flat",
    "dress",
    "dress_algebraic",
    "dress_linear",
    "dress_ode",
    "transported_projection",
    "un_lax",
    "un_residual",
    "vacuum_frame",
)

import logging
from typing import Any, Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike

from ._connection import Connection, Frame, FrameFamily, LaxFrameFamily
from ._grid import Field, GridError, GridSpec, partial_derivative
from ._lines import CompatibilityError, Midpoint, integrate_both_policies
from ._loops import RationalLoop, SimpleElement, _evaluate
from ._settings import DEFAULT_TOLERANCES, Tolerances
from ._solution import Solution

_LOG = logging.getLogger(__name__)

# Smallest admissible Gram determinant of the normalized solutions of the
# linear dressing system.
_GRAM_TOLERANCE = 1e-8


class BigCellError(RuntimeError):
    """Exception raised when a transported projection image loses rank, so
    the dressing factorization fails at some node.
    """

    def __init__(self, ratio: float, tolerance: float) -> None:
        super().__init__(
            f"Transported projection image is rank deficient (relative singular value {ratio:.3g} "
            f"< {tolerance:.3g}); the factorization leaves the big cell."
        )
        self.ratio = ratio


def _ad_a(axis: int, x: np.ndarray) -> np.ndarray:
    """Return ``[aₖ, x]`` for ``aₖ = i e_kk``, vectorized over leading
    dimensions.
    """
    n = x.shape[-1]
    e = np.zeros(n)
    e[axis] = 1.0
    return 1j * (e[:, np.newaxis] - e[np.newaxis, :]) * x


def _off_diagonal(x: np.ndarray) -> np.ndarray:
    return x * (1.0 - np.eye(x.shape[-1]))


class UnSolution(Solution):
    """A solution of the U(n)-system on ℝⁿ.

    Parameters
    ----------
    v : `Field`
        Skew-Hermitian, zero-diagonal ``n × n`` matrix field on an ``n``-d
        grid.
    real : `bool`, optional
        Whether this is a U(n)/O(n) solution, i.e. ``v`` is purely
        imaginary so that every ``[aᵢ, v]`` is a real ``o(n)`` matrix and
        the frame at ``λ = is`` is real.  Detected from the data if not
        given.
    tolerances : `Tolerances`, optional
        Thresholds for `verified`.
    diagnostics : `~collections.abc.Mapping` [`str`, `float`], optional
        Defects recorded by the operation that produced the solution.

    Raises
    ------
    GridError
        Raised if the grid dimension does not match the matrix size.
    ValueError
        Raised if ``v`` is far from skew-Hermitian with zero diagonal, or
        ``real`` is set but ``v`` has a real part.
    """

    kind = "un"

    def __init__(
        self,
        v: Field,
        real: bool | None = None,
        tolerances: Tolerances = DEFAULT_TOLERANCES,
        diagnostics: Mapping[str, float] | None = None,
    ):
        super().__init__(tolerances)
        shape = v.value_shape
        if len(shape) != 2 or shape[0] != shape[1]:
            raise GridError(f"A U(n)-system field holds square matrices, not shape {shape}.")
        if v.grid.ndim != shape[0]:
            raise GridError(f"A {shape[0]}×{shape[0]} U(n)-system field needs an {shape[0]}-d grid.")
        if not v.is_complex:
            v = v.with_new_values(v.values.astype(complex))
        self._v = v
        structure = self._structure_defect()
        if structure > tolerances.residual:
            raise ValueError(f"Field is not skew-Hermitian with zero diagonal (defect {structure:.3g}).")
        real_part = float(np.max(np.abs(v.values.real)))
        if real is None:
            real = real_part <= tolerances.algebraic
        elif real and real_part > tolerances.algebraic:
            raise ValueError(f"U(n)/O(n) solutions must be purely imaginary; real part is {real_part:.3g}.")
        self._real = bool(real)
        self._diagnostics = dict(diagnostics or {})

    @property
    def grid(self) -> GridSpec:
        # Docstring inherited.
        return self._v.grid

    @property
    def v(self) -> Field:
        """The solution matrix field (`Field`)."""
        return self._v

    @property
    def n(self) -> int:
        """Matrix size and grid dimension (`int`)."""
        return self._v.value_shape[0]

    @property
    def real(self) -> bool:
        """`True` for U(n)/O(n) solutions (`bool`)."""
        return self._real

    @property
    def diagnostics(self) -> dict[str, float]:
        """Defects recorded by the producing operation."""
        return dict(self._diagnostics)

    def _structure_defect(self) -> float:
        values = self._v.values
        skew = float(np.max(np.abs(values + np.conj(np.swapaxes(values, -1, -2)))))
        diagonal = float(np.max(np.abs(np.diagonal(values, axis1=-2, axis2=-1))))
        return max(skew, diagonal)

    def fields(self) -> dict[str, Field]:
        # Docstring inherited.
        return {"v": self._v}

    def _compute_residuals(self) -> dict[str, float]:
        residuals = {f"un_{i}{j}": field.max_norm() for (i, j), field in un_residual(self._v).items()}
        residuals["structure"] = self._structure_defect()
        return residuals

    def thresholds(self) -> dict[str, float]:
        # Docstring inherited.
        thresholds = super().thresholds()
        thresholds["structure"] = self.tolerances.projection
        return thresholds

    def metadata(self) -> dict[str, Any]:
        # Docstring inherited.
        return {"real": self._real, "diagnostics": dict(self._diagnostics)}

    @classmethod
    def from_fields(
        cls, fields: Mapping[str, Field], metadata: Mapping[str, Any], tolerances: Tolerances
    ) -> UnSolution:
        # Docstring inherited.
        return cls(fields["v"], metadata.get("real"), tolerances, metadata.get("diagnostics"))

    @classmethod
    def vacuum(cls, grid: GridSpec, tolerances: Tolerances = DEFAULT_TOLERANCES) -> UnSolution:
        """Return the vacuum ``v ≡ 0`` on an ``n``-d grid (a U(n)/O(n)
        solution).
        """
        return cls(Field(grid, np.zeros(grid.dims + (grid.ndim, grid.ndim), dtype=complex)), True, tolerances)


def _v_field(v: UnSolution | Field) -> Field:
    return v.v if isinstance(v, UnSolution) else v


def un_residual(v: UnSolution | Field) -> dict[tuple[int, int], Field]:
    """Evaluate ``[aᵢ, ∂ⱼv] - [aⱼ, ∂ᵢv] - [[aᵢ, v], [aⱼ, v]]`` for every
    axis pair ``i < j``.

    Parameters
    ----------
    v : `UnSolution` or `Field`
        Candidate solution.

    Returns
    -------
    residuals : `dict` [`tuple` [`int`, `int`], `Field`]
        Matrix-valued residual for each axis pair.
    """
    field = _v_field(v)
    values = field.values
    n = field.grid.ndim
    derivatives = [partial_derivative(field, k).values for k in range(n)]
    commutators = [_ad_a(k, values) for k in range(n)]
    result = {}
    for i in range(n):
        for j in range(i + 1, n):
            ci, cj = commutators[i], commutators[j]
            residual = _ad_a(i, derivatives[j]) - _ad_a(j, derivatives[i]) - (ci @ cj - cj @ ci)
            result[i, j] = field.with_new_values(residual)
    return result


def un_lax(v: UnSolution | Field, lam: complex) -> Connection:
    """Return the Lax connection ``θ_λ = Σᵢ (aᵢλ + [aᵢ, v]) dxᵢ``."""
    field = _v_field(v)
    n = field.grid.ndim
    coefficients = []
    for k in range(n):
        b = _ad_a(k, field.values).astype(complex)
        b[..., k, k] += 1j * lam
        coefficients.append(b)
    return Connection.from_arrays(field.grid, coefficients, lam)


def vacuum_frame(
    grid: GridSpec,
    lam: complex,
    basepoint: Sequence[int] | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> Frame:
    """Return the closed-form frame ``diag(exp(iλ(xⱼ - xⱼ⁰)))`` of the vacuum
    U(n)-system.
    """
    base = grid.check_index(grid.default_basepoint() if basepoint is None else basepoint)
    coordinates = grid.coordinates()
    values = np.zeros(grid.dims + (grid.ndim, grid.ndim), dtype=complex)
    for j, x in enumerate(coordinates):
        values[..., j, j] = np.exp(1j * lam * (x - x[base]))
    return Frame(Field(grid, values, copy=False), base, np.eye(grid.ndim), lam, tolerances)


def transported_projection(
    frame: Frame | np.ndarray, basis: ArrayLike, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> np.ndarray:
    """Return the Hermitian projection onto ``E(x)⁻¹(span basis)`` at every
    node.

    Parameters
    ----------
    frame : `Frame` or `numpy.ndarray`
        Frame matrices, shape ``dims + (n, n)``.
    basis : `numpy.typing.ArrayLike`
        ``(n, k)`` matrix whose columns span the image to transport.
    tolerances : `Tolerances`, optional
        ``rank`` is the relative threshold for rank loss.

    Returns
    -------
    projections : `numpy.ndarray`
        Array of shape ``dims + (n, n)``.

    Raises
    ------
    BigCellError
        Raised if the transported basis is rank deficient at any node.
    """
    matrices = frame.values.values if isinstance(frame, Frame) else np.asarray(frame)
    basis = np.asarray(basis)
    if basis.ndim == 1:
        basis = basis[:, np.newaxis]
    transported = np.linalg.solve(matrices, np.broadcast_to(basis, matrices.shape[:-2] + basis.shape))
    return _span_projection(transported, tolerances.rank)


def _span_projection(vectors: np.ndarray, tolerance: float) -> np.ndarray:
    q, r = np.linalg.qr(vectors)
    diagonal = np.abs(np.diagonal(r, axis1=-2, axis2=-1))
    scale = np.max(np.abs(r), axis=(-2, -1))
    ratio = float(np.min(np.min(diagonal, axis=-1) / scale))
    if not ratio >= tolerance:
        raise BigCellError(ratio, tolerance)
    return q @ np.conj(np.swapaxes(q, -1, -2))


class DressedFrameFamily(FrameFamily):
    """Frames ``Ẽ(x, λ) = g(λ) E(x, λ) g_{α,π̃(x)}(λ)⁻¹`` of a dressed
    solution, evaluated algebraically from the seed's frames.

    Parameters
    ----------
    base : `FrameFamily`
        Frames of the seed solution.
    g : `SimpleElement`
        Dressing element.
    projections : `numpy.ndarray`
        Transported projections ``π̃`` at every node.
    tolerances : `Tolerances`, optional
        Thresholds for the returned frames.
    """

    def __init__(
        self,
        base: FrameFamily,
        g: SimpleElement,
        projections: np.ndarray,
        tolerances: Tolerances = DEFAULT_TOLERANCES,
    ):
        self._base = base
        self._g = g
        self._projections = projections
        self._tolerances = tolerances

    @property
    def grid(self) -> GridSpec:
        # Docstring inherited.
        return self._base.grid

    @property
    def projections(self) -> np.ndarray:
        """Transported projections ``π̃`` (`numpy.ndarray`)."""
        return self._projections

    def __call__(self, lam: complex) -> Frame:
        # Docstring inherited.
        if lam in (self._g.alpha, np.conj(self._g.alpha)):
            raise ValueError(f"Dressed frames are undefined at the pole {self._g.alpha} and its conjugate.")
        seed = self._base(lam)
        inverse_factor = _evaluate(np.conj(self._g.alpha), self._projections, lam)
        values = self._g(lam) @ seed.values.values @ inverse_factor
        return Frame(
            Field(self.grid, values, copy=False), seed.basepoint, seed.initial, lam, self._tolerances
        )


def _seed_family(v: UnSolution, frames: FrameFamily | None, **kwargs: Any) -> FrameFamily:
    if frames is not None:
        return frames
    return LaxFrameFamily(lambda lam: un_lax(v, lam), v.grid, **kwargs)


def _dressed_solution(
    v: UnSolution, g: SimpleElement, projections: np.ndarray, diagnostics: dict[str, float]
) -> UnSolution:
    values = v.v.values + (g.alpha - np.conj(g.alpha)) * _off_diagonal(projections)
    dressed = UnSolution(v.v.with_new_values(values), None, v.tolerances, diagnostics)
    if v.real and g.is_real_form() and not dressed.real:
        _LOG.warning("Dressing a U(n)/O(n) solution with a real-form element produced a complex solution.")
    return dressed


def _check_seed(v: UnSolution, g: SimpleElement, require_verified: bool) -> None:
    if g.size != v.n:
        raise ValueError(f"Cannot dress a {v.n}×{v.n} solution with a {g.size}×{g.size} element.")
    if require_verified:
        v.require_verified()


def dress_algebraic(
    v: UnSolution,
    g: SimpleElement,
    *,
    frames: FrameFamily | None = None,
    require_verified: bool = True,
    **kwargs: Any,
) -> tuple[UnSolution, DressedFrameFamily]:
    """Dress a solution with a simple element using its frame at the pole.

    Parameters
    ----------
    v : `UnSolution`
        Seed solution.
    g : `SimpleElement`
        Dressing element ``g_{α,π}``.
    frames : `FrameFamily`, optional
        Normalized frames of ``v``; integrated from `un_lax` if not given.
    require_verified : `bool`, optional
        If `True` (default), reject unverified seeds.
    **kwargs
        Forwarded to `integrate_frame` when frames are integrated.

    Returns
    -------
    dressed : `UnSolution`
        ``v + (α - ᾱ) π̃_*``, where ``π̃(x)`` projects onto
        ``E(x, α)⁻¹(Im π)`` and ``π̃_*`` is its off-diagonal part.  The
        ``residue`` diagnostic is ``max |π^⊥ E(x, α) π̃(x)|``.
    family : `DressedFrameFamily`
        Frames of the dressed solution.

    Raises
    ------
    BigCellError
        Raised if the transported image loses rank.
    """
    _check_seed(v, g, require_verified)
    family = _seed_family(v, frames, **kwargs)
    frame = family(g.alpha)
    projections = transported_projection(frame, g.image_basis(), v.tolerances)
    residue = np.eye(g.size) - g.pi
    defect = float(np.max(np.abs(residue @ frame.values.values @ projections)))
    _LOG.debug("Algebraic dressing at alpha=%s: residue defect %.3g.", g.alpha, defect)
    dressed = _dressed_solution(v, g, projections, {"residue": defect})
    return dressed, DressedFrameFamily(family, g, projections, v.tolerances)


def _projection_defect(pi: np.ndarray) -> float:
    return max(
        float(np.max(np.abs(pi @ pi - pi))),
        float(np.max(np.abs(pi - np.conj(np.swapaxes(pi, -1, -2))))),
    )


def dress_ode(
    v: UnSolution,
    g: SimpleElement,
    pi0: ArrayLike | None = None,
    *,
    midpoint: Midpoint = Midpoint.CUBIC,
    substeps: int = 1,
    require_verified: bool = True,
) -> UnSolution:
    """Dress a solution by integrating the nonlinear system for the
    transported projection.

    Parameters
    ----------
    v : `UnSolution`
        Seed solution.
    g : `SimpleElement`
        Dressing element ``g_{α,π}``.
    pi0 : `numpy.typing.ArrayLike`, optional
        Projection at the basepoint; must equal ``g.pi``, which is the
        default.
    midpoint : `Midpoint`, optional
        Interpolation of ``v`` between nodes.
    substeps : `int`, optional
        RK4 steps per grid cell.
    require_verified : `bool`, optional
        If `True` (default), reject unverified seeds.

    Returns
    -------
    dressed : `UnSolution`
        ``v + (α - ᾱ) π̃_*``, with ``projection`` (largest of
        ``|π̃² - π̃|`` and ``|π̃* - π̃|``) and ``path`` diagnostics.

    Raises
    ------
    ValueError
        Raised if ``pi0`` does not match the element's projection.
    CompatibilityError
        Raised if the two sweep orders differ by more than the residual
        tolerance.
    """
    _check_seed(v, g, require_verified)
    tolerances = v.tolerances
    initial = g.pi if pi0 is None else np.asarray(pi0, dtype=complex)
    if float(np.max(np.abs(initial - g.pi))) > tolerances.projection:
        raise ValueError("Initial projection is inconsistent with the dressing element.")
    alpha = g.alpha
    n = g.size
    identity = np.eye(n)
    connection = un_lax(v, alpha)

    def rhs(axis: int, b: np.ndarray, pi: np.ndarray) -> np.ndarray:
        a_pi = _ad_a(axis, pi)
        return -(b @ pi - pi @ b) + (alpha - np.conj(alpha)) * a_pi @ (identity - pi)

    projections, defect = integrate_both_policies(
        v.grid,
        [field.values for field in connection],
        rhs,
        initial,
        midpoint=midpoint,
        substeps=substeps,
        dtype=complex,
    )
    if defect > tolerances.residual:
        raise CompatibilityError("Projection dressing system", defect, tolerances.residual)
    projection_defect = _projection_defect(projections)
    if projection_defect > tolerances.projection:
        _LOG.warning(
            "Integrated projection drifted by %.3g (> %.3g).", projection_defect, tolerances.projection
        )
    return _dressed_solution(v, g, projections, {"projection": projection_defect, "path": defect})


def dress_linear(
    v: UnSolution,
    g: SimpleElement,
    y0: ArrayLike | None = None,
    *,
    midpoint: Midpoint = Midpoint.CUBIC,
    substeps: int = 1,
    require_verified: bool = True,
) -> UnSolution:
    """Dress a solution by integrating the linear system ``dy = -θ_α y``.

    Parameters
    ----------
    v : `UnSolution`
        Seed solution.
    g : `SimpleElement`
        Dressing element ``g_{α,π}``.
    y0 : `numpy.typing.ArrayLike`, optional
        Vector or ``(n, k)`` matrix whose columns span ``Im π``; an
        orthonormal basis of ``Im π`` by default.
    midpoint : `Midpoint`, optional
        Interpolation of ``v`` between nodes.
    substeps : `int`, optional
        RK4 steps per grid cell.
    require_verified : `bool`, optional
        If `True` (default), reject unverified seeds.

    Returns
    -------
    dressed : `UnSolution`
        ``v + (α - ᾱ) π̃_*`` with ``π̃`` the projection onto the span of the
        solutions, and ``gram`` (smallest normalized Gram determinant) and
        ``path`` diagnostics.

    Raises
    ------
    ValueError
        Raised if ``y0`` does not span ``Im π``.
    BigCellError
        Raised if the solutions become linearly dependent.
    """
    _check_seed(v, g, require_verified)
    tolerances = v.tolerances
    initial = g.image_basis() if y0 is None else np.asarray(y0, dtype=complex)
    if initial.ndim == 1:
        initial = initial[:, np.newaxis]
    outside = float(np.max(np.abs(g.pi @ initial - initial))) if initial.shape == (g.size, g.rank) else np.inf
    if outside > tolerances.projection:
        raise ValueError("Initial vectors do not form a basis of the dressing projection's image.")
    connection = un_lax(v, g.alpha)
    solutions, defect = integrate_both_policies(
        v.grid,
        [field.values for field in connection],
        lambda axis, b, y: -(b @ y),
        initial,
        midpoint=midpoint,
        substeps=substeps,
        dtype=complex,
    )
    if defect > tolerances.residual * max(1.0, float(np.max(np.abs(solutions)))):
        raise CompatibilityError("Linear dressing system", defect, tolerances.residual)
    normalized = solutions / np.linalg.norm(solutions, axis=-2, keepdims=True)
    gram = np.real(np.linalg.det(np.conj(np.swapaxes(normalized, -1, -2)) @ normalized))
    min_gram = float(np.min(gram))
    if not min_gram >= _GRAM_TOLERANCE:
        raise BigCellError(min_gram, _GRAM_TOLERANCE)
    projections = _span_projection(solutions, tolerances.rank)
    return _dressed_solution(v, g, projections, {"gram": min_gram, "path": defect})


def dress(
    v: UnSolution,
    loop: RationalLoop | SimpleElement,
    *,
    frames: FrameFamily | None = None,
    require_verified: bool = True,
    **kwargs: Any,
) -> tuple[UnSolution, FrameFamily]:
    """Apply a rational loop to a solution, factor by factor from right to
    left.

    Parameters
    ----------
    v : `UnSolution`
        Seed solution.
    loop : `RationalLoop` or `SimpleElement`
        Loop to apply.
    frames : `FrameFamily`, optional
        Normalized frames of ``v``.
    require_verified : `bool`, optional
        If `True` (default), reject an unverified seed.
    **kwargs
        Forwarded to `integrate_frame` when the seed frames are integrated.

    Returns
    -------
    dressed : `UnSolution`
        ``loop ∗ v``.
    family : `FrameFamily`
        Frames of the dressed solution.
    """
    factors = [loop] if isinstance(loop, SimpleElement) else list(loop)
    family = _seed_family(v, frames, **kwargs)
    current = v
    for g in reversed(factors):
        current, family = dress_algebraic(current, g, frames=family, require_verified=require_verified)
        require_verified = False
    return current, family


def curved_flat(frames: FrameFamily) -> Field:
    """Return the curved flat ``Y(x) = E(x, 1) E(x, -1)⁻¹``.

    Parameters
    ----------
    frames : `FrameFamily`
        Normalized frames of a solution.

    Returns
    -------
    flat : `Field`
        Unitary matrix at every node; symmetric for U(n)/O(n) solutions.
    """
    plus = frames(1.0)
    minus = frames(-1.0)
    return Field(frames.grid, plus.values.values @ minus.inverse.values, copy=False)
