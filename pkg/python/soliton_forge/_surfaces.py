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
    "ImmersionField",
    "Provenance",
    "SurfaceReport",
    "dressing_bt_surface",
    "export_obj",
    "fundamental_forms",
    "r3_to_su2",
    "read_obj",
    "su2_to_r3",
    "sym_immersion",
)

import dataclasses
import enum
import logging
import math
import os
from typing import Any

import numpy as np
import trimesh
from numpy.typing import ArrayLike

from ._connection import LaxFrameFamily, _derivative_and_frame
from ._dressing import transported_projection
from ._grid import Field, GridError, _highest_accuracy, partial_derivative
from ._lines import Midpoint
from ._sge import SgeSolution, _unwrap_from, sge_lax

_LOG = logging.getLogger(__name__)

# Relative singular value of df below which a tangent direction does not
# count toward the rank.
_RANK_THRESHOLD = 1e-6

_SU2_BASIS = np.array(
    [
        [[1j, 0.0], [0.0, -1j]],
        [[0.0, 1.0], [-1.0, 0.0]],
        [[0.0, 1j], [1j, 0.0]],
    ]
)


def su2_to_r3(x: ArrayLike) -> np.ndarray:
    """Map ``su(2)`` matrices to ℝ³.

    Parameters
    ----------
    x : `numpy.typing.ArrayLike`
        Array of ``2 × 2`` matrices, shape ``(..., 2, 2)``.

    Returns
    -------
    vectors : `numpy.ndarray`
        Coordinates ``⟨X, uₖ⟩ = -tr(X uₖ)/2`` in the orthonormal basis
        ``u₁ = diag(i, -i)``, ``u₂ = [[0, 1], [-1, 0]]``,
        ``u₃ = [[0, i], [i, 0]]``; shape ``(..., 3)``.
    """
    x = np.asarray(x)
    return -0.5 * np.real(np.einsum("...ij,kji->...k", x, _SU2_BASIS))


def r3_to_su2(v: ArrayLike) -> np.ndarray:
    """Inverse of `su2_to_r3`."""
    return np.einsum("...k,kij->...ij", np.asarray(v), _SU2_BASIS)


class Provenance(enum.Enum):
    """How an immersion was constructed."""

    SYM = "sym"
    CHRISTOFFEL = "christoffel"
    GSGE = "gsge"


class ImmersionField:
    """Points of an immersed submanifold sampled on a parameter grid.

    Parameters
    ----------
    points : `Field`
        Vector field of positions.
    provenance : `Provenance`
        Construction that produced the points.
    diagnostic : `float`, optional
        Construction-specific accuracy estimate (the Richardson difference
        for Sym immersions, the path defect for integrated ones).
    """

    def __init__(self, points: Field, provenance: Provenance, diagnostic: float | None = None):
        if len(points.value_shape) != 1:
            raise GridError(f"Immersion points must be vectors, not shape {points.value_shape}.")
        if points.is_complex:
            raise GridError("Immersion points must be real.")
        self._points = points
        self._provenance = provenance
        self._diagnostic = diagnostic
        self._rank: np.ndarray | None = None

    @property
    def points(self) -> Field:
        """Positions (`Field`)."""
        return self._points

    @property
    def provenance(self) -> Provenance:
        """Construction that produced the points (`Provenance`)."""
        return self._provenance

    @property
    def diagnostic(self) -> float | None:
        """Accuracy estimate, if any."""
        return self._diagnostic

    @property
    def ambient_dimension(self) -> int:
        """Dimension of the ambient Euclidean space (`int`)."""
        return self._points.value_shape[0]

    @property
    def rank(self) -> np.ndarray:
        """Numerical rank of ``df`` at every node (`numpy.ndarray` of `int`)."""
        if self._rank is None:
            grid = self._points.grid
            jacobian = np.stack(
                [partial_derivative(self._points, k).values for k in range(grid.ndim)], axis=-1
            )
            singular_values = np.linalg.svd(jacobian, compute_uv=False)
            scale = np.maximum(singular_values[..., :1], 1.0)
            self._rank = np.sum(singular_values > _RANK_THRESHOLD * scale, axis=-1)
        return self._rank


@dataclasses.dataclass(frozen=True)
class SurfaceReport:
    """Fundamental forms and Gaussian curvature of a surface in ℝ³."""

    E: Field
    """First fundamental form coefficient ``f_u · f_u``."""

    F: Field
    """First fundamental form coefficient ``f_u · f_v``."""

    G: Field
    """First fundamental form coefficient ``f_v · f_v``."""

    L: Field
    """Second fundamental form coefficient ``f_uu · ν``."""

    M: Field
    """Second fundamental form coefficient ``f_uv · ν``."""

    N: Field
    """Second fundamental form coefficient ``f_vv · ν``."""

    K: Field
    """Gaussian curvature ``(LN - M²)/(EG - F²)``; NaN at degenerate
    nodes.
    """

    normal: Field
    """Unit normal used for the second fundamental form."""

    degenerate: np.ndarray
    """Boolean mask of nodes where the first fundamental form or the normal
    is degenerate.
    """

    def curvature_error(self, expected: float, mask: np.ndarray | None = None) -> float:
        """Return ``max |K - expected|`` over non-degenerate nodes (and
        ``mask`` if given).
        """
        selection = ~self.degenerate
        if mask is not None:
            selection &= mask
        if not np.any(selection):
            return 0.0
        return float(np.max(np.abs(self.K.values[selection] - expected)))

    def to_csv(self, path: str | os.PathLike) -> None:
        """Write one row per node: the node index followed by E, F, G, L, M,
        N and K.
        """
        grid = self.E.grid
        index = np.indices(grid.dims).reshape(grid.ndim, -1).T
        columns = [getattr(self, name).values.reshape(-1) for name in "EFGLMNK"]
        table = np.column_stack([index] + columns)
        header = ",".join([f"i{k}" for k in range(grid.ndim)] + list("EFGLMNK"))
        fmt = ["%d"] * grid.ndim + ["%.17g"] * 7
        np.savetxt(path, table, fmt=fmt, delimiter=",", header=header, comments="")


def fundamental_forms(f: ImmersionField | Field, normal: Field | None = None) -> SurfaceReport:
    """Compute the first and second fundamental forms of a surface in ℝ³
    by finite differences.

    Parameters
    ----------
    f : `ImmersionField` or `Field`
        Points on a 2-d grid with values in ℝ³.
    normal : `Field`, optional
        External normal field (normalized internally); the normalized cross
        product ``f_u × f_v`` if not given.

    Returns
    -------
    report : `SurfaceReport`
        Fundamental forms, curvature and degenerate-node mask.

    Raises
    ------
    GridError
        Raised if the points are not a surface in ℝ³.
    """
    points = f.points if isinstance(f, ImmersionField) else f
    if points.grid.ndim != 2 or points.value_shape != (3,):
        raise GridError("Fundamental forms need a 2-d grid of points in R^3.")
    accuracy = _highest_accuracy(points.grid)
    f_u = partial_derivative(points, 0, accuracy)
    f_v = partial_derivative(points, 1, accuracy)
    f_uu = partial_derivative(f_u, 0, accuracy).values
    f_uv = partial_derivative(f_u, 1, accuracy).values
    f_vv = partial_derivative(f_v, 1, accuracy).values
    u = f_u.values
    v = f_v.values
    E = np.sum(u * u, axis=-1)
    F = np.sum(u * v, axis=-1)
    G = np.sum(v * v, axis=-1)
    det_first = E * G - F * F
    scale = np.maximum(E * G, np.finfo(float).tiny)
    if normal is None:
        n = np.cross(u, v)
    else:
        if normal.grid != points.grid or normal.value_shape != (3,):
            raise GridError("External normal must be a field of R^3 vectors on the surface grid.")
        n = np.array(normal.values)
    length = np.linalg.norm(n, axis=-1)
    degenerate = (det_first <= 1e-12 * scale) | (length <= 1e-12) | (E <= 0.0) | (G <= 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        n = n / np.where(length > 0.0, length, 1.0)[..., np.newaxis]
        L = np.sum(f_uu * n, axis=-1)
        M = np.sum(f_uv * n, axis=-1)
        N = np.sum(f_vv * n, axis=-1)
        K = np.where(degenerate, np.nan, (L * N - M * M) / np.where(degenerate, 1.0, det_first))
    if np.any(degenerate):
        _LOG.debug("%d degenerate surface nodes.", int(np.sum(degenerate)))
    grid = points.grid
    return SurfaceReport(
        E=Field(grid, E, copy=False),
        F=Field(grid, F, copy=False),
        G=Field(grid, G, copy=False),
        L=Field(grid, L, copy=False),
        M=Field(grid, M, copy=False),
        N=Field(grid, N, copy=False),
        K=Field(grid, K, copy=False),
        normal=Field(grid, n, copy=False),
        degenerate=degenerate,
    )


def _sym_family(q: SgeSolution, **kwargs: Any) -> LaxFrameFamily:
    return LaxFrameFamily(lambda lam: sge_lax(q, lam), q.grid, **kwargs)


def sym_immersion(
    q: SgeSolution,
    r: float = 0.5,
    dlambda: float = 1e-4,
    *,
    richardson: bool = True,
    midpoint: Midpoint = Midpoint.LINEAR,
    substeps: int = 1,
) -> ImmersionField:
    """Build the pseudospherical surface of a sine-Gordon solution with the
    Sym formula ``f = ∂E/∂λ · E⁻¹`` at ``λ = r``.

    Parameters
    ----------
    q : `SgeSolution`
        Verified solution.
    r : `float`, optional
        Real, nonzero spectral parameter.  The surface has ``K = -4r²``; the
        default gives ``K = -1``.
    dlambda : `float`, optional
        Central-difference step in λ.
    richardson : `bool`, optional
        If `True` (default), repeat with ``dlambda/2`` and record the
        largest difference as the diagnostic.
    midpoint : `Midpoint`, optional
        Coefficient interpolation for the frame integration.
    substeps : `int`, optional
        RK4 steps per grid cell.

    Returns
    -------
    surface : `ImmersionField`
        Points in ℝ³, zero at the basepoint.

    Raises
    ------
    UnverifiedSolutionError
        Raised if ``q`` is not verified.
    ValueError
        Raised if ``r`` is zero.
    FrameIntegrationError
        Raised if a frame becomes singular.
    """
    if r == 0:
        raise ValueError("The Sym formula needs a nonzero spectral parameter.")
    q.require_verified()
    family = _sym_family(q, midpoint=midpoint, substeps=substeps, tolerances=q.tolerances)
    derivative, _ = _derivative_and_frame(family, r, dlambda)
    points = su2_to_r3(derivative.values)
    diagnostic = None
    if richardson:
        refined, _ = _derivative_and_frame(family, r, dlambda / 2.0)
        diagnostic = float(np.max(np.abs(su2_to_r3(refined.values) - points)))
        _LOG.debug("Sym immersion Richardson difference %.3g.", diagnostic)
    return ImmersionField(Field(q.grid, points, copy=False), Provenance.SYM, diagnostic)


def dressing_bt_surface(
    q: SgeSolution,
    s: float,
    pi: ArrayLike,
    *,
    dlambda: float = 1e-4,
    midpoint: Midpoint = Midpoint.LINEAR,
    substeps: int = 1,
) -> tuple[SgeSolution, ImmersionField]:
    """Apply the Bäcklund transformation induced by dressing with
    ``g_{is,π}`` to a sine-Gordon solution and its ``K = -1`` surface.

    Parameters
    ----------
    q : `SgeSolution`
        Verified solution.
    s : `float`
        Nonzero real number; the pole is ``is``.
    pi : `numpy.typing.ArrayLike`
        Rank-one ``2 × 2`` projection with a real image.
    dlambda : `float`, optional
        Step for the Sym derivative of the seed surface.
    midpoint : `Midpoint`, optional
        Coefficient interpolation for the frame integrations.
    substeps : `int`, optional
        RK4 steps per grid cell.

    Returns
    -------
    solution : `SgeSolution`
        ``q̂ = -q - 2y``, where ``y`` is the continuous angle of the
        transported image.
    surface : `ImmersionField`
        ``f̂ = f + (2is/(1/4 + s²)) E(x, 1/2)(π̃^⊥ - I/2)E(x, 1/2)⁻¹``,
        mapped to ℝ³.  Its distance to ``f`` is ``|s|/(1/4 + s²)``
        and ``f̂ - f`` is tangent to ``f``.

    Raises
    ------
    ValueError
        Raised if ``s`` is zero or ``pi`` is not a rank-one
        projection with a real image.
    BigCellError
        Raised if the transported image degenerates.

    Notes
    -----
    Dressing acts on the frame as
    ``Ê(x, λ) = g_{is,π}(λ) E(x, λ) g_{is,π̃(x)}(λ)⁻¹``.  Differentiating
    ``Ê`` in λ at ``1/2`` and dropping the rigid motion contributed by the
    constant left factor leaves ``f`` plus the conjugated shift above, so
    the dressed surface is evaluated in closed form from ``E(x, 1/2)`` and
    ``π̃`` rather than from a second λ-derivative.
    """
    if s == 0 or not math.isfinite(s):
        raise ValueError(f"Dressing parameter s must be nonzero and finite, not {s}.")
    q.require_verified()
    pi = np.asarray(pi, dtype=complex)
    if pi.shape != (2, 2) or abs(np.trace(pi).real - 1.0) > q.tolerances.projection:
        raise ValueError("Dressing projection must be a rank-one 2×2 projection.")
    eigenvalues, eigenvectors = np.linalg.eigh(pi)
    image = eigenvectors[:, np.argmax(eigenvalues)]
    image = image * np.exp(-1j * np.angle(image[np.argmax(np.abs(image))]))
    if float(np.max(np.abs(image.imag))) > q.tolerances.algebraic:
        raise ValueError("Dressing projection must have a real image.")
    image = image.real
    tolerances = q.tolerances
    family = _sym_family(q, midpoint=midpoint, substeps=substeps, tolerances=tolerances)
    frame = family(1j * s)
    transported = np.linalg.solve(frame.values.values, image[:, np.newaxis])[..., 0]
    angle = _unwrap_from(
        np.arctan2(transported[..., 1].real, transported[..., 0].real),
        frame.basepoint,
    )
    q_hat = SgeSolution(q.q.with_new_values(-q.q.values - 2.0 * angle), q.history + (2.0 * s,), tolerances)
    projections = transported_projection(frame, image, tolerances)
    derivative, half_frame = _derivative_and_frame(family, 0.5, dlambda)
    complement = np.eye(2) - projections - 0.5 * np.eye(2)
    shift = (2j * s / (0.25 + s * s)) * (half_frame.values.values @ complement @ half_frame.inverse.values)
    points = su2_to_r3(derivative.values + shift)
    return q_hat, ImmersionField(Field(q.grid, points, copy=False), Provenance.SYM)


def _grid_faces(n0: int, n1: int) -> np.ndarray:
    """Return the zero-based triangles ``(v₀₀, v₁₀, v₁₁)`` and
    ``(v₀₀, v₁₁, v₀₁)`` of every cell of a row-major ``n0 × n1`` grid.
    """
    v00 = (np.arange(n0 - 1)[:, np.newaxis] * n1 + np.arange(n1 - 1)).ravel()
    v10 = v00 + n1
    lower = np.stack([v00, v10, v10 + 1], axis=-1)
    upper = np.stack([v00, v10 + 1, v00 + 1], axis=-1)
    return np.stack([lower, upper], axis=1).reshape(-1, 3)


def export_obj(f: ImmersionField | Field, path: str | os.PathLike) -> None:
    """Write a surface as a Wavefront OBJ triangle mesh.

    Parameters
    ----------
    f : `ImmersionField` or `Field`
        Points on a 2-d grid with values in ℝ³.
    path : `str` or `os.PathLike`
        Output file.

    Notes
    -----
    Vertices are written in row-major node order with six decimals; each
    grid cell ``(i, j)`` contributes the triangles ``(v₀₀, v₁₀, v₁₁)`` and
    ``(v₀₀, v₁₁, v₀₁)``.  The mesh is built without processing, so
    degenerate cells of a line image are kept.
    """
    points = f.points if isinstance(f, ImmersionField) else f
    if points.grid.ndim != 2 or points.value_shape != (3,):
        raise GridError("OBJ export needs a 2-d grid of points in R^3.")
    mesh = trimesh.Trimesh(
        vertices=points.values.reshape(-1, 3),
        faces=_grid_faces(*points.grid.dims),
        process=False,
        validate=False,
    )
    mesh.export(
        os.fspath(path),
        file_type="obj",
        digits=6,
        include_normals=False,
        include_color=False,
        include_texture=False,
    )
    _LOG.debug("Wrote %d vertices and %d faces to %s.", len(mesh.vertices), len(mesh.faces), path)


def read_obj(path: str | os.PathLike) -> trimesh.Trimesh:
    """Read an OBJ file written by `export_obj` with its vertex and face
    order unchanged.
    """
    return trimesh.load_mesh(os.fspath(path), file_type="obj", process=False, validate=False)
