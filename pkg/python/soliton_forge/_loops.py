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
    "RationalLoop",
    "SimpleElement",
    "compose_f_element",
    "eval_simple",
    "loop_permutability",
)

import dataclasses
import math
from typing import Any, Iterator, Sequence

import numpy as np
from numpy.typing import ArrayLike

# Entry-wise tolerance for π² = π and π* = π on construction.
_PROJECTION_TOLERANCE = 1e-12


def _evaluate(alpha: complex, pi: np.ndarray, lam: complex) -> np.ndarray:
    """Evaluate ``π + ((λ - ᾱ)/(λ - α)) π^⊥``, vectorized over leading
    dimensions of ``pi``.
    """
    identity = np.eye(pi.shape[-1])
    if lam is None or (isinstance(lam, float) and math.isinf(lam)):
        return np.broadcast_to(identity, pi.shape).astype(complex)
    if lam == alpha:
        raise ValueError(f"Cannot evaluate a simple element at its pole {alpha}.")
    factor = (lam - np.conj(alpha)) / (lam - alpha)
    return pi + factor * (identity - pi)


@dataclasses.dataclass(frozen=True)
class SimpleElement:
    """The simple rational loop ``g_{α,π}(λ) = π + ((λ - ᾱ)/(λ - α)) π^⊥``.

    Notes
    -----
    ``g_{α,π}`` satisfies the U(n) reality condition
    ``g(λ̄)* g(λ) = I``, equals the identity at ``λ = ∞``, has a simple pole
    at ``α`` and is singular (equal to ``π``) at ``ᾱ``.  With ``α = is``
    and a real ``π`` it also satisfies the U(n)/O(n) reality condition.
    """

    def __post_init__(self) -> None:
        alpha = complex(self.alpha)
        if alpha.imag == 0.0 or not (math.isfinite(alpha.real) and math.isfinite(alpha.imag)):
            raise ValueError(f"Pole of a simple element must be finite and off the real axis, not {alpha}.")
        pi = np.array(self.pi, dtype=complex)
        if pi.ndim != 2 or pi.shape[0] != pi.shape[1]:
            raise ValueError(f"Projection must be a square matrix, not shape {pi.shape}.")
        if np.max(np.abs(pi @ pi - pi)) > _PROJECTION_TOLERANCE:
            raise ValueError("Matrix is not a projection (π² ≠ π).")
        if np.max(np.abs(pi.conj().T - pi)) > _PROJECTION_TOLERANCE:
            raise ValueError("Projection is not Hermitian (π* ≠ π).")
        rank = int(round(np.trace(pi).real))
        if not 0 < rank < pi.shape[0]:
            raise ValueError(f"Projection must have rank between 1 and {pi.shape[0] - 1}, not {rank}.")
        pi.flags.writeable = False
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "pi", pi)

    alpha: complex
    """Pole of the loop (`complex`, off the real axis)."""

    pi: np.ndarray
    """Hermitian projection (`numpy.ndarray`, read-only)."""

    @classmethod
    def from_vectors(cls, alpha: complex, vectors: ArrayLike) -> SimpleElement:
        """Construct from a pole and a spanning set of the projection image.

        Parameters
        ----------
        alpha : `complex`
            Pole.
        vectors : `numpy.typing.ArrayLike`
            Vector (shape ``(n,)``) or matrix whose columns span
            ``Im π`` (shape ``(n, k)``).

        Returns
        -------
        element : `SimpleElement`
            The simple element.
        """
        vectors = np.asarray(vectors, dtype=complex)
        if vectors.ndim == 1:
            vectors = vectors[:, np.newaxis]
        q, r = np.linalg.qr(vectors)
        if np.min(np.abs(np.diag(r))) <= 1e-12 * max(np.max(np.abs(r)), 1.0):
            raise ValueError("Vectors spanning a projection image are linearly dependent.")
        return cls(alpha, q @ q.conj().T)

    @property
    def size(self) -> int:
        """Matrix size ``n`` (`int`)."""
        return self.pi.shape[0]

    @property
    def rank(self) -> int:
        """Rank of the projection (`int`)."""
        return int(round(np.trace(self.pi).real))

    def image_basis(self) -> np.ndarray:
        """Return an orthonormal basis of ``Im π`` as the columns of an
        ``(n, k)`` array.
        """
        eigenvalues, eigenvectors = np.linalg.eigh(self.pi)
        return eigenvectors[:, eigenvalues > 0.5]

    def inverse(self) -> SimpleElement:
        """Return ``g_{ᾱ,π}``, the inverse loop."""
        return SimpleElement(np.conj(self.alpha), self.pi)

    def __call__(self, lam: complex | None) -> np.ndarray:
        return eval_simple(self, lam)

    def is_real_form(self, tolerance: float = _PROJECTION_TOLERANCE) -> bool:
        """Return `True` if this element satisfies the U(n)/O(n) reality
        condition: ``α`` is imaginary and ``π`` is real.
        """
        return abs(self.alpha.real) <= tolerance and float(np.max(np.abs(self.pi.imag))) <= tolerance

    def to_json(self) -> dict[str, Any]:
        """Return a JSON-compatible representation.

        Returns
        -------
        data : `dict`
            ``{"alpha": [re, im], "pi": [[[re, im], ...], ...]}`` with the
            projection in row-major order.
        """
        return {
            "alpha": [self.alpha.real, self.alpha.imag],
            "pi": [[[z.real, z.imag] for z in row] for row in self.pi.tolist()],
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> SimpleElement:
        """Reconstruct from the output of `to_json`."""
        try:
            alpha = complex(*data["alpha"])
            pi = np.array([[complex(re, im) for re, im in row] for row in data["pi"]])
        except (KeyError, TypeError, ValueError) as err:
            raise ValueError(f"Malformed simple element description {data!r}.") from err
        return cls(alpha, pi)


def eval_simple(g: SimpleElement, lam: complex | None) -> np.ndarray:
    """Evaluate a simple element exactly.

    Parameters
    ----------
    g : `SimpleElement`
        Element to evaluate.
    lam : `complex` or `None`
        Spectral parameter; `None` or ``inf`` means ``λ = ∞``.

    Returns
    -------
    value : `numpy.ndarray`
        ``π + ((λ - ᾱ)/(λ - α)) π^⊥`` (the identity at ``∞``).

    Raises
    ------
    ValueError
        Raised if ``lam`` is the pole ``α``.
    """
    return _evaluate(g.alpha, g.pi, lam)


class RationalLoop:
    """An ordered product ``g₁ g₂ ⋯ g_k`` of simple elements.

    Parameters
    ----------
    factors : `~collections.abc.Sequence` [`SimpleElement`]
        Factors, leftmost first.  An empty sequence is the identity loop.
    """

    def __init__(self, factors: Sequence[SimpleElement]):
        self._factors = tuple(factors)
        sizes = {g.size for g in self._factors}
        if len(sizes) > 1:
            raise ValueError(f"Loop factors have inconsistent matrix sizes {sorted(sizes)}.")

    @property
    def factors(self) -> tuple[SimpleElement, ...]:
        """Factors, leftmost first."""
        return self._factors

    @property
    def poles(self) -> tuple[complex, ...]:
        """Poles of the factors."""
        return tuple(g.alpha for g in self._factors)

    def __iter__(self) -> Iterator[SimpleElement]:
        return iter(self._factors)

    def __len__(self) -> int:
        return len(self._factors)

    def __call__(self, lam: complex | None) -> np.ndarray:
        if not self._factors:
            raise ValueError("The identity loop has no matrix size.")
        result = np.eye(self._factors[0].size, dtype=complex)
        for g in self._factors:
            result = result @ eval_simple(g, lam)
        return result

    def inverse(self) -> RationalLoop:
        """Return the inverse loop."""
        return RationalLoop([g.inverse() for g in reversed(self._factors)])

    def to_json(self) -> list[dict[str, Any]]:
        """Return the factors as a JSON-compatible list."""
        return [g.to_json() for g in self._factors]


def loop_permutability(g1: SimpleElement, g2: SimpleElement) -> tuple[SimpleElement, SimpleElement]:
    """Refactor a product of two simple elements in the opposite order.

    Parameters
    ----------
    g1, g2 : `SimpleElement`
        ``g_{α₁,π₁}`` and ``g_{α₂,π₂}``.

    Returns
    -------
    tau1 : `SimpleElement`
        ``g_{α₁,τ₁}`` with ``Im τ₁ = g₂(α₁)(Im π₁)``.
    tau2 : `SimpleElement`
        ``g_{α₂,τ₂}`` with ``Im τ₂ = g₁(α₂)(Im π₂)``.  Together
        ``g_{α₂,τ₂} g_{α₁,π₁} = g_{α₁,τ₁} g_{α₂,π₂}``.

    Raises
    ------
    ValueError
        Raised if ``α₁`` is ``α₂`` or ``±ᾱ₂``.
    """
    if g1.size != g2.size:
        raise ValueError(f"Cannot permute simple elements of sizes {g1.size} and {g2.size}.")
    if g1.alpha in (g2.alpha, np.conj(g2.alpha), -np.conj(g2.alpha)):
        raise ValueError(
            f"Permutability needs alpha1 not in {{alpha2, ±conj(alpha2)}}; got {g1.alpha} and {g2.alpha}."
        )
    tau1 = SimpleElement.from_vectors(g1.alpha, g2(g1.alpha) @ g1.image_basis())
    tau2 = SimpleElement.from_vectors(g2.alpha, g1(g2.alpha) @ g2.image_basis())
    return tau1, tau2


def compose_f_element(alpha: complex, pi: ArrayLike) -> RationalLoop:
    """Build the two-factor loop ``f_{α,π} = g_{-ᾱ,ρ} g_{α,π}``, which
    satisfies the U(n)/O(n) reality condition for poles off the imaginary
    axis.

    Parameters
    ----------
    alpha : `complex`
        Pole with nonzero real and imaginary parts.
    pi : `numpy.typing.ArrayLike`
        Hermitian projection.

    Returns
    -------
    loop : `RationalLoop`
        ``[g_{-ᾱ,ρ}, g_{α,π}]`` with ``Im ρ = g_{α,π}(-ᾱ)(Im π̄)``.

    Raises
    ------
    ValueError
        Raised if ``alpha`` is imaginary (use ``g_{is,π}`` directly).
    """
    alpha = complex(alpha)
    if alpha.real == 0.0:
        raise ValueError(f"Pole {alpha} is imaginary; a single simple element already has the reality.")
    g = SimpleElement(alpha, pi)
    conjugate = SimpleElement(alpha, np.conj(g.pi))
    rho = SimpleElement.from_vectors(-np.conj(alpha), g(-np.conj(alpha)) @ conjugate.image_basis())
    return RationalLoop([rho, g])
