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
    "Solution",
    "UnverifiedSolutionError",
)

from abc import abstractmethod
from typing import Any, Mapping

from ._grid import Field, GridSpec
from ._settings import Tolerances


class UnverifiedSolutionError(ValueError):
    """Exception raised when an operation that needs a verified seed is given
    a solution whose residuals exceed tolerance.
    """

    def __init__(self, solution: Solution) -> None:
        failing = {k: v for k, v in solution.residuals.items() if not v <= solution.thresholds()[k]}
        super().__init__(f"Seed {solution.kind!r} solution is not verified; failing residuals: {failing}.")
        self.residuals = dict(solution.residuals)


class Solution:
    """A solution record: fields on a grid, plus the residuals of every
    equation they must satisfy.

    Notes
    -----
    Residuals are computed on first access and cached; solutions are
    immutable, so they never go stale.  `verified` is `True` only if every
    residual is within its threshold.
    """

    kind: str = ""
    """Short name of the kind of solution, used in file sidecars and CLI
    reports.
    """

    def __init__(self, tolerances: Tolerances):
        self._tolerances = tolerances
        self._residuals: dict[str, float] | None = None

    @property
    @abstractmethod
    def grid(self) -> GridSpec:
        """Grid the fields are sampled on (`GridSpec`)."""
        raise NotImplementedError()

    @abstractmethod
    def fields(self) -> dict[str, Field]:
        """Return the named fields that make up this solution.

        Returns
        -------
        fields : `dict` [`str`, `Field`]
            Fields, keyed by the names used for serialization.
        """
        raise NotImplementedError()

    @abstractmethod
    def _compute_residuals(self) -> dict[str, float]:
        raise NotImplementedError()

    @abstractmethod
    def metadata(self) -> dict[str, Any]:
        """Return JSON-compatible metadata (conventions, histories, flags)."""
        raise NotImplementedError()

    @classmethod
    @abstractmethod
    def from_fields(
        cls, fields: Mapping[str, Field], metadata: Mapping[str, Any], tolerances: Tolerances
    ) -> Solution:
        """Reconstruct a solution from the output of `fields` and `metadata`.

        Parameters
        ----------
        fields : `~collections.abc.Mapping` [`str`, `Field`]
            Fields, as returned by `fields`.
        metadata : `~collections.abc.Mapping`
            Metadata, as returned by `metadata`.
        tolerances : `Tolerances`
            Thresholds for the new solution.

        Returns
        -------
        solution : `Solution`
            Reconstructed solution.
        """
        raise NotImplementedError()

    @property
    def tolerances(self) -> Tolerances:
        """Thresholds used to decide `verified` (`Tolerances`)."""
        return self._tolerances

    @property
    def residuals(self) -> dict[str, float]:
        """Maximum norm of each residual, keyed by equation name."""
        if self._residuals is None:
            self._residuals = self._compute_residuals()
        return dict(self._residuals)

    def thresholds(self) -> dict[str, float]:
        """Return the pass threshold for each residual name.

        The default uses `Tolerances.residual` for every entry; subclasses
        override this when some residuals are algebraic.
        """
        return {name: self._tolerances.residual for name in self.residuals}

    @property
    def verified(self) -> bool:
        """`True` if every residual is within its threshold."""
        thresholds = self.thresholds()
        return all(value <= thresholds[name] for name, value in self.residuals.items())

    def require_verified(self) -> None:
        """Raise `UnverifiedSolutionError` unless `verified` is `True`."""
        if not self.verified:
            raise UnverifiedSolutionError(self)

    def copy(self) -> Solution:
        """Return a deep copy."""
        return self.from_fields(
            {name: field.copy() for name, field in self.fields().items()}, self.metadata(), self._tolerances
        )

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dims={self.grid.dims}, verified={self.verified})"
