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
    "DEFAULT_TOLERANCES",
    "THREADS_ENV_VAR",
    "Tolerances",
    "kernel_threads",
)

import dataclasses
import math
import os
from typing import Any

THREADS_ENV_VAR = "SOLITON_FORGE_THREADS"
"""Name of the environment variable that caps the number of worker threads
used for independent frame integrations.
"""


@dataclasses.dataclass(frozen=True)
class Tolerances:
    """Pass thresholds used by every verification in this package.

    Notes
    -----
    Discretization-limited checks (PDE residuals, compatibility defects) use
    `residual`, which is appropriate for second-order stencils at a grid
    spacing of about 1e-2.  Identities that hold in exact arithmetic
    (reality conditions, projections, rational loop identities) use
    `algebraic`.
    """

    def __post_init__(self) -> None:
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if not (math.isfinite(value) and value > 0.0):
                raise ValueError(f"Tolerance {field.name!r} must be positive and finite, not {value!r}.")

    residual: float = 1e-3
    """Maximum norm of a finite-difference PDE residual (`float`)."""

    algebraic: float = 1e-10
    """Maximum error of an identity that holds in exact arithmetic
    (`float`).
    """

    orthogonality: float = 1e-8
    """Maximum of ``|AᵀA - I|`` for matrices that must stay orthogonal
    (`float`).
    """

    path: float = 1e-6
    """Maximum discrepancy between the two frame integration path policies
    for a flat connection (`float`).
    """

    determinant: float = 1e-12
    """Smallest admissible ``|det E|`` for a frame (`float`)."""

    rank: float = 1e-10
    """Relative singular value below which a transported basis is treated as
    rank deficient (`float`).
    """

    projection: float = 1e-8
    """Maximum of ``|π² - π|`` and ``|π* - π|`` for integrated projections
    (`float`).
    """

    def replace(self, **kwargs: Any) -> Tolerances:
        """Return a copy with some thresholds overridden.

        Parameters
        ----------
        **kwargs
            New values, keyed by attribute name.

        Returns
        -------
        tolerances : `Tolerances`
            Updated (and validated) tolerances.

        Raises
        ------
        ValueError
            Raised if a name is not a tolerance or a value is invalid.
        """
        names = {field.name for field in dataclasses.fields(self)}
        unknown = set(kwargs) - names
        if unknown:
            raise ValueError(f"Unknown tolerance name(s): {sorted(unknown)}.")
        return dataclasses.replace(self, **kwargs)

    def to_dict(self) -> dict[str, float]:
        """Return the thresholds as a plain `dict`."""
        return dataclasses.asdict(self)


DEFAULT_TOLERANCES = Tolerances()


def kernel_threads() -> int:
    """Return the maximum number of worker threads for independent kernels.

    Returns
    -------
    threads : `int`
        Value of the ``SOLITON_FORGE_THREADS`` environment variable, or the
        CPU count (capped at 4) if it is not set.

    Raises
    ------
    ValueError
        Raised if the environment variable is set to something other than a
        positive integer.
    """
    raw = os.environ.get(THREADS_ENV_VAR)
    if raw is None or not raw.strip():
        return min(os.cpu_count() or 1, 4)
    try:
        threads = int(raw)
    except ValueError:
        raise ValueError(f"{THREADS_ENV_VAR}={raw!r} is not an integer.") from None
    if threads < 1:
        raise ValueError(f"{THREADS_ENV_VAR} must be at least 1, not {threads}.")
    return threads
