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
    "BianchiLattice",
    "IncompleteLatticeError",
    "bianchi_lattice",
    "multi_soliton",
)

import itertools
import logging
from typing import Iterator, Mapping, Sequence

from ._grid import GridSpec
from ._settings import DEFAULT_TOLERANCES, Tolerances
from ._sge import SgeSolution, one_soliton, sge_permutability, vacuum

_LOG = logging.getLogger(__name__)


class IncompleteLatticeError(RuntimeError):
    """Exception raised when the top of a `BianchiLattice` is requested but
    `BianchiLattice.is_complete` is `False`.
    """

    def __init__(self) -> None:
        super().__init__(
            "Cannot return the top of a Bianchi lattice unless every combination of parameters is present."
        )


class BianchiLattice(Mapping[frozenset, SgeSolution]):
    """Solutions obtained from the vacuum by Bäcklund transforms with
    different subsets of a list of parameters.

    Parameters
    ----------
    mus : `~collections.abc.Sequence` [`float`]
        Bäcklund parameters; keys index into this sequence.
    nodes : `~collections.abc.Mapping` [`frozenset` [`int`], `SgeSolution`]
        Solution for each subset of parameter indices that has been
        computed.

    Notes
    -----
    This may hold any subset of the ``2ⁿ`` possible nodes; `is_complete`
    reports whether all of them are present.
    """

    def __init__(self, mus: Sequence[float], nodes: Mapping[frozenset, SgeSolution]):
        self._mus = tuple(float(mu) for mu in mus)
        for key in nodes:
            if not key <= frozenset(range(len(self._mus))):
                raise KeyError(f"Lattice key {set(key)} refers to parameters that do not exist.")
        self._nodes = dict(nodes)

    @property
    def mus(self) -> tuple[float, ...]:
        """Bäcklund parameters (`tuple` [`float`, ...])."""
        return self._mus

    def __getitem__(self, key: frozenset) -> SgeSolution:
        return self._nodes[frozenset(key)]

    def __iter__(self) -> Iterator[frozenset]:
        return iter(self._nodes)

    def __len__(self) -> int:
        return len(self._nodes)

    @property
    def is_complete(self) -> bool:
        """`True` if a solution is present for every subset of parameters."""
        return len(self._nodes) == 2 ** len(self._mus)

    @property
    def all_verified(self) -> bool:
        """`True` if every solution in the lattice is verified."""
        return all(node.verified for node in self._nodes.values())

    @property
    def top(self) -> SgeSolution:
        """The solution that uses every parameter (`SgeSolution`).

        Raises
        ------
        IncompleteLatticeError
            Raised if the lattice is not complete.
        """
        if not self.is_complete:
            raise IncompleteLatticeError()
        return self._nodes[frozenset(range(len(self._mus)))]

    def level(self, size: int) -> dict[frozenset, SgeSolution]:
        """Return the nodes that use exactly ``size`` parameters."""
        return {key: value for key, value in self._nodes.items() if len(key) == size}


def bianchi_lattice(
    grid: GridSpec,
    mus: Sequence[float],
    *,
    max_level: int | None = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> BianchiLattice:
    """Build a Bianchi lattice from the vacuum.

    Parameters
    ----------
    grid : `GridSpec`
        2-d ``(s, t)`` grid.
    mus : `~collections.abc.Sequence` [`float`]
        Bäcklund parameters, with distinct absolute values.
    max_level : `int`, optional
        Stop after subsets of this size; the full lattice if not given.
    tolerances : `Tolerances`, optional
        Thresholds for the solutions.

    Returns
    -------
    lattice : `BianchiLattice`
        Level 1 holds closed-form 1-solitons; every higher node ``T`` is
        the permutability closure of ``T - {j, k}``, ``T - {k}`` and
        ``T - {j}``, where ``j < k`` are the two largest indices in ``T``.

    Raises
    ------
    ValueError
        Raised if two parameters have the same absolute value.
    """
    mus = [float(mu) for mu in mus]
    if len({abs(mu) for mu in mus}) != len(mus):
        raise ValueError(f"Bianchi lattice parameters must have distinct absolute values; got {mus}.")
    top_level = len(mus) if max_level is None else min(max_level, len(mus))
    nodes: dict[frozenset, SgeSolution] = {frozenset(): vacuum(grid, tolerances)}
    if top_level >= 1:
        for j, mu in enumerate(mus):
            nodes[frozenset((j,))] = one_soliton(grid, mu, tolerances)
    for size in range(2, top_level + 1):
        for combination in itertools.combinations(range(len(mus)), size):
            *rest, j, k = combination
            base = frozenset(rest)
            node = sge_permutability(nodes[base], nodes[base | {j}], nodes[base | {k}], mus[j], mus[k])
            if not node.verified:
                _LOG.warning(
                    "Lattice node %s has residuals %s above tolerance; refine the grid.",
                    sorted(combination),
                    node.residuals,
                )
            nodes[frozenset(combination)] = node
    return BianchiLattice(mus, nodes)


def multi_soliton(
    grid: GridSpec, mus: Sequence[float], tolerances: Tolerances = DEFAULT_TOLERANCES
) -> SgeSolution:
    """Return the ``len(mus)``-soliton, the top of `bianchi_lattice`."""
    if not mus:
        return vacuum(grid, tolerances)
    return bianchi_lattice(grid, mus, tolerances=tolerances).top
