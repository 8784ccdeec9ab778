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

import math
import unittest

import numpy as np
import numpy.testing as npt

from soliton_forge import (
    BtParam,
    CompatibilityError,
    Field,
    GridError,
    GridSpec,
    IncompleteLatticeError,
    SgeSolution,
    UnverifiedSolutionError,
    bianchi_lattice,
    curvature_residual,
    lie_transform,
    multi_soliton,
    one_soliton,
    sge_backlund,
    sge_backlund_residual,
    sge_lax,
    sge_permutability,
    sge_residual,
    vacuum,
)


def square(dims, half_width=1.0):
    return GridSpec.from_bounds([(-half_width, half_width)] * 2, dims=[dims, dims])


class SgeSolutionTestCase(unittest.TestCase):
    """Tests for closed-form solutions and residuals."""

    def test_one_soliton_value(self):
        grid = GridSpec.from_bounds([(0.0, 1.0), (0.0, 1.0)], dims=[11, 11])
        q = one_soliton(grid, 1.0)
        self.assertAlmostEqual(q.q.values[-1, -1], 2.0 * math.atan(math.exp(2.0)), places=12)
        self.assertEqual(q.history, (1.0,))

    def test_one_soliton_is_verified(self):
        for mu in (1.0, -1.0):
            q = one_soliton(square(101), mu)
            self.assertLess(q.residuals["sge"], 1e-3)
            self.assertTrue(q.verified)

    def test_vacuum(self):
        q = vacuum(square(5))
        self.assertEqual(q.residuals, {"sge": 0.0})
        self.assertEqual(q.history, ())

    def test_non_solution(self):
        grid = square(21)
        s, t = grid.coordinates()
        q = SgeSolution(Field(grid, s + t))
        self.assertFalse(q.verified)
        npt.assert_allclose(sge_residual(q).values, -np.sin(s + t) * np.cos(s + t), atol=1e-12)
        with self.assertRaises(UnverifiedSolutionError):
            q.require_verified()

    def test_validation(self):
        cube = GridSpec.from_bounds([(0.0, 1.0)] * 3, dims=[3, 3, 3])
        with self.assertRaises(GridError):
            SgeSolution(Field(cube, np.zeros(cube.dims)))
        grid = square(5)
        with self.assertRaises(GridError):
            SgeSolution(Field(grid, np.zeros(grid.dims, dtype=complex)))
        with self.assertRaises(GridError):
            SgeSolution(Field(grid, np.zeros(grid.dims + (2,))))
        with self.assertRaises(ValueError):
            one_soliton(grid, 0.0)

    def test_metadata_and_copy(self):
        q = one_soliton(square(11), 2.0)
        self.assertEqual(q.metadata()["mu_history"], [2.0])
        copy = q.copy()
        self.assertIsNot(copy.q, q.q)
        npt.assert_array_equal(copy.q.values, q.q.values)
        self.assertEqual(copy.history, q.history)


class BtParamTestCase(unittest.TestCase):
    """Tests for Bäcklund parameters."""

    def test_angle(self):
        self.assertAlmostEqual(BtParam.from_angle(math.pi / 2).mu, 1.0)
        self.assertAlmostEqual(BtParam(0.5).angle, 2.0 * math.atan(0.5))
        self.assertAlmostEqual(BtParam.from_angle(BtParam(3.0).angle).mu, 3.0)

    def test_validation(self):
        with self.assertRaises(ValueError):
            BtParam(0.0)
        with self.assertRaises(ValueError):
            BtParam(float("inf"))


class SgeBacklundTestCase(unittest.TestCase):
    """Tests for integrated and algebraic Bäcklund transforms."""

    def test_vacuum_to_one_soliton(self):
        grid = square(41)
        qstar = sge_backlund(vacuum(grid), 1.0, math.pi / 2)
        npt.assert_allclose(qstar.q.values, one_soliton(grid, 1.0).q.values, atol=1e-5)
        self.assertEqual(qstar.history, (1.0,))

    def test_basepoint(self):
        grid = square(41)
        expected = one_soliton(grid, 2.0).q.values
        qstar = sge_backlund(vacuum(grid), 2.0, expected[0, 0], basepoint=(0, 0), substeps=2)
        npt.assert_allclose(qstar.q.values, expected, atol=1e-5)

    def test_matches_permutability(self):
        grid = square(101)
        q0 = vacuum(grid)
        q1 = one_soliton(grid, 1.0)
        q2 = one_soliton(grid, 1.5)
        q3 = sge_permutability(q0, q1, q2, 1.0, 1.5)
        self.assertEqual(q3.history, (1.0, 1.5))
        self.assertAlmostEqual(q3.q.values[50, 50], 0.0, places=12)
        integrated = sge_backlund(q1, 1.5, 0.0)
        npt.assert_allclose(integrated.q.values, q3.q.values, atol=1e-3)
        for residual in sge_backlund_residual(q1, q3, 1.5):
            self.assertLess(residual.max_norm(), 1e-2)
        for residual in sge_backlund_residual(q2, q3, 1.0):
            self.assertLess(residual.max_norm(), 1e-2)

    def test_permutability_symmetry(self):
        grid = square(21)
        q0 = vacuum(grid)
        q1 = one_soliton(grid, 0.5)
        q2 = one_soliton(grid, 3.0)
        npt.assert_allclose(
            sge_permutability(q0, q1, q2, 0.5, 3.0).q.values,
            sge_permutability(q0, q2, q1, 3.0, 0.5).q.values,
            atol=1e-12,
        )

    def test_permutability_validation(self):
        grid = square(11)
        q0 = vacuum(grid)
        q1 = one_soliton(grid, 1.0)
        with self.assertRaises(ValueError):
            sge_permutability(q0, q1, q1, 1.0, -1.0)
        with self.assertRaises(ValueError):
            sge_permutability(q0, q1, q1, 1.0, 0.0)
        other = one_soliton(square(13), 2.0)
        with self.assertRaises(GridError):
            sge_permutability(q0, q1, other, 1.0, 2.0)

    def test_unverified_seed(self):
        grid = square(21)
        s, t = grid.coordinates()
        q = SgeSolution(Field(grid, s + t))
        with self.assertRaises(UnverifiedSolutionError):
            sge_backlund(q, 1.0, 0.0)
        with self.assertRaises(CompatibilityError):
            sge_backlund(q, 1.0, 0.0, require_verified=False)


class LieTransformTestCase(unittest.TestCase):
    """Tests for the boost symmetry."""

    def test_exact_map(self):
        q = one_soliton(square(21), 1.0)
        for r in (2.0, -1.0):
            boosted = lie_transform(q, r)
            self.assertEqual(boosted.history, (r,))
            npt.assert_allclose(boosted.q.values, one_soliton(boosted.grid, r).q.values, atol=1e-12)

    def test_resampled(self):
        q = one_soliton(square(101), 1.0)
        target = square(21, half_width=0.4)
        boosted = lie_transform(q, 2.0, target)
        self.assertEqual(boosted.grid, target)
        npt.assert_allclose(boosted.q.values, one_soliton(target, 2.0).q.values, atol=1e-3)

    def test_validation(self):
        q = one_soliton(square(11), 1.0)
        with self.assertRaises(ValueError):
            lie_transform(q, 0.0)
        with self.assertRaises(GridError):
            lie_transform(q, 2.0, square(11))


class SgeLaxTestCase(unittest.TestCase):
    """Tests for the Lax connection."""

    def test_flat_for_solutions(self):
        q = one_soliton(square(101), 1.0)
        for lam in (0.7, 1.0 + 0.5j):
            theta = sge_lax(q, lam)
            self.assertEqual(theta.spectral_parameter, lam)
            self.assertLess(curvature_residual(theta).max_norm, 1e-2)

    def test_curved_for_non_solutions(self):
        grid = square(41)
        s, t = grid.coordinates()
        self.assertGreater(curvature_residual(sge_lax(Field(grid, s + t), 0.7)).max_norm, 0.1)

    def test_unitary_for_real_parameter(self):
        theta = sge_lax(one_soliton(square(11), 1.0), 0.7)
        self.assertLess(theta.metric_defect(), 1e-12)

    def test_zero_parameter(self):
        with self.assertRaises(ValueError):
            sge_lax(vacuum(square(5)), 0.0)


class BianchiLatticeTestCase(unittest.TestCase):
    """Tests for lattices built by permutability."""

    def test_two_soliton_lattice(self):
        lattice = bianchi_lattice(square(201), [1.0, 1.5])
        self.assertTrue(lattice.is_complete)
        self.assertEqual(len(lattice), 4)
        self.assertEqual(lattice.mus, (1.0, 1.5))
        self.assertTrue(lattice.all_verified)
        self.assertEqual(lattice.top.history, (1.0, 1.5))
        self.assertEqual(set(lattice.level(1)), {frozenset({0}), frozenset({1})})

    def test_partial_lattice(self):
        lattice = bianchi_lattice(square(11), [1.0, 1.5, 2.0], max_level=1)
        self.assertEqual(len(lattice), 4)
        self.assertFalse(lattice.is_complete)
        with self.assertRaises(IncompleteLatticeError):
            lattice.top
        full = bianchi_lattice(square(11), [1.0, 1.5, 2.0])
        self.assertEqual(len(full), 8)
        self.assertEqual(full.top.history, (1.0, 1.5, 2.0))

    def test_validation(self):
        with self.assertRaises(ValueError):
            bianchi_lattice(square(11), [1.0, -1.0])

    def test_multi_soliton(self):
        grid = square(11)
        self.assertEqual(multi_soliton(grid, []).residuals, {"sge": 0.0})
        npt.assert_allclose(multi_soliton(grid, [1.5]).q.values, one_soliton(grid, 1.5).q.values)


if __name__ == "__main__":
    unittest.main()
