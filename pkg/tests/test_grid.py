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
import os
import unittest
from unittest import mock

import numpy as np
import numpy.testing as npt

from soliton_forge import (
    DEFAULT_TOLERANCES,
    THREADS_ENV_VAR,
    Field,
    GridError,
    GridSpec,
    Tolerances,
    kernel_threads,
    partial_derivative,
)


class GridSpecTestCase(unittest.TestCase):
    """Tests for GridSpec construction and coordinates."""

    def test_from_bounds_spacing(self):
        grid = GridSpec.from_bounds([(-1.0, 1.0), (0.0, 2.0)], spacing=0.5)
        self.assertEqual(grid.dims, (5, 5))
        npt.assert_allclose(grid.spacing, (0.5, 0.5))
        npt.assert_allclose(grid.upper, (1.0, 2.0))
        npt.assert_allclose(grid.axis_coordinates(0), [-1.0, -0.5, 0.0, 0.5, 1.0])

    def test_from_bounds_dims(self):
        grid = GridSpec.from_bounds([(0.0, 1.0)], dims=[11])
        self.assertAlmostEqual(grid.spacing[0], 0.1)
        self.assertEqual(grid.size, 11)

    def test_validation(self):
        with self.assertRaises(GridError):
            GridSpec(dims=(2, 5), origin=(0.0, 0.0), spacing=(1.0, 1.0))
        with self.assertRaises(GridError):
            GridSpec(dims=(5,), origin=(0.0,), spacing=(0.0,))
        with self.assertRaises(GridError):
            GridSpec(dims=(5, 5), origin=(0.0,), spacing=(1.0, 1.0))
        with self.assertRaises(GridError):
            GridSpec.from_bounds([(1.0, 0.0)], dims=[5])
        with self.assertRaises(GridError):
            GridSpec.from_bounds([(0.0, 1.0)])

    def test_coordinates_and_basepoint(self):
        grid = GridSpec.from_bounds([(-1.0, 1.0), (-2.0, 2.0)], dims=[5, 9])
        x, y = grid.coordinates()
        self.assertEqual(x.shape, (5, 9))
        self.assertEqual(grid.default_basepoint(), (2, 4))
        self.assertEqual(x[2, 4], 0.0)
        self.assertEqual(y[2, 4], 0.0)
        self.assertEqual(grid.nearest_index([10.0, -10.0]), (4, 0))
        with self.assertRaises(GridError):
            grid.check_index((5, 0))
        with self.assertRaises(GridError):
            grid.check_axis(2)

    def test_dict_round_trip(self):
        grid = GridSpec.from_bounds([(-1.0, 1.0), (0.0, 0.3)], dims=[7, 4])
        self.assertEqual(GridSpec.from_dict(grid.to_dict()), grid)
        with self.assertRaises(GridError):
            GridSpec.from_dict({"dims": [3]})


class FieldTestCase(unittest.TestCase):
    """Tests for Field storage and norms."""

    def setUp(self):
        self.grid = GridSpec.from_bounds([(0.0, 1.0), (0.0, 1.0)], dims=[4, 3])

    def test_read_only(self):
        values = np.zeros((4, 3))
        field = Field(self.grid, values)
        with self.assertRaises(ValueError):
            field.values[0, 0] = 1.0
        values[0, 0] = 5.0
        self.assertEqual(field.values[0, 0], 0.0)

    def test_shape_mismatch(self):
        with self.assertRaises(GridError):
            Field(self.grid, np.zeros((3, 4)))

    def test_value_shapes_and_norms(self):
        scalar = Field(self.grid, -2.0 * np.ones((4, 3)))
        self.assertEqual(scalar.value_shape, ())
        self.assertEqual(scalar.max_norm(), 2.0)
        vector = Field(self.grid, np.broadcast_to([3.0, 4.0], (4, 3, 2)))
        self.assertEqual(vector.value_shape, (2,))
        self.assertAlmostEqual(vector.max_norm(), 5.0)
        matrix = Field(self.grid, np.broadcast_to(np.diag([1.0, -3.0j]), (4, 3, 2, 2)))
        self.assertTrue(matrix.is_complex)
        self.assertAlmostEqual(matrix.max_norm(), 3.0)
        self.assertFalse(matrix.is_real(1e-12))

    def test_masked_norm(self):
        values = np.zeros((4, 3))
        values[0, 0] = 7.0
        field = Field(self.grid, values)
        mask = np.ones((4, 3), dtype=bool)
        mask[0, 0] = False
        self.assertEqual(field.max_norm(mask), 0.0)
        self.assertEqual(field.max_norm(np.zeros((4, 3), dtype=bool)), 0.0)

    def test_with_new_values(self):
        field = Field(self.grid, np.zeros((4, 3)))
        other = field.with_new_values(np.ones((4, 3)))
        self.assertIs(other.grid, field.grid)
        with self.assertRaises(GridError):
            field.with_new_values(np.ones((2, 3)))


class PartialDerivativeTestCase(unittest.TestCase):
    """Tests for finite-difference derivatives."""

    def test_quadratic_exact_in_interior(self):
        grid = GridSpec.from_bounds([(-1.0, 1.0)], dims=[21])
        (x,) = grid.coordinates()
        derivative = partial_derivative(Field(grid, x**2), 0)
        npt.assert_allclose(derivative.values[1:-1], 2.0 * x[1:-1], atol=1e-12)
        npt.assert_allclose(derivative.values, 2.0 * x, atol=1e-12)

    def test_constant(self):
        grid = GridSpec.from_bounds([(0.0, 1.0), (0.0, 1.0)], dims=[6, 7])
        field = Field(grid, 3.0 * np.ones(grid.dims))
        for accuracy in (2, 4):
            for axis in (0, 1):
                npt.assert_allclose(partial_derivative(field, axis, accuracy).values, 0.0, atol=1e-12)

    def test_sine(self):
        grid = GridSpec.from_bounds([(0.0, 2.0 * math.pi)], dims=[256])
        (x,) = grid.coordinates()
        field = Field(grid, np.sin(x))
        self.assertLess(np.max(np.abs(partial_derivative(field, 0).values - np.cos(x))), 1e-3)
        self.assertLess(np.max(np.abs(partial_derivative(field, 0, accuracy=4).values - np.cos(x))), 1e-6)

    def test_fourth_order_is_exact_for_quartics(self):
        grid = GridSpec.from_bounds([(-1.0, 1.0)], dims=[11])
        (x,) = grid.coordinates()
        derivative = partial_derivative(Field(grid, x**4 - x**3), 0, accuracy=4)
        npt.assert_allclose(derivative.values, 4.0 * x**3 - 3.0 * x**2, atol=1e-10)

    def test_matrix_values_along_second_axis(self):
        grid = GridSpec.from_bounds([(0.0, 1.0), (0.0, 1.0)], dims=[5, 11])
        _, y = grid.coordinates()
        values = np.zeros(grid.dims + (2, 2))
        values[..., 0, 1] = y**2
        derivative = partial_derivative(Field(grid, values), 1)
        npt.assert_allclose(derivative.values[..., 0, 1], 2.0 * y, atol=1e-12)
        npt.assert_allclose(derivative.values[..., 1, 0], 0.0)

    def test_errors(self):
        grid = GridSpec.from_bounds([(0.0, 1.0), (0.0, 1.0)], dims=[4, 3])
        field = Field(grid, np.zeros(grid.dims))
        with self.assertRaises(GridError):
            partial_derivative(field, 2)
        with self.assertRaises(GridError):
            partial_derivative(field, 0, accuracy=4)
        with self.assertRaises(ValueError):
            partial_derivative(field, 0, accuracy=3)


class SettingsTestCase(unittest.TestCase):
    """Tests for tolerances and thread configuration."""

    def test_defaults(self):
        self.assertEqual(DEFAULT_TOLERANCES.residual, 1e-3)
        self.assertEqual(DEFAULT_TOLERANCES.projection, 1e-8)

    def test_validation(self):
        with self.assertRaises(ValueError):
            Tolerances(residual=0.0)
        with self.assertRaises(ValueError):
            Tolerances(rank=float("nan"))
        with self.assertRaises(ValueError):
            DEFAULT_TOLERANCES.replace(bogus=1.0)

    def test_replace(self):
        loose = DEFAULT_TOLERANCES.replace(residual=1e-2)
        self.assertEqual(loose.residual, 1e-2)
        self.assertEqual(loose.path, DEFAULT_TOLERANCES.path)
        self.assertEqual(loose.to_dict()["residual"], 1e-2)

    def test_kernel_threads(self):
        with mock.patch.dict(os.environ, {THREADS_ENV_VAR: "3"}):
            self.assertEqual(kernel_threads(), 3)
        with mock.patch.dict(os.environ, {THREADS_ENV_VAR: "zero"}):
            with self.assertRaises(ValueError):
                kernel_threads()
        with mock.patch.dict(os.environ, {THREADS_ENV_VAR: "0"}):
            with self.assertRaises(ValueError):
                kernel_threads()
        with mock.patch.dict(os.environ, {}, clear=True):
            self.assertGreaterEqual(kernel_threads(), 1)


if __name__ == "__main__":
    unittest.main()
