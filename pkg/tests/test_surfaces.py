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

import os
import tempfile
import unittest

import numpy as np
import numpy.testing as npt

from soliton_forge import (
    Field,
    GridError,
    GridSpec,
    ImmersionField,
    Midpoint,
    Provenance,
    SgeSolution,
    UnverifiedSolutionError,
    dressing_bt_surface,
    export_obj,
    fundamental_forms,
    one_soliton,
    r3_to_su2,
    read_obj,
    su2_to_r3,
    sym_immersion,
    vacuum,
)


def square(dims):
    return GridSpec.from_bounds([(-1.0, 1.0), (-1.0, 1.0)], dims=[dims, dims])


def interior(grid, margin):
    mask = np.zeros(grid.dims, dtype=bool)
    mask[margin:-margin, margin:-margin] = True
    return mask


class Su2TestCase(unittest.TestCase):
    """Tests for the identification of su(2) with R^3."""

    def test_round_trip(self):
        rng = np.random.default_rng(12)
        vectors = rng.normal(size=(5, 3))
        matrices = r3_to_su2(vectors)
        npt.assert_allclose(matrices + np.conj(np.swapaxes(matrices, -1, -2)), 0.0, atol=1e-14)
        npt.assert_allclose(np.trace(matrices, axis1=-2, axis2=-1), 0.0, atol=1e-14)
        npt.assert_allclose(su2_to_r3(matrices), vectors, atol=1e-14)

    def test_orthonormal_basis(self):
        npt.assert_allclose(su2_to_r3(r3_to_su2(np.eye(3))), np.eye(3), atol=1e-15)
        self.assertAlmostEqual(np.linalg.norm(su2_to_r3(np.diag([0.5j, -0.5j]))), 0.5)


class FundamentalFormsTestCase(unittest.TestCase):
    """Tests for finite-difference fundamental forms."""

    def test_sphere(self):
        grid = GridSpec.from_bounds([(0.0, 1.0), (-0.5, 0.5)], dims=[81, 81])
        u, v = grid.coordinates()
        points = 2.0 * np.stack([np.cos(u) * np.cos(v), np.sin(u) * np.cos(v), np.sin(v)], axis=-1)
        report = fundamental_forms(Field(grid, points))
        self.assertFalse(np.any(report.degenerate))
        self.assertLess(report.curvature_error(0.25), 1e-2)
        self.assertLess(report.curvature_error(0.25, interior(grid, 2)), 1e-3)
        npt.assert_allclose(report.G.values, 4.0, atol=1e-3)
        npt.assert_allclose(report.F.values, 0.0, atol=1e-3)

    def test_cylinder(self):
        grid = GridSpec.from_bounds([(0.0, 2.0), (0.0, 1.0)], dims=[41, 11])
        u, v = grid.coordinates()
        points = np.stack([np.cos(u), np.sin(u), v], axis=-1)
        report = fundamental_forms(ImmersionField(Field(grid, points), Provenance.CHRISTOFFEL))
        npt.assert_allclose(report.K.values, 0.0, atol=1e-12)
        npt.assert_allclose(report.M.values, 0.0, atol=1e-12)
        npt.assert_allclose(report.N.values, 0.0, atol=1e-12)
        npt.assert_allclose(np.abs(report.L.values), 1.0, atol=1e-2)

    def test_external_normal(self):
        grid = square(5)
        u, v = grid.coordinates()
        points = np.stack([u, v, np.zeros_like(u)], axis=-1)
        normal = Field(grid, np.broadcast_to([0.0, 0.0, -2.0], grid.dims + (3,)))
        report = fundamental_forms(Field(grid, points), normal)
        npt.assert_allclose(report.normal.values[..., 2], -1.0)
        npt.assert_allclose(report.K.values, 0.0)
        with self.assertRaises(GridError):
            fundamental_forms(Field(grid, points), Field(square(7), np.ones((7, 7, 3))))

    def test_degenerate(self):
        grid = square(5)
        u, _ = grid.coordinates()
        points = np.stack([u, np.zeros_like(u), np.zeros_like(u)], axis=-1)
        report = fundamental_forms(Field(grid, points))
        self.assertTrue(np.all(report.degenerate))
        self.assertTrue(np.all(np.isnan(report.K.values)))
        self.assertEqual(report.curvature_error(-1.0), 0.0)

    def test_validation(self):
        grid = square(5)
        with self.assertRaises(GridError):
            fundamental_forms(Field(grid, np.zeros(grid.dims + (2,))))
        cube = GridSpec.from_bounds([(0.0, 1.0)] * 3, dims=[3, 3, 3])
        with self.assertRaises(GridError):
            fundamental_forms(Field(cube, np.zeros(cube.dims + (3,))))

    def test_to_csv(self):
        grid = square(5)
        u, v = grid.coordinates()
        report = fundamental_forms(Field(grid, np.stack([u, v, u * v], axis=-1)))
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "forms.csv")
            report.to_csv(path)
            with open(path) as stream:
                self.assertEqual(stream.readline().strip(), "i0,i1,E,F,G,L,M,N,K")
            table = np.loadtxt(path, delimiter=",", skiprows=1)
        self.assertEqual(table.shape, (25, 9))
        npt.assert_allclose(table[:, 2], report.E.values.reshape(-1))


class ImmersionFieldTestCase(unittest.TestCase):
    """Tests for immersion records."""

    def test_rank(self):
        grid = square(5)
        u, v = grid.coordinates()
        plane = ImmersionField(Field(grid, np.stack([u, v, 0 * u], axis=-1)), Provenance.SYM, 0.5)
        self.assertTrue(np.all(plane.rank == 2))
        self.assertEqual(plane.ambient_dimension, 3)
        self.assertEqual(plane.diagnostic, 0.5)
        line = ImmersionField(Field(grid, np.stack([u, 0 * u], axis=-1)), Provenance.GSGE)
        self.assertTrue(np.all(line.rank == 1))

    def test_validation(self):
        grid = square(5)
        with self.assertRaises(GridError):
            ImmersionField(Field(grid, np.zeros(grid.dims)), Provenance.SYM)
        with self.assertRaises(GridError):
            ImmersionField(Field(grid, np.zeros(grid.dims + (3,), dtype=complex)), Provenance.SYM)


class SymImmersionTestCase(unittest.TestCase):
    """Tests for pseudospherical surfaces from the Sym formula."""

    @classmethod
    def setUpClass(cls):
        cls.q = one_soliton(square(101), 1.0)
        cls.surface = sym_immersion(cls.q)

    def regular(self):
        """Interior nodes away from the cuspidal line where sin 2q vanishes."""
        return interior(self.q.grid, 5) & (np.abs(np.sin(2.0 * self.q.q.values)) > 0.3)

    def test_curvature(self):
        report = fundamental_forms(self.surface)
        mask = self.regular()
        self.assertLess(report.curvature_error(-1.0, mask), 1e-2)
        self.assertFalse(np.any(report.degenerate[mask]))

    def test_asymptotic_tchebyshef_net(self):
        report = fundamental_forms(self.surface)
        mask = self.regular()
        for name in ("L", "N"):
            self.assertLess(np.max(np.abs(getattr(report, name).values[mask])), 1e-2)
        for name in ("E", "G"):
            self.assertLess(np.max(np.abs(getattr(report, name).values - 1.0)), 1e-2)
        npt.assert_allclose(report.F.values[mask], np.cos(2.0 * self.q.q.values[mask]), atol=1e-2)

    def test_basepoint_and_diagnostic(self):
        self.assertIs(self.surface.provenance, Provenance.SYM)
        npt.assert_allclose(self.surface.points.values[50, 50], 0.0, atol=1e-12)
        self.assertLess(self.surface.diagnostic, 1e-6)
        self.assertTrue(np.all(self.surface.rank[self.regular()] == 2))

    def test_other_parameter(self):
        surface = sym_immersion(self.q, r=1.0, richardson=False)
        self.assertIsNone(surface.diagnostic)
        report = fundamental_forms(surface)
        self.assertLess(report.curvature_error(-4.0, self.regular()), 4e-2)

    def test_validation(self):
        with self.assertRaises(ValueError):
            sym_immersion(self.q, r=0.0)
        grid = square(11)
        s, t = grid.coordinates()
        with self.assertRaises(UnverifiedSolutionError):
            sym_immersion(SgeSolution(Field(grid, s + t)))


class DressingBacklundSurfaceTestCase(unittest.TestCase):
    """Tests for the dressing-induced Bäcklund transform of surfaces."""

    @classmethod
    def setUpClass(cls):
        cls.grid = square(101)
        cls.q = vacuum(cls.grid)
        cls.pi = 0.5 * np.ones((2, 2))
        cls.q_hat, cls.surface = dressing_bt_surface(cls.q, 0.5, cls.pi)

    def test_solution(self):
        npt.assert_allclose(self.q_hat.q.values, -one_soliton(self.grid, 1.0).q.values, atol=1e-5)
        self.assertEqual(self.q_hat.history, (1.0,))
        self.assertTrue(self.q_hat.verified)

    def test_constant_distance(self):
        seed = sym_immersion(self.q, richardson=False)
        distance = np.linalg.norm(self.surface.points.values - seed.points.values, axis=-1)
        npt.assert_allclose(distance, 1.0, atol=1e-6)

    def test_validation(self):
        with self.assertRaises(ValueError):
            dressing_bt_surface(self.q, 0.0, self.pi)
        with self.assertRaises(ValueError):
            dressing_bt_surface(self.q, 0.5, np.eye(2))
        with self.assertRaises(ValueError):
            dressing_bt_surface(self.q, 0.5, 0.5 * np.array([[1.0, -1j], [1j, 1.0]]))


class DressingBacklundSolitonSurfaceTestCase(unittest.TestCase):
    """Tests for the dressing-induced Bäcklund transform of the 1-soliton
    surface.
    """

    @classmethod
    def setUpClass(cls):
        cls.grid = square(101)
        cls.q = one_soliton(cls.grid, 1.0)
        cls.pi = 0.5 * np.ones((2, 2))
        cls.options = {"midpoint": Midpoint.CUBIC, "substeps": 2}
        cls.seed = sym_immersion(cls.q, richardson=False, **cls.options)
        cls.q_hat, cls.surface = dressing_bt_surface(cls.q, 0.3, cls.pi, **cls.options)

    def shift(self, surface):
        return surface.points.values - self.seed.points.values

    def test_distance(self):
        distance = np.linalg.norm(self.shift(self.surface), axis=-1)
        npt.assert_allclose(distance, 0.3 / 0.34, atol=1e-4)

    def test_shift_is_tangent(self):
        mask = interior(self.grid, 5) & (np.abs(np.sin(2.0 * self.q.q.values)) > 0.3)
        normal = fundamental_forms(self.seed).normal.values
        component = np.abs(np.sum(self.shift(self.surface) * normal, axis=-1))
        self.assertLess(np.max(component[mask]), 1e-3)

    def test_dressed_pair(self):
        self.assertTrue(self.q_hat.verified, self.q_hat.residuals)
        self.assertEqual(self.q_hat.history, (1.0, 0.6))
        mask = interior(self.grid, 5) & (np.abs(np.sin(2.0 * self.q_hat.q.values)) > 0.3)
        report = fundamental_forms(self.surface)
        self.assertLess(report.curvature_error(-1.0, mask), 1e-2)
        for name in ("E", "G"):
            npt.assert_allclose(getattr(report, name).values[mask], 1.0, atol=1e-2)

    def test_negative_parameter(self):
        q_hat, surface = dressing_bt_surface(self.q, -0.3, self.pi, **self.options)
        self.assertEqual(q_hat.history, (1.0, -0.6))
        distance = np.linalg.norm(self.shift(surface), axis=-1)
        npt.assert_allclose(distance, 0.3 / 0.34, atol=1e-4)

    def test_small_parameter_limit(self):
        slopes = []
        for s in (0.1, 0.05):
            _, surface = dressing_bt_surface(self.q, s, self.pi, **self.options)
            distance = np.linalg.norm(self.shift(surface), axis=-1)
            npt.assert_allclose(distance, s / (0.25 + s * s), atol=1e-4)
            slopes.append(float(np.max(distance)) / s)
        self.assertLess(abs(slopes[1] - 4.0), abs(slopes[0] - 4.0))


class ObjTestCase(unittest.TestCase):
    """Tests for mesh export."""

    def test_export(self):
        grid = GridSpec.from_bounds([(0.0, 1.0), (0.0, 1.0)], dims=[3, 4])
        u, v = grid.coordinates()
        points = np.stack([u, v, u * v / 3.0], axis=-1)
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "surface.obj")
            export_obj(Field(grid, points), path)
            mesh = read_obj(path)
        self.assertEqual(mesh.faces.shape, (12, 3))
        npt.assert_array_equal(mesh.faces[0], [0, 4, 5])
        npt.assert_array_equal(mesh.faces[1], [0, 5, 1])
        npt.assert_allclose(mesh.vertices, points.reshape(-1, 3), atol=1e-6)

    def test_line_image(self):
        grid = square(11)
        surface = sym_immersion(vacuum(grid), richardson=False)
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, "line.obj")
            export_obj(surface, path)
            mesh = read_obj(path)
        self.assertEqual(len(mesh.vertices), 121)
        self.assertEqual(len(mesh.faces), 200)
        self.assertTrue(np.all(np.isfinite(mesh.vertices)))

    def test_validation(self):
        grid = square(3)
        with self.assertRaises(GridError):
            export_obj(Field(grid, np.zeros(grid.dims + (2,))), "unused.obj")
