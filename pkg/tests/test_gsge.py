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
from scipy.linalg import expm

from soliton_forge import (
    BtDiag,
    CompatibilityError,
    DegenerateDataError,
    DerivationMethod,
    Field,
    GridError,
    GridSpec,
    GsgeState,
    Provenance,
    UnverifiedSolutionError,
    curvature_residual,
    d_lambda,
    f_from_a,
    fundamental_forms,
    gsge_backlund,
    gsge_backlund_residual,
    gsge_immersion,
    gsge_lax,
    gsge_permutability,
    linear_backlund,
    one_soliton,
    sge_to_gsge,
)


def cube(ndim, dims, half_width=1.0):
    return GridSpec.from_bounds([(-half_width, half_width)] * ndim, dims=[dims] * ndim)


def rotation(angle):
    """Return ``[[cos, sin], [-sin, cos]]`` stacked over the shape of
    ``angle``.
    """
    angle = np.asarray(angle)
    result = np.empty(angle.shape + (2, 2))
    result[..., 0, 0] = np.cos(angle)
    result[..., 0, 1] = np.sin(angle)
    result[..., 1, 0] = -np.sin(angle)
    result[..., 1, 1] = np.cos(angle)
    return result


def soliton_angle(grid, lam, phase=0.0):
    """Angle of the ``n = 2`` one-soliton in line-of-curvature coordinates."""
    x1, x2 = grid.coordinates()
    d = np.diag(d_lambda(lam, 2))
    return 2.0 * np.arctan(np.exp(d[0] * x1 + d[1] * x2 + phase))


def soliton_state(grid, lam, phase=0.0):
    return GsgeState.from_a(Field(grid, rotation(soliton_angle(grid, lam, phase))))


def interior(grid, margin):
    mask = np.zeros(grid.dims, dtype=bool)
    mask[(slice(margin, -margin),) * grid.ndim] = True
    return mask


QUARTER_TURN = np.array([[0.0, 1.0], [-1.0, 0.0]])


class BtDiagTestCase(unittest.TestCase):
    """Tests for spectral parameters and their diagonal matrices."""

    def test_d_lambda(self):
        npt.assert_allclose(d_lambda(2.0, 3), np.diag([1.25, 0.75, 0.75]))
        npt.assert_allclose(d_lambda(-1.0, 2), np.diag([-1.0, 0.0]))
        with self.assertRaises(ValueError):
            d_lambda(0.0, 2)

    def test_from_angle(self):
        self.assertAlmostEqual(BtDiag.from_angle(math.pi / 2).lam, 1.0, places=14)
        theta = math.pi / 3
        param = BtDiag.from_angle(theta)
        self.assertAlmostEqual(param.lam, 1.0 / math.tan(theta / 2), places=12)
        self.assertAlmostEqual(param.angle, theta, places=12)
        npt.assert_allclose(
            param.matrix(3), np.diag([1 / math.sin(theta), 1 / math.tan(theta), 1 / math.tan(theta)])
        )

    def test_validation(self):
        with self.assertRaises(ValueError):
            BtDiag(0.0)
        with self.assertRaises(ValueError):
            BtDiag.from_angle(0.0)


class FDerivationTestCase(unittest.TestCase):
    """Tests for reading F off a GSGE field."""

    @classmethod
    def setUpClass(cls):
        cls.grid = cube(2, 81)
        cls.angle = soliton_angle(cls.grid, 1.0)
        cls.A = Field(cls.grid, rotation(cls.angle))

    def test_connection_method(self):
        derivation = f_from_a(self.A, method=DerivationMethod.CONNECTION)
        self.assertTrue(np.all(derivation.valid))
        # For A = R(q) the coefficients are f_12 = -q_{x2} and f_21 = q_{x1}.
        npt.assert_allclose(derivation.F.values[..., 0, 1], 0.0, atol=1e-12)
        npt.assert_allclose(derivation.F.values[..., 1, 0], np.sin(self.angle), atol=1e-3)
        npt.assert_allclose(np.diagonal(derivation.F.values, axis1=-2, axis2=-1), 0.0)
        self.assertLess(derivation.structure_residual, 1e-3)

    def test_ratio_method(self):
        with self.assertLogs("soliton_forge._gsge", level="WARNING"):
            derivation = f_from_a(self.A)
        valid = derivation.valid
        self.assertFalse(np.all(valid))
        self.assertGreater(np.mean(valid), 0.75)
        self.assertFalse(np.any(valid[np.abs(np.cos(self.angle)) < 0.05]))
        reference = f_from_a(self.A, method=DerivationMethod.CONNECTION)
        npt.assert_allclose(derivation.F.values[valid], reference.F.values[valid], atol=1e-2)

    def test_degenerate(self):
        identity = Field(self.grid, np.broadcast_to(np.eye(2), self.grid.dims + (2, 2)))
        with self.assertRaises(DegenerateDataError):
            f_from_a(identity)
        with self.assertRaises(DegenerateDataError):
            f_from_a(self.A, threshold=2.0)


class GsgeStateTestCase(unittest.TestCase):
    """Tests for GSGE solutions and their residuals."""

    def test_identity(self):
        grid = cube(3, 7)
        state = GsgeState.identity(grid)
        self.assertEqual(state.n, 3)
        self.assertEqual(state.kind, "gsge")
        self.assertTrue(state.verified)
        self.assertEqual(set(state.fields()), {"A", "F", "valid"})
        self.assertEqual(state.residuals["orthogonality"], 0.0)
        self.assertEqual(state.metadata()["convention"], "J=I_{1,n-1}")

    def test_one_soliton(self):
        state = soliton_state(cube(2, 101), 1.5)
        self.assertTrue(state.verified, state.residuals)
        self.assertLess(state.orthogonality_defect(), 1e-14)

    def test_non_solution(self):
        grid = cube(2, 41)
        x1, x2 = grid.coordinates()
        state = GsgeState.from_a(Field(grid, rotation(3.0 * x1 * x2)))
        self.assertFalse(state.verified)
        self.assertGreater(state.residuals["curvature"], 0.1)

    def test_validation(self):
        grid = cube(2, 11)
        with self.assertRaises(GridError):
            GsgeState(Field(grid, np.zeros(grid.dims + (3, 3))))
        with self.assertRaises(GridError):
            GsgeState(Field(grid, np.zeros(grid.dims + (2, 2), dtype=complex)))
        A = Field(grid, np.broadcast_to(np.eye(2), grid.dims + (2, 2)))
        with self.assertRaises(GridError):
            GsgeState(A, Field(grid, np.zeros(grid.dims + (3, 3))))


class GsgeLaxTestCase(unittest.TestCase):
    """Tests for the ``o(n, n)`` Lax connection."""

    def test_flat_on_solutions(self):
        state = soliton_state(cube(2, 81), 1.0)
        for lam in (0.7, 2.0):
            theta = gsge_lax(state, lam)
            self.assertEqual(theta.matrix_size, 4)
            self.assertLess(curvature_residual(theta, accuracy=4).max_norm, 1e-2)
            self.assertLess(theta.metric_defect(np.diag([1.0, 1.0, -1.0, -1.0]), conjugate=False), 1e-14)

    def test_curved_off_solutions(self):
        grid = cube(2, 41)
        x1, x2 = grid.coordinates()
        state = GsgeState.from_a(Field(grid, rotation(3.0 * x1 * x2)))
        self.assertGreater(curvature_residual(gsge_lax(state, 0.7)).max_norm, 0.1)

    def test_zero(self):
        with self.assertRaises(ValueError):
            gsge_lax(GsgeState.identity(cube(2, 5)), 0.0)


class GsgeBacklundTestCase(unittest.TestCase):
    """Tests for the Riccati and linear Bäcklund transformations."""

    def test_identity_to_one_soliton(self):
        grid = cube(2, 101)
        for lam in (1.0, 1.5):
            transformed = gsge_backlund(GsgeState.identity(grid), lam, QUARTER_TURN, reproject=True)
            npt.assert_allclose(transformed.A.values, rotation(soliton_angle(grid, lam)), atol=1e-6)
            self.assertTrue(transformed.verified, transformed.residuals)
            self.assertLess(transformed.diagnostics["path"], 1e-5)
            self.assertLess(transformed.diagnostics["orthogonality_drift"], 1e-6)

    def test_three_dimensional(self):
        grid = cube(3, 21, 0.5)
        X0 = expm(np.array([[0.0, 0.7, 0.4], [-0.7, 0.0, 0.5], [-0.4, -0.5, 0.0]]))
        lam = BtDiag.from_angle(math.pi / 3).lam
        seed = GsgeState.identity(grid)
        transformed = gsge_backlund(seed, lam, X0, substeps=2)
        self.assertLess(transformed.diagnostics["orthogonality_drift"], 1e-6)
        self.assertLess(transformed.diagnostics["path"], 1e-4)
        npt.assert_allclose(transformed.A.values[10, 10, 10], X0, atol=1e-12)
        residuals = gsge_backlund_residual(seed, transformed, lam)
        self.assertEqual(len(residuals), 3)
        self.assertLess(max(field.max_norm() for field in residuals), 1e-2)
        linear = linear_backlund(seed, lam, np.hstack([-X0, np.eye(3)]), substeps=2)
        npt.assert_allclose(linear.A.values, transformed.A.values, atol=1e-4)
        self.assertIn("path", linear.diagnostics)

    def test_linear_matches_riccati(self):
        grid = cube(2, 81)
        seed = GsgeState.identity(grid)
        linear = linear_backlund(seed, 1.0, np.hstack([-QUARTER_TURN, np.eye(2)]))
        npt.assert_allclose(linear.A.values, rotation(soliton_angle(grid, 1.0)), atol=1e-6)
        self.assertTrue(np.all(linear.valid))

    def test_reprojection(self):
        grid = cube(2, 21)
        transformed = gsge_backlund(GsgeState.identity(grid), 2.0, QUARTER_TURN, reproject=True)
        self.assertLess(transformed.orthogonality_defect(), 1e-12)

    def test_validation(self):
        grid = cube(2, 21)
        seed = GsgeState.identity(grid)
        with self.assertRaises(ValueError):
            gsge_backlund(seed, 1.0, 2.0 * np.eye(2))
        with self.assertRaises(ValueError):
            gsge_backlund(seed, 1.0, np.eye(3))
        with self.assertRaises(ValueError):
            gsge_backlund(seed, 0.0, np.eye(2))
        with self.assertRaises(ValueError):
            linear_backlund(seed, 1.0, np.eye(2))
        x1, x2 = grid.coordinates()
        curved = GsgeState.from_a(Field(grid, rotation(3.0 * x1 * x2)))
        with self.assertRaises(UnverifiedSolutionError):
            gsge_backlund(curved, 1.0, QUARTER_TURN)
        with self.assertRaises(CompatibilityError):
            gsge_backlund(curved, 1.0, QUARTER_TURN, require_verified=False)


class GsgePermutabilityTestCase(unittest.TestCase):
    """Tests for algebraic closure of GSGE Bianchi quadrilaterals."""

    def test_matches_sine_gordon(self):
        grid = cube(2, 41)
        theta1, theta2 = math.pi / 2, math.pi / 3
        lam1 = BtDiag.from_angle(theta1).lam
        lam2 = BtDiag.from_angle(theta2).lam
        q1 = soliton_angle(grid, lam1)
        q2 = soliton_angle(grid, lam2, phase=0.3)
        A1 = GsgeState.from_a(Field(grid, rotation(q1)))
        A2 = GsgeState.from_a(Field(grid, rotation(q2)))
        A3 = gsge_permutability(GsgeState.identity(grid), A1, A2, theta1, theta2)
        q3 = 2.0 * np.arctan((lam1 + lam2) / (lam2 - lam1) * np.tan((q1 - q2) / 2.0))
        npt.assert_allclose(A3.A.values, rotation(q3), atol=1e-10)
        self.assertTrue(np.all(A3.valid))
        self.assertLess(A3.orthogonality_defect(), 1e-10)

    def test_three_dimensional(self):
        grid = cube(3, 31, 0.3)
        seed = GsgeState.identity(grid)
        theta1, theta2 = math.pi / 3, math.pi / 4
        lam1 = BtDiag.from_angle(theta1).lam
        lam2 = BtDiag.from_angle(theta2).lam
        X1 = expm(np.array([[0.0, 0.7, 0.4], [-0.7, 0.0, 0.5], [-0.4, -0.5, 0.0]]))
        X2 = expm(np.array([[0.0, -0.3, 0.9], [0.3, 0.0, 0.2], [-0.9, -0.2, 0.0]]))
        A1 = gsge_backlund(seed, lam1, X1, reproject=True)
        A2 = gsge_backlund(seed, lam2, X2, reproject=True)
        A3 = gsge_permutability(seed, A1, A2, theta1, theta2)
        self.assertLess(A3.orthogonality_defect(), 1e-8)
        for base, lam in ((A1, lam2), (A2, lam1)):
            mask = A3.valid & base.valid
            residual = max(field.max_norm(mask) for field in gsge_backlund_residual(base, A3, lam))
            self.assertLess(residual, 2e-2)

    def test_validation(self):
        grid = cube(2, 11)
        seed = GsgeState.identity(grid)
        with self.assertRaises(ValueError):
            gsge_permutability(seed, seed, seed, math.pi / 3, 2 * math.pi / 3)
        other = GsgeState.identity(cube(2, 13))
        with self.assertRaises(GridError):
            gsge_permutability(seed, other, seed, math.pi / 3, math.pi / 4)


class GsgeImmersionTestCase(unittest.TestCase):
    """Tests for the constant negative curvature submanifolds of GSGE
    solutions.
    """

    @classmethod
    def setUpClass(cls):
        cls.grid = cube(2, 101)
        cls.angle = soliton_angle(cls.grid, 1.5)
        cls.state = GsgeState.from_a(Field(cls.grid, rotation(cls.angle)))
        cls.surface = gsge_immersion(cls.state)

    def test_points(self):
        self.assertIs(self.surface.provenance, Provenance.GSGE)
        self.assertEqual(self.surface.ambient_dimension, 3)
        npt.assert_allclose(self.surface.points.values[50, 50], 0.0, atol=1e-12)
        self.assertLess(self.surface.diagnostic, 1e-3)

    def test_line_of_curvature_metric(self):
        report = fundamental_forms(self.surface)
        mask = interior(self.grid, 3)
        npt.assert_allclose(report.E.values[mask], np.cos(self.angle[mask]) ** 2, atol=1e-3)
        npt.assert_allclose(report.G.values[mask], np.sin(self.angle[mask]) ** 2, atol=1e-3)
        npt.assert_allclose(report.F.values[mask], 0.0, atol=1e-3)

    def test_curvature(self):
        report = fundamental_forms(self.surface)
        mask = interior(self.grid, 5) & (np.abs(np.sin(2.0 * self.angle)) > 0.3)
        self.assertLess(report.curvature_error(-1.0, mask), 1e-2)

    def test_unverified(self):
        grid = cube(2, 21)
        x1, x2 = grid.coordinates()
        with self.assertRaises(UnverifiedSolutionError):
            gsge_immersion(GsgeState.from_a(Field(grid, rotation(3.0 * x1 * x2))))


class SineGordonDictionaryTestCase(unittest.TestCase):
    """Tests for resampling sine-Gordon solutions as GSGE solutions."""

    def test_one_soliton(self):
        q = one_soliton(cube(2, 161, 2.0), 1.0)
        grid = cube(2, 41)
        state = sge_to_gsge(q, grid)
        npt.assert_allclose(state.A.values, rotation(soliton_angle(grid, 1.0)), atol=1e-5)
        self.assertLess(state.residuals["curvature"], 1e-2)

    def test_validation(self):
        q = one_soliton(cube(2, 21, 0.5), 1.0)
        with self.assertRaises(GridError):
            sge_to_gsge(q, cube(2, 11))
        with self.assertRaises(GridError):
            sge_to_gsge(q, cube(3, 5, 0.1))


if __name__ == "__main__":
    unittest.main()
