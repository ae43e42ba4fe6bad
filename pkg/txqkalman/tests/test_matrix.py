# Copyright (C) 2024 txQKalman Developers
#
# Permission is hereby granted, free of charge, to any person obtaining
# a copy of this software and associated documentation files (the
# "Software"), to deal in the Software without restriction, including
# without limitation the rights to use, copy, modify, merge, publish,
# distribute, sublicense, and/or sell copies of the Software, and to
# permit persons to whom the Software is furnished to do so, subject to
# the following conditions:
#
# The above copyright notice and this permission notice shall be
# included in all copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND,
# EXPRESS OR IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF
# MERCHANTABILITY, FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT.
# IN NO EVENT SHALL THE AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY
# CLAIM, DAMAGES OR OTHER LIABILITY, WHETHER IN AN ACTION OF CONTRACT,
# TORT OR OTHERWISE, ARISING FROM, OUT OF OR IN CONNECTION WITH THE
# SOFTWARE OR THE USE OR OTHER DEALINGS IN THE SOFTWARE.

import math

import numpy as np

from twisted.trial.unittest import TestCase

from txqkalman import matrix
from txqkalman.tests.helper import random_complex, random_psd


class TestAdjoint(TestCase):

    def test_conjugate_transpose(self):
        m = np.array([[0, 1j], [0, 0]])
        np.testing.assert_array_equal(matrix.adjoint(m),
                                      np.array([[0, 0], [-1j, 0]]))

    def test_involution_and_product_rule(self):
        rng = np.random.default_rng(3)
        a = random_complex(rng, 3, 4)
        b = random_complex(rng, 4, 2)
        np.testing.assert_array_equal(matrix.adjoint(matrix.adjoint(a)), a)
        self.assertTrue(matrix.norm(matrix.adjoint(a @ b) -
                                    matrix.adjoint(b) @ matrix.adjoint(a))
                        <= 1e-12)


class TestAsMatrix(TestCase):

    def test_scalar_and_vector(self):
        self.assertEqual(matrix.as_matrix(2.0).shape, (1, 1))
        self.assertEqual(matrix.as_matrix([1, 2, 3]).shape, (3, 1))

    def test_shape_checked(self):
        self.assertRaises(matrix.DimensionError, matrix.as_matrix,
                          np.eye(2), 3, None, "A")

    def test_non_finite_rejected(self):
        self.assertRaises(matrix.MatrixError, matrix.as_matrix,
                          [[float("nan")]])


class TestHermitian(TestCase):

    def test_residual(self):
        self.assertEqual(matrix.hermitian_residual([[1, 0], [0, 2]]), 0.0)
        self.assertAlmostEqual(matrix.hermitian_residual([[0, 1], [0, 0]]),
                               math.sqrt(2), places=14)

    def test_symmetrized_residual_vanishes(self):
        m = random_complex(np.random.default_rng(1), 4, 4)
        self.assertEqual(matrix.hermitian_residual(m + matrix.adjoint(m)),
                         0.0)

    def test_non_square_rejected(self):
        self.assertRaises(matrix.DimensionError, matrix.hermitian_residual,
                          np.zeros((2, 3)))
        self.assertRaises(matrix.DimensionError,
                          matrix.min_eigenvalue_hermitian, np.zeros((2, 3)))

    def test_min_eigenvalue(self):
        self.assertAlmostEqual(matrix.min_eigenvalue_hermitian(np.eye(3)),
                               1.0, places=12)
        self.assertAlmostEqual(
            matrix.min_eigenvalue_hermitian([[2, 1], [1, 2]]), 1.0,
            places=12)
        self.assertAlmostEqual(
            matrix.min_eigenvalue_hermitian(np.diag([0.0, 1.0])), 0.0,
            places=12)


class TestSolveHPD(TestCase):

    def test_identity_and_scaled(self):
        b = random_complex(np.random.default_rng(2), 3, 2)
        np.testing.assert_allclose(matrix.solve_hpd(np.eye(3), b), b)
        np.testing.assert_allclose(matrix.solve_hpd(2 * np.eye(2),
                                                    np.eye(2)),
                                   0.5 * np.eye(2))

    def test_channel_noise(self):
        nu = 1.0
        np.testing.assert_allclose(
            matrix.solve_hpd(nu * np.eye(1) + np.eye(1), np.eye(1)),
            [[0.5]])

    def test_residual_on_random_matrices(self):
        rng = np.random.default_rng(4)
        for size in (1, 2, 5, 8):
            h = random_psd(rng, size) + 0.1 * np.eye(size)
            b = random_complex(rng, size, 3)
            x = matrix.solve_hpd(h, b)
            self.assertTrue(matrix.norm(h @ x - b) <=
                            1e-12 * matrix.norm(b) * np.linalg.cond(h))

    def test_vector_right_hand_side(self):
        x = matrix.solve_hpd(2 * np.eye(2), np.array([1.0, 2.0]))
        self.assertEqual(x.shape, (2,))

    def test_indefinite_rejected(self):
        e = self.assertRaises(matrix.NotPositiveDefiniteError,
                              matrix.solve_hpd, np.diag([1.0, -1.0]),
                              np.eye(2))
        self.assertAlmostEqual(e.min_eigenvalue, -1.0)
        self.assertRaises(matrix.NotPositiveDefiniteError,
                          matrix.solve_hpd, np.diag([1.0, 0.0]), np.eye(2))


class TestFactorPSD(TestCase):

    def assertReconstructs(self, h):
        l = matrix.factor_psd(h)
        self.assertTrue(matrix.norm(l @ matrix.adjoint(l) - h) <=
                        1e-10 * (1 + matrix.norm(h)))
        np.testing.assert_array_equal(np.triu(l, 1), 0)

    def test_identity(self):
        np.testing.assert_allclose(np.abs(matrix.factor_psd(np.eye(3))),
                                   np.eye(3), atol=1e-15)

    def test_joint_noise_block(self):
        nu = 1.0
        self.assertReconstructs(np.array([[nu, nu], [nu, nu + 1]]))

    def test_zero(self):
        np.testing.assert_array_equal(matrix.factor_psd(np.zeros((2, 2))),
                                      np.zeros((2, 2)))

    def test_random_psd_up_to_eight(self):
        rng = np.random.default_rng(5)
        for size in range(1, 9):
            self.assertReconstructs(random_psd(rng, size))
            self.assertReconstructs(random_psd(rng, size, rank=1))

    def test_small_negative_eigenvalues_clamped(self):
        h = np.diag([1.0, -1e-13])
        self.assertReconstructs(np.diag([1.0, 0.0]))
        l = matrix.factor_psd(h)
        self.assertTrue(matrix.norm(l @ matrix.adjoint(l) - h) <= 1e-12)

    def test_indefinite_rejected(self):
        e = self.assertRaises(matrix.NotPositiveDefiniteError,
                              matrix.factor_psd, np.diag([1.0, -0.5]))
        self.assertIn("not positive semidefinite", str(e))


class TestClampAndRoot(TestCase):

    def test_clamp_keeps_psd_matrix(self):
        h = np.array([[2.0, 1.0], [1.0, 2.0]])
        np.testing.assert_allclose(matrix.clamp_psd(h), h)

    def test_psd_sqrt(self):
        h = random_psd(np.random.default_rng(6), 3)
        root = matrix.psd_sqrt(h)
        self.assertTrue(matrix.norm(root @ root - h) <= 1e-10 *
                        matrix.norm(h))
        self.assertEqual(matrix.hermitian_residual(root), 0.0)
