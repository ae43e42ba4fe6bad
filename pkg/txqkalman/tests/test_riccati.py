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

from txqkalman import riccati
from txqkalman.matrix import adjoint, min_eigenvalue_hermitian, norm
from txqkalman.model import (
    ChannelModel, ModelError, ModelSchedule, Segment, SignalModel,
    multimode_oscillator)
from txqkalman.selftest import random_models
from txqkalman.tests.helper import oscillator


class TestGain(TestCase):

    def test_oscillator_gain(self):
        sig, ch = oscillator(gamma=1.0, nu=1.0)
        k = riccati.gain([[2.0]], sig, ch)
        self.assertAlmostEqual(k[0, 0].real, -0.5, places=14)
        self.assertAlmostEqual(k[0, 0].imag, 0.0, places=14)

    def test_classical_gain(self):
        sig, ch = oscillator(gamma=1.0, nu=1.0)
        k = riccati.gain([[2.0]], sig, ch, vacuum=False)
        self.assertAlmostEqual(k[0, 0].real, -1.0, places=14)

    def test_filter_drift(self):
        sig, ch = oscillator(omega=1.0, gamma=1.0, nu=1.0)
        b = riccati.filter_drift(sig.A, [[-0.5]], ch.F)
        self.assertEqual(b[0, 0], complex(1.0, 1.0))
        self.assertRaises(ValueError, riccati.filter_drift, sig.A,
                          np.ones((2, 1)), ch.F)


class TestRightHandSide(TestCase):

    def test_matrix_form_matches_scalar_form(self):
        for hbar in (1.0, 1.7):
            sig, ch = oscillator(gamma=0.8, nu=0.4, hbar=hbar)
            for sigma in (0.0, 0.4, 2.5):
                rhs = riccati.riccati_rhs([[hbar * sigma]], sig, ch)
                self.assertAlmostEqual(
                    rhs[0, 0].real,
                    hbar * riccati.scalar_riccati_rhs(sigma, 0.8, 0.4),
                    places=12)

    def test_equilibrium_is_stationary(self):
        self.assertEqual(riccati.scalar_riccati_rhs(0.7, 2.0, 0.7), 0.0)
        sig, ch = oscillator(nu=0.7)
        self.assertTrue(norm(riccati.riccati_rhs([[0.7]], sig, ch)) <= 1e-14)

    def test_dimensionless_form(self):
        a = np.array([[0.5 + 1j, 0.2], [-0.2, 0.8]])
        sig, ch = multimode_oscillator(a, hbar=2.0, nu=0.5)
        s = np.array([[1.5, 0.2j], [-0.2j, 0.7]])
        expected = riccati.riccati_rhs(2.0 * s, sig, ch) / 2.0
        got = riccati.dimensionless_riccati_rhs(
            s, (a - adjoint(a)) / 2j, a + adjoint(a), 0.5)
        self.assertTrue(norm(got - expected) <= 1e-12)


class TestClosedForm(TestCase):

    def test_initial_and_limit(self):
        self.assertAlmostEqual(
            riccati.scalar_riccati_closed_form(3.0, 1.0, 1.0, 0.0), 3.0,
            places=14)
        self.assertAlmostEqual(
            riccati.scalar_riccati_closed_form(3.0, 1.0, 1.0, 50.0), 1.0,
            places=14)
        self.assertEqual(
            riccati.scalar_riccati_closed_form(0.5, 1.0, 0.5, 2.0), 0.5)

    def test_zero_temperature(self):
        for t in (0.0, 0.3, 1.0, 4.0):
            self.assertAlmostEqual(
                riccati.scalar_riccati_closed_form(1.0, 1.0, 0.0, t),
                1.0 / (2.0 * math.exp(t) - 1.0), places=14)

    def test_long_horizon_is_finite(self):
        value = riccati.scalar_riccati_closed_form(0.0, 2.0, 1.0, 1e4)
        self.assertAlmostEqual(value, 1.0, places=14)


class TestGrid(TestCase):

    def test_grid_steps(self):
        self.assertEqual(riccati.grid_steps(1.0, 0.01), 100)
        self.assertEqual(riccati.grid_steps(0.3, 0.1), 3)
        self.assertRaises(riccati.GridError, riccati.grid_steps, 1.0, 0.3)
        self.assertRaises(riccati.GridError, riccati.grid_steps, 0.0, 0.1)
        self.assertRaises(riccati.GridError, riccati.grid_steps, 1.0, 0.0)

    def test_rk4_step(self):
        h = 0.1
        state = riccati.rk4_step(lambda y: y, np.array([1.0]), h)
        self.assertAlmostEqual(
            state[0], 1 + h + h ** 2 / 2 + h ** 3 / 6 + h ** 4 / 24,
            places=15)


class TestIntegration(TestCase):

    def test_zero_temperature_closed_form(self):
        sig, ch = oscillator(omega=0.0, gamma=1.0, nu=0.0, sigma0=1.0)
        synth = riccati.integrate_riccati(sig, ch, 5.0, 0.01)
        exact = 1.0 / (2.0 * np.exp(synth.times) - 1.0)
        self.assertTrue(np.max(np.abs(synth.P[:, 0, 0] - exact)) <= 1e-8)
        self.assertAlmostEqual(synth.P[synth.index_of(1.0), 0, 0].real,
                               0.225399, places=6)
        self.assertTrue(0 <= synth.error_estimate <= 1e-8)

    def test_stationary_start(self):
        sig, ch = oscillator(nu=0.7, sigma0=0.7)
        synth = riccati.integrate_riccati(sig, ch, 5.0, 0.01)
        self.assertTrue(np.max(np.abs(synth.P[:, 0, 0] - 0.7)) <= 1e-12)
        self.assertTrue(np.max(np.abs(synth.K)) <= 1e-12)

    def test_scaled_hbar(self):
        sig, ch = oscillator(omega=1.3, gamma=0.8, nu=0.4, sigma0=2.5,
                             hbar=1.7)
        synth = riccati.integrate_riccati(sig, ch, 4.0, 0.01)
        exact = np.array([1.7 * riccati.scalar_riccati_closed_form(
            2.5, 0.8, 0.4, t) for t in synth.times])
        self.assertTrue(np.max(np.abs(synth.P[:, 0, 0] - exact)) <= 1e-8)

    def test_multimode_matches_dimensionless(self):
        a = np.array([[0.5 + 1j, 0.2], [-0.2, 0.8]])
        sig, ch = multimode_oscillator(a, hbar=2.0, nu=0.5, sigma0=2.0)
        synth = riccati.integrate_riccati(sig, ch, 2.0, 0.01)
        s = riccati.integrate_dimensionless(
            2.0 * np.eye(2), (a - adjoint(a)) / 2j, a + adjoint(a), 0.5,
            2.0, 0.01)
        self.assertEqual(s.shape, (201, 2, 2))
        self.assertTrue(np.max(np.abs(synth.P / 2.0 - s)) <= 1e-10)
        self.assertTrue(norm(s[-1] - s[-1].conj().T) == 0.0)

    def test_shapes(self):
        sig, ch = multimode_oscillator(np.diag([1.0, 2.0]))
        synth = riccati.integrate_riccati(sig, ch, 0.5, 0.05)
        self.assertEqual(len(synth.times), 11)
        self.assertEqual(synth.P.shape, (11, 2, 2))
        self.assertEqual(synth.K.shape, (11, 2, 2))
        self.assertEqual(synth.half_K.shape, (21, 2, 2))
        self.assertEqual((synth.n, synth.m), (2, 2))
        self.assertAlmostEqual(synth.t_end, 0.5)

    def test_hermitian_and_positive(self):
        for sig, ch in random_models(count=4):
            synth = riccati.integrate_riccati(sig, ch, 1.0, 0.01)
            for p in synth.P:
                self.assertEqual(norm(p - adjoint(p)), 0.0)
                self.assertTrue(min_eigenvalue_hermitian(p) >=
                                -1e-8 * norm(p))

    def test_orthogonality(self):
        for sig, ch in random_models(count=4):
            synth = riccati.integrate_riccati(sig, ch, 2.0, 0.01)
            for r, p, g in zip(synth.R, synth.P, synth.G_cl):
                self.assertTrue(norm(r - p - g) <= 1e-8 * max(1.0, norm(r)))
            self.assertTrue(norm(riccati.estimate_covariance(synth)[-1] -
                                 synth.G_cl[-1]) <= 1e-8 *
                            max(1.0, norm(synth.R[-1])))

    def test_commutator_matrix_positive(self):
        sig, ch = oscillator()
        synth = riccati.integrate_riccati(sig, ch, 3.0, 0.01)
        self.assertEqual(norm(synth.C_comm[0]), 0.0)
        for c in synth.C_comm:
            self.assertTrue(min_eigenvalue_hermitian(c) >= -1e-12)
        self.assertTrue(synth.C_comm[-1][0, 0].real > 0)

    def test_stationarity_residual(self):
        sig, ch = oscillator()
        synth = riccati.integrate_riccati(sig, ch, 20.0, 0.01)
        self.assertTrue(riccati.stationarity_residual(synth) <= 1e-8)
        self.assertAlmostEqual(synth.trace_error[-1], 1.0, places=8)

    def test_posterior_antinormal_covariance(self):
        sig, ch = oscillator()
        synth = riccati.integrate_riccati(sig, ch, 1.0, 0.1)
        cov = riccati.posterior_antinormal_covariance(synth.P[-1],
                                                      synth.G_cl[-1])
        self.assertTrue(norm(cov - synth.R[-1]) <= 1e-8)

    def test_positivity_lost(self):
        # Joint noise covariance [[0, 1], [1, 2]] is indefinite.
        sig = SignalModel(A=[[1.0]], J=[[1.0]], Q=[[0.0]], R0=[[0.0]],
                          C0=[[0.0]])
        ch = ChannelModel(F=[[0.0]], N=[[1.0]], T=[[1.0]], D=[[0.0]])
        e = self.assertRaises(riccati.PositivityLostError,
                              riccati.integrate_riccati, sig, ch, 1.0, 0.01)
        self.assertAlmostEqual(e.time, 0.01)
        self.assertTrue(e.min_eigenvalue < 0)

    def test_classical_needs_positive_noise(self):
        sig, ch = oscillator(nu=0.0)
        self.assertRaises(ModelError, riccati.integrate_riccati, sig, ch,
                          1.0, 0.1, vacuum=False)

    def test_classical_filter_is_sharper(self):
        sig, ch = oscillator(nu=1.0)
        quantum = riccati.integrate_riccati(sig, ch, 3.0, 0.01)
        classical = riccati.integrate_riccati(sig, ch, 3.0, 0.01,
                                              vacuum=False)
        self.assertTrue(classical.trace_error[-1] < quantum.trace_error[-1])

    def test_bad_grid(self):
        sig, ch = oscillator()
        self.assertRaises(riccati.GridError, riccati.integrate_riccati,
                          sig, ch, 1.0, 0.3)


class TestSynthesisGrid(TestCase):

    def setUp(self):
        sig, ch = oscillator()
        self.synth = riccati.integrate_riccati(sig, ch, 1.0, 0.01)

    def test_index_of(self):
        self.assertEqual(self.synth.index_of(0.0), 0)
        self.assertEqual(self.synth.index_of(0.5), 50)
        self.assertEqual(self.synth.index_of(1.0), 100)
        self.assertRaises(riccati.GridError, self.synth.index_of, 0.505)
        self.assertRaises(riccati.GridError, self.synth.index_of, 1.01)

    def test_gain_at(self):
        self.assertTrue(norm(self.synth.gain_at(0.5) - self.synth.K[50]) <=
                        1e-12)
        self.assertTrue(norm(self.synth.gain_at(0.505) -
                             self.synth.half_K[101]) <= 1e-12)
        expected = 0.5 * (self.synth.half_K[0] + self.synth.half_K[1])
        self.assertTrue(norm(self.synth.gain_at(0.0025) - expected) <= 1e-14)
        self.assertRaises(riccati.GridError, self.synth.gain_at, 1.1)


class TestSchedule(TestCase):

    def test_identical_segments(self):
        sig, ch = oscillator()
        constant = riccati.integrate_riccati(sig, ch, 2.0, 0.01)
        split = riccati.integrate_schedule(ModelSchedule((
            Segment(0.0, sig, ch), Segment(1.0, sig, ch))), 2.0, 0.01)
        np.testing.assert_array_equal(constant.P, split.P)

    def test_switch(self):
        first = oscillator(nu=1.0)
        second = oscillator(nu=0.0)
        before = riccati.integrate_riccati(first[0], first[1], 2.0, 0.01)
        switched = riccati.integrate_schedule(ModelSchedule((
            Segment(0.0, *first), Segment(1.0, *second))), 2.0, 0.01)
        np.testing.assert_array_equal(before.P[:101], switched.P[:101])
        self.assertTrue(switched.P[-1, 0, 0].real <
                        before.P[-1, 0, 0].real - 0.1)
