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
"""
Synthesis of the optimal coherent filter.

The a posteriori correlation C{P} of the optimal filter solves

    dP/dt = J Q J+ - A P - P A+ - K (N + I) K+,   P(0) = R0

with the gain C{K = (P F+ + J T+)(N + I)^-1} and closed-loop drift
C{B = A + K F}. Alongside C{P} the integrator carries the unconditional
correlation C{R}, the estimate covariance C{G_cl} and the commutator matrix
C{C_comm} of the coherent filter, all with the same fixed-step RK4 scheme.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from twisted.python import log

from txqkalman.matrix import (
    MatrixError, adjoint, as_matrix, min_eigenvalue_hermitian, norm,
    solve_hpd, symmetrize)
from txqkalman.model import ModelError, ModelSchedule


POSITIVITY_TOLERANCE = 1e-8
GRID_TOLERANCE = 1e-9


class GridError(ValueError):
    """A time or interval does not fall on the integration grid."""


class PositivityLostError(ArithmeticError):
    """The posterior correlation acquired a negative eigenvalue."""

    def __init__(self, time, min_eigenvalue):
        super(PositivityLostError, self).__init__(
            "posterior covariance lost positivity at t=%.12g "
            "(minimum eigenvalue %.6g)" % (time, min_eigenvalue))
        self.time = time
        self.min_eigenvalue = min_eigenvalue


def effective_noise(ch, vacuum=True):
    """Measurement noise covariance per unit time: C{N + I} for the
    heterodyne record, C{N} for a classical observation."""
    if vacuum:
        return ch.N + np.eye(ch.m)
    return ch.N


def _cross_term(p, sig, ch):
    return p @ adjoint(ch.F) + sig.J @ adjoint(ch.T)


def gain(P, sig, ch, vacuum=True):
    """Optimal gain C{K = (P F+ + J T+)(N + I)^-1}."""
    p = as_matrix(P, sig.n, sig.n, "P")
    cross = _cross_term(p, sig, ch)
    # K W = X with Hermitian W is solved as W K+ = X+.
    return adjoint(solve_hpd(effective_noise(ch, vacuum), adjoint(cross)))


def filter_drift(A, K, F):
    """Closed-loop drift C{B = A + K F}."""
    a = as_matrix(A, name="A")
    k = as_matrix(K, a.shape[0], None, "K")
    f = as_matrix(F, k.shape[1], a.shape[0], "F")
    return a + k @ f


def riccati_rhs(P, sig, ch, vacuum=True):
    """Right-hand side of the a posteriori Riccati equation."""
    p = as_matrix(P, sig.n, sig.n, "P")
    k = gain(p, sig, ch, vacuum)
    quadratic = k @ adjoint(_cross_term(p, sig, ch))
    return (sig.J @ sig.Q @ adjoint(sig.J) - sig.A @ p - p @ adjoint(sig.A) -
            quadratic)


def scalar_riccati_rhs(Sigma, gamma, nu):
    """Occupation form of the oscillator Riccati equation."""
    return gamma / (1.0 + nu) * (nu - Sigma) * (1.0 + Sigma)


def scalar_riccati_closed_form(Sigma0, gamma, nu, t):
    """Exact solution of the scalar Riccati equation.

    With C{r = (1 + Sigma0)/(nu - Sigma0)} the solution reads
    C{(nu r e^{gamma t} - 1)/(1 + r e^{gamma t})}; it is evaluated in the
    equivalent form scaled by C{e^{-gamma t}}.
    """
    if Sigma0 == nu:
        return float(nu)
    r = (1.0 + Sigma0) / (nu - Sigma0)
    decay = math.exp(-gamma * t)
    denominator = decay + r
    assert denominator != 0
    return (nu * r - decay) / denominator


def dimensionless_riccati_rhs(S, H, G, nu):
    """Riccati equation for C{S = P/hbar} of an n-mode oscillator with
    C{H = (A - A+)/2i} and C{G = A + A+}."""
    s = as_matrix(S, name="S")
    n = s.shape[0]
    h = as_matrix(H, n, n, "H")
    g = as_matrix(G, n, n, "G")
    identity = np.eye(n)
    upper = s + identity
    lower = s - nu * identity
    return (1j * (s @ h - h @ s) -
            (upper @ g @ lower + lower @ g @ upper) / (2.0 * (nu + 1.0)))


def posterior_antinormal_covariance(P, G_cl):
    """Covariance C{P + G} of the a posteriori Gaussian state."""
    return symmetrize(as_matrix(P) + as_matrix(G_cl))


class _Coefficients(object):
    """Products of one schedule segment reused by every RK4 stage."""

    def __init__(self, sig, ch, vacuum):
        self.sig = sig
        self.ch = ch
        self.a = sig.A
        self.a_h = adjoint(sig.A)
        self.f = ch.F
        self.f_h = adjoint(ch.F)
        self.jt_h = sig.J @ adjoint(ch.T)
        self.jqj = sig.J @ sig.Q @ adjoint(sig.J)
        self.noise = effective_noise(ch, vacuum)
        try:
            self.noise_inv = solve_hpd(self.noise, np.eye(ch.m))
        except MatrixError:
            if vacuum:
                raise
            raise ModelError("a classical observation needs a positive "
                             "definite channel noise N")

    def gain(self, p):
        cross = p @ self.f_h + self.jt_h
        return cross @ self.noise_inv, cross

    def derivatives(self, state):
        p, r, g, c = state
        k, cross = self.gain(p)
        source = k @ adjoint(cross)
        b = self.a + k @ self.f
        return np.stack((
            self.jqj - self.a @ p - p @ self.a_h - source,
            self.jqj - self.a @ r - r @ self.a_h,
            source - self.a @ g - g @ self.a_h,
            k @ adjoint(k) - b @ c - c @ adjoint(b)))


class _CoefficientCache(object):

    def __init__(self, schedule, vacuum):
        self.schedule = schedule
        self.vacuum = vacuum
        self._by_start = {}

    def at(self, t):
        segment = self.schedule.at(t)
        coefficients = self._by_start.get(segment.start)
        if coefficients is None:
            coefficients = _Coefficients(segment.signal, segment.channel,
                                         self.vacuum)
            self._by_start[segment.start] = coefficients
        return coefficients


def _symmetrize_stack(state):
    return 0.5 * (state + np.conj(np.swapaxes(state, -1, -2)))


def rk4_step(derivatives, state, h):
    """One classical fourth-order Runge-Kutta step of an autonomous
    system."""
    k1 = derivatives(state)
    k2 = derivatives(state + 0.5 * h * k1)
    k3 = derivatives(state + 0.5 * h * k2)
    k4 = derivatives(state + h * k3)
    return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def grid_steps(t_end, step):
    """Number of steps of size C{step} that reach C{t_end} exactly."""
    if not t_end > 0:
        raise GridError("t_end must be positive, got %r" % (t_end,))
    if not step > 0:
        raise GridError("step must be positive, got %r" % (step,))
    count = int(round(t_end / step))
    if count < 1 or abs(count * step - t_end) > GRID_TOLERANCE * t_end:
        raise GridError("t_end=%r is not a multiple of step=%r" %
                        (t_end, step))
    return count


def _integrate(cache, initial, count, h):
    states = np.empty((count + 1,) + initial.shape, dtype=complex)
    states[0] = initial
    for i in range(count):
        t = i * h
        # Coefficients are frozen over a step at the segment active at its
        # midpoint.
        coefficients = cache.at(t + 0.5 * h)
        state = _symmetrize_stack(
            rk4_step(coefficients.derivatives, states[i], h))
        p = state[0]
        smallest = min_eigenvalue_hermitian(p)
        if smallest < -POSITIVITY_TOLERANCE * norm(p):
            raise PositivityLostError((i + 1) * h, smallest)
        states[i + 1] = state
    return states


@dataclass(frozen=True, eq=False)
class FilterSynthesis(object):
    """Optimal filter on the grid C{times}.

    The C{half_*} arrays hold the gain, closed-loop drift and noise source
    C{K (N + I) K+} on the grid refined by two, which is what an RK4 step
    of size C{step} evaluates.
    """

    times: np.ndarray
    P: np.ndarray
    K: np.ndarray
    B: np.ndarray
    trace_error: np.ndarray
    G_cl: np.ndarray
    R: np.ndarray
    C_comm: np.ndarray
    step: float
    error_estimate: float
    schedule: ModelSchedule
    vacuum: bool
    half_K: np.ndarray
    half_B: np.ndarray
    half_source: np.ndarray

    @property
    def t_end(self):
        return float(self.times[-1])

    @property
    def n(self):
        return self.P.shape[1]

    @property
    def m(self):
        return self.K.shape[2]

    def index_of(self, t):
        """Grid index of time C{t}.

        @raise GridError: If C{t} is not a grid point.
        """
        position = t / self.step
        index = int(round(position))
        if (index < 0 or index >= len(self.times) or
                abs(index - position) > GRID_TOLERANCE * max(1.0, position)):
            raise GridError("t=%r is not on the synthesis grid" % (t,))
        return index

    def gain_at(self, t):
        """Gain at C{t}, linear between half-grid points."""
        position = t / (0.5 * self.step)
        last = len(self.half_K) - 1
        if position < -GRID_TOLERANCE or position > last + GRID_TOLERANCE:
            raise GridError("t=%r is outside the synthesis horizon" % (t,))
        lower = min(max(int(math.floor(position)), 0), last)
        upper = min(lower + 1, last)
        weight = min(max(position - lower, 0.0), 1.0)
        return ((1.0 - weight) * self.half_K[lower] +
                weight * self.half_K[upper])


def integrate_schedule(schedule, t_end, step, vacuum=True):
    """Integrate the filter equations for a piecewise-constant schedule.

    The system is integrated with steps C{step} and C{step/2}; the finer run
    is reported on the coarse grid and the difference, divided by 15, is the
    Richardson estimate of the global error.

    @raise GridError: If C{t_end} is not a multiple of C{step}.
    @raise PositivityLostError: If C{P} loses positivity.
    """
    count = grid_steps(t_end, step)
    n = schedule.n
    r0 = schedule.initial.signal.R0
    zero = np.zeros((n, n), dtype=complex)
    initial = np.stack((r0, r0, zero, zero))
    cache = _CoefficientCache(schedule, vacuum)

    coarse = _integrate(cache, initial, count, step)
    fine = _integrate(cache, initial, 2 * count, 0.5 * step)
    error_estimate = max(norm(a - b) for a, b in
                         zip(coarse[:, 0], fine[::2, 0])) / 15.0

    half_times = 0.5 * step * np.arange(2 * count + 1)
    half_K = []
    half_B = []
    half_source = []
    for t, state in zip(half_times, fine):
        coefficients = cache.at(t)
        k, cross = coefficients.gain(state[0])
        half_K.append(k)
        half_B.append(coefficients.a + k @ coefficients.f)
        half_source.append(symmetrize(k @ adjoint(cross)))
    half_K = np.array(half_K)
    half_B = np.array(half_B)

    reported = fine[::2]
    p = reported[:, 0]
    synthesis = FilterSynthesis(
        times=step * np.arange(count + 1),
        P=p,
        K=half_K[::2],
        B=half_B[::2],
        trace_error=np.real(np.trace(p, axis1=1, axis2=2)),
        G_cl=reported[:, 2],
        R=reported[:, 1],
        C_comm=reported[:, 3],
        step=float(step),
        error_estimate=float(error_estimate),
        schedule=schedule,
        vacuum=vacuum,
        half_K=half_K,
        half_B=half_B,
        half_source=np.array(half_source))
    log.msg("Synthesized filter on %d steps of %g (Richardson error "
            "estimate %.3g, final trace %.12g)" % (
                count, step, error_estimate, synthesis.trace_error[-1]),
            logLevel=logging.DEBUG)
    return synthesis


def integrate_riccati(sig, ch, t_end, step, vacuum=True):
    """Synthesize the optimal filter of a time-invariant model."""
    return integrate_schedule(ModelSchedule.constant(sig, ch), t_end, step,
                              vacuum)


def stationarity_residual(synth):
    """Norm of the Riccati right-hand side at the end of the grid."""
    segment = synth.schedule.at(synth.t_end)
    return norm(riccati_rhs(synth.P[-1], segment.signal, segment.channel,
                            synth.vacuum))


def estimate_covariance(synth):
    """Second moment C{R - P} of the filter estimate started at zero."""
    return _symmetrize_stack(synth.R - synth.P)


def integrate_dimensionless(S0, H, G, nu, t_end, step):
    """RK4 solution of the dimensionless Riccati equation on the grid
    C{step * k}, as an array of matrices.

    Like L{integrate_schedule} it steps by C{step/2} and reports every other
    state.
    """
    count = grid_steps(t_end, step)
    s = as_matrix(S0, name="S0")
    h = as_matrix(H, s.shape[0], s.shape[0], "H")
    g = as_matrix(G, s.shape[0], s.shape[0], "G")

    def derivatives(state):
        return dimensionless_riccati_rhs(state, h, g, nu)

    states = [symmetrize(s)]
    for _ in range(2 * count):
        states.append(symmetrize(rk4_step(derivatives, states[-1],
                                          0.5 * step)))
    return np.array(states[::2])
