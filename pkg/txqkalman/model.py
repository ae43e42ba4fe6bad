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
Signal and channel models of a linear quantum diffusion.

The signal is the n-dimensional process

    dx/dt + A x = J a(t)

driven by m-dimensional white quantum noise with normal correlation C{Q}.
It is observed through the channel C{b = F x + a'} whose noise has normal
correlation C{N}, mutual normal correlation C{T} with the signal noise and
commutator cross matrix C{D}. C{C0} is the commutator matrix of the signal.
"""

import logging
import math
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np
from scipy import constants as codata
from scipy import linalg

from twisted.python import log

from txqkalman.matrix import (
    MatrixError, adjoint, as_matrix, clamp_psd, hermitian_residual, norm,
    psd_sqrt)


VALIDATION_TOLERANCE = 1e-10


class ModelError(ValueError):
    """A model violates one of its structural constraints."""


class NondemolitionError(ModelError):
    """No commutator cross matrix makes the channel nondemolition."""

    def __init__(self, message, residual):
        super(NondemolitionError, self).__init__(
            "%s (residual %.6g)" % (message, residual))
        self.residual = residual


def _hermitian_psd(value, size, name):
    matrix = as_matrix(value, size, size, name)
    try:
        return clamp_psd(matrix, name)
    except MatrixError as e:
        raise ModelError(str(e))


@dataclass(frozen=True, eq=False)
class SignalModel(object):
    """The quantum diffusion C{dx/dt + A x = J a(t)}.

    C{Q} and C{R0} are clamped to their positive semidefinite part on
    construction.
    """

    A: np.ndarray
    J: np.ndarray
    Q: np.ndarray
    R0: np.ndarray
    C0: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        try:
            a = as_matrix(self.A, name="A")
            n = a.shape[0]
            a = as_matrix(a, n, n, "A")
            j = as_matrix(self.J, n, None, "J")
            m = j.shape[1]
            c0 = as_matrix(self.C0, n, n, "C0")
        except MatrixError as e:
            raise ModelError(str(e))
        if hermitian_residual(c0) > VALIDATION_TOLERANCE * (1 + norm(c0)):
            raise ModelError("C0 must be Hermitian")
        if not self.hbar > 0:
            raise ModelError("hbar must be positive, got %r" % (self.hbar,))
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "J", j)
        object.__setattr__(self, "Q", _hermitian_psd(self.Q, m, "Q"))
        object.__setattr__(self, "R0", _hermitian_psd(self.R0, n, "R0"))
        object.__setattr__(self, "C0", 0.5 * (c0 + adjoint(c0)))
        object.__setattr__(self, "hbar", float(self.hbar))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.J.shape[1]


@dataclass(frozen=True, eq=False)
class ChannelModel(object):
    """The output channel C{b = F x + a'}."""

    F: np.ndarray
    N: np.ndarray
    T: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        try:
            f = as_matrix(self.F, name="F")
            m = f.shape[0]
            t = as_matrix(self.T, m, m, "T")
            d = as_matrix(self.D, m, m, "D")
        except MatrixError as e:
            raise ModelError(str(e))
        object.__setattr__(self, "F", f)
        object.__setattr__(self, "N", _hermitian_psd(self.N, m, "N"))
        object.__setattr__(self, "T", t)
        object.__setattr__(self, "D", d)

    @property
    def m(self):
        return self.F.shape[0]

    @property
    def n(self):
        return self.F.shape[1]


@dataclass(frozen=True)
class OscillatorModel(object):
    """Open oscillator of frequency C{omega} and damping C{gamma} watched
    through a matched line in thermal state C{nu}."""

    omega: float
    gamma: float
    nu: float
    sigma0: float
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("omega", "gamma", "nu", "sigma0", "hbar"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ModelError("%s must be a finite real, got %r" %
                                 (name, value))
            object.__setattr__(self, name, float(value))
        if not self.gamma > 0:
            raise ModelError("gamma must be positive")
        if self.nu < 0:
            raise ModelError("nu must be nonnegative")
        if self.sigma0 < 0:
            raise ModelError("sigma0 must be nonnegative")
        if not self.hbar > 0:
            raise ModelError("hbar must be positive")

    @property
    def alpha(self):
        return complex(self.gamma / 2.0, self.omega)


@dataclass(frozen=True)
class PhysicalConstants(object):
    hbar: float = 1.0
    boltzmann: float = 1.0

    def __post_init__(self):
        if not (self.hbar > 0 and self.boltzmann > 0):
            raise ModelError("physical constants must be positive")

    @classmethod
    def si(cls):
        """Reduced Planck and Boltzmann constants in SI units."""
        return cls(hbar=codata.hbar, boltzmann=codata.k)


@dataclass(frozen=True)
class Segment(object):
    start: float
    signal: SignalModel
    channel: ChannelModel


@dataclass(frozen=True)
class ModelSchedule(object):
    """Piecewise-constant models; segment C{i} is active on
    C{[start_i, start_{i+1})}."""

    segments: tuple = field(default_factory=tuple)

    def __post_init__(self):
        segments = tuple(self.segments)
        if not segments:
            raise ModelError("a schedule needs at least one segment")
        if segments[0].start != 0:
            raise ModelError("the first segment must start at 0")
        starts = [segment.start for segment in segments]
        if any(b <= a for a, b in zip(starts, starts[1:])):
            raise ModelError("segment starts must be strictly increasing")
        first = segments[0].signal
        for segment in segments:
            check_compatible(segment.signal, segment.channel)
            if (segment.signal.n, segment.signal.m) != (first.n, first.m):
                raise ModelError("all segments must share n and m")
            if segment.signal.hbar != first.hbar:
                raise ModelError("all segments must share hbar")
        object.__setattr__(self, "segments", segments)

    @classmethod
    def constant(cls, signal, channel):
        return cls((Segment(0.0, signal, channel),))

    @property
    def starts(self):
        return [segment.start for segment in self.segments]

    def at(self, t):
        """Return the segment active at time C{t}."""
        index = max(bisect_right(self.starts, t) - 1, 0)
        return self.segments[index]

    @property
    def initial(self):
        return self.segments[0]

    @property
    def n(self):
        return self.initial.signal.n

    @property
    def m(self):
        return self.initial.signal.m

    @property
    def hbar(self):
        return self.initial.signal.hbar


def check_compatible(sig, ch):
    """Raise C{ModelError} unless C{sig} and C{ch} have conforming shapes."""
    if ch.n != sig.n:
        raise ModelError("F must have %d columns to match A, got %d" %
                         (sig.n, ch.n))
    if ch.m != sig.m:
        raise ModelError("channel dimension %d does not match the %d "
                         "columns of J" % (ch.m, sig.m))


def joint_noise_covariance(sig, ch):
    """Block matrix C{[[Q, T+], [T, N + I]]} of the stacked signal and
    measurement noise increments per unit time."""
    check_compatible(sig, ch)
    m = sig.m
    return np.block([[sig.Q, adjoint(ch.T)],
                     [ch.T, ch.N + np.eye(m)]])


def nondemolition_scale(sig, ch):
    return norm(sig.J) * norm(ch.D) + norm(sig.C0) * norm(ch.F)


def validate_nondemolition(sig, ch):
    """Return C{|J D + C0 F+|}, zero for a nondemolition channel."""
    check_compatible(sig, ch)
    return norm(sig.J @ ch.D + sig.C0 @ adjoint(ch.F))


def solve_nondemolition_D(J, C0, F):
    """Solve C{J D + C0 F+ = 0} for the commutator cross matrix C{D}.

    A square invertible C{J} gives the exact solution; otherwise the least
    squares solution is accepted only when its residual vanishes.

    @raise NondemolitionError: If no C{D} satisfies the condition.
    """
    j = as_matrix(J, name="J")
    n = j.shape[0]
    c0 = as_matrix(C0, n, n, "C0")
    f = as_matrix(F, None, n, "F")
    target = -(c0 @ adjoint(f))
    d = linalg.lstsq(j, target)[0]
    residual = norm(j @ d - target)
    scale = norm(j) * norm(d) + norm(target)
    if residual > VALIDATION_TOLERANCE * max(scale, 1.0):
        raise NondemolitionError(
            "J D + C0 F+ = 0 has no solution", residual)
    log.msg("Nondemolition cross matrix solved with residual %.3g" %
            (residual,), logLevel=logging.DEBUG)
    return d


def validate_commutator_preservation(sig):
    """Return C{|A C0 + C0 A+ - J J+|}, zero when the commutators of the
    signal are preserved in time."""
    return norm(sig.A @ sig.C0 + sig.C0 @ adjoint(sig.A) -
                sig.J @ adjoint(sig.J))


def oscillator_to_general(osc):
    """Map the open oscillator onto a one-dimensional signal/channel pair."""
    hbar, gamma, nu = osc.hbar, osc.gamma, osc.nu
    sig = SignalModel(
        A=[[osc.alpha]],
        J=[[math.sqrt(hbar * gamma)]],
        Q=[[nu]],
        R0=[[hbar * osc.sigma0]],
        C0=[[hbar]],
        hbar=hbar)
    ch = ChannelModel(
        F=[[-math.sqrt(gamma / hbar)]],
        N=[[nu]],
        T=[[nu]],
        D=[[1.0]])
    return sig, ch


def multimode_oscillator(A, hbar=1.0, nu=0.0, sigma0=0.0):
    """Map an n-mode oscillator with drift C{A} onto the general form.

    The coupling is the Hermitian root C{J = sqrt(hbar (A + A+))}, the line
    reads C{F = -J+/hbar} and both noises are thermal with occupation
    C{nu}, so the canonical commutators C{hbar I} are preserved.

    @param sigma0: Initial occupation, a scalar or an n x n matrix.
    @raise ModelError: If C{A + A+} is not positive semidefinite.
    """
    a = as_matrix(A, name="A")
    n = a.shape[0]
    if not hbar > 0:
        raise ModelError("hbar must be positive")
    if nu < 0:
        raise ModelError("nu must be nonnegative")
    try:
        damping = clamp_psd(a + adjoint(a), "A + A+")
    except MatrixError as e:
        raise ModelError(str(e))
    j = math.sqrt(hbar) * psd_sqrt(damping)
    initial = np.asarray(sigma0, dtype=complex)
    if initial.ndim == 0:
        initial = complex(initial) * np.eye(n)
    identity = np.eye(n)
    sig = SignalModel(A=a, J=j, Q=nu * identity, R0=hbar * initial,
                      C0=hbar * identity, hbar=hbar)
    ch = ChannelModel(F=-adjoint(j) / hbar, N=nu * identity,
                      T=nu * identity, D=identity)
    return sig, ch


def mean_occupation(temp, gamma, constants=None):
    """Equilibrium occupation C{1 / (exp(hbar gamma / k temp) - 1)}."""
    if constants is None:
        constants = PhysicalConstants()
    if not temp > 0:
        raise ModelError("temperature must be positive, got %r" % (temp,))
    ratio = constants.hbar * gamma / (constants.boltzmann * temp)
    # e^-r / (1 - e^-r) stays finite for very cold receivers.
    return math.exp(-ratio) / -math.expm1(-ratio)


def effective_intensity(nu, gamma, hbar):
    """Intensity C{hbar (nu + 1) gamma} of the heterodyne record noise."""
    if nu < 0:
        raise ModelError("nu must be nonnegative")
    return hbar * (nu + 1.0) * gamma


def temperature_from_occupation(sigma_occ, omega, constants=None):
    """Temperature C{hbar omega / (k ln(1 + 1/sigma))} of an oscillator
    with occupation C{sigma_occ}."""
    if constants is None:
        constants = PhysicalConstants()
    if not sigma_occ > 0:
        raise ModelError("occupation must be positive, got %r" % (sigma_occ,))
    if not omega > 0:
        raise ModelError("omega must be positive, got %r" % (omega,))
    return (constants.hbar * omega /
            (constants.boltzmann * math.log1p(1.0 / sigma_occ)))
