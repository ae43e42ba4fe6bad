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
Gaussian transition kernels of a synthesized filter.

The filter estimate is the linear process C{dx = -B x dt + K dy}, so its
transition from time C{s} to C{t} is Gaussian: the mean moves by C{M} and the
spread grows to C{V}. Kernels compose by the Smolukhowsky rule and their
characteristic functions are positive definite in the sense of Bochner.
"""

import logging
from dataclasses import dataclass

import numpy as np

from twisted.python import log

from txqkalman.matrix import (
    adjoint, as_matrix, clamp_psd, min_eigenvalue_hermitian, norm,
    symmetrize)
from txqkalman.riccati import GRID_TOLERANCE, effective_noise


MAX_GRAM_SIZE = 32


class KernelError(ValueError):
    """Kernels or intervals that cannot be combined or built."""


@dataclass(frozen=True, eq=False)
class GaussianKernel(object):
    """Transition C{x(s) -> N(M x(s), V)} over C{[s, t]}."""

    s: float
    t: float
    M: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        if self.t < self.s:
            raise KernelError("kernel interval [%r, %r] is reversed" %
                              (self.s, self.t))
        m = as_matrix(self.M, name="M")
        n = m.shape[0]
        object.__setattr__(self, "M", as_matrix(m, n, n, "M"))
        object.__setattr__(self, "V", clamp_psd(as_matrix(self.V, n, n, "V"),
                                                "V"))

    @property
    def n(self):
        return self.M.shape[0]

    @classmethod
    def identity(cls, n, t=0.0):
        return cls(t, t, np.eye(n, dtype=complex),
                   np.zeros((n, n), dtype=complex))


def _source(synth, ch):
    if ch is None:
        return synth.half_source
    if ch.m != synth.m or ch.n != synth.n:
        raise KernelError("channel does not match the synthesized filter")
    noise = effective_noise(ch, synth.vacuum)
    return np.array([symmetrize(k @ noise @ adjoint(k))
                     for k in synth.half_K])


def kernel_from_filter(synth, ch, s, t):
    """Transition kernel of the filter estimate over C{[s, t]}.

    C{M} and C{V} solve C{dM = -B M}, C{dV = -B V - V B+ + K (N + I) K+}
    from C{(I, 0)} at C{s}, integrated with RK4 on the synthesis grid using
    the drift and noise source recorded at the half steps. With C{ch} left
    as C{None} the noise source recorded by the synthesis is used.

    @raise GridError: If C{s} or C{t} is not a synthesis grid point.
    @raise KernelError: If C{t < s}.
    """
    if t < s:
        raise KernelError("kernel end %r precedes start %r" % (t, s))
    first = synth.index_of(s)
    last = synth.index_of(t)
    n = synth.n
    if first == last:
        return GaussianKernel.identity(n, float(synth.times[first]))
    source = _source(synth, ch)
    drift = synth.half_B
    h = synth.step

    def derivatives(index, m, v):
        b = drift[index]
        return -b @ m, source[index] - b @ v - v @ adjoint(b)

    m = np.eye(n, dtype=complex)
    v = np.zeros((n, n), dtype=complex)
    for j in range(first, last):
        start, middle, end = 2 * j, 2 * j + 1, 2 * j + 2
        m1, v1 = derivatives(start, m, v)
        m2, v2 = derivatives(middle, m + 0.5 * h * m1, v + 0.5 * h * v1)
        m3, v3 = derivatives(middle, m + 0.5 * h * m2, v + 0.5 * h * v2)
        m4, v4 = derivatives(end, m + h * m3, v + h * v3)
        m = m + (h / 6.0) * (m1 + 2.0 * m2 + 2.0 * m3 + m4)
        v = symmetrize(v + (h / 6.0) * (v1 + 2.0 * v2 + 2.0 * v3 + v4))
    return GaussianKernel(float(synth.times[first]), float(synth.times[last]),
                          m, v)


def compose(k1, k2):
    """Kernel of C{k1} followed by C{k2}.

    @raise KernelError: If C{k1} does not end where C{k2} starts.
    """
    if abs(k1.t - k2.s) > GRID_TOLERANCE * max(1.0, abs(k1.t)):
        raise KernelError("cannot compose [%r, %r] with [%r, %r]" %
                          (k1.s, k1.t, k2.s, k2.t))
    if k1.n != k2.n:
        raise KernelError("kernel dimensions differ: %d and %d" %
                          (k1.n, k2.n))
    return GaussianKernel(k1.s, k2.t, k2.M @ k1.M,
                          symmetrize(k2.V + k2.M @ k1.V @ adjoint(k2.M)))


def chapman_kolmogorov_residual(synth, ch, t0, t1, t2):
    """Mismatch between the kernel over C{[t0, t2]} and the composition of
    the kernels over C{[t0, t1]} and C{[t1, t2]}."""
    if not t0 <= t1 <= t2:
        raise KernelError("expected t0 <= t1 <= t2, got %r, %r, %r" %
                          (t0, t1, t2))
    whole = kernel_from_filter(synth, ch, t0, t2)
    first = kernel_from_filter(synth, ch, t0, t1)
    second = kernel_from_filter(synth, ch, t1, t2)
    return (norm(whole.M - second.M @ first.M) +
            norm(whole.V - (second.V + second.M @ first.V @
                            adjoint(second.M))))


def characteristic_function(k, x_s, u):
    """Characteristic function C{E exp(i (u+ x + x+ u))} of the kernel
    started at C{x_s}."""
    x = as_matrix(x_s, k.n, 1, "x_s")[:, 0]
    u = as_matrix(u, k.n, 1, "u")[:, 0]
    mean = k.M @ x
    phase = 2.0 * np.real(np.vdot(u, mean))
    spread = np.real(np.vdot(u, k.V @ u))
    return complex(np.exp(1j * phase - spread))


def cf_positivity_gram(k, x_s, u_list):
    """Smallest eigenvalue of C{[phi(u_k - u_l)]}."""
    points = list(u_list)
    if not points:
        raise KernelError("at least one point is needed")
    if len(points) > MAX_GRAM_SIZE:
        raise KernelError("at most %d points are supported, got %d" %
                          (MAX_GRAM_SIZE, len(points)))
    vectors = [as_matrix(u, k.n, 1, "u")[:, 0] for u in points]
    size = len(vectors)
    gram = np.empty((size, size), dtype=complex)
    for row in range(size):
        for col in range(size):
            gram[row, col] = characteristic_function(
                k, x_s, vectors[row] - vectors[col])
    return min_eigenvalue_hermitian(gram)


def coherent_measure_normalization_residual(C, half_width, points_per_axis):
    """Distance from one of the midpoint-rule integral of the coherent
    density C{exp(-|x|^2/C)/(pi C)} over the square of the given
    half-width."""
    c = as_matrix(C, name="C")
    if c.shape != (1, 1):
        raise KernelError("the normalization check is scalar, got %dx%d" %
                          c.shape)
    value = c[0, 0]
    if abs(value.imag) > 0 or not value.real > 0:
        raise KernelError("C must be positive, got %r" % (value,))
    if half_width < 0:
        raise KernelError("half_width must not be negative")
    if points_per_axis < 1:
        raise KernelError("points_per_axis must be positive")
    c = value.real
    width = 2.0 * half_width / points_per_axis
    centres = -half_width + width * (np.arange(points_per_axis) + 0.5)
    squares = np.add.outer(centres ** 2, centres ** 2)
    total = np.exp(-squares / c).sum() * width * width / (np.pi * c)
    return abs(total - 1.0)


def random_interval(synth, rng):
    """Grid-aligned C{(t0, t1, t2)} drawn from C{rng}."""
    indices = np.sort(rng.choice(len(synth.times), size=3, replace=True))
    return tuple(float(synth.times[i]) for i in indices)


def chapman_kolmogorov_sweep(synth, splits, rng, ch=None):
    """Largest Chapman-Kolmogorov residual over random splits."""
    worst = 0.0
    for _ in range(splits):
        t0, t1, t2 = random_interval(synth, rng)
        worst = max(worst, chapman_kolmogorov_residual(synth, ch, t0, t1, t2))
    log.msg("Chapman-Kolmogorov sweep over %d splits: worst residual %.3g" %
            (splits, worst), logLevel=logging.DEBUG)
    return worst


def _complex_normal(rng, size):
    return (rng.standard_normal(size) +
            1j * rng.standard_normal(size)) / np.sqrt(2.0)


def bochner_sweep(synth, draws, rng, points=16, ch=None):
    """Smallest Gram eigenvalue over random kernels, starts and point sets
    of the synthesized filter."""
    worst = np.inf
    n = synth.n
    for _ in range(draws):
        t0, _, t2 = random_interval(synth, rng)
        kernel = kernel_from_filter(synth, ch, t0, t2)
        x_s = _complex_normal(rng, n)
        u_list = [_complex_normal(rng, n) for _ in range(points)]
        worst = min(worst, cf_positivity_gram(kernel, x_s, u_list))
    log.msg("Bochner sweep over %d draws: smallest eigenvalue %.3g" %
            (draws, worst), logLevel=logging.DEBUG)
    return float(worst)
