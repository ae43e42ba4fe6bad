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
Running means and variances of array-valued samples.

Single samples are folded in with Welford's update and whole batches are
combined with the pairwise formula of Chan, Golub and LeVeque, so a large
Monte-Carlo run can be reduced block by block without keeping the samples.

See:
  - U{Accurately computing running variance
    <http://www.johndcook.com/standard_deviation.html>}
"""

import math

import numpy as np


class RunningMoments(object):
    """Mean and spread of samples of a fixed shape.

    For complex samples the spread is C{E|x - mean|^2}, elementwise.
    """

    def __init__(self, shape=(), dtype=float):
        self.shape = tuple(shape)
        self.dtype = np.dtype(dtype)
        self.clear()

    def clear(self):
        self.count = 0
        self.mean = np.zeros(self.shape, dtype=self.dtype)
        self._squares = np.zeros(self.shape, dtype=float)

    @classmethod
    def summary(cls, count, mean, squares=None):
        """Moments of C{count} samples with the given mean and sum of
        squared deviations; without C{squares} only the mean is kept."""
        mean = np.asarray(mean)
        moments = cls(mean.shape, mean.dtype)
        moments.count = int(count)
        moments.mean = np.array(mean)
        if squares is None:
            moments._squares = None
        else:
            moments._squares = np.array(squares, dtype=float)
        return moments

    def update(self, value):
        """Add one sample."""
        value = np.asarray(value, dtype=self.dtype)
        self.count += 1
        delta = value - self.mean
        self.mean = self.mean + delta / self.count
        self._squares = self._squares + np.real(
            np.conj(delta) * (value - self.mean))

    def update_batch(self, values):
        """Add the samples stacked along the first axis of C{values}."""
        values = np.asarray(values, dtype=self.dtype)
        if values.shape[1:] != self.shape:
            raise ValueError("expected samples of shape %r, got %r" %
                             (self.shape, values.shape[1:]))
        if len(values) == 0:
            return
        batch = RunningMoments(self.shape, self.dtype)
        batch.count = len(values)
        batch.mean = values.mean(axis=0)
        batch._squares = (np.abs(values - batch.mean) ** 2).sum(axis=0)
        self.merge(batch)

    def merge(self, other):
        """Fold the moments of C{other} into this accumulator."""
        if other.count == 0:
            return
        if self.count == 0:
            self.count = other.count
            self.mean = np.array(other.mean, dtype=self.dtype)
            self._squares = (None if other._squares is None else
                             np.array(other._squares, dtype=float))
            return
        total = self.count + other.count
        delta = other.mean - self.mean
        self.mean = self.mean + delta * (float(other.count) / total)
        if self._squares is None or other._squares is None:
            self._squares = None
        else:
            self._squares = (self._squares + other._squares +
                             np.abs(delta) ** 2 *
                             (float(self.count) * other.count / total))
        self.count = total

    def variance(self):
        """Unbiased sample variance, or C{None} below two samples."""
        if self.count <= 1 or self._squares is None:
            return None
        return self._squares / (self.count - 1)

    def standard_error(self):
        """Standard error of the mean, or C{None} below two samples."""
        variance = self.variance()
        if variance is None:
            return None
        return np.sqrt(variance / self.count)


def paired_significance(baseline, perturbed):
    """Mean difference of paired samples and its size in standard errors.

    @return: C{(mean_difference, significance)}; the significance is
        C{None} when it cannot be formed.
    """
    differences = np.asarray(perturbed, dtype=float) - np.asarray(
        baseline, dtype=float)
    moments = RunningMoments()
    moments.update_batch(differences)
    error = moments.standard_error()
    mean = float(moments.mean)
    if error is None:
        return mean, None
    error = float(error)
    if error == 0.0:
        if mean == 0.0:
            return mean, 0.0
        return mean, math.copysign(math.inf, mean)
    return mean, mean / error
