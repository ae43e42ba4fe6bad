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
Monte-Carlo check of a synthesized filter.

The signal and the heterodyne record are simulated through their classical
surrogate: circular complex Gaussian increments whose joint covariance per
unit time is C{[[Q, T+], [T, N + I]]}. Signal, record and filter estimate are
stepped with Euler-Maruyama

    ds = -A s dt + J dW_sig
    dy = F s dt + dW_meas
    dx = -A x dt + K(t) (dy - F x dt),    x(0) = 0

and the residual C{s - x} is compared with the Riccati prediction.

Trajectories run in fixed blocks, each with its own counter-based random
stream derived from the master seed and the block index. Blocks may run in
any order on any number of threads; their moments are merged in ascending
block order, so the bundle does not depend on the schedule.
"""

import logging
import math
import queue
from bisect import bisect_right
from collections import namedtuple
from dataclasses import dataclass

import numpy as np

from twisted.python import log
from twisted.python.threadpool import ThreadPool

from txqkalman.matrix import (
    NotPositiveDefiniteError, clamp_psd, factor_psd)
from txqkalman.model import (
    ModelError, ModelSchedule, check_compatible, joint_noise_covariance)
from txqkalman.riccati import GRID_TOLERANCE, GridError
from txqkalman.stats.moments import RunningMoments, paired_significance


TRAJECTORY_BLOCK = 512
KEEP_RECORDS = 4


class NoClassicalRealizationError(ModelError):
    """The joint noise covariance of a model is indefinite."""

    def __init__(self, min_eigenvalue):
        super(NoClassicalRealizationError, self).__init__(
            "no classical realization: joint noise covariance indefinite "
            "(minimum eigenvalue %.6g)" % (min_eigenvalue,))
        self.min_eigenvalue = min_eigenvalue


@dataclass(frozen=True, eq=False)
class SurrogateNoiseSpec(object):
    """Per-unit-time covariance of the stacked signal and measurement
    increments, with its factor C{L L+ = joint}."""

    joint: np.ndarray
    factor: np.ndarray

    @property
    def m(self):
        return self.joint.shape[0] // 2


def build_noise_spec(sig, ch):
    """Surrogate noise of a signal and channel pair.

    @raise NoClassicalRealizationError: If the joint covariance is not
        positive semidefinite.
    """
    check_compatible(sig, ch)
    try:
        joint = clamp_psd(joint_noise_covariance(sig, ch), "joint noise")
    except NotPositiveDefiniteError as e:
        raise NoClassicalRealizationError(e.min_eigenvalue)
    return SurrogateNoiseSpec(joint, factor_psd(joint))


def block_stream(seed, block):
    """Random stream of trajectory block C{block} under master C{seed}."""
    sequence = np.random.SeedSequence(seed, spawn_key=(block,))
    return np.random.Generator(np.random.Philox(sequence))


def circular_normal(stream, size):
    """Standard circular complex normals, C{E z z+ = I}, C{E z z^T = 0}."""
    real = stream.standard_normal(size)
    imag = stream.standard_normal(size)
    return (real + 1j * imag) / math.sqrt(2.0)


def sample_increments(spec, dt, stream, count=None):
    """Draw signal and measurement increments over C{dt}.

    @param count: Number of independent draws stacked along the first axis,
        or C{None} for a single pair of m-vectors.
    @return: C{(dW_sig, dW_meas)}.
    """
    if not dt > 0:
        raise ValueError("dt must be positive, got %r" % (dt,))
    m = spec.m
    size = 2 * m if count is None else (count, 2 * m)
    increments = math.sqrt(dt) * (circular_normal(stream, size) @
                                  spec.factor.T)
    return increments[..., :m], increments[..., m:]


@dataclass(frozen=True, eq=False)
class TrajectoryBundle(object):
    """Moments of a Monte-Carlo run on the synthesis grid C{times}.

    Paths (C{signal}, C{estimate} on the grid, C{records} of C{dy} on every
    step) are kept for the first C{len(signal)} trajectories only. The
    standard errors are NaN for a single trajectory.
    """

    seed: int
    dt: float
    times: np.ndarray
    n_traj: int
    gain_scale: float
    signal: np.ndarray
    estimate: np.ndarray
    records: np.ndarray
    residual_second_moment: np.ndarray
    residual_trace: np.ndarray
    standard_error: np.ndarray
    estimate_second_moment: np.ndarray
    time_averaged_residual: np.ndarray

    @property
    def t_end(self):
        return float(self.times[-1])


_BlockResult = namedtuple(
    "_BlockResult", "index count traces residual estimate time_averaged "
                    "signal_paths estimate_paths records")


class BundlePlan(object):
    """Everything the trajectory blocks of one run share.

    C{run_block} is safe to call from several threads at once.
    """

    def __init__(self, synth, dt, t_end, n_traj, seed, sig=None, ch=None,
                 gain_scale=1.0, keep_records=KEEP_RECORDS,
                 block_size=TRAJECTORY_BLOCK):
        if n_traj < 1:
            raise ValueError("n_traj must be at least 1, got %r" % (n_traj,))
        if not dt > 0:
            raise GridError("dt must be positive, got %r" % (dt,))
        ratio = int(round(synth.step / dt))
        if ratio < 1 or abs(ratio * dt - synth.step) > (
                GRID_TOLERANCE * synth.step):
            raise GridError("dt=%r does not divide the synthesis step %r" %
                            (dt, synth.step))
        if t_end > synth.t_end * (1.0 + GRID_TOLERANCE):
            raise GridError("t_end=%r is beyond the synthesis horizon %r" %
                            (t_end, synth.t_end))
        last = synth.index_of(t_end)
        if last < 1:
            raise GridError("t_end must cover at least one synthesis step")
        if sig is None and ch is None:
            schedule = synth.schedule
        elif sig is not None and ch is not None:
            schedule = ModelSchedule.constant(sig, ch)
        else:
            raise ValueError("give both sig and ch or neither")
        if (schedule.n, schedule.m) != (synth.n, synth.m):
            raise ModelError("model does not match the synthesized filter")

        self.synth = synth
        self.dt = float(dt)
        self.n_traj = int(n_traj)
        self.seed = int(seed)
        self.gain_scale = float(gain_scale)
        self.keep_records = min(int(keep_records), self.n_traj)
        self.block_size = int(block_size)
        self.ratio = ratio
        self.steps = last * ratio
        self.times = np.array(synth.times[:last + 1])
        self.n = schedule.n
        self.m = schedule.m

        starts = schedule.starts
        self._segment_of_step = [
            max(bisect_right(starts, k * self.dt) - 1, 0)
            for k in range(self.steps)]
        self._coefficients = []
        for segment in schedule.segments:
            sig, ch = segment.signal, segment.channel
            spec = build_noise_spec(sig, ch)
            self._coefficients.append(
                (sig.A.T, sig.J.T, ch.F.T, spec))
        self._gains_t = np.array([
            self.gain_scale * synth.gain_at(k * self.dt).T
            for k in range(self.steps)])
        self._initial_factor = factor_psd(schedule.initial.signal.R0)

    @property
    def blocks(self):
        return -(-self.n_traj // self.block_size)

    def block_count(self, index):
        return min(self.block_size, self.n_traj - index * self.block_size)

    def run_block(self, index):
        """Simulate trajectory block C{index}."""
        count = self.block_count(index)
        kept = max(min(self.keep_records - index * self.block_size, count), 0)
        stream = block_stream(self.seed, index)
        grid = len(self.times)
        n, dt = self.n, self.dt

        s = circular_normal(stream, (count, n)) @ self._initial_factor.T
        x = np.zeros((count, n), dtype=complex)
        residuals = np.empty((grid, count, n), dtype=complex)
        estimates = np.empty((grid, count, n), dtype=complex)
        signal_paths = np.empty((grid, kept, n), dtype=complex)
        records = np.empty((self.steps, kept, self.m), dtype=complex)
        residuals[0] = s - x
        estimates[0] = x
        signal_paths[0] = s[:kept]

        for k in range(self.steps):
            a_t, j_t, f_t, spec = self._coefficients[
                self._segment_of_step[k]]
            d_sig, d_meas = sample_increments(spec, dt, stream, count)
            dy = dt * (s @ f_t) + d_meas
            innovation = dy - dt * (x @ f_t)
            s = s - dt * (s @ a_t) + d_sig @ j_t
            x = x - dt * (x @ a_t) + innovation @ self._gains_t[k]
            records[k] = dy[:kept]
            if (k + 1) % self.ratio == 0:
                point = (k + 1) // self.ratio
                residuals[point] = s - x
                estimates[point] = x
                signal_paths[point] = s[:kept]

        traces = np.sum(np.abs(residuals) ** 2, axis=2).T
        # Trapezoidal time average of every trajectory's residual trace.
        time_averaged = (traces.sum(axis=1) -
                         0.5 * (traces[:, 0] + traces[:, -1])) / (grid - 1)
        trace_moments = RunningMoments((grid,))
        trace_moments.update_batch(traces)
        residual = RunningMoments.summary(count, np.einsum(
            "gbi,gbj->gij", residuals, np.conj(residuals)) / count)
        estimate = RunningMoments.summary(count, np.einsum(
            "gbi,gbj->gij", estimates, np.conj(estimates)) / count)
        return _BlockResult(index, count, trace_moments, residual, estimate,
                            time_averaged,
                            np.swapaxes(signal_paths, 0, 1),
                            np.swapaxes(estimates[:, :kept], 0, 1),
                            np.swapaxes(records, 0, 1))

    def assemble(self, results):
        """Merge block results, in block order, into a bundle."""
        results = sorted(results, key=lambda result: result.index)
        if [result.index for result in results] != list(range(self.blocks)):
            raise ValueError("expected results of all %d blocks" %
                             (self.blocks,))
        grid = len(self.times)
        n = self.n
        traces = RunningMoments((grid,))
        residual = RunningMoments.summary(
            0, np.zeros((grid, n, n), dtype=complex))
        estimate = RunningMoments.summary(
            0, np.zeros((grid, n, n), dtype=complex))
        for result in results:
            traces.merge(result.traces)
            residual.merge(result.residual)
            estimate.merge(result.estimate)
        error = traces.standard_error()
        if error is None:
            error = np.full(grid, np.nan)
        residual_moment = 0.5 * (residual.mean +
                                 np.conj(np.swapaxes(residual.mean, 1, 2)))
        return TrajectoryBundle(
            seed=self.seed,
            dt=self.dt,
            times=self.times,
            n_traj=self.n_traj,
            gain_scale=self.gain_scale,
            signal=np.concatenate([r.signal_paths for r in results]),
            estimate=np.concatenate([r.estimate_paths for r in results]),
            records=np.concatenate([r.records for r in results]),
            residual_second_moment=residual_moment,
            residual_trace=np.array(traces.mean),
            standard_error=np.asarray(error, dtype=float),
            estimate_second_moment=0.5 * (
                estimate.mean + np.conj(np.swapaxes(estimate.mean, 1, 2))),
            time_averaged_residual=np.concatenate(
                [r.time_averaged for r in results]))


def _run_threaded(plan, workers, on_block):
    pool = ThreadPool(minthreads=1, maxthreads=workers,
                      name="txqkalman-simulate")
    done = queue.Queue()

    def deliver(success, result):
        done.put((success, result))

    pool.start()
    try:
        for index in range(plan.blocks):
            pool.callInThreadWithCallback(deliver, plan.run_block, index)
        results = []
        for _ in range(plan.blocks):
            success, result = done.get()
            if not success:
                result.raiseException()
            if on_block is not None:
                on_block(result.index)
            results.append(result)
    finally:
        pool.stop()
    return results


def simulate_bundle(sig, ch, synth, dt, t_end, n_traj, seed, gain_scale=1.0,
                    workers=1, keep_records=KEEP_RECORDS, on_block=None):
    """Simulate C{n_traj} trajectories of signal, record and filter.

    With C{sig} and C{ch} both C{None} the schedule of the synthesis drives
    the signal. The filter uses C{gain_scale * K(t)}.

    @param on_block: Called with each finished block index.
    @raise GridError: If C{dt} does not divide the synthesis step or
        C{t_end} is not a synthesis grid point within its horizon.
    """
    plan = BundlePlan(synth, dt, t_end, n_traj, seed, sig, ch, gain_scale,
                      keep_records)
    log.msg("Simulating %d trajectories in %d blocks over %d steps of %g "
            "(gain scale %g)" % (plan.n_traj, plan.blocks, plan.steps,
                                 plan.dt, plan.gain_scale),
            logLevel=logging.DEBUG)
    if workers > 1 and plan.blocks > 1:
        results = _run_threaded(plan, min(workers, plan.blocks), on_block)
    else:
        results = []
        for index in range(plan.blocks):
            results.append(plan.run_block(index))
            if on_block is not None:
                on_block(index)
    return plan.assemble(results)


PerturbationResult = namedtuple("PerturbationResult",
                                "baseline perturbed significance")


def compare_bundles(baseline, perturbed):
    """Paired comparison of the time-averaged residual traces of two
    bundles run on common random numbers."""
    if (baseline.seed, baseline.n_traj, baseline.dt) != (
            perturbed.seed, perturbed.n_traj, perturbed.dt):
        raise ValueError("bundles do not share their random numbers")
    _, significance = paired_significance(baseline.time_averaged_residual,
                                          perturbed.time_averaged_residual)
    return PerturbationResult(
        float(np.mean(baseline.time_averaged_residual)),
        float(np.mean(perturbed.time_averaged_residual)),
        significance)


def gain_perturbation_test(sig, ch, synth, dt, t_end, n_traj, seed, epsilon,
                           workers=1):
    """Compare the synthesized gain with C{(1 + epsilon) K(t)}.

    Both runs use the same seed and therefore the same increments. The
    significance is the mean increase of the time-averaged residual trace
    in units of its paired standard error.
    """
    baseline = simulate_bundle(sig, ch, synth, dt, t_end, n_traj, seed,
                               workers=workers, keep_records=0)
    perturbed = simulate_bundle(sig, ch, synth, dt, t_end, n_traj, seed,
                                gain_scale=1.0 + epsilon, workers=workers,
                                keep_records=0)
    result = compare_bundles(baseline, perturbed)
    log.msg("Gain perturbation %+g: baseline %.6g, perturbed %.6g, "
            "significance %s" % (epsilon, result.baseline, result.perturbed,
                                 result.significance),
            logLevel=logging.INFO)
    return result
