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
The C{qkalman} command.

Every subcommand writes its artifacts to the output directory and a JSON
report to standard output. Exit codes: 0 pass, 1 input error, 2 constraint
or grid error, 3 numerical failure, 4 statistical failure.
"""

import logging
import os
import sys

import numpy as np

from twisted.internet import defer, task
from twisted.internet.threads import deferToThreadPool
from twisted.python import log, usage
from twisted.python.threadpool import ThreadPool

from txqkalman import output, selftest
from txqkalman.kernels import (
    KernelError, bochner_sweep, chapman_kolmogorov_sweep,
    coherent_measure_normalization_residual)
from txqkalman.matrix import (
    MatrixError, NotPositiveDefiniteError, min_eigenvalue_hermitian, norm)
from txqkalman.model import (
    ModelError, joint_noise_covariance, nondemolition_scale,
    validate_commutator_preservation, validate_nondemolition)
from txqkalman.modelfile import ModelFileError, load_model
from txqkalman.process import resource_reporters
from txqkalman.report import Progress, progress_monitor
from txqkalman.riccati import (
    GridError, PositivityLostError, integrate_schedule, stationarity_residual,
    estimate_covariance)
from txqkalman.service import QKalmanOptions, build_run_config
from txqkalman.simulate import BundlePlan, compare_bundles


EXIT_OK = 0
EXIT_INPUT = 1
EXIT_CONSTRAINT = 2
EXIT_NUMERICAL = 3
EXIT_STATISTICAL = 4

STRUCTURE_TOLERANCE = 1e-10
Z_LIMIT = 4.0
CHAPMAN_KOLMOGOROV_TOLERANCE = 1e-8
BOCHNER_TOLERANCE = 1e-10
NORMALIZATION_TOLERANCE = 1e-6
PROGRESS_INTERVAL = 5.0


def exit_code_for(error):
    """Stable exit code of an exception raised by a command."""
    if isinstance(error, (ModelFileError, usage.UsageError)):
        return EXIT_INPUT
    if isinstance(error, (PositivityLostError, NotPositiveDefiniteError)):
        return EXIT_NUMERICAL
    if isinstance(error, (ModelError, GridError, KernelError, MatrixError)):
        return EXIT_CONSTRAINT
    return None


def validation_report(model):
    """Structural residuals of every segment of a model, worst case."""
    nondemolition = 0.0
    preservation = 0.0
    joint_minimum = np.inf
    passed = True
    for segment in model.schedule.segments:
        sig, ch = segment.signal, segment.channel
        residual = validate_nondemolition(sig, ch)
        nondemolition = max(nondemolition, residual)
        if residual > STRUCTURE_TOLERANCE * max(1.0,
                                                nondemolition_scale(sig, ch)):
            passed = False
        residual = validate_commutator_preservation(sig)
        preservation = max(preservation, residual)
        scale = 2 * norm(sig.A) * norm(sig.C0) + norm(sig.J) ** 2
        # A classical signal (C0 = 0) carries no commutators to preserve.
        if norm(sig.C0) > 0 and residual > STRUCTURE_TOLERANCE * max(
                1.0, scale):
            passed = False
        joint = joint_noise_covariance(sig, ch)
        smallest = min_eigenvalue_hermitian(joint)
        joint_minimum = min(joint_minimum, smallest)
        if smallest < -STRUCTURE_TOLERANCE * norm(joint):
            passed = False
    return {"nondemolition_residual": output.json_number(nondemolition),
            "preservation_residual": output.json_number(preservation),
            "joint_noise_min_eigenvalue": output.json_number(joint_minimum),
            "pass": passed}


def cmd_validate(config):
    report = validation_report(config.model)
    return (EXIT_OK if report["pass"] else EXIT_CONSTRAINT), report


def _synthesis_summary(synth):
    return {"t_end": output.json_number(synth.t_end),
            "step": output.json_number(synth.step),
            "error_estimate": output.json_number(synth.error_estimate),
            "trace_error": output.json_number(synth.trace_error[-1]),
            "P": output.json_matrix(synth.P[-1]),
            "K": output.json_matrix(synth.K[-1]),
            "B": output.json_matrix(synth.B[-1]),
            "stationarity_residual": output.json_number(
                stationarity_residual(synth))}


def cmd_synthesize(config):
    validation = validation_report(config.model)
    if not validation["pass"]:
        return EXIT_CONSTRAINT, {"validation": validation}
    out = output.ensure_directory(config.out_dir)
    synth = integrate_schedule(config.model.schedule, config.t_end,
                               config.step)
    output.write_riccati_csv(os.path.join(out, "riccati.csv"), synth)
    report = _synthesis_summary(synth)
    if config.classical:
        classical = integrate_schedule(config.model.schedule, config.t_end,
                                       config.step, vacuum=False)
        output.write_riccati_csv(os.path.join(out, "classical_riccati.csv"),
                                 classical)
        report["classical"] = _synthesis_summary(classical)
        classical_trace = classical.trace_error[-1]
        report["quantum_classical_ratio"] = (
            output.json_number(synth.trace_error[-1] / classical_trace)
            if classical_trace > 0 else None)
    output.write_json(os.path.join(out, "synthesis.json"), report)
    return EXIT_OK, report


def z_score(empirical, error, predicted):
    """Discrepancy in standard errors, C{None} when no error is known."""
    if error is None or not np.isfinite(error):
        return None
    difference = empirical - predicted
    if error == 0:
        if abs(difference) <= 1e-12 * max(1.0, abs(predicted)):
            return 0.0
        return float(np.copysign(np.inf, difference))
    return difference / error


@defer.inlineCallbacks
def run_plan(reactor, plan, workers, interval=PROGRESS_INTERVAL):
    """Run the blocks of C{plan} on a thread pool while the progress is
    logged; fires with the assembled bundle."""
    pool = ThreadPool(minthreads=1, maxthreads=max(1, workers),
                      name="qkalman-simulate")
    progress = Progress(plan.blocks, plan.n_traj)
    reporting = progress_monitor(progress, interval, resource_reporters(),
                                 clock=reactor)

    def finished(result):
        progress.block_done(result.count)
        return result

    pool.start()
    reporting.startService()
    try:
        results = yield defer.gatherResults(
            [deferToThreadPool(reactor, pool, plan.run_block,
                               index).addCallback(finished)
             for index in range(plan.blocks)], consumeErrors=True)
    except defer.FirstError as e:
        e.subFailure.raiseException()
    finally:
        reporting.stopService()
        pool.stop()
    log.msg("Finished %d trajectories" % (plan.n_traj,),
            logLevel=logging.INFO)
    return plan.assemble(results)


@defer.inlineCallbacks
def cmd_simulate(reactor, config):
    validation = validation_report(config.model)
    if not validation["pass"]:
        return EXIT_CONSTRAINT, {"validation": validation}
    synth = integrate_schedule(config.model.schedule, config.t_end,
                               config.step)
    indices = [synth.index_of(t) for t in config.checkpoints]
    plan = BundlePlan(synth, config.dt, config.t_end, config.n_traj,
                      config.seed)
    bundle = yield run_plan(reactor, plan, config.workers)

    out = output.ensure_directory(config.out_dir)
    predicted_estimate = estimate_covariance(synth)
    rows = []
    checkpoints = []
    passed = True
    for t, index in zip(config.checkpoints, indices):
        empirical = float(bundle.residual_trace[index])
        error = float(bundle.standard_error[index])
        error = None if np.isnan(error) else error
        predicted = float(synth.trace_error[index])
        z = z_score(empirical, error, predicted)
        if z is not None and abs(z) > Z_LIMIT:
            passed = False
        rows.append((t, empirical, error, predicted, z))
        checkpoints.append({
            "t": output.json_number(t),
            "empirical_trace": output.json_number(empirical),
            "standard_error": (None if error is None else
                               output.json_number(error)),
            "riccati_trace": output.json_number(predicted),
            "z_score": None if z is None else output.json_number(z),
            "estimate_trace": output.json_number(np.real(np.trace(
                bundle.estimate_second_moment[index]))),
            "predicted_estimate_trace": output.json_number(np.real(np.trace(
                predicted_estimate[index])))})
    output.write_mc_summary_csv(os.path.join(out, "mc_summary.csv"), rows)
    if config.dump_records:
        for number, record in enumerate(bundle.records):
            output.write_record_csv(
                os.path.join(out, "record_%d.csv" % (number,)),
                bundle.dt, record)
    report = {"n_traj": config.n_traj, "seed": config.seed,
              "dt": output.json_number(config.dt),
              "checkpoints": checkpoints, "pass": passed}
    if config.perturb_gain is not None:
        perturbed_plan = BundlePlan(synth, config.dt, config.t_end,
                                    config.n_traj, config.seed,
                                    gain_scale=1.0 + config.perturb_gain,
                                    keep_records=0)
        perturbed = yield run_plan(reactor, perturbed_plan, config.workers)
        comparison = compare_bundles(bundle, perturbed)
        report["perturbation"] = {
            "epsilon": output.json_number(config.perturb_gain),
            "baseline": output.json_number(comparison.baseline),
            "perturbed": output.json_number(comparison.perturbed),
            "significance": (None if comparison.significance is None else
                             output.json_number(comparison.significance))}
    output.write_json(os.path.join(out, "mc_report.json"), report)
    return (EXIT_OK if passed else EXIT_STATISTICAL), report


def cmd_kernels_check(config, splits=20, draws=100):
    validation = validation_report(config.model)
    if not validation["pass"]:
        return EXIT_CONSTRAINT, {"validation": validation}
    synth = integrate_schedule(config.model.schedule, config.t_end,
                               config.step)
    rng = np.random.Generator(np.random.Philox(config.seed))
    worst = chapman_kolmogorov_sweep(synth, splits, rng)
    smallest = bochner_sweep(synth, draws, rng)
    report = {
        "chapman_kolmogorov": {
            "splits": splits,
            "worst_residual": output.json_number(worst),
            "pass": worst <= CHAPMAN_KOLMOGOROV_TOLERANCE},
        "bochner": {
            "draws": draws,
            "min_eigenvalue": output.json_number(smallest),
            "pass": smallest >= -BOCHNER_TOLERANCE}}
    normalization = {"unit": coherent_measure_normalization_residual(
        1.0, 6.0, 400)}
    if synth.n == 1:
        commutator = float(np.real(synth.C_comm[-1][0, 0]))
        if commutator > 0:
            normalization["filter"] = coherent_measure_normalization_residual(
                commutator, 6.0 * np.sqrt(commutator), 400)
    report["normalization"] = dict(
        (name, output.json_number(value))
        for name, value in normalization.items())
    report["normalization"]["pass"] = all(
        value <= NORMALIZATION_TOLERANCE for value in normalization.values())
    report["pass"] = all(report[name]["pass"] for name in
                         ("chapman_kolmogorov", "bochner", "normalization"))
    out = output.ensure_directory(config.out_dir)
    output.write_json(os.path.join(out, "kernels.json"), report)
    return (EXIT_OK if report["pass"] else EXIT_NUMERICAL), report


def cmd_selftest(options):
    report = selftest.run_selftest(workers=options["workers"],
                                   tamper=bool(options["tamper-gain"]))
    if options["out"]:
        out = output.ensure_directory(options["out"])
        output.write_json(os.path.join(out, "selftest.json"), report)
    return (EXIT_OK if report["pass"] else EXIT_STATISTICAL), report


def _load_config(sub_options):
    model = load_model(sub_options["model"])
    return build_run_config(sub_options, model)


@defer.inlineCallbacks
def dispatch(reactor, command, sub_options):
    """Run one subcommand; fires with C{(exit_code, report)}."""
    if command == "selftest":
        return cmd_selftest(sub_options)
    config = _load_config(sub_options)
    if command == "validate":
        return cmd_validate(config)
    if command == "synthesize":
        return cmd_synthesize(config)
    if command == "kernels-check":
        return cmd_kernels_check(config, sub_options["splits"],
                                 sub_options["draws"])
    if command == "simulate":
        result = yield cmd_simulate(reactor, config)
        return result
    raise usage.UsageError("unknown command %r" % (command,))


@defer.inlineCallbacks
def run(reactor, argv, stdout=None, stderr=None):
    """Parse C{argv}, run the subcommand and print its report; fires with
    the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    options = QKalmanOptions()
    try:
        options.parseOptions(argv)
    except usage.UsageError as e:
        stderr.write("qkalman: %s\n%s\n" % (e, options))
        return EXIT_INPUT
    if options["verbose"]:
        log.startLogging(stderr, setStdout=False)
    try:
        code, report = yield dispatch(reactor, options.subCommand,
                                      options.subOptions)
    except Exception as e:
        code = exit_code_for(e)
        if code is None:
            raise
        log.msg("qkalman %s failed: %s" % (options.subCommand, e),
                logLevel=logging.ERROR)
        report = {"error": str(e), "exit_code": code}
        if isinstance(e, PositivityLostError):
            report["time"] = output.json_number(e.time)
        if isinstance(e, ModelFileError) and e.line is not None:
            report["line"] = e.line
            report["column"] = e.column
        stderr.write("qkalman: %s\n" % (e,))
    stdout.write(output.dumps(report))
    return code


def _react_main(reactor, argv):
    d = run(reactor, argv)

    def finish(code):
        if code:
            raise SystemExit(code)
    return d.addCallback(finish)


def main(argv=None):
    if argv is None:
        argv = sys.argv[1:]
    task.react(_react_main, [argv])
