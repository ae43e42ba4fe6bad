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
Acceptance suite.

Each criterion returns C{(passed, details)}; the report only holds
deterministic numbers, so repeated runs are byte-identical. Run times are
logged. With C{tamper} the sign of the synthesized gain is flipped wherever
the gain is used, which must make the filter criteria fail.
"""

import logging
import math
import time

import numpy as np

from twisted.python import log

from txqkalman import output
from txqkalman.kernels import bochner_sweep, chapman_kolmogorov_sweep
from txqkalman.matrix import adjoint, min_eigenvalue_hermitian, norm
from txqkalman.model import (
    ChannelModel, OscillatorModel, SignalModel, multimode_oscillator,
    oscillator_to_general, validate_commutator_preservation,
    validate_nondemolition)
from txqkalman.riccati import (
    PositivityLostError, filter_drift, integrate_dimensionless,
    integrate_riccati, scalar_riccati_closed_form)
from txqkalman.simulate import compare_bundles, simulate_bundle


SEED = 1979
DEMO = OscillatorModel(omega=1.0, gamma=1.0, nu=1.0, sigma0=3.0, hbar=1.0)


def gain_sign(tamper):
    return -1.0 if tamper else 1.0


def scalar_closed_form(tamper=False):
    """Zero-temperature oscillator against C{1/(2e^t - 1)} on [0, 5]."""
    sig, ch = oscillator_to_general(
        OscillatorModel(omega=0.0, gamma=1.0, nu=0.0, sigma0=1.0))
    synth = integrate_riccati(sig, ch, 5.0, 0.01)
    exact = 1.0 / (2.0 * np.exp(synth.times) - 1.0)
    error = float(np.max(np.abs(np.real(synth.P[:, 0, 0]) - exact)))
    at_one = float(np.real(synth.P[synth.index_of(1.0), 0, 0]))
    return error <= 1e-8, {"max_error": error, "sigma_at_1": at_one}


def stationary_filter(tamper=False):
    """A start in equilibrium stays there with zero gain."""
    nu = 0.7
    sig, ch = oscillator_to_general(
        OscillatorModel(omega=1.0, gamma=1.0, nu=nu, sigma0=nu))
    synth = integrate_riccati(sig, ch, 5.0, 0.01)
    drift = float(np.max(np.abs(synth.P[:, 0, 0] - nu)))
    gain = float(np.max(np.abs(synth.K)))
    return drift <= 1e-12 and gain <= 1e-12, {"max_drift": drift,
                                               "max_gain": gain}


def equivalence_chain(tamper=False):
    """Matrix, dimensionless and scalar Riccati equations agree, and the
    closed-loop drift takes the oscillator filter form."""
    osc = OscillatorModel(omega=1.3, gamma=0.8, nu=0.4, sigma0=2.5, hbar=1.7)
    sig, ch = oscillator_to_general(osc)
    synth = integrate_riccati(sig, ch, 4.0, 0.01)
    a = sig.A
    dimensionless = integrate_dimensionless(
        osc.sigma0, (a - adjoint(a)) / 2j, a + adjoint(a), osc.nu, 4.0, 0.01)
    scalar = np.array([scalar_riccati_closed_form(
        osc.sigma0, osc.gamma, osc.nu, t) for t in synth.times])
    p = np.real(synth.P[:, 0, 0])
    matrix_vs_dimensionless = float(np.max(np.abs(
        p - osc.hbar * np.real(dimensionless[:, 0, 0]))))
    matrix_vs_scalar = float(np.max(np.abs(p - osc.hbar * scalar)))
    drift_residual = 0.0
    for i in range(len(synth.times)):
        sigma = p[i] / osc.hbar
        expected = osc.alpha + osc.gamma * (sigma - osc.nu) / (1.0 + osc.nu)
        b = filter_drift(sig.A, gain_sign(tamper) * synth.K[i], ch.F)
        drift_residual = max(drift_residual, abs(b[0, 0] - expected))
    passed = (matrix_vs_dimensionless <= 1e-8 and matrix_vs_scalar <= 1e-8
              and drift_residual <= 1e-10)
    return passed, {"matrix_vs_dimensionless": matrix_vs_dimensionless,
                    "matrix_vs_scalar": matrix_vs_scalar,
                    "drift_residual": float(drift_residual)}


def broken_model():
    """Quantum signal whose channel has D = 0."""
    sig, ch = oscillator_to_general(DEMO)
    return sig, ChannelModel(F=ch.F, N=ch.N, T=ch.T, D=[[0.0]])


def structural_validators(tamper=False):
    """Oscillator models are exact; a channel with D = 0 is not."""
    worst = 0.0
    rng = np.random.Generator(np.random.Philox(SEED))
    for _ in range(10):
        osc = OscillatorModel(omega=float(rng.uniform(-2, 2)),
                              gamma=float(rng.uniform(0.1, 3)),
                              nu=float(rng.uniform(0, 3)),
                              sigma0=float(rng.uniform(0, 5)),
                              hbar=float(rng.uniform(0.5, 2)))
        sig, ch = oscillator_to_general(osc)
        scale = norm(sig.J) * norm(ch.D) + norm(sig.C0) * norm(ch.F)
        worst = max(worst,
                    validate_nondemolition(sig, ch) / scale,
                    validate_commutator_preservation(sig) /
                    (2 * norm(sig.A) * norm(sig.C0) + norm(sig.J) ** 2))
    sig, ch = broken_model()
    broken = validate_nondemolition(sig, ch)
    return worst <= 1e-14 and broken > 1e-10, {
        "worst_relative_residual": worst, "broken_residual": broken}


def random_model(rng, n, m):
    """Random classical model with a stable drift.

    C{Q} carries C{T+ T} so that the joint noise covariance is positive
    semidefinite whatever C{N}.
    """
    def complex_matrix(rows, cols):
        return (rng.standard_normal((rows, cols)) +
                1j * rng.standard_normal((rows, cols))) / math.sqrt(2.0)

    x = complex_matrix(n, n)
    a = x + (norm(x) + 0.5) * np.eye(n)
    y = complex_matrix(m, m)
    z = complex_matrix(m, m)
    w = complex_matrix(n, n)
    t = 0.3 * complex_matrix(m, m)
    sig = SignalModel(A=a, J=complex_matrix(n, m),
                      Q=y @ adjoint(y) + adjoint(t) @ t,
                      R0=w @ adjoint(w), C0=np.zeros((n, n)))
    ch = ChannelModel(F=complex_matrix(m, n), N=z @ adjoint(z), T=t,
                      D=np.zeros((m, m)))
    return sig, ch


def random_models(count=8, seed=SEED):
    rng = np.random.Generator(np.random.Philox(seed))
    models = []
    for index in range(count):
        n = 1 + index % 4
        m = 1 + (index // 2) % 3
        models.append(random_model(rng, n, m))
    return models


def orthogonality(tamper=False):
    """C{R = P + G_cl} on random models."""
    worst = 0.0
    for sig, ch in random_models():
        synth = integrate_riccati(sig, ch, 2.0, 0.01)
        for r, p, g in zip(synth.R, synth.P, synth.G_cl):
            worst = max(worst, norm(r - p - g) / max(1.0, norm(r)))
    return worst <= 1e-8, {"worst_relative_residual": worst}


def monte_carlo_consistency(tamper=False, n_traj=20000, workers=1,
                            bundle=None):
    """Residual trace of the demo oscillator within 3 standard errors of
    the Riccati prediction at {0.5, 1, 2, 3}."""
    sig, ch = oscillator_to_general(DEMO)
    synth = integrate_riccati(sig, ch, 3.0, 0.01)
    if bundle is None:
        bundle = simulate_bundle(sig, ch, synth, 1e-3, 3.0, n_traj, SEED,
                                 gain_scale=gain_sign(tamper),
                                 workers=workers)
    z_scores = []
    for t in (0.5, 1.0, 2.0, 3.0):
        index = synth.index_of(t)
        z_scores.append(float((bundle.residual_trace[index] -
                               synth.trace_error[index]) /
                              bundle.standard_error[index]))
    passed = all(abs(z) <= 3.0 for z in z_scores)
    return passed, {"z_scores": z_scores}


def optimality(tamper=False, n_traj=20000, workers=1, baseline=None):
    """Scaling the gain by 1.2 or 0.8 increases the time-averaged residual
    on common random numbers."""
    sig, ch = oscillator_to_general(DEMO)
    synth = integrate_riccati(sig, ch, 3.0, 0.01)
    sign = gain_sign(tamper)
    if baseline is None:
        baseline = simulate_bundle(sig, ch, synth, 1e-3, 3.0, n_traj, SEED,
                                   gain_scale=sign, workers=workers,
                                   keep_records=0)
    significances = {}
    for epsilon, required in ((0.2, 3.0), (-0.2, 2.0)):
        perturbed = simulate_bundle(sig, ch, synth, 1e-3, 3.0, n_traj, SEED,
                                    gain_scale=sign * (1.0 + epsilon),
                                    workers=workers, keep_records=0)
        comparison = compare_bundles(baseline, perturbed)
        significances[epsilon] = (comparison.significance, required)
    passed = all(value is not None and value > required
                 for value, required in significances.values())
    return passed, {"significance_%+g" % (epsilon,): value
                    for epsilon, (value, _) in significances.items()}


def kernel_filters():
    sig, ch = oscillator_to_general(DEMO)
    filters = [integrate_riccati(sig, ch, 3.0, 0.01)]
    sig, ch = multimode_oscillator([[0.5 + 1j, 0.2], [-0.2, 0.8]], nu=0.5,
                                   sigma0=2.0)
    filters.append(integrate_riccati(sig, ch, 2.0, 0.01))
    return filters


def chapman_kolmogorov(tamper=False):
    """Kernel composition over 20 random splits."""
    rng = np.random.Generator(np.random.Philox(SEED))
    worst = max(chapman_kolmogorov_sweep(synth, 20, rng)
                for synth in kernel_filters())
    return worst <= 1e-8, {"worst_residual": worst}


def bochner_positivity(tamper=False):
    """Gram matrices of 100 random characteristic functions."""
    rng = np.random.Generator(np.random.Philox(SEED))
    smallest = min(bochner_sweep(synth, 50, rng)
                   for synth in kernel_filters())
    return smallest >= -1e-10, {"min_eigenvalue": smallest}


def positivity_preservation(tamper=False):
    """The posterior correlation stays positive on every tested model."""
    models = random_models(count=12, seed=SEED + 1)
    models.append(oscillator_to_general(DEMO))
    worst = np.inf
    try:
        for sig, ch in models:
            synth = integrate_riccati(sig, ch, 3.0, 0.01)
            for p in synth.P:
                worst = min(worst, min_eigenvalue_hermitian(p) /
                            max(norm(p), 1e-300))
    except PositivityLostError as e:
        return False, {"lost_at": e.time}
    return worst >= -1e-8, {"worst_relative_eigenvalue": float(worst)}


CRITERIA = (
    (1, "scalar closed form", scalar_closed_form),
    (2, "stationary filtering", stationary_filter),
    (3, "equivalence chain", equivalence_chain),
    (4, "structural validators", structural_validators),
    (5, "orthogonality identity", orthogonality),
    (6, "Monte-Carlo consistency", monte_carlo_consistency),
    (7, "optimality", optimality),
    (8, "Chapman-Kolmogorov", chapman_kolmogorov),
    (9, "Bochner positivity", bochner_positivity),
    (10, "positivity preservation", positivity_preservation),
    )


def _details(value):
    if isinstance(value, dict):
        return dict((key, _details(item)) for key, item in value.items())
    if isinstance(value, (list, tuple)):
        return [_details(item) for item in value]
    if isinstance(value, (bool, str)) or value is None:
        return value
    return output.json_number(value)


def run_selftest(workers=1, tamper=False, criteria=CRITERIA):
    """Run the criteria and return the report."""
    results = []
    shared = {}
    for number, name, function in criteria:
        started = time.perf_counter()
        if function is monte_carlo_consistency:
            sig, ch = oscillator_to_general(DEMO)
            synth = integrate_riccati(sig, ch, 3.0, 0.01)
            shared["bundle"] = simulate_bundle(
                sig, ch, synth, 1e-3, 3.0, 20000, SEED,
                gain_scale=gain_sign(tamper), workers=workers)
            passed, details = function(tamper, bundle=shared["bundle"])
        elif function is optimality:
            passed, details = function(tamper, workers=workers,
                                       baseline=shared.get("bundle"))
        else:
            passed, details = function(tamper)
        log.msg("Criterion %d (%s): %s in %.2fs" % (
            number, name, "pass" if passed else "FAIL",
            time.perf_counter() - started), logLevel=logging.INFO)
        results.append({"id": number, "name": name, "pass": bool(passed),
                        "details": _details(details)})
    return {"criteria": results, "tampered": bool(tamper),
            "pass": all(result["pass"] for result in results)}
