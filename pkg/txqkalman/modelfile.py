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
Model documents.

A model file is a JSON object in one of the registered formats:

  - the oscillator shorthand C{{"oscillator": {"omega", "gamma", "nu",
    "sigma0", "hbar"}}}; C{"temperature"} (with an optional C{"boltzmann"})
    may replace C{"nu"};
  - a general model with the fields C{n, m, hbar, A, J, Q, R0, C0, F, N, T,
    D}; a missing C{D} is solved from the nondemolition condition;
  - C{{"segments": [...]}}, a piecewise-constant schedule of general models,
    each with a C{"start"} time.

A complex matrix is a row-major array of C{[re, im]} pairs, either flat or as
a list of rows; plain numbers stand for real entries. Unknown fields are
rejected.

Formats are found as C{IModelFormat} plugins; the ones defined here are
always available.
"""

import json
import logging
import numbers
from dataclasses import dataclass

import numpy as np

from twisted.plugin import getPlugins
from twisted.python import log
from zope.interface import implementer

from txqkalman.iqkalman import IModelFormat
from txqkalman.model import (
    ChannelModel, ModelSchedule, OscillatorModel, PhysicalConstants, Segment,
    SignalModel, mean_occupation, oscillator_to_general, solve_nondemolition_D)


GENERAL_FIELDS = ("n", "m", "hbar", "A", "J", "Q", "R0", "C0", "F", "N", "T",
                  "D")
OSCILLATOR_FIELDS = ("omega", "gamma", "nu", "sigma0", "hbar", "temperature",
                     "boltzmann")


class ModelFileError(ValueError):
    """A model document cannot be read."""

    def __init__(self, message, line=None, column=None):
        if line is not None:
            message = "%s (line %d, column %d)" % (message, line, column)
        super(ModelFileError, self).__init__(message)
        self.line = line
        self.column = column


@dataclass(frozen=True, eq=False)
class LoadedModel(object):
    schedule: ModelSchedule
    oscillator: OscillatorModel = None
    path: str = None
    format: str = None

    @property
    def signal(self):
        return self.schedule.initial.signal

    @property
    def channel(self):
        return self.schedule.initial.channel

    @property
    def constant(self):
        return len(self.schedule.segments) == 1


def _is_real(value):
    return (isinstance(value, numbers.Real) and
            not isinstance(value, bool))


def _number(document, name, default=None, where="model"):
    value = document.get(name, default)
    if value is None:
        raise ModelFileError("%s: missing field %r" % (where, name))
    if not _is_real(value):
        raise ModelFileError("%s: field %r must be a number, got %r" %
                             (where, name, value))
    return float(value)


def _count(document, name, where="model"):
    value = document.get(name)
    if value is None:
        raise ModelFileError("%s: missing field %r" % (where, name))
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ModelFileError("%s: field %r must be a positive integer, "
                             "got %r" % (where, name, value))
    return value


def _reject_unknown(document, allowed, where):
    unknown = sorted(set(document) - set(allowed))
    if unknown:
        raise ModelFileError("%s: unknown field(s) %s" %
                             (where, ", ".join(repr(u) for u in unknown)))


def _is_entry(value):
    return _is_real(value) or (
        isinstance(value, list) and len(value) == 2 and
        all(_is_real(part) for part in value))


def _entry(value):
    if _is_real(value):
        return complex(value)
    return complex(value[0], value[1])


def parse_matrix(value, rows, cols, name):
    """Decode a complex C{rows x cols} matrix, given as a list of rows, a
    flat row-major list or, for a 1x1 matrix, a single entry."""
    if rows * cols == 1 and _is_entry(value):
        return np.array([[_entry(value)]])
    if isinstance(value, list):
        if len(value) == rows and all(
                isinstance(row, list) and len(row) == cols and
                all(_is_entry(item) for item in row) for row in value):
            return np.array([[_entry(item) for item in row]
                             for row in value], dtype=complex)
        if len(value) == rows * cols and all(_is_entry(item)
                                             for item in value):
            return np.array([_entry(item) for item in value],
                            dtype=complex).reshape(rows, cols)
    raise ModelFileError("matrix %s must be %dx%d, as rows or a flat list of "
                         "numbers and [re, im] pairs" % (name, rows, cols))


def _general_models(document, where, hbar=None):
    """Signal and channel of a general model document."""
    n = _count(document, "n", where)
    m = _count(document, "m", where)
    if hbar is None:
        hbar = _number(document, "hbar", 1.0, where)
    shapes = {"A": (n, n), "J": (n, m), "Q": (m, m), "R0": (n, n),
              "C0": (n, n), "F": (m, n), "N": (m, m), "T": (m, m),
              "D": (m, m)}
    matrices = {}
    for name, (rows, cols) in shapes.items():
        if name not in document:
            if name == "D":
                continue
            raise ModelFileError("%s: missing field %r" % (where, name))
        matrices[name] = parse_matrix(document[name], rows, cols,
                                      "%s of %s" % (name, where))
    if "D" not in matrices:
        matrices["D"] = solve_nondemolition_D(
            matrices["J"], matrices["C0"], matrices["F"])
    sig = SignalModel(A=matrices["A"], J=matrices["J"], Q=matrices["Q"],
                      R0=matrices["R0"], C0=matrices["C0"], hbar=hbar)
    ch = ChannelModel(F=matrices["F"], N=matrices["N"], T=matrices["T"],
                      D=matrices["D"])
    return sig, ch


@implementer(IModelFormat)
class OscillatorFormat(object):

    name = "oscillator"
    key = "oscillator"

    def matches(self, document):
        return self.key in document

    def build(self, document):
        _reject_unknown(document, (self.key,), "model")
        body = document[self.key]
        where = "oscillator"
        if not isinstance(body, dict):
            raise ModelFileError("oscillator must be an object")
        _reject_unknown(body, OSCILLATOR_FIELDS, where)
        hbar = _number(body, "hbar", 1.0, where)
        gamma = _number(body, "gamma", None, where)
        if "temperature" in body:
            if "nu" in body:
                raise ModelFileError("oscillator: give either 'nu' or "
                                     "'temperature'")
            constants = PhysicalConstants(
                hbar=hbar, boltzmann=_number(body, "boltzmann", 1.0, where))
            nu = mean_occupation(_number(body, "temperature", None, where),
                                 gamma, constants)
        else:
            if "boltzmann" in body:
                raise ModelFileError("oscillator: 'boltzmann' needs "
                                     "'temperature'")
            nu = _number(body, "nu", None, where)
        oscillator = OscillatorModel(
            omega=_number(body, "omega", None, where),
            gamma=gamma,
            nu=nu,
            sigma0=_number(body, "sigma0", None, where),
            hbar=hbar)
        sig, ch = oscillator_to_general(oscillator)
        return ModelSchedule.constant(sig, ch), oscillator


@implementer(IModelFormat)
class GeneralFormat(object):

    name = "general"
    key = "A"

    def matches(self, document):
        return self.key in document

    def build(self, document):
        _reject_unknown(document, GENERAL_FIELDS, "model")
        sig, ch = _general_models(document, "model")
        return ModelSchedule.constant(sig, ch), None


@implementer(IModelFormat)
class ScheduleFormat(object):

    name = "segments"
    key = "segments"

    def matches(self, document):
        return self.key in document

    def build(self, document):
        _reject_unknown(document, ("segments", "hbar"), "model")
        hbar = _number(document, "hbar", 1.0, "model")
        body = document["segments"]
        if not isinstance(body, list) or not body:
            raise ModelFileError("segments must be a non-empty array")
        segments = []
        for index, item in enumerate(body):
            where = "segment %d" % (index,)
            if not isinstance(item, dict):
                raise ModelFileError("%s must be an object" % (where,))
            _reject_unknown(item, ("start",) + GENERAL_FIELDS[:2] +
                            GENERAL_FIELDS[3:], where)
            sig, ch = _general_models(item, where, hbar)
            segments.append(Segment(_number(item, "start", None, where),
                                    sig, ch))
        return ModelSchedule(tuple(segments)), None


BUILTIN_FORMATS = (OscillatorFormat(), GeneralFormat(), ScheduleFormat())


def model_formats():
    """Built-in formats followed by plugin formats of other names."""
    formats = list(BUILTIN_FORMATS)
    names = set(f.name for f in formats)
    for plugin in getPlugins(IModelFormat):
        if plugin.name not in names:
            names.add(plugin.name)
            formats.append(plugin)
    return formats


def _reject_constant(name):
    raise ModelFileError("non-finite number %s is not allowed" % (name,))


def decode(text):
    """Parse JSON text into a model document.

    @raise ModelFileError: With the line and column of malformed JSON,
        or for C{NaN} and C{Infinity}.
    """
    try:
        document = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise ModelFileError("malformed JSON: %s" % (e.msg,), e.lineno,
                             e.colno)
    if not isinstance(document, dict):
        raise ModelFileError("a model document must be a JSON object")
    return document


def build_model(document, path=None, formats=None):
    """Build the model a decoded document describes."""
    if formats is None:
        formats = model_formats()
    for candidate in formats:
        if candidate.matches(document):
            schedule, oscillator = candidate.build(document)
            log.msg("Loaded %s model (n=%d, m=%d, %d segment(s)) from %s" %
                    (candidate.name, schedule.n, schedule.m,
                     len(schedule.segments), path or "<document>"),
                    logLevel=logging.DEBUG)
            return LoadedModel(schedule, oscillator, path, candidate.name)
    raise ModelFileError("unrecognized model document; expected one of the "
                         "fields %s" % (", ".join(
                             repr(f.key) for f in formats),))


def load_model(path):
    """Read and build the model file at C{path}.

    @raise ModelFileError: If the file cannot be read or parsed.
    @raise ModelError: If the model violates a structural constraint.
    """
    try:
        with open(path, encoding="utf-8") as stream:
            text = stream.read()
    except (IOError, OSError) as e:
        raise ModelFileError("cannot read model file %s: %s" %
                             (path, e.strerror or e))
    return build_model(decode(text), path)
