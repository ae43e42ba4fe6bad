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
Deterministic CSV and JSON artifacts.

Numbers are written with twelve significant digits and a fixed column order,
so repeated runs produce byte-identical files.
"""

import csv
import json
import math
import os

import numpy as np


NOT_AVAILABLE = "NA"


def number(value):
    """Format a real number with twelve significant digits."""
    value = float(value)
    if math.isnan(value):
        return NOT_AVAILABLE
    return "%.12g" % (value,)


def json_number(value):
    value = float(value)
    if not math.isfinite(value):
        return None
    return float(number(value))


def json_matrix(matrix):
    """Rows of C{[re, im]} pairs, the layout of model files."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=complex))
    return [[[json_number(entry.real), json_number(entry.imag)]
             for entry in row] for row in matrix]


def matrix_columns(name, rows, cols):
    return ["%s_%d_%d_%s" % (name, i, j, part)
            for i in range(rows) for j in range(cols)
            for part in ("re", "im")]


def matrix_values(matrix):
    values = []
    for entry in np.asarray(matrix, dtype=complex).ravel():
        values.append(number(entry.real))
        values.append(number(entry.imag))
    return values


def ensure_directory(path):
    if path and not os.path.isdir(path):
        os.makedirs(path)
    return path


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as stream:
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    return path


def write_json(path, document):
    with open(path, "w", encoding="utf-8") as stream:
        stream.write(dumps(document))
    return path


def dumps(document):
    return json.dumps(document, indent=2, sort_keys=True,
                      allow_nan=False) + "\n"


def write_riccati_csv(path, synth):
    """Grid, P, trace of P and K of a synthesized filter."""
    n, m = synth.n, synth.m
    header = (["t"] + matrix_columns("P", n, n) + ["trace_error"] +
              matrix_columns("K", n, m))
    rows = []
    for i, t in enumerate(synth.times):
        rows.append([number(t)] + matrix_values(synth.P[i]) +
                    [number(synth.trace_error[i])] +
                    matrix_values(synth.K[i]))
    return write_csv(path, header, rows)


MC_SUMMARY_COLUMNS = ["t", "empirical_trace", "standard_error",
                      "riccati_trace", "z_score"]


def write_mc_summary_csv(path, rows):
    """Rows of C{(t, empirical, standard_error, riccati, z)}; missing
    standard errors and z-scores are written as NA."""
    formatted = []
    for row in rows:
        formatted.append([NOT_AVAILABLE if value is None else number(value)
                          for value in row])
    return write_csv(path, MC_SUMMARY_COLUMNS, formatted)


def write_record_csv(path, dt, record):
    """Heterodyne record C{dy} of one trajectory, one row per step."""
    record = np.asarray(record, dtype=complex)
    m = record.shape[1]
    header = ["t"]
    for k in range(m):
        header.extend(["re_dy%d" % (k + 1,), "im_dy%d" % (k + 1,)])
    rows = []
    for step, increment in enumerate(record):
        row = [number((step + 1) * dt)]
        for value in increment:
            row.extend([number(value.real), number(value.imag)])
        rows.append(row)
    return write_csv(path, header, rows)
